"""
Sweeps over SNR, antenna count, coherence interval, SIR and interferer distance
spread, the single-user scatter demonstrations and the quantizer table.

Every sweep point is an independent job. Jobs run on a ``WorkerPool`` and finished
points are kept in a ``ResultCache`` keyed by the encoded point configuration, so a
re-run of the same point returns the stored estimate.
"""
import contextlib
import dataclasses
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from tqdm import tqdm

from quantamimo import channel, link, quantizers, rate_approx, rate_mc, utils
from quantamimo.config import ESTIMATED, PERFECT, SimConfig
from quantamimo.exceptions import ContractViolation
from quantamimo.rate_mc import RateEstimate

logger = logging.getLogger("quantamimo.experiments")

IID = "iid"
CORRELATED = channel.CORRELATED
NONFADING = channel.NONFADING
NONFADING_DITHER = "nonfading+dither"
SCENARIOS = (IID, CORRELATED, NONFADING, NONFADING_DITHER)

# stream tag of the interferer drops
DROP_STREAM = 7

# pilot slots of the SIR study, shared by all users
SIR_TOTAL_PILOTS = 10

APPROX_DETECTORS = ("mrc", "zf")


@dataclass(frozen=True)
class Variant:
    """The per-curve part of a configuration."""

    bits: int
    detector: str
    constellation: str
    csi: str = ESTIMATED

    @classmethod
    def of(cls, config: SimConfig) -> "Variant":
        return cls(config.bits, config.detector, config.constellation, config.csi)

    def apply(self, config: SimConfig, **changes) -> SimConfig:
        return config.replace(
            bits=self.bits,
            detector=self.detector,
            constellation=self.constellation,
            csi=self.csi,
            **changes,
        )


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    variant: Variant
    estimate: RateEstimate
    seed: int
    approx: Optional[RateEstimate] = None


@dataclass
class SweepResult:
    sweep_var: str
    values: Tuple[float, ...]
    rows: List[SweepRow]
    metadata: Dict = field(default_factory=dict)

    def variants(self) -> List[Variant]:
        seen = []
        for row in self.rows:
            if row.variant not in seen:
                seen.append(row.variant)
        return seen

    def row(self, value, variant: Variant) -> SweepRow:
        for row in self.rows:
            if row.sweep_value == value and row.variant == variant:
                return row
        raise KeyError((value, variant))

    def rates(self, variant: Variant) -> List[float]:
        return [self.row(value, variant).estimate.rate for value in self.values]


@dataclass(frozen=True)
class PointJob:
    sweep_value: float
    variant: Variant
    config: SimConfig

    def coordinates(self) -> dict:
        return {
            "sweep_value": self.sweep_value,
            "variant": dataclasses.asdict(self.variant),
        }


@dataclass(frozen=True)
class PointOutcome:
    estimate: RateEstimate
    approx: Optional[RateEstimate]
    wall_time: float


def _approx_applies(config: SimConfig) -> bool:
    return (
        config.bits == 1
        and config.detector in APPROX_DETECTORS
        and config.csi == ESTIMATED
    )


def evaluate_point(job: PointJob) -> PointOutcome:
    """
    Rate of the configured user at one sweep point. ``rate_method = "approx"`` uses
    the high-SNR approximation where it applies (one-bit, estimated CSI) and the
    Monte-Carlo estimate elsewhere; ``"both"`` adds the approximation next to the
    Monte-Carlo estimate wherever it applies.
    """
    start = time.perf_counter()
    config = job.config
    approx = None
    if config.rate_method == "approx" and _approx_applies(config):
        estimate = rate_approx.approx_rate(config)
    else:
        if config.rate_method == "approx":
            logger.info(
                "Approximation does not cover bits=%d csi=%s, using Monte-Carlo",
                config.bits,
                config.csi,
                extra={"sweep_value": job.sweep_value},
            )
        estimate = rate_mc.evaluate_rate(config)
        if config.rate_method == "both" and _approx_applies(config):
            approx = rate_approx.approx_rate(config)
    return PointOutcome(
        estimate=estimate, approx=approx, wall_time=time.perf_counter() - start
    )


def _init_worker(snapshot):
    utils.configure_settings(snapshot)
    settings.QUANTAMIMO = snapshot


class WorkerPool:
    """
    Runs independent jobs in order-preserving fashion, on a process pool when more
    than one worker is configured. Workers see the parent's QUANTAMIMO settings.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = utils.get_worker_count() if workers is None else max(1, workers)
        self._executor = None

    def __enter__(self):
        if self.workers > 1:
            snapshot = dict(utils.get_quantamimo_settings())
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers, initializer=_init_worker, initargs=(snapshot,)
            )
        return self

    def __exit__(self, *exc):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def imap(self, fn, items: Sequence):
        if self._executor is None:
            return map(fn, items)
        return self._executor.map(fn, items)


class ResultCache:
    """
    Finished sweep points keyed by the encoded point configuration. Storage reads
    and writes happen under the configured lock.
    """

    def __init__(self, cache_name: Optional[str] = None):
        self.storage = utils.get_storage_class()()
        self.encoder = utils.get_encoder_class()()
        self.storage_lock = utils.get_lock_class()()
        self.cache_name = cache_name or utils.get_storage_cache_name()
        self.enabled = utils.get_storage_enable()
        self.storage.validate_storage(self.cache_name)

    def key(self, job: PointJob) -> str:
        coordinates = dict(job.coordinates(), settings=utils.get_computation_settings())
        return self.encoder.encode_key(job.config, coordinates)

    def _locked(self, operation):
        if not utils.get_lock_enable():
            return operation()
        with self.storage_lock.held():
            return operation()

    def retrieve(self, encoded_key: str):
        if not self.enabled:
            return False, None
        return self._locked(
            lambda: self.storage.retrieve_data(self.cache_name, encoded_key)
        )

    def store(self, encoded_key: str, outcome: PointOutcome):
        if self.enabled:
            self._locked(
                lambda: self.storage.store_data(self.cache_name, encoded_key, outcome)
            )


def run_jobs(
    sweep_var: str,
    values: Iterable[float],
    base: SimConfig,
    jobs: Sequence[PointJob],
    pool: Optional[WorkerPool] = None,
    cache: Optional[ResultCache] = None,
    progress: bool = False,
) -> Tuple[List[PointOutcome], Dict]:
    """
    Evaluate ``jobs``, reusing cached outcomes, and return the outcomes in job order
    with the run metadata.
    """
    start = time.perf_counter()
    cache = cache or ResultCache()
    keys = [cache.key(job) for job in jobs]
    outcomes = {}
    pending = []
    queued = set()
    for key, job in zip(keys, jobs):
        hit, outcome = cache.retrieve(key)
        if hit:
            logger.debug(
                "Cache hit for %s=%g",
                sweep_var,
                job.sweep_value,
                extra={"sweep_var": sweep_var, "sweep_value": job.sweep_value},
            )
            outcomes[key] = outcome
        elif key not in queued:
            queued.add(key)
            pending.append((key, job))

    with WorkerPool() if pool is None else contextlib.nullcontext(pool) as active:
        results = active.imap(evaluate_point, [job for _, job in pending])
        for (key, job), outcome in tqdm(
            zip(pending, results),
            total=len(pending),
            desc=sweep_var,
            file=sys.stderr,
            disable=not progress,
        ):
            cache.store(key, outcome)
            outcomes[key] = outcome
            logger.info(
                "Point %s=%g bits=%d %s %s done in %.1fs: rate=%.4f",
                sweep_var,
                job.sweep_value,
                job.variant.bits,
                job.variant.detector,
                job.variant.constellation,
                outcome.wall_time,
                outcome.estimate.rate,
                extra={"sweep_var": sweep_var, "sweep_value": job.sweep_value},
            )
    values = tuple(float(v) for v in values)
    metadata = {
        "seed": base.seed,
        "config_hash": cache.encoder.encode_key(
            base, {"sweep_var": sweep_var, "values": list(values)}
        ),
        "wall_time": time.perf_counter() - start,
        "point_wall_times": [outcomes[key].wall_time for key in keys],
    }
    return [outcomes[key] for key in keys], metadata


def _sweep(sweep_var, values, base, jobs, pool, cache, progress) -> SweepResult:
    outcomes, metadata = run_jobs(sweep_var, values, base, jobs, pool, cache, progress)
    rows = [
        SweepRow(
            sweep_value=float(job.sweep_value),
            variant=job.variant,
            estimate=outcome.estimate,
            seed=job.config.seed,
            approx=outcome.approx,
        )
        for job, outcome in zip(jobs, outcomes)
    ]
    return SweepResult(
        sweep_var=sweep_var,
        values=tuple(float(v) for v in values),
        rows=rows,
        metadata=metadata,
    )


def _variants(base: SimConfig, variants) -> List[Variant]:
    return list(variants) if variants else [Variant.of(base)]


def sweep_snr(
    base: SimConfig, snrs_db, variants=None, pool=None, cache=None, progress=False
) -> SweepResult:
    jobs = [
        PointJob(snr, v, v.apply(base, snr_db=float(snr), powers=None))
        for snr in snrs_db
        for v in _variants(base, variants)
    ]
    return _sweep("snr_db", snrs_db, base, jobs, pool, cache, progress)


def sweep_antennas(
    base: SimConfig, Ns, variants=None, pool=None, cache=None, progress=False
) -> SweepResult:
    if any(N < base.users for N in Ns):
        raise ContractViolation(
            "Every antenna count must be at least K={}.".format(base.users)
        )
    jobs = [
        PointJob(N, v, v.apply(base, antennas=int(N)))
        for N in Ns
        for v in _variants(base, variants)
    ]
    return _sweep("antennas", Ns, base, jobs, pool, cache, progress)


def with_perfect_csi(variants: Sequence[Variant]) -> List[Variant]:
    """``variants`` followed by the perfect-CSI twin of each estimated-CSI variant."""
    result = list(variants)
    for v in variants:
        twin = dataclasses.replace(v, csi=PERFECT)
        if twin not in result:
            result.append(twin)
    return result


def _coherence_config(base: SimConfig, v: Variant, T: int) -> SimConfig:
    if v.csi == PERFECT:
        return v.apply(base, coherence=int(T))
    # a fixed pilot count becomes the only candidate, so P >= T yields rate 0
    candidates = base.pilot_candidates
    if base.pilots_per_user is not None:
        candidates = (base.pilots_per_user,)
    return v.apply(
        base, coherence=int(T), pilots_per_user=None, pilot_candidates=candidates
    )


def sweep_coherence(
    base: SimConfig,
    Ts,
    variants=None,
    include_perfect=True,
    pool=None,
    cache=None,
    progress=False,
) -> SweepResult:
    """
    Rate per coherence interval T. With estimated CSI and no pilot count below T the
    rate is zero. ``include_perfect`` adds the perfect-CSI reference curves.
    """
    curves = _variants(base, variants)
    if include_perfect:
        curves = with_perfect_csi(curves)
    jobs = [PointJob(T, v, _coherence_config(base, v, T)) for T in Ts for v in curves]
    return _sweep("coherence", Ts, base, jobs, pool, cache, progress)


def sir_powers(base: SimConfig, sir_db: float) -> Tuple[float, ...]:
    """User 0 at ``snr_db``, user 1 at rho_1 / xi, any further user at ``snr_db``."""
    if base.users < 2:
        raise ContractViolation("The SIR study needs at least two users.")
    rho1 = 10.0 ** (base.snr_db / 10.0)
    powers = [rho1] * base.users
    powers[1] = rho1 / 10.0 ** (sir_db / 10.0)
    return tuple(powers)


def sir_pilots_per_user(base: SimConfig, total_pilots: int) -> int:
    """Pilots per user for a fixed total pilot budget, at least one each."""
    if total_pilots < 1:
        raise ContractViolation("The SIR study needs at least one pilot.")
    return max(1, total_pilots // base.users)


def sweep_sir(
    base: SimConfig,
    sirs_db,
    variants=None,
    pool=None,
    cache=None,
    progress=False,
    total_pilots: int = SIR_TOTAL_PILOTS,
) -> SweepResult:
    """
    Rate of user 0 per SIR with user 1 as the interferer. Every point trains with
    ``total_pilots`` pilot slots split round-robin over the users.
    """
    pilots = sir_pilots_per_user(base, total_pilots)
    jobs = [
        PointJob(
            sir,
            v,
            v.apply(
                base,
                powers=sir_powers(base, sir),
                user=0,
                pilots_per_user=pilots,
            ),
        )
        for sir in sirs_db
        for v in _variants(base, variants)
    ]
    return _sweep("sir_db", sirs_db, base, jobs, pool, cache, progress)


def nearest_rank_percentile(values: Sequence[float], q: float) -> float:
    """The ceil(q n)-th smallest value, q in (0, 1]."""
    values = sorted(values)
    if not values:
        raise ContractViolation("Percentile of an empty list.")
    if not 0 < q <= 1:
        raise ContractViolation("Percentile rank must be in (0, 1], got {}.".format(q))
    return float(values[max(math.ceil(q * len(values)), 1) - 1])


def drop_powers(
    geom: channel.GeometryConfig, base: SimConfig, d1: float, spread: float, drop: int
) -> Tuple[float, ...]:
    """
    Receive SNRs of the intended user at ``d1`` and of K - 1 interferers dropped in
    the annulus. Drop ``drop`` uses the same draw for every spread.
    """
    rho1 = float(channel.db_to_linear(channel.snr_from_distance(geom, d1)))
    stream = base.root_stream().child(DROP_STREAM, drop)
    distances = channel.drop_interferers(stream, geom, d1, spread, base.users - 1)
    interferers = channel.db_to_linear(channel.snr_from_distance(geom, distances))
    return (rho1,) + tuple(float(p) for p in np.atleast_1d(interferers))


def study_distance_spread(
    geom: channel.GeometryConfig,
    base: SimConfig,
    d1: float,
    spreads,
    drops: int,
    variants=None,
    pool=None,
    cache=None,
    progress=False,
) -> SweepResult:
    """
    10%-worst rate of the user at ``d1`` across ``drops`` interferer placements per
    distance spread. Per-user receive powers are known to the receiver.
    """
    if drops < 1:
        raise ContractViolation("At least one drop is required.")
    curves = _variants(base, variants)
    jobs = []
    for spread in spreads:
        for drop in range(drops):
            powers = drop_powers(geom, base, d1, spread, drop)
            for v in curves:
                config = v.apply(
                    base, powers=powers, user=0, stream_path=base.stream_path + (drop,)
                )
                jobs.append(PointJob(spread, v, config))
    outcomes, metadata = run_jobs(
        "spread_m", spreads, base, jobs, pool, cache, progress
    )

    per_point = {}
    for job, outcome in zip(jobs, outcomes):
        key = (job.sweep_value, job.variant)
        per_point.setdefault(key, []).append(outcome.estimate)
    rows = []
    for spread in spreads:
        for v in curves:
            estimates = per_point[(spread, v)]
            worst = nearest_rank_percentile([e.rate for e in estimates], 0.1)
            chosen = next(e for e in estimates if e.rate == worst)
            rows.append(
                SweepRow(
                    sweep_value=float(spread),
                    variant=v,
                    estimate=chosen,
                    seed=base.seed,
                )
            )
    metadata.update({"d1_m": float(d1), "drops": drops})
    return SweepResult(
        sweep_var="spread_m",
        values=tuple(float(s) for s in spreads),
        rows=rows,
        metadata=metadata,
    )


def scatter_demo(config: SimConfig, scenario: str, symbols: int):
    """
    Single-user MRC soft outputs for uniformly drawn symbols. Returns a list of
    ``(input symbol, soft estimate)`` pairs, the input at unit energy.
    """
    if config.users != 1:
        raise ContractViolation("The scatter demonstration is single-user (K = 1).")
    if scenario not in SCENARIOS:
        raise ContractViolation(
            'Unknown scenario "{}"; expected one of {}.'.format(
                scenario, ", ".join(SCENARIOS)
            )
        )
    if symbols < 1:
        raise ContractViolation("At least one symbol is required.")
    stream = config.root_stream()
    power = config.user_powers[0]
    if scenario == IID:
        block = channel.draw_block(stream.child(0), config.antennas, 1, (power,), 1)
    else:
        kind = CORRELATED if scenario == CORRELATED else NONFADING
        block = channel.draw_degenerate(stream.child(0), config.antennas, kind, power)

    dither_rho = None
    if scenario == NONFADING_DITHER or config.dither:
        dither_rho = rate_mc.dither_level(config.replace(dither=True))
    quantizer = quantizers.design_quantizer(config.bits, config.receive_variance)
    pilots = config.pilot_count or 20
    if config.csi == PERFECT:
        estimate = link.perfect_estimate(block.H)
    else:
        schedule = link.build_pilots(1, pilots, (power,))
        R_pilot = link.receive(
            stream.child(1), block.H, schedule.matrix(), quantizer, dither_rho
        )
        estimate = link.ls_estimate(R_pilot, schedule)
    receive_filter = link.build_filter(estimate, "mrc")

    rng = stream.child(2).generator()
    points = config.alphabet().as_array()
    sent = points[rng.integers(points.size, size=symbols)]
    X = np.sqrt(power) * sent[None, :]
    R = link.receive(rng, block.H, X, quantizer, dither_rho)
    soft = link.soft_estimate(receive_filter, R, 0)
    return [(complex(x), complex(s)) for x, s in zip(sent, soft)]


def _symbol_index(pairs, points):
    sent = np.array([p[0] for p in pairs], dtype=complex)
    return np.argmin(np.abs(sent[:, None] - points[None, :]), axis=1)


def nearest_centroid_accuracy(pairs, points) -> float:
    """
    Fraction of soft estimates whose nearest class centroid (mean output per input
    symbol) belongs to the symbol actually sent.
    """
    if not pairs:
        raise ContractViolation("No scatter points to classify.")
    points = np.asarray(points, dtype=complex)
    labels = _symbol_index(pairs, points)
    soft = np.array([p[1] for p in pairs], dtype=complex)
    present = np.unique(labels)
    centroids = np.array([soft[labels == m].mean() for m in present])
    nearest = present[np.argmin(np.abs(soft[:, None] - centroids[None, :]), axis=1)]
    return float(np.mean(nearest == labels))


def ring_spread(pairs) -> float:
    """
    Relative spread of the mean output magnitude across the amplitude rings of the
    input constellation, (max - min) / mean.
    """
    if not pairs:
        raise ContractViolation("No scatter points to measure.")
    rings = np.round(np.abs([p[0] for p in pairs]), 9)
    magnitude = np.abs([p[1] for p in pairs])
    means = np.array([magnitude[rings == r].mean() for r in np.unique(rings)])
    return float((means.max() - means.min()) / means.mean())


@dataclass(frozen=True)
class QuantizerRow:
    bits: int
    variance: float
    thresholds: Tuple[float, ...]
    labels: Tuple[float, ...]
    distortion: float


def quantizer_table(
    bits_list: Sequence[int], variance: float = 1.0
) -> List[QuantizerRow]:
    """Lloyd-Max designs for a N(0, variance) rail with their mean-squared error."""
    rows = []
    for b in bits_list:
        spec = quantizers.lloyd_max(int(b), variance)
        rows.append(
            QuantizerRow(
                bits=int(b),
                variance=float(variance),
                thresholds=tuple(spec.interior_thresholds),
                labels=spec.labels,
                distortion=quantizers.gaussian_distortion(spec, variance),
            )
        )
    return rows
