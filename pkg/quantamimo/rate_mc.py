"""
Monte-Carlo estimate of the per-user achievable rate

    R_k = (T - P) / T * I(x_k; x_hat_k | H_hat)

where the conditional distribution of the soft estimate is binned on a rectangular
grid in the complex plane, one grid per channel realization.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from quantamimo import channel, link, quantizers, utils
from quantamimo.config import PERFECT, SimConfig
from quantamimo.exceptions import ContractViolation

logger = logging.getLogger("quantamimo.rate_mc")


@dataclass(frozen=True)
class GridSpec:
    bins_per_dim: int
    re_bounds: Tuple[float, float]
    im_bounds: Tuple[float, float]

    def __post_init__(self):
        if self.bins_per_dim < 2:
            raise ContractViolation("A grid needs at least 2 bins per rail.")
        for lo, hi in (self.re_bounds, self.im_bounds):
            if not hi > lo:
                raise ContractViolation("Grid box must have max > min on each rail.")

    @classmethod
    def from_samples(cls, soft: np.ndarray, bins: Optional[int] = None) -> "GridSpec":
        """
        Bounding box of the observed soft estimates, widened on each side by the
        GRID.WIDEN fraction of its span. A rail with zero span is widened by
        GRID.EPSILON instead.
        """
        if bins is None:
            bins = utils.get_grid_bins()
        soft = np.asarray(soft, dtype=complex)
        if soft.size == 0:
            raise ContractViolation("Cannot build a grid from an empty sample list.")
        bounds = []
        for rail in (soft.real, soft.imag):
            lo, hi = float(np.min(rail)), float(np.max(rail))
            if hi > lo:
                margin = utils.get_grid_widen() * (hi - lo)
            else:
                margin = utils.get_grid_epsilon()
                logger.warning("Degenerate grid rail at %g widened", lo)
            bounds.append((lo - margin, hi + margin))
        return cls(bins_per_dim=bins, re_bounds=bounds[0], im_bounds=bounds[1])

    def _rail_index(self, values, bounds):
        lo, hi = bounds
        index = np.floor((values - lo) / (hi - lo) * self.bins_per_dim).astype(int)
        return np.clip(index, 0, self.bins_per_dim - 1)

    def cell_index(self, soft: np.ndarray) -> np.ndarray:
        soft = np.asarray(soft, dtype=complex)
        re = self._rail_index(soft.real, self.re_bounds)
        im = self._rail_index(soft.imag, self.im_bounds)
        return re * self.bins_per_dim + im

    @property
    def cells(self) -> int:
        return self.bins_per_dim**2


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    ci_halfwidth: float
    pilots_used: int
    trials: Tuple[int, int]


def zero_estimate(pilots: int, trials: Tuple[int, int] = (0, 0)) -> RateEstimate:
    """Estimate reported when no data slot is left after training."""
    return RateEstimate(rate=0.0, ci_halfwidth=0.0, pilots_used=pilots, trials=trials)


def mutual_info_grid(symbol_indices, soft, M: int, grid: GridSpec = None) -> float:
    """
    Plug-in mutual information in bits between a uniform input over ``M`` symbols and
    the grid cell of its soft estimate. ``symbol_indices[i]`` is the input that
    produced ``soft[i]``. Without ``grid`` the box is fitted to the samples.
    """
    symbol_indices = np.asarray(symbol_indices, dtype=int).ravel()
    soft = np.asarray(soft, dtype=complex).ravel()
    if symbol_indices.size == 0:
        raise ContractViolation("Mutual information needs a non-empty sample list.")
    if symbol_indices.size != soft.size:
        raise ContractViolation("Every soft estimate needs its input symbol index.")
    if symbol_indices.min() < 0 or symbol_indices.max() >= M:
        raise ContractViolation("Symbol indices must lie in [0, {}).".format(M))
    per_symbol = np.bincount(symbol_indices, minlength=M)
    if np.any(per_symbol != per_symbol[0]):
        raise ContractViolation("Every input symbol needs the same number of samples.")

    if grid is None:
        grid = GridSpec.from_samples(soft)
    joint = np.bincount(
        symbol_indices * grid.cells + grid.cell_index(soft), minlength=M * grid.cells
    ).reshape(M, grid.cells)
    conditional = joint / per_symbol[0]
    marginal = conditional.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(
            conditional > 0, conditional * np.log2(conditional / marginal), 0.0
        )
    return max(float(terms.sum()) / M, 0.0)


def summarize(values: Iterable[float], pilots: int, config: SimConfig) -> RateEstimate:
    """
    Average per-realization mutual information, apply the (T - P) / T training loss
    and report a 95% half-width across realizations.
    """
    values = np.asarray(list(values), dtype=float)
    T = config.coherence
    factor = (T - pilots) / T
    ceiling = np.log2(config.alphabet().order) * factor
    rate = float(np.clip(np.mean(values) * factor, 0.0, ceiling))
    if values.size > 1:
        spread = float(np.std(values, ddof=1)) / np.sqrt(values.size)
    else:
        spread = 0.0
    return RateEstimate(
        rate=rate,
        ci_halfwidth=1.96 * spread * factor,
        pilots_used=pilots,
        trials=(config.channel_realizations, config.noise_trials),
    )


def dither_level(config: SimConfig) -> Optional[float]:
    if not config.dither:
        return None
    rho = float(np.mean(config.user_powers))
    if rho < 1:
        logger.warning(
            "Dither disabled: rho=%g is below 1", rho, extra={"dither_disabled": True}
        )
        return None
    return rho


def realization_soft_estimates(
    config: SimConfig, k: int, pilots: int, r: int, quantizer=None, dither_rho=None
):
    """
    Simulate channel realization ``r``: draw the block, train on ``pilots`` quantized
    pilot slots (unless CSI is perfect), build the receive filter and collect
    ``noise_trials`` soft estimates of user k per input symbol. Interferers send
    symbols drawn uniformly from the same constellation.

    Returns ``(symbol_indices, soft)``. The random stream depends on the seed and
    ``r`` only, so every pilot count sees the same channel.
    """
    if quantizer is None:
        quantizer = quantizers.design_quantizer(config.bits, config.receive_variance)
    stream = config.root_stream().child(r)
    K = config.users
    powers = config.user_powers
    points = config.alphabet().as_array()
    M = points.size
    trials = config.noise_trials

    block = channel.draw_block(
        stream.child(0), config.antennas, K, powers, config.coherence
    )
    if config.csi == PERFECT:
        estimate = link.perfect_estimate(block.H)
    else:
        schedule = link.build_pilots(K, pilots, powers)
        R_pilot = link.receive(
            stream.child(1), block.H, schedule.matrix(), quantizer, dither_rho
        )
        estimate = link.ls_estimate(R_pilot, schedule)
    receive_filter = link.build_filter(estimate, config.detector)

    amplitudes = block.amplitudes[:, None]
    soft = np.empty((M, trials), dtype=complex)
    for m in range(M):
        rng = stream.child(2, m).generator()
        X = points[rng.integers(M, size=(K, trials))]
        X[k, :] = points[m]
        R = link.receive(rng, block.H, amplitudes * X, quantizer, dither_rho)
        soft[m] = link.soft_estimate(receive_filter, R, k)
    return np.repeat(np.arange(M), trials), soft.ravel()


def _pilots_for(config: SimConfig, pilots: Optional[int]) -> int:
    if config.csi == PERFECT:
        return 0
    P = config.pilot_count if pilots is None else pilots
    if P is None:
        raise ContractViolation(
            "The pilot count is to be optimized; pass it explicitly or use "
            "evaluate_rate."
        )
    if P > config.coherence:
        raise ContractViolation(
            "P = {} pilots exceed the coherence interval T = {}.".format(
                P, config.coherence
            )
        )
    return P


def _check_user(config: SimConfig, k: Optional[int]) -> int:
    k = config.user if k is None else k
    if not 0 <= k < config.users:
        raise ContractViolation("User index {} out of range.".format(k))
    return k


def estimate_rate(
    config: SimConfig, k: Optional[int] = None, pilots: Optional[int] = None
) -> RateEstimate:
    """
    Monte-Carlo achievable rate of user ``k`` (default ``config.user``) with ``pilots``
    total pilot slots (default the configured count, 0 with perfect CSI).
    """
    k = _check_user(config, k)
    P = _pilots_for(config, pilots)
    if P == config.coherence:
        return zero_estimate(P, (config.channel_realizations, config.noise_trials))

    quantizer = quantizers.design_quantizer(config.bits, config.receive_variance)
    dither_rho = dither_level(config)
    M = config.alphabet().order
    values = []
    for r in range(config.channel_realizations):
        indices, soft = realization_soft_estimates(
            config, k, P, r, quantizer, dither_rho
        )
        grid = GridSpec.from_samples(soft, bins=config.grid_bins)
        values.append(mutual_info_grid(indices, soft, M, grid))
        logger.debug(
            "Realization %d of %d: I=%.4f bits",
            r + 1,
            config.channel_realizations,
            values[-1],
            extra={"realization": r, "pilots": P, "user": k},
        )
    return summarize(values, P, config)


def optimize_pilots(config: SimConfig, candidates, k: Optional[int] = None):
    """
    Return ``(P, estimate)`` for the total pilot count in ``candidates`` with the
    highest estimated rate. All candidates share the seed, ties go to the smaller P.
    """
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ContractViolation("optimize_pilots needs at least one candidate.")
    K, T = config.users, config.coherence
    for P in candidates:
        if P % K or not K <= P < T:
            raise ContractViolation(
                "Candidate P={} must be a multiple of K={} in [K, T={}).".format(
                    P, K, T
                )
            )

    best = None
    for P in candidates:
        estimate = estimate_rate(config, k, pilots=P)
        logger.debug(
            "Pilot candidate P=%d: rate=%.4f",
            P,
            estimate.rate,
            extra={"pilots": P, "rate": estimate.rate},
        )
        if best is None or estimate.rate > best[1].rate:
            best = (P, estimate)
    return best


def pilot_candidates(config: SimConfig):
    """Total pilot counts to search: per-user candidates times K, below T."""
    per_user = config.pilot_candidates or utils.get_pilot_candidates()
    return [c * config.users for c in per_user if c * config.users < config.coherence]


def evaluate_rate(config: SimConfig, k: Optional[int] = None) -> RateEstimate:
    """
    Rate of user ``k`` with the pilot count fixed by the config or optimized over the
    candidate list. With estimated CSI and no candidate below T the rate is zero.
    """
    if not config.optimize_pilots:
        return estimate_rate(config, k)
    candidates = pilot_candidates(config)
    if not candidates:
        per_user = config.pilot_candidates or utils.get_pilot_candidates()
        return zero_estimate(
            min(per_user) * config.users,
            (config.channel_realizations, config.noise_trials),
        )
    return optimize_pilots(config, candidates, k)[1]


def sum_rate(config: SimConfig) -> float:
    """Lower bound on the sum rate, the sum of the per-user achievable rates."""
    return float(sum(evaluate_rate(config, k).rate for k in range(config.users)))
