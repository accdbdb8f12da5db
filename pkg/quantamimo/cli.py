"""
Command line front end, ``quantamimo <subcommand> --config FILE --out DIR``.

The experiment is described by a flat TOML file. Every run writes results.csv and
run_manifest.json into the output directory, and SVG plots unless --no-plot is
given. Progress bars and log records go to standard error.
"""
import argparse
import csv
import dataclasses
import itertools
import json
import logging
import re
import sys
import tomllib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from quantamimo import __version__, channel, constellation, experiments, plots
from quantamimo import status, utils
from quantamimo.config import ESTIMATED, SimConfig
from quantamimo.decorators import SUBCOMMANDS, subcommand
from quantamimo.exceptions import (
    ContractViolation,
    InvalidConfig,
    NonConvergence,
    ResultLocked,
    SingularGram,
)
from quantamimo.experiments import SweepResult, SweepRow, Variant
from quantamimo.rate_mc import RateEstimate

logger = logging.getLogger("quantamimo.cli")

RESULTS_CSV = "results.csv"
MANIFEST_JSON = "run_manifest.json"
PLOT_SVG = "plot.svg"

OPTIMIZE = "optimize"

CSV_COLUMNS = [
    "sweep_var",
    "sweep_value",
    "bits",
    "detector",
    "constellation",
    "rate_bpcu",
    "ci_halfwidth",
    "pilots_used",
    "seed",
    "csi",
    "channel_realizations",
    "noise_trials",
]
APPROX_COLUMNS = [
    "approx_rate_bpcu",
    "approx_ci_halfwidth",
    "approx_pilots_used",
    "approx_channel_realizations",
    "approx_noise_trials",
]
SCATTER_COLUMNS = [
    "panel",
    "scenario",
    "antennas",
    "snr_db",
    "sent_re",
    "sent_im",
    "soft_re",
    "soft_im",
]
QUANTIZER_COLUMNS = ["bits", "variance", "kind", "index", "value"]

# antennas, SNR in dB and channel scenario of the six reference scatter panels
REFERENCE_PANELS = (
    (20, 0.0, experiments.IID),
    (200, 0.0, experiments.IID),
    (200, 20.0, experiments.IID),
    (200, 20.0, experiments.CORRELATED),
    (200, 20.0, experiments.NONFADING),
    (200, 20.0, experiments.NONFADING_DITHER),
)
SCATTER_PILOTS = 20

KEY_LINE = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")


def _int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidConfig(key, "expected an integer, got {!r}".format(value))
    return value


def _float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(key, "expected a number, got {!r}".format(value))
    return float(value)


def _str(key, value):
    if not isinstance(value, str):
        raise InvalidConfig(key, "expected a string, got {!r}".format(value))
    return value


def _bool(key, value):
    if not isinstance(value, bool):
        raise InvalidConfig(key, "expected true or false, got {!r}".format(value))
    return value


def _list_of(convert):
    def _convert(key, value):
        if not isinstance(value, list) or not value:
            raise InvalidConfig(
                key, "expected a non-empty list, got {!r}".format(value)
            )
        return tuple(convert(key, item) for item in value)

    return _convert


def _one_or_list(convert):
    def _convert(key, value):
        if isinstance(value, list):
            values = _list_of(convert)(key, value)
        else:
            values = (convert(key, value),)
        return tuple(dict.fromkeys(values))

    return _convert


def _constellation(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise InvalidConfig(
            key, "expected a QAM order or name, got {!r}".format(value)
        )
    try:
        return constellation.make_qam(value).name
    except ContractViolation as e:
        raise InvalidConfig(key, str(e))


def _pilots(key, value):
    if value == OPTIMIZE:
        return None
    if isinstance(value, str):
        raise InvalidConfig(
            key, 'expected an integer or "{}", got {!r}'.format(OPTIMIZE, value)
        )
    return _int(key, value)


def _scenario(key, value):
    value = _str(key, value)
    if value not in experiments.SCENARIOS:
        raise InvalidConfig(
            key, "expected one of {}".format(", ".join(experiments.SCENARIOS))
        )
    return value


VARIANT_KEYS = {
    "bits": _one_or_list(_int),
    "detector": _one_or_list(_str),
    "constellation": _one_or_list(_constellation),
    "csi": _one_or_list(_str),
}

SIM_KEYS = {
    "antennas": _int,
    "users": _int,
    "coherence": _int,
    "snr_db": _float,
    "powers_db": _list_of(_float),
    "pilots_per_user": _pilots,
    "pilot_candidates": _list_of(_int),
    "channel_realizations": _int,
    "noise_trials": _int,
    "grid_bins": _int,
    "rate_method": _str,
    "dither": _bool,
    "seed": _int,
    "user": _int,
}

SWEEP_KEYS = {
    "snrs_db": _list_of(_float),
    "antennas_list": _list_of(_int),
    "coherence_list": _list_of(_int),
    "sirs_db": _list_of(_float),
    "sir_pilots": _int,
    "include_perfect_csi": _bool,
    "d1_m": _float,
    "spreads_m": _list_of(_float),
    "drops": _int,
    "scenario": _one_or_list(_scenario),
    "scatter_symbols": _int,
    "quantizer_bits": _list_of(_int),
    "quantizer_variance": _float,
}

GEOMETRY_KEYS = {f.name: _float for f in dataclasses.fields(channel.GeometryConfig)}

KNOWN_KEYS = {**VARIANT_KEYS, **SIM_KEYS, **SWEEP_KEYS, **GEOMETRY_KEYS}

# SimConfig fields that are spelled differently in the config file
FILE_KEYS = {"powers": "powers_db"}


@dataclass(frozen=True)
class SweepSpec:
    """Sweep axes and study parameters of the subcommands."""

    snrs_db: Tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    antennas_list: Tuple[int, ...] = (50, 100, 200, 300, 400, 500)
    coherence_list: Tuple[int, ...] = (20, 50, 100, 200, 500, 1000, 2000)
    sirs_db: Tuple[float, ...] = (0.0, -10.0, -20.0, -30.0, -40.0)
    sir_pilots: int = 10
    include_perfect_csi: bool = True
    d1_m: float = 185.0
    spreads_m: Tuple[float, ...] = (0.0, 50.0, 100.0, 150.0)
    drops: int = 1000
    scenario: Optional[Tuple[str, ...]] = None
    scatter_symbols: int = 4800
    quantizer_bits: Tuple[int, ...] = (1, 2, 3, 4)
    quantizer_variance: float = 1.0


@dataclass(frozen=True)
class ParsedConfig:
    sim: SimConfig
    geometry: channel.GeometryConfig
    sweep: SweepSpec
    variants: Tuple[Variant, ...]
    mapping: Dict = field(default_factory=dict)

    @property
    def given(self):
        return frozenset(self.mapping)


def _key_lines(text: str) -> Dict[str, int]:
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = KEY_LINE.match(line)
        if match:
            lines.setdefault(match.group(1), number)
    return lines


def parse_config(path, overrides: Optional[Dict] = None) -> ParsedConfig:
    """
    Read and validate a flat TOML experiment file.
    :param path: the config file
    :param overrides: key/value pairs replacing the file's values (profile, --seed)
    :return: the validated configuration
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        raise InvalidConfig(path.name, str(e), int(match.group(1)) if match else None)
    return config_from_mapping(data, lines=_key_lines(text), overrides=overrides)


def config_from_mapping(
    data: Dict, lines: Optional[Dict[str, int]] = None, overrides=None
) -> ParsedConfig:
    lines = lines or {}
    mapping = dict(data)
    mapping.update(overrides or {})
    values = {}
    for key, value in mapping.items():
        if isinstance(value, dict):
            raise InvalidConfig(
                key, "tables are not supported, use flat keys", lines.get(key)
            )
        if key not in KNOWN_KEYS:
            raise InvalidConfig(key, "unknown key", lines.get(key))
        try:
            values[key] = KNOWN_KEYS[key](key, value)
        except InvalidConfig as e:
            raise InvalidConfig(key, e.reason, lines.get(key))
    try:
        sim, variants = _build_sim(values)
        sweep = _build_sweep(values, sim)
        geometry = _build_geometry(values)
    except InvalidConfig as e:
        key = FILE_KEYS.get(e.key, e.key)
        raise InvalidConfig(key, e.reason, lines.get(key))
    return ParsedConfig(
        sim=sim, geometry=geometry, sweep=sweep, variants=variants, mapping=mapping
    )


def _build_sim(values: Dict) -> Tuple[SimConfig, Tuple[Variant, ...]]:
    defaults = {f.name: f.default for f in dataclasses.fields(SimConfig)}
    order = ("constellation", "detector", "csi", "bits")
    choices = [values.get(key, (defaults[key],)) for key in order]
    variants = tuple(
        Variant(bits=bits, detector=detector, constellation=name, csi=csi)
        for name, detector, csi, bits in itertools.product(*choices)
    )
    kwargs = {key: values[key] for key in SIM_KEYS if key in values}
    if "powers_db" in kwargs:
        kwargs["powers"] = tuple(
            float(p) for p in channel.db_to_linear(kwargs.pop("powers_db"))
        )
    first = variants[0]
    sim = SimConfig(
        bits=first.bits,
        detector=first.detector,
        constellation=first.constellation,
        csi=first.csi,
        **kwargs,
    )
    for variant in variants[1:]:
        variant.apply(sim)
    return sim, variants


def _build_sweep(values: Dict, sim: SimConfig) -> SweepSpec:
    sweep = SweepSpec(**{key: values[key] for key in SWEEP_KEYS if key in values})
    if min(sweep.antennas_list) < sim.users:
        raise InvalidConfig(
            "antennas_list", "every antenna count must be at least users"
        )
    if min(sweep.coherence_list) < 1:
        raise InvalidConfig("coherence_list", "coherence intervals must be positive")
    if min(sweep.spreads_m) < 0:
        raise InvalidConfig("spreads_m", "distance spreads must be non-negative")
    if sweep.drops < 1:
        raise InvalidConfig("drops", "at least one drop is required")
    if sweep.scatter_symbols < 1:
        raise InvalidConfig("scatter_symbols", "at least one symbol is required")
    if min(sweep.quantizer_bits) < 1:
        raise InvalidConfig("quantizer_bits", "resolutions must be at least 1 bit")
    if sweep.quantizer_variance <= 0:
        raise InvalidConfig("quantizer_variance", "must be positive")
    return sweep


def _build_geometry(values: Dict) -> channel.GeometryConfig:
    try:
        return channel.GeometryConfig(
            **{key: values[key] for key in GEOMETRY_KEYS if key in values}
        )
    except ContractViolation as e:
        raise InvalidConfig("min_distance_m", str(e))


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # shortest repr that parses back to the same float, always with "."
        return repr(float(value))
    return str(value)


def write_rows(path, header: List[str], records) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_format_cell(value) for value in r] for r in records)
    return path


def emit_csv(result: SweepResult, path) -> Path:
    """
    One row per sweep value and variant. The approximation columns are added when
    any row carries an approximate rate.
    """
    with_approx = any(row.approx is not None for row in result.rows)
    header = CSV_COLUMNS + (APPROX_COLUMNS if with_approx else [])
    records = []
    for row in result.rows:
        record = [
            result.sweep_var,
            row.sweep_value,
            row.variant.bits,
            row.variant.detector,
            row.variant.constellation,
            row.estimate.rate,
            row.estimate.ci_halfwidth,
            row.estimate.pilots_used,
            row.seed,
            row.variant.csi,
            row.estimate.trials[0],
            row.estimate.trials[1],
        ]
        if with_approx:
            if row.approx is None:
                record += [""] * len(APPROX_COLUMNS)
            else:
                record += [
                    row.approx.rate,
                    row.approx.ci_halfwidth,
                    row.approx.pilots_used,
                    row.approx.trials[0],
                    row.approx.trials[1],
                ]
        records.append(record)
    return write_rows(path, header, records)


def _read_approx(record: Dict) -> Optional[RateEstimate]:
    if not record.get("approx_rate_bpcu"):
        return None
    return RateEstimate(
        rate=float(record["approx_rate_bpcu"]),
        ci_halfwidth=float(record["approx_ci_halfwidth"]),
        pilots_used=int(record.get("approx_pilots_used") or 0),
        trials=(
            int(record.get("approx_channel_realizations") or 0),
            int(record.get("approx_noise_trials") or 0),
        ),
    )


def read_csv(path) -> SweepResult:
    """Parse a file written by ``emit_csv`` back into a SweepResult."""
    rows = []
    values = []
    sweep_var = ""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for record in csv.DictReader(handle):
            sweep_var = record["sweep_var"]
            value = float(record["sweep_value"])
            if value not in values:
                values.append(value)
            estimate = RateEstimate(
                rate=float(record["rate_bpcu"]),
                ci_halfwidth=float(record["ci_halfwidth"]),
                pilots_used=int(record["pilots_used"]),
                trials=(
                    int(record.get("channel_realizations") or 0),
                    int(record.get("noise_trials") or 0),
                ),
            )
            variant = Variant(
                bits=int(record["bits"]),
                detector=record["detector"],
                constellation=record["constellation"],
                csi=record.get("csi") or ESTIMATED,
            )
            rows.append(
                SweepRow(
                    sweep_value=value,
                    variant=variant,
                    estimate=estimate,
                    seed=int(record["seed"]),
                    approx=_read_approx(record),
                )
            )
    return SweepResult(sweep_var=sweep_var, values=tuple(values), rows=rows)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """
    Everything needed to repeat a run: the effective config mapping (profile and
    --seed already applied), the subcommand and the seed.
    """

    subcommand: str
    config: Dict
    seed: int
    profile: str = "full"
    started_at: str = ""
    finished_at: str = ""
    point_wall_times: List[float] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    version: str = __version__

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidConfig(path.name, e.msg, e.lineno)
        if not isinstance(data, dict):
            raise InvalidConfig(path.name, "a manifest is a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise InvalidConfig(key, "unknown manifest field")
        for key in ("subcommand", "config", "seed"):
            if key not in data:
                raise InvalidConfig(key, "missing from the manifest")
        return cls(**data)


@dataclass
class RunContext:
    """Output directory and shared machinery handed to every subcommand handler."""

    out_dir: Path
    plot: bool = True
    progress: bool = False
    pool: Optional[experiments.WorkerPool] = None
    cache: Optional[experiments.ResultCache] = None
    outputs: List[str] = field(default_factory=list)
    point_wall_times: List[float] = field(default_factory=list)

    def path(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(str(path))
        return path

    def sweep_options(self) -> Dict:
        return {"pool": self.pool, "cache": self.cache, "progress": self.progress}

    def finish_sweep(self, result: SweepResult, title=None) -> SweepResult:
        emit_csv(result, self.path(RESULTS_CSV))
        self.point_wall_times.extend(result.metadata.get("point_wall_times", []))
        if self.plot:
            plots.plot_sweep(result, self.path(PLOT_SVG), title=title)
        return result


@subcommand("sweep-snr")
def sweep_snr(parsed: ParsedConfig, context: RunContext):
    result = experiments.sweep_snr(
        parsed.sim, parsed.sweep.snrs_db, parsed.variants, **context.sweep_options()
    )
    return context.finish_sweep(result)


@subcommand("sweep-n")
def sweep_antennas(parsed: ParsedConfig, context: RunContext):
    result = experiments.sweep_antennas(
        parsed.sim,
        parsed.sweep.antennas_list,
        parsed.variants,
        **context.sweep_options(),
    )
    return context.finish_sweep(result)


@subcommand("sweep-t")
def sweep_coherence(parsed: ParsedConfig, context: RunContext):
    result = experiments.sweep_coherence(
        parsed.sim,
        parsed.sweep.coherence_list,
        parsed.variants,
        include_perfect=parsed.sweep.include_perfect_csi,
        **context.sweep_options(),
    )
    return context.finish_sweep(result)


@subcommand("sweep-sir")
def sweep_sir(parsed: ParsedConfig, context: RunContext):
    result = experiments.sweep_sir(
        parsed.sim,
        parsed.sweep.sirs_db,
        parsed.variants,
        total_pilots=parsed.sweep.sir_pilots,
        **context.sweep_options(),
    )
    return context.finish_sweep(result)


@subcommand("drops")
def drops(parsed: ParsedConfig, context: RunContext):
    result = experiments.study_distance_spread(
        parsed.geometry,
        parsed.sim,
        parsed.sweep.d1_m,
        parsed.sweep.spreads_m,
        parsed.sweep.drops,
        parsed.variants,
        **context.sweep_options(),
    )
    title = "10%-worst rate, intended user at {:g} m".format(parsed.sweep.d1_m)
    return context.finish_sweep(result, title=title)


def scatter_panels(parsed: ParsedConfig) -> List[Tuple[int, int, float, str]]:
    """Numbered (panel, antennas, snr_db, scenario) tuples to render."""
    if parsed.sweep.scenario is None:
        panels = REFERENCE_PANELS
    else:
        panels = [
            (parsed.sim.antennas, parsed.sim.snr_db, scenario)
            for scenario in parsed.sweep.scenario
        ]
    return [(number,) + tuple(panel) for number, panel in enumerate(panels, start=1)]


def _scatter_config(parsed: ParsedConfig, number, antennas, snr_db) -> SimConfig:
    pilots = parsed.sim.pilots_per_user
    if "pilots_per_user" not in parsed.given or pilots is None:
        pilots = SCATTER_PILOTS
    return parsed.sim.replace(
        users=1,
        user=0,
        powers=None,
        antennas=antennas,
        snr_db=snr_db,
        pilots_per_user=pilots,
        stream_path=parsed.sim.stream_path + (number,),
    )


@subcommand
def scatter(parsed: ParsedConfig, context: RunContext):
    records = []
    for number, antennas, snr_db, scenario in scatter_panels(parsed):
        config = _scatter_config(parsed, number, antennas, snr_db)
        pairs = experiments.scatter_demo(
            config, scenario, parsed.sweep.scatter_symbols
        )
        points = config.alphabet().as_array()
        logger.info(
            "Scatter panel %d (%s, N=%d, %g dB): centroid accuracy %.3f, "
            "ring spread %.3f",
            number,
            scenario,
            antennas,
            snr_db,
            experiments.nearest_centroid_accuracy(pairs, points),
            experiments.ring_spread(pairs),
            extra={"panel": number, "scenario": scenario},
        )
        records.extend(
            [number, scenario, antennas, snr_db, x.real, x.imag, s.real, s.imag]
            for x, s in pairs
        )
        if context.plot:
            name = "scatter_{}_{}.svg".format(number, scenario.replace("+", "_"))
            title = "{}, N = {}, {:g} dB".format(scenario, antennas, snr_db)
            plots.plot_scatter(pairs, context.path(name), title=title)
    write_rows(context.path(RESULTS_CSV), SCATTER_COLUMNS, records)


@subcommand("quantizer-table")
def quantizer_table(parsed: ParsedConfig, context: RunContext):
    rows = experiments.quantizer_table(
        parsed.sweep.quantizer_bits, parsed.sweep.quantizer_variance
    )
    records = []
    for row in rows:
        records.append([row.bits, row.variance, "distortion", 0, row.distortion])
        records.extend(
            [row.bits, row.variance, "threshold", i, t]
            for i, t in enumerate(row.thresholds)
        )
        records.extend(
            [row.bits, row.variance, "label", i, label]
            for i, label in enumerate(row.labels)
        )
    write_rows(context.path(RESULTS_CSV), QUANTIZER_COLUMNS, records)
    if context.plot:
        plots.plot_quantizer_table(rows, context.path(PLOT_SVG))


def _fail(cause, code: int) -> int:
    message = " ".join(str(cause).split())
    logger.debug("Run failed with status %d", code, exc_info=True)
    print("quantamimo: error: {}".format(message), file=sys.stderr)
    return code


def _io_cause(e: OSError) -> str:
    if e.filename:
        return "{}: {}".format(e.filename, e.strerror or e)
    return str(e)


def run(
    name: str,
    config_path=None,
    out_dir=".",
    seed: Optional[int] = None,
    profile: str = "full",
    plot: bool = True,
    manifest_path=None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> int:
    """
    Run one subcommand and write its outputs into ``out_dir``.
    :return: the process exit status, see quantamimo.status
    """
    try:
        return _run(
            name,
            config_path,
            out_dir,
            seed,
            profile,
            plot,
            manifest_path,
            workers,
            progress,
        )
    except InvalidConfig as e:
        return _fail(e, status.EXIT_INVALID_CONFIG)
    except ImproperlyConfigured as e:
        return _fail(e, status.EXIT_INVALID_CONFIG)
    except ContractViolation as e:
        return _fail(e, status.EXIT_CONTRACT_VIOLATION)
    except (SingularGram, NonConvergence) as e:
        return _fail(e, status.EXIT_NUMERICAL_FAILURE)
    except OSError as e:
        return _fail(_io_cause(e), status.EXIT_IO_FAILURE)
    except ResultLocked as e:
        return _fail(e, status.EXIT_FAILURE)
    except Exception as e:
        logger.exception("Unexpected failure in subcommand %s", name)
        cause = "internal error: {}: {}".format(type(e).__name__, e)
        return _fail(cause, status.EXIT_INTERNAL_ERROR)


def _run(
    name, config_path, out_dir, seed, profile, plot, manifest_path, workers, progress
):
    if name not in SUBCOMMANDS:
        return _fail(
            'unknown subcommand "{}"; expected one of {}'.format(
                name, ", ".join(sorted(SUBCOMMANDS))
            ),
            status.EXIT_USAGE,
        )
    if (config_path is None) == (manifest_path is None):
        return _fail(
            "exactly one of --config and --manifest is required", status.EXIT_USAGE
        )

    overrides = {}
    if manifest_path is not None:
        recorded = RunManifest.read(manifest_path)
        if recorded.subcommand != name:
            raise InvalidConfig(
                "subcommand", "the manifest records {}".format(recorded.subcommand)
            )
        profile = recorded.profile
    else:
        profiles = utils.get_profiles()
        if profile not in profiles:
            return _fail(
                'unknown profile "{}"; expected one of {}'.format(
                    profile, ", ".join(sorted(profiles))
                ),
                status.EXIT_USAGE,
            )
        overrides.update(profiles[profile])
    if seed is not None:
        overrides["seed"] = seed

    if manifest_path is not None:
        parsed = config_from_mapping(recorded.config, overrides=overrides)
    else:
        parsed = parse_config(config_path, overrides=overrides)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        subcommand=name,
        config=parsed.mapping,
        seed=parsed.sim.seed,
        profile=profile,
        started_at=_now(),
    )
    handler = SUBCOMMANDS[name]
    logger.info(
        "Running %s into %s",
        name,
        out,
        extra={"subcommand": name, "seed": parsed.sim.seed, "profile": profile},
    )
    with experiments.WorkerPool(workers) as pool:
        context = RunContext(
            out_dir=out,
            plot=plot and handler.subcommand_plot,
            progress=progress,
            pool=pool,
            cache=experiments.ResultCache(),
        )
        handler(parsed, context)
    manifest.finished_at = _now()
    manifest.point_wall_times = context.point_wall_times
    manifest.outputs = context.outputs + [str(out / MANIFEST_JSON)]
    manifest.write(out / MANIFEST_JSON)
    return status.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantamimo",
        description="Achievable rates of quantized massive MIMO uplinks.",
    )
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="flat TOML experiment file")
    source.add_argument(
        "--manifest", type=Path, help="re-run from a recorded run_manifest.json"
    )
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument(
        "--profile", default="full", choices=sorted(utils.get_profiles())
    )
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--no-plot", action="store_true", help="skip SVG output")
    parser.add_argument(
        "--no-progress", action="store_true", help="hide the progress bar"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def configure_logging(verbose: bool = False):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    )
    package_logger = logging.getLogger("quantamimo")
    package_logger.handlers[:] = [handler]
    package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def main(argv=None) -> int:
    utils.configure_settings()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(
        args.subcommand,
        config_path=args.config,
        out_dir=args.out,
        seed=args.seed,
        profile=args.profile,
        plot=not args.no_plot,
        manifest_path=args.manifest,
        workers=args.workers,
        progress=not args.no_progress,
    )


if __name__ == "__main__":
    sys.exit(main())
