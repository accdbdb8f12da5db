"""
Rayleigh block fading, the rank-one demonstration channels and the single-cell
geometry used to map user distances to receive SNRs.

Large-scale gains are carried as per-user receive SNRs ``powers`` (linear), never
folded into ``H``; the transmitter scales user k's unit-energy symbols by
sqrt(powers[k]).
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from quantamimo import numerics
from quantamimo.exceptions import ContractViolation

logger = logging.getLogger("quantamimo.channel")

CORRELATED = "correlated"
NONFADING = "nonfading"


@dataclass(frozen=True)
class ChannelBlock:
    H: np.ndarray
    powers: Tuple[float, ...]
    coherence: int

    def __post_init__(self):
        if any(p < 0 for p in self.powers):
            raise ContractViolation("Per-user powers must be non-negative.")
        if self.H.shape[1] != len(self.powers):
            raise ContractViolation("One power per user column of H is required.")

    @property
    def antennas(self) -> int:
        return self.H.shape[0]

    @property
    def users(self) -> int:
        return self.H.shape[1]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.powers, dtype=float))


@dataclass(frozen=True)
class GeometryConfig:
    """Single-cell layout and link budget of the reference deployment."""

    cell_radius_m: float = 335.0
    min_distance_m: float = 35.0
    pathloss_offset_db: float = 35.0
    pathloss_slope_db_per_decade: float = 35.0
    tx_power_dbm: float = 8.5
    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -174.2
    noise_figure_db: float = 5.0

    def __post_init__(self):
        if not self.min_distance_m < self.cell_radius_m:
            raise ContractViolation("min_distance_m must be below cell_radius_m.")

    @property
    def noise_power_dbm(self) -> float:
        return (
            self.noise_psd_dbm_hz
            + 10.0 * np.log10(self.bandwidth_hz)
            + self.noise_figure_db
        )


def draw_block(stream, N: int, K: int, powers: Sequence[float], T: int) -> ChannelBlock:
    if not N >= K >= 1:
        raise ContractViolation("Need N >= K >= 1, got N={}, K={}.".format(N, K))
    H = numerics.sample_cgauss(stream, (N, K), 1.0)
    return ChannelBlock(H=H, powers=tuple(float(p) for p in powers), coherence=T)


def draw_degenerate(stream, N: int, kind: str, power: float = 1.0, T: int = 1):
    """
    Single-user rank-one channels: ``correlated`` repeats one CN(0, 1) coefficient on
    every antenna, ``nonfading`` is the all-ones vector.
    """
    if N < 1:
        raise ContractViolation("Need at least one antenna.")
    if kind == CORRELATED:
        h = numerics.sample_cgauss(stream, 1, 1.0)[0]
        H = np.full((N, 1), h, dtype=complex)
    elif kind == NONFADING:
        H = np.ones((N, 1), dtype=complex)
    else:
        raise ContractViolation('Unknown degenerate channel kind "{}".'.format(kind))
    return ChannelBlock(H=H, powers=(float(power),), coherence=T)


def snr_from_distance(geom: GeometryConfig, d) -> float:
    """Receive SNR in dB of a user ``d`` meters from the base station."""
    d = np.asarray(d, dtype=float)
    if np.any(d < geom.min_distance_m):
        raise ContractViolation(
            "Distance below the minimum of {} m.".format(geom.min_distance_m)
        )
    pathloss = geom.pathloss_offset_db + geom.pathloss_slope_db_per_decade * np.log10(d)
    snr = geom.tx_power_dbm - pathloss - geom.noise_power_dbm
    return float(snr) if snr.ndim == 0 else snr


def annulus_bounds(geom: GeometryConfig, d1: float, spread: float):
    if spread < 0:
        raise ContractViolation("Distance spread must be non-negative.")
    inner = max(d1 - spread, geom.min_distance_m)
    outer = min(d1 + spread, geom.cell_radius_m)
    if inner > outer:
        raise ContractViolation(
            "Empty annulus after clipping: [{}, {}] m.".format(inner, outer)
        )
    return inner, outer


def drop_interferers(
    stream, geom: GeometryConfig, d1: float, spread: float, count: int
):
    """
    Distances of ``count`` users dropped uniformly over the area of the annulus
    [d1 - spread, d1 + spread], clipped to [min_distance_m, cell_radius_m].
    """
    inner, outer = annulus_bounds(geom, d1, spread)
    if inner == outer:
        return np.full(count, inner, dtype=float)
    u = numerics.as_generator(stream).uniform(size=count)
    return np.sqrt(inner**2 + u * (outer**2 - inner**2))


def annulus_cdf(geom: GeometryConfig, d1: float, spread: float, r):
    inner, outer = annulus_bounds(geom, d1, spread)
    r = np.clip(np.asarray(r, dtype=float), inner, outer)
    return (r**2 - inner**2) / (outer**2 - inner**2)


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)
