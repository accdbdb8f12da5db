from dataclasses import dataclass
from typing import Tuple

import numpy as np

from quantamimo.exceptions import ContractViolation, UnsupportedConstellation

CONSTELLATION_NAMES = {"qpsk": 4, "16qam": 16, "64qam": 64}


@dataclass(frozen=True)
class Constellation:
    """
    Square QAM alphabet with unit average symbol energy. Symbols are equiprobable
    wherever a constellation is used for rate evaluation.
    """

    order: int
    points: Tuple[complex, ...]

    @property
    def name(self):
        for name, order in CONSTELLATION_NAMES.items():
            if order == self.order:
                return name
        return "{}qam".format(self.order)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=complex)

    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.as_array()) ** 2))


def make_qam(order) -> Constellation:
    """
    Build the M-QAM alphabet with per-dimension levels {+-1, +-3, ...} scaled to unit
    average energy. ``order`` may be 4, 16, 64 or one of "qpsk", "16qam", "64qam".
    """
    if isinstance(order, str):
        if order.lower() not in CONSTELLATION_NAMES:
            raise UnsupportedConstellation(order)
        order = CONSTELLATION_NAMES[order.lower()]
    if order not in CONSTELLATION_NAMES.values():
        raise UnsupportedConstellation(order)

    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    # average energy per dimension of the odd integer levels is (M - 1) / 3
    scale = 1.0 / np.sqrt(2.0 * (order - 1) / 3.0)
    grid = (levels[:, None] + 1j * levels[None, :]).ravel() * scale
    return Constellation(order=order, points=tuple(complex(p) for p in grid))


def scale_symbol(point, power: float):
    """Scale a unit-energy symbol (or array of symbols) to average energy ``power``."""
    if power < 0:
        raise ContractViolation(
            "Transmit power must be non-negative, got {}.".format(power)
        )
    return point * np.sqrt(power)
