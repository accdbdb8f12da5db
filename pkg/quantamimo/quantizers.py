import abc
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import special

from quantamimo import numerics, utils
from quantamimo.exceptions import ContractViolation, NonConvergence

logger = logging.getLogger("quantamimo.quantizers")


class Quantizer(abc.ABC):
    """
    A scalar quantizer applied independently to the in-phase and quadrature rail of
    every sample.
    """

    bits: int

    @abc.abstractmethod
    def quantize(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_infinite_precision(self) -> bool:
        return False


class InfinitePrecisionQuantizer(Quantizer):
    """Pass-through used for the infinite-precision (no quantization) receiver."""

    bits = 0

    def quantize(self, y: np.ndarray) -> np.ndarray:
        return np.array(y, dtype=complex, copy=True)

    @property
    def is_infinite_precision(self) -> bool:
        return True

    def __eq__(self, other):
        return isinstance(other, InfinitePrecisionQuantizer)

    def __hash__(self):
        return hash(InfinitePrecisionQuantizer)

    def __repr__(self):
        return "InfinitePrecisionQuantizer()"


@dataclass(frozen=True, eq=True)
class QuantizerSpec(Quantizer):
    """
    b-bit quantizer with 2^b + 1 thresholds (the outer two infinite) and 2^b labels.

    A rail value v is mapped to label q_i when tau_i <= v < tau_{i+1}; a value sitting
    exactly on a threshold goes to the upper cell, so the one-bit quantizer maps 0 to
    +1 as sgn(0) = +1 requires.
    """

    bits: int
    thresholds: Tuple[float, ...]
    labels: Tuple[float, ...]

    def __post_init__(self):
        levels = 2**self.bits
        if self.bits < 1:
            raise ContractViolation("Quantizer resolution must be at least one bit.")
        if len(self.labels) != levels or len(self.thresholds) != levels + 1:
            raise ContractViolation(
                "A {}-bit quantizer needs {} labels and {} thresholds.".format(
                    self.bits, levels, levels + 1
                )
            )
        tau = np.asarray(self.thresholds, dtype=float)
        q = np.asarray(self.labels, dtype=float)
        if tau[0] != -np.inf or tau[-1] != np.inf:
            raise ContractViolation("Outer thresholds must be -inf and +inf.")
        if np.any(np.diff(tau) <= 0):
            raise ContractViolation("Thresholds must be strictly increasing.")
        if np.any(q <= tau[:-1]) or np.any(q >= tau[1:]):
            raise ContractViolation("Every label must lie inside its own cell.")

    @property
    def interior_thresholds(self) -> np.ndarray:
        return np.asarray(self.thresholds[1:-1], dtype=float)

    def quantize_rail(self, values: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.interior_thresholds, values, side="right")
        return np.asarray(self.labels, dtype=float)[index]

    def quantize(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        return self.quantize_rail(y.real) + 1j * self.quantize_rail(y.imag)


def one_bit() -> QuantizerSpec:
    return QuantizerSpec(bits=1, thresholds=(-np.inf, 0.0, np.inf), labels=(-1.0, 1.0))


def quantize(spec: Quantizer, y: np.ndarray) -> np.ndarray:
    return spec.quantize(y)


def _cell_mass(a, c):
    # evaluate in the upper tail by symmetry to keep precision for far cells
    upper = a > 0
    return np.where(
        upper, special.ndtr(-a) - special.ndtr(-c), special.ndtr(c) - special.ndtr(a)
    )


def _pdf_times(x):
    """x * phi(x) with the limits at +-inf taken as zero."""
    with np.errstate(invalid="ignore"):
        out = x * numerics.std_normal_pdf(x)
    return np.where(np.isfinite(x), out, 0.0)


def gaussian_centroids(thresholds, sigma: float) -> np.ndarray:
    """
    Conditional means of a N(0, sigma^2) variable over the cells (a, c], computed as
    sigma * (phi(a/sigma) - phi(c/sigma)) / (Phi(c/sigma) - Phi(a/sigma)).
    """
    tau = np.asarray(thresholds, dtype=float) / sigma
    a, c = tau[:-1], tau[1:]
    mass = _cell_mass(a, c)
    return sigma * (numerics.std_normal_pdf(a) - numerics.std_normal_pdf(c)) / mass


def gaussian_distortion(spec: QuantizerSpec, variance: float) -> float:
    """Mean-squared error of ``spec`` on one rail of a N(0, variance) source."""
    sigma = np.sqrt(variance)
    tau = np.asarray(spec.thresholds, dtype=float) / sigma
    q = np.asarray(spec.labels, dtype=float) / sigma
    a, c = tau[:-1], tau[1:]
    mass = _cell_mass(a, c)
    first = numerics.std_normal_pdf(a) - numerics.std_normal_pdf(c)
    second = mass + _pdf_times(a) - _pdf_times(c)
    return float(variance * np.sum(second - 2.0 * q * first + q**2 * mass))


def _midpoints(labels: np.ndarray) -> np.ndarray:
    return np.concatenate(([-np.inf], 0.5 * (labels[:-1] + labels[1:]), [np.inf]))


def lloyd_steps(b: int, variance: float):
    """
    Yield ``(spec, movement)`` after every Lloyd iteration for a N(0, variance) rail,
    starting from labels at the Gaussian quantiles (i + 0.5) / 2^b.
    """
    sigma = np.sqrt(variance)
    levels = 2**b
    labels = sigma * special.ndtri((np.arange(levels) + 0.5) / levels)
    while True:
        updated = gaussian_centroids(_midpoints(labels), sigma)
        movement = float(np.max(np.abs(updated - labels)))
        labels = updated
        spec = QuantizerSpec(
            bits=b,
            thresholds=tuple(float(t) for t in _midpoints(labels)),
            labels=tuple(float(q) for q in labels),
        )
        yield spec, movement


def lloyd_max(b: int, variance: float, tol: float = None, max_iter: int = None):
    """
    Design the minimum mean-squared-error b-bit quantizer for a zero-mean Gaussian
    rail of the given variance. The iteration stops once the largest label movement
    falls below ``tol``.
    """
    if tol is None:
        tol = utils.get_lloyd_max_tolerance()
    if max_iter is None:
        max_iter = utils.get_lloyd_max_max_iter()
    if not 1 <= b <= 8:
        raise ContractViolation(
            "Lloyd-Max resolution must be in [1, 8], got {}.".format(b)
        )
    if variance <= 0 or tol <= 0:
        raise ContractViolation("Lloyd-Max needs a positive variance and tolerance.")

    movement = np.inf
    steps = lloyd_steps(b, variance)
    for iteration in range(1, max_iter + 1):
        spec, movement = next(steps)
        if movement < tol:
            logger.debug(
                "Lloyd-Max converged: bits=%d variance=%g iterations=%d",
                b,
                variance,
                iteration,
                extra={"bits": b, "iterations": iteration},
            )
            return spec

    raise NonConvergence(movement=movement, iterations=max_iter)


def design_quantizer(bits: int, receive_variance: float) -> Quantizer:
    """
    Quantizer for an operating point whose per-antenna complex received variance is
    ``receive_variance`` (K rho + 1 for equal powers). Each rail carries half of it.
    ``bits = 0`` selects infinite precision.
    """
    if bits < 0:
        raise ContractViolation("bits must be >= 0, got {}.".format(bits))
    if bits == 0:
        return InfinitePrecisionQuantizer()
    if bits == 1:
        return one_bit()
    return lloyd_max(bits, receive_variance / 2.0)


def add_dither(stream, y: np.ndarray, rho: float) -> np.ndarray:
    """
    Add CN(0, (rho - 1) I) dither to ``y``. For rho < 1 the dither is disabled and
    ``y`` is returned unchanged.
    """
    y = np.asarray(y, dtype=complex)
    if rho < 1:
        logger.warning(
            "Dither disabled: rho=%g is below 1", rho, extra={"dither_disabled": True}
        )
        return y
    return y + numerics.sample_cgauss(stream, y.shape, rho - 1.0)
