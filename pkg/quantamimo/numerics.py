"""
Random-number streams, the standard normal CDF and the small complex linear algebra
shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``: the channel ``H`` is
N x K, an input block ``X`` is K x T and a quantized output block ``R`` is N x T.
"""
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy import linalg, special

from quantamimo import utils
from quantamimo.exceptions import ContractViolation, SingularGram

ComplexMatrix = np.ndarray


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible random stream identified by ``(master_seed, path)``.

    The path usually reads (experiment, sweep point, channel realization, symbol,
    trial). Two streams with the same seed and path produce the same samples, and
    streams with different paths are independent.
    """

    master_seed: int
    path: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        if self.master_seed < 0 or any(p < 0 for p in self.path):
            raise ContractViolation("Seeds and stream paths must be non-negative.")

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + tuple(indices))

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))


StreamLike = Union[RngStream, np.random.Generator]


def as_generator(stream: StreamLike) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


def std_normal_cdf(x):
    """Phi(x); accepts scalars or arrays, including +/- infinity."""
    result = special.ndtr(x)
    if np.ndim(result) == 0:
        return float(result)
    return result


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def sample_cgauss(stream: StreamLike, n, variance: float) -> np.ndarray:
    """
    Draw i.i.d. circularly-symmetric complex Gaussian samples of the given variance.
    ``n`` may be a count or a shape tuple.
    """
    if variance < 0:
        raise ContractViolation(
            "Variance must be non-negative, got {}.".format(variance)
        )
    shape = (n,) if np.isscalar(n) else tuple(n)
    rng = as_generator(stream)
    draws = rng.standard_normal(shape + (2,))
    scale = np.sqrt(variance / 2.0)
    return scale * (draws[..., 0] + 1j * draws[..., 1])


def _gram_factor(M: ComplexMatrix):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ContractViolation("Expected a two-dimensional matrix.")
    rows, cols = M.shape
    if rows < cols:
        raise ContractViolation(
            "Left pseudo-inverse needs rows >= cols, got {}x{}.".format(rows, cols)
        )
    gram = M.conj().T @ M
    with np.errstate(all="ignore"):
        condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > utils.get_condition_bound():
        raise SingularGram(condition=float(condition))
    try:
        factor = linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError:
        raise SingularGram(condition=float(condition))
    return M, factor


def left_pseudo_inverse(M: ComplexMatrix) -> np.ndarray:
    """Return M (M^H M)^{-1}, N x K."""
    M, factor = _gram_factor(M)
    inverse = linalg.cho_solve(factor, np.eye(M.shape[1], dtype=complex))
    return M @ inverse


def left_pseudo_inverse_column(M: ComplexMatrix, k: int) -> np.ndarray:
    """Return column k of M (M^H M)^{-1} via a Cholesky solve of the Gram system."""
    M, factor = _gram_factor(M)
    if not 0 <= k < M.shape[1]:
        raise ContractViolation("Column index {} out of range.".format(k))
    unit = np.zeros(M.shape[1], dtype=complex)
    unit[k] = 1.0
    return M @ linalg.cho_solve(factor, unit)
