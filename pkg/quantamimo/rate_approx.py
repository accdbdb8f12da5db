"""
High-SNR approximation of the one-bit achievable rate.

Given the channel and the sign estimate H_hat = sgn(Re H) + j sgn(Im H), the soft
estimate [x_hat_R, x_hat_I] of user k is treated as Gaussian conditioned on the input
symbol, so its distribution given H_hat is an equal-weight Gaussian mixture over the
constellation and

    R_k ~ (T - K) / T * (h(mixture) - E[1/2 log2((2 pi e)^2 det Sigma)]).

Each antenna's rails contribute quadrant-aligned sign variables
c^{R,R} = sgn(h^R) r^R, c^{R,I} = sgn(h^I) r^I, c^{I,I} = sgn(h^R) r^I and
c^{I,R} = sgn(h^I) r^R, whose probabilities of being +1 follow from the zeta
statistics once the interference is approximated as Gaussian.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from quantamimo import channel, link, numerics, quantizers, utils
from quantamimo.config import SimConfig
from quantamimo.exceptions import ContractViolation
from quantamimo.numerics import RngStream, std_normal_cdf
from quantamimo.rate_mc import RateEstimate, summarize, zero_estimate

logger = logging.getLogger("quantamimo.rate_approx")

# samples per density evaluation batch
BATCH = 8192


@dataclass(frozen=True, eq=False)
class QuadrantStats:
    zeta_1rr: np.ndarray
    zeta_2ri: np.ndarray
    zeta_1ir: np.ndarray
    zeta_2ir: np.ndarray

    @property
    def antennas(self) -> int:
        return self.zeta_1rr.size

    @property
    def p_rr(self) -> np.ndarray:
        return std_normal_cdf(self.zeta_1rr)

    @property
    def p_ri(self) -> np.ndarray:
        return std_normal_cdf(self.zeta_2ri)

    @property
    def p_ii(self) -> np.ndarray:
        return std_normal_cdf(self.zeta_1ir)

    @property
    def p_ir(self) -> np.ndarray:
        return std_normal_cdf(-self.zeta_2ir)


@dataclass(frozen=True, eq=False)
class MomentStats:
    """Conditional mean and covariance of [x_hat_R, x_hat_I]."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or abs(cov[0, 1] - cov[1, 0]) > 1e-12:
            raise ContractViolation("Covariance must be a symmetric 2 x 2 matrix.")


@dataclass(frozen=True)
class EntropyEstimate:
    bits: float
    stderr: float


def _as_columns(H) -> np.ndarray:
    """A single channel vector is read as the only user column."""
    H = np.asarray(H, dtype=complex)
    return H[:, None] if H.ndim == 1 else H


def quadrant_stats(H, powers: Sequence[float], k: int, x: complex) -> QuadrantStats:
    """
    Zeta statistics of user k's sign variables on every antenna for the unit-energy
    symbol ``x``. Interference from the other users plus the unit noise is treated
    as Gaussian with variance 1 + sum_{j != k} rho_j |h_{n,j}|^2, exact for K = 1.
    """
    H = _as_columns(H)
    powers = np.asarray(powers, dtype=float)
    if H.shape[1] != powers.size:
        raise ContractViolation("One power per user column of H is required.")
    gains = np.abs(H) ** 2 * powers
    interference = gains.sum(axis=1) - gains[:, k]
    scale = np.sqrt(2.0 * powers[k] / (1.0 + interference))

    h = H[:, k]
    hr, hi = h.real, h.imag
    sr, si = link.sgn(hr), link.sgn(hi)
    xr, xi = complex(x).real, complex(x).imag
    return QuadrantStats(
        zeta_1rr=scale * (np.abs(hr) * xr - hi * xi / sr),
        zeta_2ri=scale * (np.abs(hi) * xr + hr * xi / si),
        zeta_1ir=scale * (np.abs(hr) * xi + hi * xr / sr),
        zeta_2ir=scale * (np.abs(hi) * xi - hr * xr / si),
    )


def _linear_mean(stats: QuadrantStats, alpha, beta) -> np.ndarray:
    """
    Mean of x_hat = a^H r when a^R_n = alpha_n sgn(h^R_n), a^I_n = beta_n sgn(h^I_n).
    """
    real = np.sum(alpha * (2 * stats.p_rr - 1) + beta * (2 * stats.p_ri - 1))
    imag = np.sum(alpha * (2 * stats.p_ii - 1) - beta * (2 * stats.p_ir - 1))
    return np.array([real, imag])


def mrc_moments(stats: QuadrantStats, N: int) -> MomentStats:
    """
    Closed-form moments of the MRC output with the sign estimate, whose filter is
    a = H_hat / (2N).
    """
    if stats.antennas != N:
        raise ContractViolation(
            "Statistics cover {} antennas, expected {}.".format(stats.antennas, N)
        )
    p_rr, p_ri, p_ii, p_ir = stats.p_rr, stats.p_ri, stats.p_ii, stats.p_ir
    mean = _linear_mean(stats, 1.0 / (2 * N), 1.0 / (2 * N))

    var_r = np.sum(p_rr * (1 - p_rr) + p_ri * (1 - p_ri)) / N**2
    var_i = np.sum(p_ii * (1 - p_ii) + p_ir * (1 - p_ir)) / N**2
    cross = -np.sum((p_rr + p_ri - 1) * (p_ii - p_ir)) / N**2
    return MomentStats(mean=mean, covariance=np.array([[var_r, cross], [cross, var_i]]))


def zf_moments(
    H,
    k: int,
    x: complex,
    powers: Sequence[float],
    mc_trials: Optional[int],
    stream,
    interferer_points=None,
) -> MomentStats:
    """
    ZF output moments with the sign estimate: closed-form mean and a sample
    covariance over ``mc_trials`` one-bit receptions. Interferers send symbols drawn
    from ``interferer_points`` when given, CN(0, 1) symbols otherwise.
    """
    if mc_trials is None:
        mc_trials = utils.get_zf_covariance_trials()
    if mc_trials < 100:
        raise ContractViolation("ZF covariance needs at least 100 trials.")
    H = _as_columns(H)
    powers = np.asarray(powers, dtype=float)
    K = H.shape[1]

    a = numerics.left_pseudo_inverse_column(link.sign_estimate(H).H_hat, k)
    stats = quadrant_stats(H, powers, k, x)
    alpha = a.real / link.sgn(H[:, k].real)
    beta = a.imag / link.sgn(H[:, k].imag)
    mean = _linear_mean(stats, alpha, beta)

    rng = numerics.as_generator(stream)
    if interferer_points is None:
        X = numerics.sample_cgauss(rng, (K, mc_trials), 1.0)
    else:
        points = np.asarray(interferer_points, dtype=complex)
        X = points[rng.integers(points.size, size=(K, mc_trials))]
    X[k, :] = x
    R = link.receive(rng, H, np.sqrt(powers)[:, None] * X, quantizers.one_bit())
    soft = a.conj() @ R
    covariance = np.cov(np.vstack([soft.real, soft.imag]))
    covariance = 0.5 * (covariance + covariance.T)
    return MomentStats(mean=mean, covariance=covariance)


def gaussian_entropy(covariance) -> float:
    """1/2 log2((2 pi e)^2 det Sigma) of the regularized covariance."""
    cov = np.asarray(covariance, dtype=float)
    cov = cov + utils.get_covariance_regularization() * np.eye(2)
    return 0.5 * float(np.log2((2 * np.pi * np.e) ** 2 * np.linalg.det(cov)))


def _components(components):
    weights = np.array([c[0] for c in components], dtype=float)
    means = np.array([np.asarray(c[1], dtype=float) for c in components])
    covs = np.array([np.asarray(c[2], dtype=float) for c in components])
    covs = covs + utils.get_covariance_regularization() * np.eye(2)
    return weights, means, covs


def mixture_entropy(components, samples: Optional[int] = None, stream=None):
    """
    Monte-Carlo differential entropy, in bits, of a two-dimensional Gaussian mixture
    given as ``(weight, mean, covariance)`` triples. Returns an ``EntropyEstimate``
    carrying the standard error of the estimate.
    """
    if samples is None:
        samples = utils.get_mixture_samples()
    if not components:
        raise ContractViolation("A mixture needs at least one component.")
    if samples < 2:
        raise ContractViolation("Mixture entropy needs at least 2 samples.")
    weights, means, covs = _components(components)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ContractViolation("Mixture weights must be non-negative and sum to 1.")
    det = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] ** 2
    if np.any(covs[:, 0, 0] <= 0) or np.any(det <= 0):
        raise ContractViolation("Every mixture covariance must be positive definite.")

    rng = numerics.as_generator(stream if stream is not None else RngStream(0))
    counts = rng.multinomial(samples, weights)
    draws = []
    for count, mean, cov in zip(counts, means, covs):
        if count:
            factor = np.linalg.cholesky(cov)
            draws.append(mean + rng.standard_normal((count, 2)) @ factor.T)
    z = np.concatenate(draws)

    with np.errstate(divide="ignore"):
        log_weights = np.log(weights)
    log_norm = -np.log(2 * np.pi) - 0.5 * np.log(det)
    log_density = np.empty(z.shape[0])
    for start in range(0, z.shape[0], BATCH):
        d = z[start : start + BATCH, None, :] - means[None, :, :]
        quad = (
            d[..., 0] ** 2 * covs[:, 1, 1]
            - 2 * d[..., 0] * d[..., 1] * covs[:, 0, 1]
            + d[..., 1] ** 2 * covs[:, 0, 0]
        ) / det
        log_density[start : start + BATCH] = special.logsumexp(
            log_weights + log_norm - 0.5 * quad, axis=1
        )

    nats = -log_density
    return EntropyEstimate(
        bits=float(np.mean(nats) / np.log(2)),
        stderr=float(np.std(nats, ddof=1) / np.sqrt(nats.size) / np.log(2)),
    )


def mixture_information(components, samples: Optional[int] = None, stream=None):
    """
    h(mixture) minus the weighted Gaussian entropy of its components, the mutual
    information of the Gaussian-approximated channel. Returns ``(bits, stderr)``.
    """
    entropy = mixture_entropy(components, samples, stream)
    conditional = sum(w * gaussian_entropy(cov) for w, _, cov in components)
    return entropy.bits - conditional, entropy.stderr


def symbol_moments(
    config: SimConfig, H, k: int, stream: RngStream
) -> Tuple[MomentStats, ...]:
    """Moments of user k's soft estimate for every constellation point."""
    points = config.alphabet().as_array()
    powers = config.user_powers
    if config.detector == "mrc":
        return tuple(
            mrc_moments(quadrant_stats(H, powers, k, x), config.antennas)
            for x in points
        )
    return tuple(
        zf_moments(H, k, x, powers, config.noise_trials, stream.child(m), points)
        for m, x in enumerate(points)
    )


def approx_rate(config: SimConfig, k: Optional[int] = None) -> RateEstimate:
    """
    High-SNR approximation of user k's one-bit rate, averaged over
    ``channel_realizations`` channel draws and scaled by (T - K) / T.
    """
    k = config.user if k is None else k
    if not 0 <= k < config.users:
        raise ContractViolation("User index {} out of range.".format(k))
    if config.detector not in ("mrc", "zf"):
        raise ContractViolation("The approximation covers the mrc and zf detectors.")
    if config.bits != 1:
        raise ContractViolation("The approximation covers one-bit receivers only.")
    K, T = config.users, config.coherence
    if T <= K:
        return zero_estimate(K, (config.channel_realizations, config.noise_trials))

    M = config.alphabet().order
    values = []
    for r in range(config.channel_realizations):
        stream = config.root_stream().child(r)
        block = channel.draw_block(
            stream.child(0), config.antennas, K, config.user_powers, T
        )
        moments = symbol_moments(config, block.H, k, stream.child(4))
        components = [(1.0 / M, ms.mean, ms.covariance) for ms in moments]
        bits, stderr = mixture_information(
            components, utils.get_mixture_samples(), stream.child(3)
        )
        values.append(bits)
        logger.debug(
            "Realization %d of %d: I=%.4f +- %.4f bits",
            r + 1,
            config.channel_realizations,
            bits,
            stderr,
            extra={"realization": r, "user": k},
        )
    return summarize(values, K, config)
