"""
One coherence block of the uplink: round-robin pilots, channel estimation from the
quantized pilot observations, linear receive filters and soft symbol estimates.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from quantamimo import numerics, quantizers, utils
from quantamimo.exceptions import ContractViolation, SingularGram

LS = "ls"
SIGN = "sign"
PERFECT = "perfect"


@dataclass(frozen=True)
class PilotSchedule:
    """
    Round-robin pilots: slot t belongs to user t mod K, who sends the constant real
    pilot sqrt(K rho_k) while every other user stays idle.
    """

    users: int
    slots: int
    active: Tuple[int, ...]
    amplitudes: Tuple[float, ...]

    def matrix(self) -> np.ndarray:
        """The K x P pilot block X_p."""
        X = np.zeros((self.users, self.slots), dtype=complex)
        X[list(self.active), np.arange(self.slots)] = self.amplitudes
        return X

    def slots_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.active) == k)

    def gram(self) -> np.ndarray:
        X = self.matrix()
        return X @ X.conj().T

    def energy(self) -> float:
        return float(np.sum(np.square(self.amplitudes)))


@dataclass(frozen=True)
class ChannelEstimate:
    H_hat: np.ndarray
    method: str


@dataclass(frozen=True)
class ReceiveFilter:
    A: np.ndarray
    detector: str

    def column(self, k: int) -> np.ndarray:
        return self.A[:, k]


def build_pilots(K: int, P: int, powers: Sequence[float]) -> PilotSchedule:
    if K < 1 or P < K or P % K:
        raise ContractViolation(
            "Pilot count P={} must be a positive multiple of K={}.".format(P, K)
        )
    if len(powers) != K:
        raise ContractViolation("One power per user is required.")
    active = tuple(t % K for t in range(P))
    amplitudes = tuple(float(np.sqrt(K * powers[k])) for k in active)
    return PilotSchedule(users=K, slots=P, active=active, amplitudes=amplitudes)


def block_energy(schedule: PilotSchedule, powers: Sequence[float], T: int) -> float:
    """Pilot energy plus the energy of the T - P unit-power data slots."""
    return schedule.energy() + (T - schedule.slots) * float(np.sum(powers))


def ls_estimate(R_pilot: np.ndarray, schedule: PilotSchedule) -> ChannelEstimate:
    """H_hat = (sum_t r_t x_t^H) (sum_t x_t x_t^H)^{-1} over the pilot slots."""
    X = schedule.matrix()
    gram = X @ X.conj().T
    with np.errstate(all="ignore"):
        condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > utils.get_condition_bound():
        raise SingularGram(condition=float(condition))
    correlation = np.asarray(R_pilot, dtype=complex) @ X.conj().T
    H_hat = np.linalg.solve(gram.T, correlation.T).T
    return ChannelEstimate(H_hat=H_hat, method=LS)


def ls_estimate_reduced(
    R_pilot: np.ndarray, schedule: PilotSchedule
) -> ChannelEstimate:
    """Per-user form of the LS estimate valid for round-robin pilots."""
    R_pilot = np.asarray(R_pilot, dtype=complex)
    amplitudes = np.asarray(schedule.amplitudes)
    H_hat = np.empty((R_pilot.shape[0], schedule.users), dtype=complex)
    for k in range(schedule.users):
        slots = schedule.slots_of(k)
        energy = np.sum(amplitudes[slots] ** 2)
        if energy == 0:
            raise SingularGram(condition=float("inf"))
        H_hat[:, k] = R_pilot[:, slots] @ amplitudes[slots] / energy
    return ChannelEstimate(H_hat=H_hat, method=LS)


def sgn(x) -> np.ndarray:
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def sign_estimate(H: np.ndarray) -> ChannelEstimate:
    H = np.asarray(H, dtype=complex)
    return ChannelEstimate(H_hat=sgn(H.real) + 1j * sgn(H.imag), method=SIGN)


def perfect_estimate(H: np.ndarray) -> ChannelEstimate:
    return ChannelEstimate(H_hat=np.asarray(H, dtype=complex), method=PERFECT)


def build_filter(est: ChannelEstimate, detector: str) -> ReceiveFilter:
    detector_class = utils.get_detector_class(detector)
    return ReceiveFilter(A=detector_class().filter_matrix(est.H_hat), detector=detector)


def soft_estimate(receive_filter: ReceiveFilter, r: np.ndarray, k: int):
    """
    a_k^H r. ``r`` may be a single length-N vector or an N x trials matrix, in which
    case one soft estimate per column is returned.
    """
    return receive_filter.column(k).conj() @ np.asarray(r, dtype=complex)


def receive(stream, H: np.ndarray, X: np.ndarray, quantizer, dither_rho=None):
    """
    Pass the K x T input block through the channel and the receive quantizers,
    R = Q(H X + W) with W ~ CN(0, I). With ``dither_rho`` set, CN(0, (rho - 1) I)
    dither is added before quantization.
    """
    rng = numerics.as_generator(stream)
    H = np.asarray(H, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if H.shape[1] != X.shape[0]:
        raise ContractViolation(
            "Channel has {} user columns but the block has {} rows.".format(
                H.shape[1], X.shape[0]
            )
        )
    Y = H @ X + numerics.sample_cgauss(rng, (H.shape[0], X.shape[1]), 1.0)
    if dither_rho is not None:
        Y = quantizers.add_dither(rng, Y, dither_rho)
    return quantizer.quantize(Y)
