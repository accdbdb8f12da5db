"""
Experiment configuration shared by the rate estimators and the sweeps.
"""
import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from quantamimo import constellation, utils
from quantamimo.exceptions import ContractViolation, InvalidConfig
from quantamimo.numerics import RngStream

ESTIMATED = "estimated"
PERFECT = "perfect"
CSI_MODES = (ESTIMATED, PERFECT)

RATE_METHODS = ("mc", "approx", "both")


@dataclass(frozen=True)
class SimConfig:
    """
    All scalar parameters of one operating point.

    ``powers`` (linear per-user receive SNRs) overrides ``snr_db`` when given.
    ``pilots_per_user = None`` asks for the pilot count to be optimized over
    ``pilot_candidates`` (pilots per user), falling back to the PILOT_CANDIDATES
    setting. ``bits = 0`` selects the infinite-precision receiver.
    """

    antennas: int = 200
    users: int = 10
    coherence: int = 1142
    snr_db: float = -10.0
    powers: Optional[Tuple[float, ...]] = None
    constellation: str = "16qam"
    bits: int = 1
    detector: str = "zf"
    csi: str = ESTIMATED
    pilots_per_user: Optional[int] = 10
    pilot_candidates: Optional[Tuple[int, ...]] = None
    channel_realizations: int = 300
    noise_trials: int = 3000
    grid_bins: int = 64
    rate_method: str = "mc"
    dither: bool = False
    seed: int = 0
    stream_path: Tuple[int, ...] = ()
    user: int = 0

    def __post_init__(self):
        if self.powers is not None:
            object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if self.pilot_candidates is not None:
            object.__setattr__(
                self, "pilot_candidates", tuple(int(c) for c in self.pilot_candidates)
            )
        object.__setattr__(self, "stream_path", tuple(int(p) for p in self.stream_path))
        self.validate()

    def validate(self):
        if self.users < 1:
            raise InvalidConfig("users", "at least one user is required")
        if self.antennas < self.users:
            raise InvalidConfig(
                "antennas", "need antennas >= users, got N={}, K={}".format(
                    self.antennas, self.users
                )
            )
        if self.coherence < 1:
            raise InvalidConfig("coherence", "must be a positive slot count")
        if not 0 <= self.bits <= 8:
            raise InvalidConfig("bits", "must be in [0, 8], got {}".format(self.bits))
        try:
            constellation.make_qam(self.constellation)
        except ContractViolation as e:
            raise InvalidConfig("constellation", str(e))
        try:
            utils.get_detector_class(self.detector)
        except ContractViolation as e:
            raise InvalidConfig("detector", str(e))
        if self.csi not in CSI_MODES:
            raise InvalidConfig(
                "csi", "expected one of {}".format(", ".join(CSI_MODES))
            )
        if self.rate_method not in RATE_METHODS:
            raise InvalidConfig(
                "rate_method", "expected one of {}".format(", ".join(RATE_METHODS))
            )
        if self.pilots_per_user is not None:
            if self.pilots_per_user < 1:
                raise InvalidConfig("pilots_per_user", "must be at least 1")
            if self.csi == ESTIMATED and self.pilot_count > self.coherence:
                raise InvalidConfig(
                    "pilots_per_user",
                    "P = {} pilots exceed the coherence interval T = {}".format(
                        self.pilot_count, self.coherence
                    ),
                )
        if self.pilot_candidates is not None and (
            not self.pilot_candidates or min(self.pilot_candidates) < 1
        ):
            raise InvalidConfig("pilot_candidates", "must be positive pilots per user")
        if self.powers is not None:
            if len(self.powers) != self.users:
                raise InvalidConfig("powers", "one power per user is required")
            if min(self.powers) < 0:
                raise InvalidConfig("powers", "powers must be non-negative")
        if self.channel_realizations < 1 or self.noise_trials < 1:
            raise InvalidConfig("channel_realizations", "trial counts must be positive")
        if self.grid_bins < 2:
            raise InvalidConfig("grid_bins", "must be at least 2")
        if self.seed < 0:
            raise InvalidConfig("seed", "must be non-negative")
        if not 0 <= self.user < self.users:
            raise InvalidConfig(
                "user", "must index one of the {} users".format(self.users)
            )

    @property
    def user_powers(self) -> Tuple[float, ...]:
        if self.powers is not None:
            return self.powers
        return (float(10.0 ** (self.snr_db / 10.0)),) * self.users

    @property
    def optimize_pilots(self) -> bool:
        return self.csi == ESTIMATED and self.pilots_per_user is None

    @property
    def pilot_count(self) -> Optional[int]:
        """Total pilot slots P; 0 with perfect CSI and None when optimized."""
        if self.csi == PERFECT:
            return 0
        if self.pilots_per_user is None:
            return None
        return self.pilots_per_user * self.users

    @property
    def receive_variance(self) -> float:
        """Per-antenna received variance, sum of user powers plus unit noise."""
        return float(np.sum(self.user_powers)) + 1.0

    def alphabet(self) -> "constellation.Constellation":
        return constellation.make_qam(self.constellation)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        data = dataclasses.asdict(self)
        for key in ("powers", "pilot_candidates", "stream_path"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data

    def root_stream(self) -> RngStream:
        return RngStream(self.seed, self.stream_path)
