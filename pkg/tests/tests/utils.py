import pytest
from django.conf import settings

from quantamimo.config import SimConfig

slow = pytest.mark.skipif(
    not settings.SLOW_TESTS, reason="set QUANTAMIMO_SLOW_TESTS to run"
)

needs_redis = pytest.mark.skipif(
    not settings.REDIS_AVAILABLE, reason="set REDIS_AVAILABLE to run"
)


def small_config(**changes):
    """An operating point small enough to simulate inside a unit test."""
    values = dict(
        antennas=8,
        users=2,
        coherence=50,
        snr_db=10.0,
        constellation="qpsk",
        bits=1,
        detector="zf",
        pilots_per_user=2,
        channel_realizations=2,
        noise_trials=200,
        grid_bins=16,
    )
    values.update(changes)
    return SimConfig(**values)
