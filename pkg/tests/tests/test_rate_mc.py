import numpy as np
import pytest
from django.test import override_settings
from scipy import stats

from quantamimo import rate_mc
from quantamimo.config import PERFECT
from quantamimo.exceptions import ContractViolation
from quantamimo.rate_mc import GridSpec

from .utils import slow, small_config


def binary_entropy(p):
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def test_one_bit_binary_channel_oracle():
    rng = np.random.default_rng(0)
    trials = 500_000
    indices = np.repeat([0, 1], trials)
    x = np.where(indices == 0, 1.0, -1.0)
    # real rail of CN(0, 1) noise at rho = 1
    r = np.where(x + rng.normal(0.0, np.sqrt(0.5), x.size) >= 0, 1.0, -1.0)
    mi = rate_mc.mutual_info_grid(indices, r.astype(complex), 2)
    expected = 1 - binary_entropy(stats.norm.cdf(-np.sqrt(2)))
    assert expected == pytest.approx(0.6032, abs=1e-3)
    assert mi == pytest.approx(expected, abs=0.01)


def test_noiseless_distinct_outputs_give_log2_m():
    points = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    indices = np.repeat(np.arange(4), 50)
    assert rate_mc.mutual_info_grid(indices, points[indices], 4) == pytest.approx(2.0)


def test_independent_outputs_give_little_information():
    rng = np.random.default_rng(1)
    indices = np.repeat(np.arange(4), 10_000)
    soft = rng.normal(size=indices.size) + 1j * rng.normal(size=indices.size)
    grid = GridSpec.from_samples(soft, bins=8)
    assert 0.0 <= rate_mc.mutual_info_grid(indices, soft, 4, grid) < 0.01


def test_grid_refinement_never_decreases_information():
    rng = np.random.default_rng(2)
    indices = np.repeat(np.arange(4), 2_000)
    centers = np.array([1, 1j, -1, -1j])[indices]
    noise = rng.normal(size=indices.size) + 1j * rng.normal(size=indices.size)
    soft = centers + 0.8 * noise
    coarse = GridSpec.from_samples(soft, bins=8)
    fine = GridSpec(16, coarse.re_bounds, coarse.im_bounds)
    assert rate_mc.mutual_info_grid(indices, soft, 4, fine) >= (
        rate_mc.mutual_info_grid(indices, soft, 4, coarse) - 1e-12
    )


@pytest.mark.parametrize(
    "indices, soft, M",
    [
        ([], [], 2),
        ([0, 1], [0j], 2),
        ([0, 0, 1], [0j, 1j, 1 + 0j], 2),
        ([0, 2], [0j, 1j], 2),
    ],
)
def test_mutual_info_contract(indices, soft, M):
    with pytest.raises(ContractViolation):
        rate_mc.mutual_info_grid(indices, soft, M)


def test_grid_from_samples_is_widened():
    grid = GridSpec.from_samples(np.array([0 + 0j, 10 + 2j]), bins=4)
    assert grid.re_bounds == pytest.approx((-0.1, 10.1))
    assert grid.im_bounds == pytest.approx((-0.02, 2.02))
    assert grid.cells == 16


def test_grid_degenerate_rail_warns(caplog):
    with caplog.at_level("WARNING", logger="quantamimo.rate_mc"):
        grid = GridSpec.from_samples(np.array([1 + 0j, 2 + 0j]), bins=4)
    assert grid.im_bounds == pytest.approx((-1e-9, 1e-9))
    assert "Degenerate grid rail" in caplog.text


@override_settings(QUANTAMIMO={"GRID": {"BINS": 5}})
def test_grid_bins_setting():
    assert GridSpec.from_samples(np.array([0j, 1 + 1j])).bins_per_dim == 5


def test_grid_cell_index_clips_outliers():
    grid = GridSpec(4, (0.0, 1.0), (0.0, 1.0))
    cells = grid.cell_index(np.array([-5 - 5j, 0.3 + 0.6j, 9 + 9j]))
    assert cells.tolist() == [0, 1 * 4 + 2, 15]


def test_grid_validation():
    with pytest.raises(ContractViolation):
        GridSpec(1, (0.0, 1.0), (0.0, 1.0))
    with pytest.raises(ContractViolation):
        GridSpec(4, (1.0, 1.0), (0.0, 1.0))
    with pytest.raises(ContractViolation):
        GridSpec.from_samples(np.array([], dtype=complex))


def test_summarize_applies_training_loss():
    config = small_config(coherence=100)
    estimate = rate_mc.summarize([1.0, 1.5], 20, config)
    assert estimate.rate == pytest.approx(0.8 * 1.25)
    assert estimate.ci_halfwidth == pytest.approx(
        1.96 * np.std([1.0, 1.5], ddof=1) / np.sqrt(2) * 0.8
    )
    assert estimate.pilots_used == 20
    assert estimate.trials == (2, 200)


def test_summarize_clips_to_ceiling():
    config = small_config(coherence=100)
    assert rate_mc.summarize([2.5], 20, config).rate == pytest.approx(1.6)
    assert rate_mc.summarize([-0.1], 20, config).rate == 0.0


def test_estimate_rate_bounds_and_determinism():
    config = small_config()
    first = rate_mc.estimate_rate(config)
    second = rate_mc.estimate_rate(config)
    assert first == second
    assert first.pilots_used == 4
    assert 0.0 <= first.rate <= (50 - 4) / 50 * 2
    assert first.trials == (2, 200)


def test_estimate_rate_depends_on_seed():
    assert rate_mc.estimate_rate(small_config(seed=1)) != rate_mc.estimate_rate(
        small_config(seed=2)
    )


def test_perfect_csi_high_snr_reaches_log2_m():
    config = small_config(
        users=1, bits=0, csi=PERFECT, snr_db=30.0, noise_trials=100, grid_bins=64
    )
    estimate = rate_mc.estimate_rate(config)
    assert estimate.pilots_used == 0
    assert estimate.rate == pytest.approx(2.0, abs=0.05)


def test_estimate_rate_pilots_fill_the_block():
    config = small_config(coherence=4)
    estimate = rate_mc.estimate_rate(config)
    assert estimate.rate == 0.0
    assert estimate.pilots_used == 4


def test_estimate_rate_contract():
    with pytest.raises(ContractViolation):
        rate_mc.estimate_rate(small_config(), pilots=60)
    with pytest.raises(ContractViolation):
        rate_mc.estimate_rate(small_config(pilots_per_user=None))
    with pytest.raises(ContractViolation):
        rate_mc.estimate_rate(small_config(), k=2)


def test_optimize_pilots_returns_best_candidate():
    config = small_config(pilots_per_user=None)
    P, estimate = rate_mc.optimize_pilots(config, [2, 4, 8])
    assert P in (2, 4, 8)
    assert estimate == rate_mc.estimate_rate(config, pilots=P)
    others = [rate_mc.estimate_rate(config, pilots=c).rate for c in (2, 4, 8)]
    assert estimate.rate == max(others)


@pytest.mark.parametrize("candidates", [[], [3], [50], [1]])
def test_optimize_pilots_rejects_bad_candidates(candidates):
    with pytest.raises(ContractViolation):
        rate_mc.optimize_pilots(small_config(pilots_per_user=None), candidates)


def test_pilot_candidates_below_coherence():
    config = small_config(coherence=9, pilots_per_user=None, pilot_candidates=[1, 4, 5])
    assert rate_mc.pilot_candidates(config) == [2, 8]


@override_settings(QUANTAMIMO={"PILOT_CANDIDATES": [2, 3]})
def test_pilot_candidates_setting():
    config = small_config(pilots_per_user=None)
    assert rate_mc.pilot_candidates(config) == [4, 6]


def test_evaluate_rate_without_room_for_pilots():
    config = small_config(coherence=3, pilots_per_user=None, pilot_candidates=[2, 3])
    estimate = rate_mc.evaluate_rate(config)
    assert estimate.rate == 0.0
    assert estimate.pilots_used == 4


def test_evaluate_rate_fixed_pilots():
    config = small_config()
    assert rate_mc.evaluate_rate(config) == rate_mc.estimate_rate(config)


def test_dither_level(caplog):
    assert rate_mc.dither_level(small_config()) is None
    assert rate_mc.dither_level(small_config(dither=True)) == pytest.approx(10.0)
    with caplog.at_level("WARNING", logger="quantamimo.rate_mc"):
        assert rate_mc.dither_level(small_config(dither=True, snr_db=-5.0)) is None
    assert "Dither disabled" in caplog.text


def test_realization_is_shared_across_pilot_counts():
    config = small_config(bits=0)
    a_idx, a_soft = rate_mc.realization_soft_estimates(config, 0, 2, 0)
    b_idx, b_soft = rate_mc.realization_soft_estimates(config, 0, 2, 0)
    assert np.array_equal(a_idx, b_idx)
    assert np.array_equal(a_soft, b_soft)
    assert a_soft.size == 4 * 200


def test_sum_rate_adds_users():
    config = small_config()
    expected = sum(rate_mc.estimate_rate(config, k).rate for k in range(2))
    assert rate_mc.sum_rate(config) == pytest.approx(expected)


@slow
def test_qpsk_one_bit_saturates_at_high_snr():
    config = small_config(
        antennas=64,
        users=1,
        coherence=1142,
        snr_db=10.0,
        pilots_per_user=None,
        channel_realizations=20,
        noise_trials=1000,
        grid_bins=64,
    )
    estimate = rate_mc.evaluate_rate(config)
    ceiling = 2 * (1142 - estimate.pilots_used) / 1142
    assert estimate.rate == pytest.approx(ceiling, abs=0.1)


@slow
def test_sixteen_qam_beats_qpsk_at_low_snr():
    base = small_config(
        antennas=64,
        users=1,
        coherence=1142,
        snr_db=-5.0,
        pilots_per_user=10,
        channel_realizations=20,
        noise_trials=1000,
        grid_bins=64,
    )
    qpsk = rate_mc.estimate_rate(base)
    qam = rate_mc.estimate_rate(base.replace(constellation="16qam"))
    assert qam.rate > qpsk.rate


@slow
def test_sixty_four_qam_one_bit_rate_is_not_monotone():
    base = small_config(
        antennas=64,
        users=1,
        coherence=1142,
        constellation="64qam",
        pilots_per_user=10,
        channel_realizations=20,
        noise_trials=1000,
        grid_bins=64,
    )
    snrs = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
    rates = [rate_mc.estimate_rate(base.replace(snr_db=s)).rate for s in snrs]
    peak = int(np.argmax(rates))
    assert 0 < peak < len(rates) - 1
    assert rates[peak] > rates[-1] + 0.05


@slow
@pytest.mark.parametrize("bits, per_user", [(0, {1, 2}), (1, {4, 5, 6})])
def test_optimal_pilots_per_user(bits, per_user):
    config = small_config(
        antennas=200,
        users=10,
        coherence=1142,
        snr_db=10.0,
        constellation="16qam",
        bits=bits,
        pilots_per_user=None,
        channel_realizations=20,
        noise_trials=1000,
        grid_bins=64,
    )
    candidates = [c * 10 for c in (1, 2, 3, 4, 5, 6, 8, 10)]
    P, estimate = rate_mc.optimize_pilots(config, candidates)
    assert P // 10 in per_user
    assert estimate.pilots_used == P


def test_optimize_pilots_single_candidate():
    config = small_config(pilots_per_user=None)
    assert rate_mc.optimize_pilots(config, [2]) == (
        2,
        rate_mc.estimate_rate(config, pilots=2),
    )


@slow
@pytest.mark.parametrize("bits", [1, 2, 3])
def test_infinite_precision_bounds_quantized_rates(bits):
    base = small_config(
        antennas=32,
        users=1,
        coherence=1142,
        snr_db=-5.0,
        constellation="16qam",
        pilots_per_user=10,
        channel_realizations=10,
        noise_trials=1000,
        grid_bins=64,
    )
    infinite = rate_mc.estimate_rate(base.replace(bits=0))
    quantized = rate_mc.estimate_rate(base.replace(bits=bits))
    slack = 2 * (infinite.ci_halfwidth + quantized.ci_halfwidth)
    assert infinite.rate >= quantized.rate - slack
