import numpy as np
import pytest
from django.test import override_settings

from quantamimo import numerics, quantizers
from quantamimo.exceptions import ContractViolation, NonConvergence


def fixed_point_lloyd(b, variance, iterations=20_000):
    """Plain Lloyd iteration on a fine grid, independent of the closed forms."""
    sigma = np.sqrt(variance)
    x = np.linspace(-8 * sigma, 8 * sigma, 160_001)
    weight = np.exp(-0.5 * (x / sigma) ** 2)
    labels = np.linspace(-sigma, sigma, 2**b)
    for _ in range(iterations):
        cell = np.searchsorted(0.5 * (labels[:-1] + labels[1:]), x)
        mass = np.bincount(cell, weights=weight, minlength=2**b)
        updated = np.bincount(cell, weights=x * weight, minlength=2**b) / mass
        if np.max(np.abs(updated - labels)) < 1e-10:
            return updated
        labels = updated
    return labels


def test_one_bit_lloyd_max_labels():
    spec = quantizers.lloyd_max(1, 1.0)
    expected = np.sqrt(2 / np.pi)
    assert spec.labels == pytest.approx((-expected, expected), abs=1e-6)
    assert spec.interior_thresholds == pytest.approx([0.0], abs=1e-12)


def test_two_bit_lloyd_max_labels():
    spec = quantizers.lloyd_max(2, 1.0)
    assert spec.labels == pytest.approx((-1.5104, -0.4528, 0.4528, 1.5104), abs=1e-3)
    assert spec.interior_thresholds == pytest.approx([-0.9816, 0.0, 0.9816], abs=1e-3)


def test_lloyd_max_matches_fixed_point_oracle():
    oracle = fixed_point_lloyd(2, 1.0)
    assert quantizers.lloyd_max(2, 1.0).labels == pytest.approx(tuple(oracle), abs=1e-3)


def test_lloyd_max_scales_with_sigma():
    unit = quantizers.lloyd_max(3, 1.0)
    scaled = quantizers.lloyd_max(3, 4.0)
    assert scaled.labels == pytest.approx(tuple(2 * q for q in unit.labels), rel=1e-6)


@pytest.mark.parametrize("b", [1, 2, 3, 4])
def test_lloyd_max_structure(b):
    spec = quantizers.lloyd_max(b, 2.0)
    labels = np.asarray(spec.labels)
    assert labels.size == 2**b
    assert np.all(np.diff(labels) > 0)
    assert np.allclose(labels, -labels[::-1], atol=1e-9)
    # thresholds are midpoints and labels are cell centroids
    assert np.allclose(
        spec.interior_thresholds, 0.5 * (labels[:-1] + labels[1:]), atol=1e-12
    )
    centroids = quantizers.gaussian_centroids(spec.thresholds, np.sqrt(2.0))
    assert np.allclose(centroids, labels, atol=1e-8)


def test_distortion_decreases_with_resolution():
    distortion = [
        quantizers.gaussian_distortion(quantizers.lloyd_max(b, 1.0), 1.0)
        for b in (1, 2, 3, 4)
    ]
    assert distortion[0] == pytest.approx(1 - 2 / np.pi, abs=1e-6)
    assert distortion[1] == pytest.approx(0.1175, abs=1e-3)
    assert all(a > b for a, b in zip(distortion, distortion[1:]))


@override_settings(QUANTAMIMO={"QUANTIZER": {"MAX_ITER": 2}})
def test_lloyd_max_non_convergence():
    with pytest.raises(NonConvergence) as e_info:
        quantizers.lloyd_max(3, 1.0)
    assert e_info.value.iterations == 2
    assert e_info.value.movement > 0


@pytest.mark.parametrize("b, variance", [(0, 1.0), (9, 1.0), (2, 0.0), (2, -1.0)])
def test_lloyd_max_rejects_bad_arguments(b, variance):
    with pytest.raises(ContractViolation):
        quantizers.lloyd_max(b, variance)


def test_quantize_one_bit_maps_zero_up():
    spec = quantizers.one_bit()
    out = spec.quantize(np.array([0.0 + 0.0j, -0.1 + 2.0j, 3.0 - 1e-12j]))
    assert np.array_equal(out, np.array([1 + 1j, -1 + 1j, 1 - 1j]))


def test_quantize_on_threshold_goes_to_upper_cell():
    spec = quantizers.lloyd_max(2, 1.0)
    threshold = spec.interior_thresholds[0]
    assert quantizers.quantize(spec, threshold).real == spec.labels[1]


def test_quantize_output_is_in_label_set():
    spec = quantizers.lloyd_max(3, 1.0)
    y = numerics.sample_cgauss(numerics.RngStream(0), 1000, 2.0)
    out = spec.quantize(y)
    assert set(out.real) <= set(spec.labels)
    assert set(out.imag) <= set(spec.labels)


def test_infinite_precision_is_identity():
    y = numerics.sample_cgauss(numerics.RngStream(0), 10, 1.0)
    quantizer = quantizers.design_quantizer(0, 3.0)
    assert quantizer.is_infinite_precision
    assert np.array_equal(quantizer.quantize(y), y)
    assert quantizer == quantizers.InfinitePrecisionQuantizer()


def test_design_quantizer_uses_per_rail_variance():
    assert quantizers.design_quantizer(1, 11.0) == quantizers.one_bit()
    assert quantizers.design_quantizer(2, 4.0) == quantizers.lloyd_max(2, 2.0)
    with pytest.raises(ContractViolation):
        quantizers.design_quantizer(-1, 1.0)


def test_quantizer_spec_validation():
    with pytest.raises(ContractViolation):
        quantizers.QuantizerSpec(
            bits=1, thresholds=(-np.inf, 0.0, np.inf), labels=(1.0, -1.0)
        )
    with pytest.raises(ContractViolation):
        quantizers.QuantizerSpec(
            bits=1, thresholds=(-1.0, 0.0, np.inf), labels=(-1.0, 1.0)
        )
    with pytest.raises(ContractViolation):
        quantizers.QuantizerSpec(
            bits=2, thresholds=(-np.inf, 0.0, np.inf), labels=(-1.0, 1.0)
        )


def test_dither_variance():
    y = np.zeros(100_000, dtype=complex)
    dithered = quantizers.add_dither(numerics.RngStream(0), y, 5.0)
    assert np.mean(np.abs(dithered) ** 2) == pytest.approx(4.0, rel=0.03)


def test_dither_disabled_below_unit_rho(caplog):
    y = np.ones(4, dtype=complex)
    with caplog.at_level("WARNING", logger="quantamimo.quantizers"):
        out = quantizers.add_dither(numerics.RngStream(0), y, 0.5)
    assert np.array_equal(out, y)
    assert "Dither disabled" in caplog.text
