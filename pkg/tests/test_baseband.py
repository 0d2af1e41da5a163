"""Packing, normalization, SNR conversion, complex Gaussian sampling, RNG."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanfree import nn
from chanfree.baseband import (
    DegenerateInputError,
    RngStream,
    complex_to_real,
    normalize_energy,
    normalize_energy_backward,
    real_to_complex,
    sample_cgaussian,
    snr_db_to_noise_variance,
)
from chanfree.gradcheck import assert_grads_close
from chanfree.nn import DimensionError


class TestPacking:
    def test_pairing_convention(self):
        s = real_to_complex(np.array([[1.0, 2.0, 3.0, 4.0]]))
        np.testing.assert_array_equal(s, [[1 + 2j, 3 + 4j]])

    def test_zeros(self):
        assert not real_to_complex(np.zeros((2, 6))).any()

    def test_unpack(self):
        r = complex_to_real(np.array([[1 + 2j]]))
        np.testing.assert_array_equal(r, [[1.0, 2.0]])

    def test_purely_real_symbols(self):
        r = complex_to_real(np.array([[3.0 + 0j, -1.0 + 0j]]))
        np.testing.assert_array_equal(r[:, 1::2], 0.0)

    def test_odd_inner_dimension_raises(self):
        with pytest.raises(DimensionError):
            real_to_complex(np.ones((1, 3)))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_bit_exact(self, seed, batch, n):
        r = RngStream(seed).normal(10.0, (batch, 2 * n))
        assert np.array_equal(complex_to_real(real_to_complex(r)), r)
        s = RngStream(seed).cnormal((batch, n), 4.0)
        assert np.array_equal(real_to_complex(complex_to_real(s)), s)


class TestNormalizeEnergy:
    def test_already_normalized_row(self):
        row = real_to_complex(np.array([[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]))
        out, _ = normalize_energy(row)
        np.testing.assert_allclose(out, row, atol=1e-15)

    def test_scales_up(self):
        row = real_to_complex(np.array([[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]))
        out, _ = normalize_energy(row)
        assert out[0, 0] == pytest.approx(2.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_energy_invariant(self, seed):
        s = RngStream(seed).cnormal((5, 4), 2.0) + 0.1  # offset avoids zero rows
        out, _ = normalize_energy(s)
        energy = (np.abs(out) ** 2).sum(axis=1)
        np.testing.assert_allclose(energy, 4.0, rtol=1e-12)

    def test_zero_row_raises(self):
        with pytest.raises(DegenerateInputError):
            normalize_energy(np.zeros((1, 4), dtype=complex))

    @pytest.mark.parametrize("seed", range(4))
    def test_backward_matches_finite_differences(self, seed):
        rng = RngStream(seed)
        reals = rng.normal(1.0, (3, 8))
        probe = rng.normal(1.0, (3, 8))

        def objective(params):
            out, _ = normalize_energy(real_to_complex(params["r"]))
            return float((complex_to_real(out) * probe).sum())

        _, cache = normalize_energy(real_to_complex(reals))
        analytic = normalize_energy_backward(cache, probe)
        numeric = nn.finite_diff_grad(objective, {"r": reals})
        assert_grads_close({"r": analytic}, numeric)


class TestSnrConversion:
    def test_reference_points(self):
        assert snr_db_to_noise_variance(10.0) == pytest.approx(0.1, rel=1e-12)
        assert snr_db_to_noise_variance(0.0) == 1.0
        assert snr_db_to_noise_variance(20.0) == pytest.approx(0.01, rel=1e-12)

    @given(st.floats(-40, 40), st.floats(0.01, 10))
    @settings(max_examples=50, deadline=None)
    def test_strictly_decreasing(self, snr, step):
        assert snr_db_to_noise_variance(snr + step) < snr_db_to_noise_variance(snr)


class TestComplexGaussian:
    def test_zero_variance(self):
        w = sample_cgaussian(100, 0.0, RngStream(0))
        assert not w.any()

    def test_negative_variance_raises(self):
        with pytest.raises(ValueError):
            sample_cgaussian(10, -0.1, RngStream(0))

    def test_moments(self):
        n = 1_000_000
        variance = 0.7
        w = sample_cgaussian(n, variance, RngStream(42))
        energy = np.abs(w) ** 2
        # E|w|^2 = variance; |w|^2 is Exp(variance): std = variance
        tol = 3 * variance / np.sqrt(n)
        assert abs(energy.mean() - variance) < tol
        mean_tol = 3 * np.sqrt(variance / 2 / n)
        assert abs(w.real.mean()) < mean_tol and abs(w.imag.mean()) < mean_tol

    def test_component_variance_split(self):
        n = 1_000_000
        variance = 0.5
        w = sample_cgaussian(n, variance, RngStream(7))
        half = variance / 2
        # var of x^2 for N(0, h) is 2h^2
        tol = 3 * np.sqrt(2 * half * half / n)
        assert abs(w.real.var() - half) < tol
        assert abs(w.imag.var() - half) < tol


class TestRngStream:
    def test_same_address_same_sequence(self):
        a = RngStream(123).normal(1.0, 10)
        b = RngStream(123).normal(1.0, 10)
        np.testing.assert_array_equal(a, b)

    def test_derive_independent_of_consumption(self):
        parent = RngStream(5)
        child_before = parent.derive(1).normal(1.0, 4)
        parent.normal(1.0, 100)
        child_after = parent.derive(1).normal(1.0, 4)
        np.testing.assert_array_equal(child_before, child_after)

    def test_distinct_paths_differ(self):
        a = RngStream(5, (1,)).normal(1.0, 8)
        b = RngStream(5, (2,)).normal(1.0, 8)
        assert not np.array_equal(a, b)

    def test_state_round_trip(self):
        stream = RngStream(9, (3, 1))
        stream.normal(1.0, 17)
        saved = stream.state()
        expected = stream.normal(1.0, 5)
        restored = RngStream.from_state(saved)
        np.testing.assert_array_equal(restored.normal(1.0, 5), expected)

    def test_integers_dtype_and_range(self):
        draws = RngStream(1).integers(0, 7, 1000)
        assert draws.dtype == np.int64
        assert draws.min() >= 0 and draws.max() < 7
