import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracbsq import norms
from fracbsq.norms import DissipationParams, GevreyParams
from fracbsq.spectral import (
    CoupledState,
    SpectralField,
    make_grid,
    random_coefficients,
    random_divfree_state,
    single_mode_field,
)


def random_field(seed, grid, components=1, decay=1.5):
    return SpectralField(grid, random_coefficients(np.random.default_rng(seed), grid, components, decay, 1.0))


class TestParams:
    def test_sigma_must_exceed_one(self):
        with pytest.raises(ValueError, match="sigma"):
            GevreyParams(1.0, 1.0)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            GevreyParams(-0.1, 2.0)

    def test_existence_range(self):
        GevreyParams(1.0, 2.0, 1.49).require_existence_range()
        for bad in (GevreyParams(1.0, 2.0, 1.5), GevreyParams(1.0, 2.0, -0.1), GevreyParams(0.0, 2.0, 0.0)):
            with pytest.raises(ValueError):
                bad.require_existence_range()

    def test_norms_accept_any_s(self, grid8):
        f = random_field(0, grid8)
        assert norms.gevrey_norm(f, GevreyParams(1.0, 2.0, 3.0)) > 0

    def test_dissipation(self):
        with pytest.raises(ValueError):
            DissipationParams(0.5, 1.0)
        d = DissipationParams(0.75, 1.0)
        assert d.exponent_alpha == pytest.approx(3.0)
        assert d.exponent_beta == pytest.approx(2.0)
        with pytest.raises(ValueError):
            d.require_blowup_regime()


class TestGevreyNorm:
    def test_reduces_to_l2(self, grid16):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(grid16.shape)
        x -= x.mean()
        f = SpectralField.from_physical(grid16, x)
        phys = math.sqrt(np.sum(x**2) * (2 * np.pi / 16) ** 3)
        assert norms.gevrey_norm(f, GevreyParams(0.0, 2.0, 0.0)) == pytest.approx(phys, rel=1e-12)
        assert norms.l2_norm(f) == pytest.approx(phys, rel=1e-12)

    def test_single_mode_closed_form(self, grid8):
        f = single_mode_field(grid8, (2, 0, 0), 1.0)
        expected = 2 * (2**2 * math.exp(2 * math.sqrt(2))) * grid8.normalization
        assert norms.gevrey_norm(f, GevreyParams(1.0, 2.0, 1.0)) ** 2 == pytest.approx(expected, rel=1e-14)

    @given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.0, 2.0))
    def test_strictly_increasing_in_a(self, seed, a):
        f = random_field(seed, make_grid(8))
        lo = norms.gevrey_norm(f, GevreyParams(a, 2.0, 0.3))
        hi = norms.gevrey_norm(f, GevreyParams(2 * a + 0.1, 2.0, 0.3))
        assert hi > lo

    def test_vector_adds_in_squares(self, grid8):
        v = random_field(1, grid8, components=3)
        p = GevreyParams(0.5, 3.0, 0.2)
        parts = [norms.gevrey_norm(SpectralField(grid8, v.coeffs[i : i + 1]), p) for i in range(3)]
        assert norms.gevrey_norm(v, p) == pytest.approx(math.sqrt(sum(x * x for x in parts)), rel=1e-14)

    def test_zero_mode_ignored(self, grid8):
        c = np.zeros((1,) + grid8.shape, dtype=np.complex128)
        c[0, 0, 0, 0] = 5.0
        assert norms.gevrey_norm(SpectralField(grid8, c), GevreyParams(1.0, 2.0, -1.0)) == 0.0


class TestWeightedL1:
    def test_plain_sum_at_zero_radius(self, grid8):
        f = random_field(2, grid8)
        expected = np.sum(np.abs(f.coeffs[0]))  * grid8.amplitude_scale
        assert norms.weighted_l1_norm(f, 0.0, 2.0) == pytest.approx(expected, rel=1e-14)

    def test_single_mode_closed_form(self, grid8):
        a, sigma, m = 1.0, 2.0, 0.7
        f = single_mode_field(grid8, (0, 1, 0), m)
        expected = math.exp(a / sigma) * m * 2 * grid8.amplitude_scale
        assert norms.weighted_l1_norm(f, a / sigma, sigma) == pytest.approx(expected, rel=1e-14)

    def test_zero_field(self, grid8):
        assert norms.weighted_l1_norm(SpectralField.zeros(grid8), 1.0, 2.0) == 0.0

    def test_negative_radius(self, grid8):
        with pytest.raises(ValueError):
            norms.weighted_l1_norm(SpectralField.zeros(grid8), -1.0, 2.0)

    @given(seed=st.integers(0, 2**32 - 1), r1=st.floats(0.0, 1.0), gap=st.floats(0.0, 1.0), s=st.floats(0.0, 1.4))
    def test_lattice_constant_bounds_l1(self, seed, r1, gap, s):
        g = make_grid(8)
        f = random_field(seed, g)
        K = norms.l1_gevrey_lattice_constant(g, r1, r1 + gap, 2.0, s)
        lhs = norms.weighted_l1_norm(f, r1, 2.0)
        assert lhs <= K * norms.gevrey_norm_raw(f, r1 + gap, 2.0, s) * (1 + 1e-12)


class TestSobolev:
    def test_equals_gevrey_at_zero_radius(self, grid8):
        f = random_field(3, grid8)
        for sigma in (1.5, 2.0, 7.0):
            assert norms.sobolev_norm(f, 1.3) == norms.gevrey_norm(f, GevreyParams(0.0, sigma, 1.3))

    def test_delta_zero(self, grid8):
        f = random_field(4, grid8)
        assert norms.sobolev_norm(f, 0.0) == norms.l2_norm(f)

    def test_single_mode_closed_form(self, grid8):
        f = single_mode_field(grid8, (2, 2, 1), 1.0)
        assert norms.sobolev_norm(f, 2.0) == pytest.approx(9 * math.sqrt(2 * grid8.normalization), rel=1e-14)


class TestPairNorm:
    def test_components(self, grid8, params):
        x = random_divfree_state(7, grid8)
        u_only = CoupledState(x.u_hat, SpectralField.zeros(grid8))
        t_only = CoupledState(SpectralField.zeros(grid8, 3), x.theta_hat)
        assert norms.pair_norm(u_only, params) == norms.gevrey_norm(x.u_hat, params)
        assert norms.pair_norm(t_only, params) == norms.gevrey_norm(x.theta_hat, params)

    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-6, 1e3) | st.just(0.0))
    def test_homogeneous(self, seed, c):
        p = GevreyParams(1.0, 2.0, 0.5)
        x = random_divfree_state(seed, make_grid(8))
        assert norms.pair_norm(x.scaled(c), p) == pytest.approx(c * norms.pair_norm(x, p), rel=1e-13, abs=1e-300)
