import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schromax.errors import CapacityError, InvalidArgument
from schromax.examples import m1_example, scale_brick
from schromax.propagator import (
    Brick1D,
    SeparableExample,
    axis_factor,
    chirp_integral,
    chirp_values,
    chirp_values_fresnel,
    chirp_with_error,
    direct_oracle,
    evaluate_separable,
    evolve_separable,
    l2_norm,
    panel_count,
)

INV_SQRT_2PI = 0.39894228040143268

# Reference values from adaptive mpmath quadrature at 30 digits.
MPMATH_I = {
    (2.0, 3.0): 0.80493853198341697 + 0.17306090349649938j,
    (0.0, 0.25): 0.99960944563617428 + 0.020827521183740792j,
    (40.0, 7.0): -0.011558515408588056 + 0.045850990983976979j,
    (-3.0, 1.5): 0.6607039526404665 + 0.050973186360147343j,
    (300.0, 250.0): -0.0073197174281309995 + 0.017229225014259486j,
}

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestChirp:
    def test_zero_phase(self):
        res = chirp_integral(0, 0)
        assert res.value == pytest.approx(1.0, abs=1e-15)
        assert res.error <= 1e-14

    def test_sinc_at_pi(self):
        res = chirp_integral(math.pi, 0)
        assert abs(res.value - 2 * math.sin(math.pi / 2) / math.pi) < 1e-14
        assert abs(res.value - 0.636620) < 1e-6

    @pytest.mark.parametrize("ab", sorted(MPMATH_I))
    def test_against_mpmath(self, ab):
        res = chirp_integral(*ab)
        assert abs(res.value - MPMATH_I[ab]) < 1e-12
        assert res.error <= 1e-8

    def test_two_node_counts_agree(self):
        # (2, 3): P and 2P panels agree to 1e-8 and bracket the reference.
        res = chirp_integral(2, 3)
        assert res.error < 1e-8
        assert abs(res.value - MPMATH_I[(2.0, 3.0)]) <= res.error + 1e-14

    @pytest.mark.parametrize("bad", [(math.nan, 0), (0, math.inf), (-math.inf, 1)])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidArgument):
            chirp_integral(*bad)
        with pytest.raises(InvalidArgument):
            chirp_values(*bad)

    def test_panel_rule(self):
        assert panel_count(0, 0) == 8
        assert panel_count(100 * math.pi, 0) == 100
        assert panel_count(-50.5, 50.5) == math.ceil(101 / math.pi)

    def test_error_budget_at_large_phase(self):
        a = np.array([1e4, -7e3, 2.5e3, 0.0])
        b = np.array([0.0, 3e3, -7.5e3, 1e4])
        _, err = chirp_with_error(a, b)
        assert np.all(err <= 1e-8)

    def test_vectorised_matches_scalar_bitwise(self):
        a = np.array([2.0, 40.0, 0.0, 300.0])
        b = np.array([3.0, 7.0, 0.25, 250.0])
        vec = chirp_values(a, b)
        for k in range(a.size):
            assert vec[k] == chirp_integral(a[k], b[k]).value
        # batch composition does not change individual values
        assert chirp_values(a[::-1], b[::-1])[::-1].tolist() == vec.tolist()

    @settings(max_examples=200, deadline=None)
    @given(finite, finite)
    def test_conjugation_symmetry(self, a, b):
        assert abs(chirp_integral(-a, -b).value - chirp_integral(a, b).value.conjugate()) < 1e-10

    @settings(max_examples=200, deadline=None)
    @given(finite, finite)
    def test_bounded(self, a, b):
        res = chirp_integral(a, b)
        assert abs(res.value) <= 1 + res.error + 1e-14

    def test_non_cancellation_lower_bound(self):
        # grid over the region |a|/2 + |b|/4 < pi/2
        a = np.linspace(-3.1, 3.1, 41)
        b = np.linspace(-6.2, 6.2, 41)
        A, B = np.meshgrid(a, b)
        phase = np.abs(A) / 2 + np.abs(B) / 4
        inside = phase < math.pi / 2
        vals = np.abs(chirp_values(A[inside], B[inside]))
        assert np.all(vals >= np.cos(phase[inside]) - 1e-14)

    def test_fresnel_form_matches_quadrature(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(-500, 500, 500)
        b = np.concatenate([rng.uniform(-500, 500, 250), rng.uniform(1e-5, 1, 250)])
        assert np.max(np.abs(chirp_values_fresnel(a, b) - chirp_values(a, b))) < 1e-9

    def test_fresnel_small_b_falls_back(self):
        a = np.array([3.0, -10.0])
        b = np.array([0.0, 1e-9])
        assert np.max(np.abs(chirp_values_fresnel(a, b) - chirp_values(a, b))) < 1e-14


class TestAxisFactor:
    def test_scale_brick_at_origin(self):
        R = 256.0
        val = axis_factor(scale_brick(R), 0.0, 0.0)
        assert abs(val) == pytest.approx(INV_SQRT_2PI * 4, rel=1e-14)
        assert abs(val) == pytest.approx(1.59577, abs=1e-5)

    def test_unit_brick(self):
        assert axis_factor(Brick1D(1, 0, 1), 0.0, 0.0) == pytest.approx(INV_SQRT_2PI, rel=1e-14)

    def test_phase_slope_vanishes_on_curve(self):
        R = 256.0
        # x = -1/2, t = 1/(4R): a = 0 exactly, b = t s^2 = 1/4
        val = axis_factor(scale_brick(R), -0.5, 1 / (4 * R))
        assert abs(val) == pytest.approx(INV_SQRT_2PI * 4 * abs(MPMATH_I[(0.0, 0.25)]), rel=1e-13)
        assert abs(val) >= 0.6 * INV_SQRT_2PI * 4

    def test_broadcasting(self):
        x = np.linspace(-1, 1, 5)[:, None]
        t = np.linspace(0, 0.01, 3)[None, :]
        out = axis_factor(scale_brick(64.0), x, t)
        assert out.shape == (5, 3)
        assert out[2, 1] == axis_factor(scale_brick(64.0), 0.0, 0.005)


class TestSeparable:
    def test_f1_two_axes_at_origin(self):
        R = 256.0
        ex = SeparableExample((scale_brick(R),) * 2, m=2)
        val = evaluate_separable(ex, [0.0, 0.0], 0.0)
        assert abs(val) == pytest.approx(16 / (2 * math.pi), rel=1e-13)
        assert abs(val) == pytest.approx(2.5465, abs=1e-4)

    def test_zero_weight_axis(self):
        ex = SeparableExample((scale_brick(64.0), Brick1D(0.0, 3.0, 2.0)), m=1)
        assert evaluate_separable(ex, [0.1, -0.2], 0.003) == 0

    def test_dimension_mismatch(self):
        ex = m1_example(2, 64.0)
        with pytest.raises(InvalidArgument):
            evaluate_separable(ex, [0.0, 0.0, 0.0], 0.0)
        with pytest.raises(InvalidArgument):
            evolve_separable(ex, np.zeros((4, 3)), 0.0)

    def test_vectorised_matches_pointwise(self):
        ex = m1_example(3, 64.0)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.5, 0.5, (7, 3))
        ts = rng.uniform(0, 1 / 64, 7)
        vec = evolve_separable(ex, pts, ts)
        for k in range(7):
            assert vec[k] == pytest.approx(evaluate_separable(ex, pts[k], ts[k]), rel=1e-15)

    def test_invalid_brick(self):
        with pytest.raises(InvalidArgument):
            Brick1D(1.0, 0.0, 0.0)
        with pytest.raises(InvalidArgument):
            Brick1D(-1.0, 0.0, 1.0)
        with pytest.raises(InvalidArgument):
            SeparableExample((), m=1)
        with pytest.raises(InvalidArgument):
            SeparableExample((Brick1D(1, 0, 1),), m=2)


class TestOracle:
    def test_one_dim_static(self):
        b = scale_brick(64.0)
        ex = SeparableExample((b,), m=1)
        assert direct_oracle(ex, [0.0], 0.0) == pytest.approx(axis_factor(b, 0.0, 0.0), abs=1e-8)

    def test_two_dim_random(self):
        R = 64.0
        ex = m1_example(2, R)
        rng = np.random.default_rng(11)
        for _ in range(10):
            r, th = math.sqrt(rng.uniform()), rng.uniform(0, 2 * math.pi)
            x = [r * math.cos(th), r * math.sin(th)]
            t = rng.uniform(1e-9, 1 / R)
            ref = direct_oracle(ex, x, t)
            assert abs(evaluate_separable(ex, x, t) - ref) <= 1e-6 * abs(ref)

    def test_three_dim(self):
        ex = m1_example(3, 16.0)
        x, t = [-0.3, -0.25, -0.35], 0.01
        ref = direct_oracle(ex, x, t, nodes_per_axis=64)
        assert abs(evaluate_separable(ex, x, t) - ref) <= 1e-8 * abs(ref)

    def test_node_doubling_converges(self):
        # An 8-point panel rule converges far faster than halving on smooth integrands.
        ex = m1_example(2, 64.0)
        x, t = [0.4, -0.7], 0.012
        vals = [direct_oracle(ex, x, t, nodes_per_axis=k) for k in (8, 16, 32, 64)]
        diffs = [abs(vals[i + 1] - vals[i]) for i in range(3)]
        assert diffs[1] <= diffs[0] / 2
        assert diffs[2] <= max(diffs[1] / 2, 1e-13)

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            direct_oracle(m1_example(4, 16.0), [0.0] * 4, 0.0)
        with pytest.raises(CapacityError):
            direct_oracle(m1_example(1, 16.0), [0.0], 0.0, nodes_per_axis=8192)


class TestNorm:
    def test_f1_unit_norm(self):
        for R in (2.0, 256.0, 1e6):
            assert l2_norm(SeparableExample((scale_brick(R),) * 3, m=3)) == pytest.approx(1, rel=1e-14)

    def test_single_brick(self):
        assert l2_norm(SeparableExample((Brick1D(2.0, 5.0, 4.0),), m=1)) == 4.0

    def test_tensor_norm(self):
        assert l2_norm(m1_example(3, 4096.0)) == pytest.approx(1.0, rel=1e-14)


def test_mass_conservation():
    R = 256.0
    ex = m1_example(1, R)
    x, w = np.polynomial.legendre.leggauss(8)
    panels = 4096
    h = 16.0 / panels
    c = -8.0 + h * (np.arange(panels) + 0.5)
    xs = (c[:, None] + 0.5 * h * x).ravel()
    ws = np.tile(0.5 * h * w, panels)
    u = evolve_separable(ex, xs[:, None], np.full(xs.size, 1 / (2 * R)))
    mass = np.sum(ws * np.abs(u) ** 2)
    assert abs(mass - 1.0) <= 0.02
    assert mass < 1.0  # the missing part is tail mass outside [-8, 8]
