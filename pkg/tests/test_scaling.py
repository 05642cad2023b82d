import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schromax.config import RunConfig
from schromax.errors import InvalidArgument
from schromax.scaling import (
    LadderError,
    as_rational,
    critical_p,
    fit_exponent,
    gamma_conjectured,
    ladder_exponent_predictions,
    measure_ratio_spread,
    p0,
    p1,
    run_ladder,
    slope_checks,
    theorem_exponent,
)

F = Fraction


class TestExact:
    def test_theorem_examples(self):
        assert theorem_exponent(3, 3, 2) == F(3, 8)
        assert theorem_exponent(3, 1, 3) == F(-1, 12)
        assert theorem_exponent(2, 1, "5/2") == F(3, 2) * F(-1, 10) + F(1, 4)

    def test_predictions(self):
        p = ladder_exponent_predictions(2, 1, 2)
        assert (p.amplitude, p.measure, p.lp) == (F(1, 2), F(-1, 2), F(1, 4))
        p = ladder_exponent_predictions(3, 1, 2)
        assert (p.amplitude, p.measure, p.lp) == (F(3, 4), F(-1), F(1, 4))
        p = ladder_exponent_predictions(3, 1, 3)
        assert p.lp == F(-1) * F(-1, 6) + F(1, 4) == F(5, 12)

    def test_gamma(self):
        assert gamma_conjectured(2, 2) == F(1, 3)
        assert gamma_conjectured(3, 4) == 0
        assert gamma_conjectured(3, critical_p(3)) == 0

    def test_p0_p1(self):
        assert p0(3) == F(12, 5)
        assert p1(3) == (F(30, 11), 2)
        assert p0(4) == F(20, 9)
        assert p1(4) == (F(18, 7), 2)
        assert critical_p(3) == F(8, 3)

    def test_p1_tie_goes_to_smallest_m(self):
        assert p1(1) == (F(4), 1)
        # n = 2: m = 1 gives 2 + 4/4, m = 2 gives 2 + 4/4; tie resolved to 1
        assert p1(2) == (F(3), 1)

    def test_exact_types(self):
        assert isinstance(theorem_exponent(5, 2, "7/3"), Fraction)
        with pytest.raises(InvalidArgument):
            theorem_exponent(3, 1, 2.5)
        assert as_rational("2.5") == F(5, 2)

    @pytest.mark.parametrize("args", [(3, 0, 2), (3, 4, 2), (3, 1, "1/2")])
    def test_invalid(self, args):
        with pytest.raises(InvalidArgument):
            theorem_exponent(*args)

    def test_p0_needs_n2(self):
        with pytest.raises(InvalidArgument):
            p0(1)

    def test_bad_rational(self):
        with pytest.raises(InvalidArgument):
            as_rational("five")


class TestInvariants:
    @pytest.mark.parametrize("n", range(2, 12))
    def test_bound_vanishes_at_p_of_m(self, n):
        for m in range(1, n + 1):
            p = 2 + F(4) / (n - 1 + m + F(n, m))
            assert theorem_exponent(n, m, p) == 0

    @pytest.mark.parametrize("n", range(1, 12))
    def test_equality_at_two(self, n):
        assert theorem_exponent(n, n, 2) == gamma_conjectured(n, 2)
        for m in range(1, n + 1):
            assert ladder_exponent_predictions(n, m, 2).lp == F(m, 2 * (m + 1))

    def test_ordering(self):
        for n in range(3, 51):
            assert p0(n) < critical_p(n) < p1(n)[0]

    @pytest.mark.parametrize("n", range(3, 9))
    def test_exceeds_conjecture_between_critical_and_p1(self, n):
        hi, m = p1(n)
        lo = critical_p(n)
        for k in range(1, 8):
            p = lo + (hi - lo) * F(k, 8)
            assert gamma_conjectured(n, p) == 0
            assert theorem_exponent(n, m, p) > 0

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 20), st.fractions(1, 20))
    def test_lp_prediction_identity(self, n, m, p):
        if m > n:
            n, m = m, n
        pred = ladder_exponent_predictions(n, m, p)
        # Holder on the tube: lp = amplitude + measure / p
        assert pred.lp == pred.amplitude + pred.measure / p
        assert pred.lp == theorem_exponent(n, m, p) - n * (1 / F(p) - F(1, 2))


class TestFit:
    def test_exact_power_law(self):
        fit = fit_exponent([(R, 3.0 * R ** 0.25) for R in (256, 1024, 4096, 16384)])
        assert fit.slope == pytest.approx(0.25, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
        assert fit.max_residual < 1e-12 and fit.count == 4

    def test_constant(self):
        assert fit_exponent([(10, 2.0), (100, 2.0)]).slope == pytest.approx(0, abs=1e-14)

    def test_noise_tolerance(self):
        rng = np.random.default_rng(0)
        Rs = 2.0 ** np.arange(8, 15, 2)
        for _ in range(20):
            vals = Rs ** 0.5 * (1 + 0.01 * rng.standard_normal(Rs.size))
            assert abs(fit_exponent(zip(Rs, vals)).slope - 0.5) <= 0.02

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-2, 2), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, alpha, c):
        pts = [(R, R ** alpha) for R in (4.0, 64.0, 1024.0)]
        a = fit_exponent(pts).slope
        b = fit_exponent([(R, c * v) for R, v in pts]).slope
        assert a == pytest.approx(b, abs=1e-9)
        assert a == pytest.approx(alpha, abs=1e-9)

    def test_errors(self):
        with pytest.raises(InvalidArgument):
            fit_exponent([(256, 1.0)])
        with pytest.raises(InvalidArgument):
            fit_exponent([(256, 1.0), (256, 2.0)])
        with pytest.raises(InvalidArgument, match="R=1024"):
            fit_exponent([(256, 1.0), (1024, 0.0)])

    def test_slope_checks(self):
        pred = ladder_exponent_predictions(2, 1, 2)
        fits = {"amplitude": fit_exponent([(4, 2), (16, 4)]), "measure": None,
                "lp": fit_exponent([(4, 1), (16, 2 ** 0.3)])}
        checks = slope_checks(fits, pred)
        assert checks == {"amplitude": True, "measure": None, "lp": True}


@pytest.fixture(scope="module")
def small_ladder():
    cfg = RunConfig(n=2, m=1, p="2", ladder=[256.0, 1024.0], mc_points=4000, seed=3)
    return cfg, run_ladder(cfg)


class TestLadder:
    def test_records(self, small_ladder):
        cfg, res = small_ladder
        assert [r.R for r in res.records] == [256.0, 1024.0]
        for r in res.records:
            assert r.peak >= r.threshold > 0
            assert r.measure > 0 and r.count > 0
            assert r.lp >= r.lp_tube >= r.threshold * r.measure ** 0.5
            assert r.seed == 3 and r.p == 2
        assert res.fits["amplitude"].slope == pytest.approx(0.5, abs=0.05)

    def test_deterministic(self, small_ladder):
        cfg, res = small_ladder
        again = run_ladder(cfg)
        strip = lambda recs: [(r.peak, r.measure, r.lp) for r in recs]  # noqa: E731
        assert strip(again.records) == strip(res.records)

    def test_measure_spread(self, small_ladder):
        _, res = small_ladder
        assert 1 <= measure_ratio_spread(res.records, 2, 1) < 1.5
        assert math.isnan(measure_ratio_spread(res.records[:1], 2, 1))

    def test_single_R(self):
        res = run_ladder(RunConfig(n=2, ladder=[256.0], mc_points=1000))
        assert len(res.records) == 1
        assert all(v is None for v in res.fits.values())

    def test_failure_names_R(self, tmp_path):
        cfg = RunConfig(n=2, m=2, ladder=[256.0], fhat=str(tmp_path / "missing_{R}.json"))
        with pytest.raises(LadderError) as info:
            run_ladder(cfg)
        assert info.value.R == 256.0 and info.value.records == []

    def test_non_m1_needs_file(self):
        with pytest.raises(InvalidArgument, match="fhat"):
            run_ladder(RunConfig(n=3, m=2, ladder=[256.0], mc_points=1000))
