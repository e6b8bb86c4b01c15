import math

import numpy as np
import pytest

from crowdflow import analytic1d as A
from oracles import bvp_flux, derivative, quarter_partner_beta, quarter_partner_beta_root


class TestConstant:
    def test_examples(self):
        assert A.constant_solution(0.5, 0.5) == (0.5, 0.25)
        rho, j = A.constant_solution(0.3, 0.7)
        assert rho == 0.3 and j == pytest.approx(0.21, abs=1e-15)
        assert A.constant_solution(0.3, 0.5) is None

    def test_rate_range(self):
        with pytest.raises(ValueError):
            A.constant_solution(1.2, -0.2)


class TestQuarterFlux:
    def test_c1_example(self):
        c1, _ = A.quarterflux_constants(0.01, 0.4912, 0.7)
        assert c1 == pytest.approx(-1.1163636, abs=1e-7)
        assert c1 < -1

    def test_c2_matches_on_the_boundary(self):
        c1, c2 = A.quarterflux_constants(0.01, 0.4912, 0.603773585)
        assert c2 == pytest.approx(c1, abs=1e-6)

    def test_constant_branch_disjoint(self):
        c1, c2 = A.quarterflux_constants(0.05, 0.3, 0.7)
        assert abs(c1 - c2) > 1e-3

    def test_division_at_half(self):
        with pytest.raises(ZeroDivisionError):
            A.quarterflux_constants(0.1, 0.5, 0.7)
        with pytest.raises(ZeroDivisionError):
            A.quarterflux_constants(0.1, 0.3, 0.5)

    def test_evaluation_example(self):
        sol = A.QuarterFluxProfile(-1.1163636, 0.01)
        r0 = A.eval_explicit(sol, 0.0)
        assert r0 == pytest.approx(0.4910426, abs=1e-6)  # 0.49104234...
        assert 0.4912 * (1 - r0) == pytest.approx(0.25, abs=1e-4)

    def test_pole_rejected(self):
        for c in (-0.5, -1.0, 0.0):
            with pytest.raises(A.InadmissibleSolutionError):
                A.QuarterFluxProfile(c, 0.01)


class TestPhaseBoundary:
    def test_reference_value(self):
        assert A.phase_boundary_beta(0.01, 0.4912) == pytest.approx(0.603773585, abs=1e-6)

    @pytest.mark.parametrize("eps", [0.1, 0.05, 0.01, 0.001])
    def test_against_boundary_data(self, eps):
        lo = A.phase_boundary_lower_limit(eps)
        for a in lo + (0.5 - lo) * np.linspace(0.05, 0.99, 7):
            b = A.phase_boundary_beta(eps, a)
            assert b == pytest.approx(quarter_partner_beta(eps, a), rel=1e-12)
            assert b == pytest.approx(quarter_partner_beta_root(eps, a), rel=1e-10)

    def test_limit_at_half(self):
        assert A.phase_boundary_beta(0.1, 0.5) == pytest.approx(0.5, abs=1e-15)
        assert A.phase_boundary_beta(0.1, 0.5 - 1e-9) == pytest.approx(0.5, abs=1e-7)

    def test_involution_and_symmetry(self):
        for eps in (0.1, 0.01):
            lo = A.phase_boundary_lower_limit(eps)
            a = 0.5 * (lo + 0.5)
            b = A.phase_boundary_beta(eps, a)
            assert A.phase_boundary_alpha(eps, a) == b
            # (a, b) and (b, a) both satisfy the boundary data
            assert quarter_partner_beta(eps, a) == pytest.approx(b, rel=1e-12)

    def test_lower_limit(self):
        assert A.phase_boundary_lower_limit(0.01) == pytest.approx(0.4903846, abs=1e-7)
        # the denominator vanishes at the lower limit
        with pytest.raises(ValueError):
            A.phase_boundary_beta(0.01, A.phase_boundary_lower_limit(0.01))
        with pytest.raises(ValueError):
            A.phase_boundary_beta(0.01, 0.6)

    def test_curve(self):
        curve = A.phase_boundary_curve(0.01, 21)
        assert len(curve) == 41
        assert curve[0].alpha == pytest.approx(0.4904, abs=2e-4)
        assert curve[20].alpha == curve[20].beta == 0.5
        for s in curve:
            assert 0 < s.alpha <= 1 and 0 < s.beta <= 1
            small, big = sorted((s.alpha, s.beta))
            if small < 0.5:
                assert quarter_partner_beta(0.01, small) == pytest.approx(big, rel=1e-9)
        sides = {s.side for s in curve[:20]}
        assert sides == {A.BoundarySide.ALPHA_LIMITED}
        with pytest.raises(ValueError):
            A.phase_boundary_curve(0.01, 1)

    def test_curve_collapses(self):
        spread = [max(abs(s.alpha - 0.5) + abs(s.beta - 0.5) - abs(max(s.alpha, s.beta) - 0.5)
                      for s in A.phase_boundary_curve(eps, 51)) for eps in (0.1, 0.01, 0.001)]
        assert spread[0] > spread[1] > spread[2]
        assert spread[2] < 2e-3


class TestNewton:
    def test_against_shooting(self):
        j, c = A.solve_flux_newton(0.1, 0.7, 0.7)
        assert j > 0.25
        assert j == pytest.approx(A.shooting_solve(0.1, 0.7, 0.7).j, abs=1e-6)
        sol = A.TrigProfile(j, c, 0.1)
        assert max(A.bc_residuals(sol, 0.7, 0.7)) <= 1e-10

    def test_against_collocation(self):
        j, _ = A.solve_flux_newton(0.1, 0.7, 0.9)
        assert j == pytest.approx(bvp_flux(0.1, 0.7, 0.9, 0.26)[0], abs=1e-7)

    def test_no_root_influx_limited(self):
        with pytest.raises(A.NoRootError):
            A.solve_flux_newton(0.1, 0.2, 0.4)
        assert A.shooting_solve(0.1, 0.2, 0.4).j < 0.25

    def test_half_half_has_no_root(self):
        # the constant profile carries j = 1/4 exactly at alpha = beta = 1/2
        with pytest.raises(A.NoRootError):
            A.solve_flux_newton(0.1, 0.5, 0.5)

    def test_monotone_approach_to_quarter(self):
        js = [A.solve_flux_newton(eps, 0.6, 0.6)[0] for eps in (0.1, 0.01, 0.001)]
        assert all(j > 0.25 for j in js)
        assert js[0] > js[1] > js[2]
        assert js[2] - 0.25 < 1e-4


class TestExplicit:
    CASES = [
        (0.1, 0.5, 0.5), (0.05, 0.3, 0.7), (0.1, 0.7, 0.7), (0.05, 0.6, 0.9),
        (0.1, 0.2, 0.4), (0.05, 0.4, 0.2), (0.01, 0.2, 0.4), (0.01, 0.4, 0.2),
        (0.1, 0.45, 0.9), (0.01, 0.4912, 0.603773584905660), (0.1, 0.3, 0.3),
    ]

    @pytest.mark.parametrize("eps,a,b", CASES)
    def test_ode_and_boundary(self, eps, a, b):
        sol = A.solve_explicit(eps, a, b)
        x = np.linspace(0.0, 1.0, 100)
        rho = A.eval_explicit(sol, x)
        res = -eps * derivative(sol, x) + rho * (1 - rho) - sol.j
        assert np.max(np.abs(res)) <= 1e-10
        assert max(A.bc_residuals(sol, a, b)) <= 1e-10

    @pytest.mark.parametrize("eps,a,b", CASES)
    def test_matches_shooting(self, eps, a, b):
        sol = A.solve_explicit(eps, a, b)
        sh = A.shooting_solve(eps, a, b)
        assert sol.j == pytest.approx(sh.j, abs=1e-6)
        np.testing.assert_allclose(A.eval_explicit(sol, sh.x[::100]), sh.rho[::100], atol=1e-6)

    def test_branch_selection(self):
        assert isinstance(A.solve_explicit(0.1, 0.5, 0.5), A.ConstantProfile)
        assert isinstance(A.solve_explicit(0.1, 0.7, 0.7), A.TrigProfile)
        assert isinstance(A.solve_explicit(0.1, 0.2, 0.4), A.HyperbolicProfile)
        b = A.phase_boundary_beta(0.1, 0.47)
        assert isinstance(A.solve_explicit(0.1, 0.47, b), A.QuarterFluxProfile)

    def test_trig_to_quarter_limit(self):
        eps, c = 0.01, -1.1163636
        q = A.QuarterFluxProfile(c, eps)
        j = 0.25 + 1e-8
        k = math.sqrt(4 * j - 1)
        # tan(d - pi/2) = -cot(d) ~ -1/d, so shifting c by pi eps / k reproduces eps / (x + c)
        t = A.TrigProfile(j, c - math.pi * eps / k, eps)
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(t(x), q(x), atol=1e-4)

    def test_eval_domain(self):
        with pytest.raises(ValueError):
            A.eval_explicit(A.ConstantProfile(0.5, 0.25), 1.5)
        assert A.eval_explicit(A.ConstantProfile(0.5, 0.25), 0.3) == 0.5


class TestShooting:
    def test_half_half(self):
        for eps in (0.1, 0.01):
            r = A.shooting_solve(eps, 0.5, 0.5)
            assert r.j == pytest.approx(0.25, abs=1e-10)
            np.testing.assert_allclose(r.rho, 0.5, atol=1e-8)

    def test_influx_limited(self):
        r = A.shooting_solve(0.01, 0.2, 0.4)
        assert 0.15 < r.j < 0.17
        mid = r.rho[(r.x > 0.2) & (r.x < 0.8)]
        np.testing.assert_allclose(mid, 0.2, atol=1e-3)
        assert r.landing_residual <= 1e-10

    def test_outflux_limited(self):
        r = A.shooting_solve(0.01, 0.4, 0.2)
        mid = r.rho[(r.x > 0.2) & (r.x < 0.8)]
        np.testing.assert_allclose(mid, 0.8, atol=1e-3)

    @pytest.mark.parametrize("eps,a,b", [(0.1, 0.2, 0.4), (0.1, 0.6, 0.3), (0.05, 0.7, 0.8), (0.2, 0.9, 0.1)])
    def test_against_collocation(self, eps, a, b):
        r = A.shooting_solve(eps, a, b)
        assert r.j == pytest.approx(bvp_flux(eps, a, b)[0], abs=1e-7)
        assert r.richardson_error < 1e-9

    def test_maximum_principle(self):
        for eps, a, b in [(0.01, 0.2, 0.4), (0.01, 0.4, 0.2), (0.1, 0.7, 0.9), (0.05, 0.3, 0.1)]:
            r = A.shooting_solve(eps, a, b)
            lo, hi = min(a, 1 - b), max(a, 1 - b)
            assert r.rho.min() >= lo - 1e-8 and r.rho.max() <= hi + 1e-8

    def test_monotone_in_rates(self):
        rates = np.linspace(0.05, 1.0, 20)
        J = np.array([[A.shooting_solve(0.1, a, b, richardson=False).j for b in rates] for a in rates])
        assert np.all(np.diff(J, axis=0) >= -1e-9)
        assert np.all(np.diff(J, axis=1) >= -1e-9)

    def test_rate_domain(self):
        with pytest.raises(ValueError):
            A.shooting_solve(0.1, 0.0, 0.5)
