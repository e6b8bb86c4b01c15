import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdflow.dg import DgFunction
from crowdflow.mesh import build_interval_mesh
from crowdflow.model import (
    BoundarySegment,
    EntropyState,
    ModelParams,
    SegmentKind,
    VelocitySpec,
    entropy,
    mobility,
    mobility_cosh,
    psi_to_rho,
    rho_to_psi,
)


class TestTransform:
    def test_examples(self):
        assert rho_to_psi(0.5, 0.0) == 0.0
        assert rho_to_psi(0.5, 2.0) == pytest.approx(-2.0, abs=1e-15)
        assert rho_to_psi(0.8, 0.0) == pytest.approx(math.log(4.0), rel=1e-14)
        assert rho_to_psi(0.8) == pytest.approx(1.3862944, abs=1e-7)
        assert psi_to_rho(0.0, 0.0) == 0.5

    @pytest.mark.parametrize("r", np.round(np.arange(0.01, 1.0, 0.01), 2))
    def test_inverse_grid(self, r):
        for V in (-3.0, 0.0, 1.5):
            assert psi_to_rho(rho_to_psi(r, V), V) == pytest.approx(r, abs=1e-12)

    def test_large_argument_no_overflow(self):
        with np.errstate(over="raise"):
            v = psi_to_rho(50.0, 0.0)
            w = psi_to_rho(-800.0, 0.0)
        # 1 - 1e-21 rounds to 1.0 in double precision
        assert 1.0 - 1e-21 <= v <= 1.0 and math.isfinite(v)
        assert 0.0 <= w < 1e-300

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.2, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            rho_to_psi(bad)

    def test_vectorised(self):
        r = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(psi_to_rho(rho_to_psi(r, 0.3), 0.3), r, atol=1e-15)

    def test_state(self):
        s = EntropyState.from_rho(0.25, 1.0)
        assert psi_to_rho(s.psi, s.V) == pytest.approx(0.25, abs=1e-15)
        t = EntropyState.from_psi(-2.0, 0.5)
        assert t.rho == pytest.approx(math.exp(-1.5) / (1 + math.exp(-1.5)), rel=1e-15)

    @given(st.floats(1e-6, 1 - 1e-6), st.floats(-10.0, 10.0))
    def test_roundtrip_property(self, r, V):
        assert abs(psi_to_rho(rho_to_psi(r, V), V) - r) <= 1e-12


class TestMobility:
    def test_examples(self):
        assert mobility(0.0, 0.0) == 0.25
        assert mobility(3.0, -3.0) == 0.25
        assert mobility(5.0, 0.0) == pytest.approx(1.0 / (2.0 * (1.0 + math.cosh(5.0))), rel=1e-14)
        assert mobility(5.0) == pytest.approx(0.0066480567, abs=1e-10)

    def test_equals_rho_one_minus_rho(self):
        z = np.linspace(-20, 20, 81)
        r = psi_to_rho(z)
        np.testing.assert_allclose(mobility(z), r * (1 - r), rtol=1e-12, atol=1e-15)

    @given(st.floats(-30.0, 30.0), st.floats(-30.0, 30.0))
    def test_bounded_by_quarter(self, psi, V):
        m = mobility(psi, V)
        assert 0.0 < m <= 0.25
        if abs(psi + V) > 1e-7:  # closer to 0 the deficit is below round-off
            assert m < 0.25

    @given(st.floats(-15.0, 15.0), st.floats(-15.0, 15.0))
    def test_dual_formula(self, psi, V):
        a, b = mobility(psi, V), mobility_cosh(psi, V)
        assert abs(a - b) <= 1e-14 * b


class TestEntropy:
    def test_constant_half(self):
        mesh = build_interval_mesh(10)
        rho = DgFunction.constant(mesh, 0.5)
        assert entropy(rho, DgFunction.constant(mesh, 0.0), mesh) == pytest.approx(math.log(0.5), abs=1e-14)
        assert entropy(rho, DgFunction.constant(mesh, 1.0), mesh) == pytest.approx(math.log(0.5) - 0.5, abs=1e-14)
        assert entropy(rho, None, mesh) == pytest.approx(-0.6931472, abs=1e-7)

    def test_linear_profile(self):
        # int_0^1 x log x + (1-x) log(1-x) dx = -1/2; the log singularity
        # limits the quadrature error to O(h^2 log h)
        errs = []
        for n in (50, 400):
            mesh = build_interval_mesh(n)
            rho = DgFunction.interpolate(mesh, lambda x: x)
            errs.append(abs(entropy(rho, None, mesh) + 0.5))
        assert errs[1] < 1e-4 and errs[1] < errs[0]

    def test_clipping_keeps_endpoints_finite(self):
        mesh = build_interval_mesh(4)
        for c in (0.0, 1.0):
            assert entropy(DgFunction.constant(mesh, c), None, mesh) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("V", [-1.0, 0.0, 0.7])
    def test_minimiser_over_constants(self, V):
        mesh = build_interval_mesh(2)
        Vf = DgFunction.constant(mesh, V)
        cs = np.linspace(0.001, 0.999, 9981)
        vals = [entropy(DgFunction.constant(mesh, c), Vf, mesh) for c in cs]
        best = cs[int(np.argmin(vals))]
        assert best == pytest.approx(math.exp(V) / (1 + math.exp(V)), abs=2e-4)


class TestParams:
    def test_defaults(self):
        p = ModelParams.one_dimensional(0.1, 0.3, 0.6)
        assert p.tau == 0.01 and p.initial_density == 0.5
        assert p.alpha == 0.3 and p.beta == 0.6
        assert p.segment("inflow").kind is SegmentKind.INFLOW

    @pytest.mark.parametrize("kw", [
        {"epsilon": 0.0}, {"epsilon": -1.0}, {"tau": 0.0}, {"initial_density": 1.5},
    ])
    def test_invalid(self, kw):
        args = {"epsilon": 0.1, "velocity": VelocitySpec.constant(1.0),
                "segments": (BoundarySegment.wall(),), **kw}
        with pytest.raises(ValueError):
            ModelParams(**args)

    @pytest.mark.parametrize("rate", [-0.01, 1.01])
    def test_rate_range(self, rate):
        with pytest.raises(ValueError):
            BoundarySegment.inflow("in", rate)
        with pytest.raises(ValueError):
            BoundarySegment.outflow("out", rate)

    def test_rate_edges_accepted(self):
        BoundarySegment.inflow("a", 0.0)
        BoundarySegment.outflow("b", 1.0)

    def test_duplicate_tags(self):
        with pytest.raises(ValueError):
            ModelParams(0.1, VelocitySpec.constant(1.0),
                        (BoundarySegment.inflow("x", 0.1), BoundarySegment.outflow("x", 0.2)))
