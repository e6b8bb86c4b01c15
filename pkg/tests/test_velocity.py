import numpy as np
import pytest

from crowdflow.mesh import DEFAULT_DOORS, Door, GeometrySpec, build_interval_mesh, build_mesh
from crowdflow.model import BoundarySegment, VelocitySpec
from crowdflow.velocity import (
    VelocityError,
    boundary_flux_by_tag,
    divergence_residual,
    flux_balance,
    resolve_constant,
    resolve_velocity,
    solve_harmonic_potential,
)

FULL = (Door("in", "left", 0.0, 1.0), Door("out", "right", 0.0, 1.0))
FULL_SEGS = (BoundarySegment.inflow("in", 0.5), BoundarySegment.outflow("out", 0.5), BoundarySegment.wall())
DEFAULT_SEGS = (
    BoundarySegment.inflow("inflow1", 0.2), BoundarySegment.inflow("inflow2", 0.4),
    BoundarySegment.outflow("outflow1", 0.4), BoundarySegment.outflow("outflow2", 0.2),
    BoundarySegment.wall(),
)


class TestConstant:
    def test_1d(self):
        f = resolve_constant(1.0, 7)
        np.testing.assert_array_equal(f.cells, np.ones((7, 1)))

    def test_2d(self):
        f = resolve_constant((1.0, 0.0), 5, 2)
        np.testing.assert_array_equal(f.cells, np.tile([1.0, 0.0], (5, 1)))

    def test_zero_rejected(self):
        with pytest.raises(VelocityError):
            resolve_constant((0.0, 0.0), 3, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(VelocityError):
            resolve_constant((1.0, 0.0), 3, 1)

    def test_linear_potential(self):
        mesh = build_mesh(GeometrySpec.corridor(6, 20))
        f = resolve_velocity(mesh, VelocitySpec.linear_potential(1.0, 0.0))
        np.testing.assert_array_equal(f.cells, np.tile([1.0, 0.0], (mesh.n_cells, 1)))
        np.testing.assert_allclose(f.potential, mesh.vertices[:, 0])


@pytest.mark.parametrize("method", ["p1", "mixed"])
class TestHarmonic:
    def test_all_wall(self, method):
        mesh = build_mesh(GeometrySpec.corridor(6, 4, ()))
        f = solve_harmonic_potential(mesh, (BoundarySegment.wall(),), method=method)
        np.testing.assert_allclose(f.cells, 0.0, atol=1e-12)

    def test_full_edges(self, method):
        mesh = build_mesh(GeometrySpec.corridor(8, 5, FULL))
        f = solve_harmonic_potential(mesh, FULL_SEGS, method=method)
        np.testing.assert_allclose(f.cells, np.tile([1.0, 0.0], (mesh.n_cells, 1)), atol=1e-10)

    def test_incompatible(self, method):
        doors = (Door("in", "left", 0.0, 1.0), Door("out", "right", 0.0, 0.5))
        mesh = build_mesh(GeometrySpec.corridor(4, 4, doors))
        with pytest.raises(VelocityError, match="Neumann"):
            solve_harmonic_potential(mesh, FULL_SEGS, method=method)

    def test_default_corridor_direction(self, method):
        mesh = build_mesh(GeometrySpec.corridor(40, 20))
        f = solve_harmonic_potential(mesh, DEFAULT_SEGS, method=method)
        un = f.face_normal_velocity(mesh)
        for d in DEFAULT_DOORS:
            faces = mesh.faces_with_tag(d.tag)
            if d.side == "left":
                assert np.all(un[faces] < 0)  # enters the domain: away from the entrance
            else:
                assert np.all(un[faces] > 0)
        assert mesh.tag_measure("inflow1") + mesh.tag_measure("inflow2") == pytest.approx(0.4)

    def test_flux_balance(self, method):
        mesh = build_mesh(GeometrySpec.obstacle(40, 20))
        f = solve_harmonic_potential(mesh, DEFAULT_SEGS, method=method)
        tol = 1e-8 if method == "mixed" else 1e-2
        assert abs(flux_balance(f, mesh)) <= tol

    def test_unknown_tag(self, method):
        mesh = build_mesh(GeometrySpec.corridor(4, 20))
        with pytest.raises(VelocityError):
            solve_harmonic_potential(mesh, (BoundarySegment.wall(),), method=method)


def test_mixed_is_divergence_free_with_exact_door_fluxes():
    mesh = build_mesh(GeometrySpec.obstacle(40, 20))
    f = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="mixed")
    assert divergence_residual(f, mesh) <= 1e-10
    flux = boundary_flux_by_tag(f, mesh)
    for d in DEFAULT_DOORS:
        sign = -1.0 if d.side == "left" else 1.0
        assert flux[d.tag] == pytest.approx(sign * mesh.tag_measure(d.tag), abs=1e-12)
    assert flux["wall"] == pytest.approx(0.0, abs=1e-12)


def test_p1_divergence_is_reported():
    mesh = build_mesh(GeometrySpec.corridor(40, 20))
    f = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="p1")
    r = divergence_residual(f, mesh)
    assert np.isfinite(r) and r > 1e-6


def test_p1_gauge_invariance():
    mesh = build_mesh(GeometrySpec.obstacle(30, 20))
    a = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="p1", pin=None)
    b = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="p1", pin=len(mesh.vertices) // 2)
    np.testing.assert_allclose(a.potential - a.potential.mean(), b.potential - b.potential.mean(), atol=1e-10)
    np.testing.assert_allclose(a.cells, b.cells, atol=1e-10)
    assert a.potential[mesh.face_vertices[mesh.boundary_faces[0]][0]] == 0.0


def test_methods_agree_under_refinement():
    diffs = []
    for nx, ny in ((20, 20), (40, 40)):
        mesh = build_mesh(GeometrySpec.corridor(nx, ny))
        a = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="p1")
        b = solve_harmonic_potential(mesh, DEFAULT_SEGS, method="mixed")
        diffs.append(float(np.sqrt(np.sum(mesh.cell_measures[:, None] * (a.cells - b.cells) ** 2))))
    assert diffs[1] < diffs[0]


def test_1d_harmonic_is_constant():
    mesh = build_interval_mesh(10)
    f = solve_harmonic_potential(mesh, (BoundarySegment.inflow("inflow", 0.3),
                                        BoundarySegment.outflow("outflow", 0.3)))
    np.testing.assert_allclose(f.cells, 1.0, atol=1e-12)
