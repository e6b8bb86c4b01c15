"""Per-cell constant velocity fields, including the harmonic corridor field.

The harmonic field u = grad V with -Laplace V = 0, dV/dn = -1 on inflow,
+1 on outflow and 0 on walls can be computed two ways:

``"p1"``
    continuous P1 Neumann problem for V, pinned at the first boundary vertex.
    Cheap, but the resulting field is only approximately divergence-free.
``"mixed"``
    lowest-order flux-conforming discretisation, realised through a P1
    stream function psi with u = (d psi/dy, -d psi/dx).  The boundary values
    of psi follow from integrating the prescribed normal flux along the
    outer boundary; every hole carries one unknown constant, fixed by
    requiring zero circulation around it.  Normal components are continuous
    across faces and every cell is exactly divergence-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh
from .model import BoundarySegment, SegmentKind, VelocityKind, VelocitySpec

COMPATIBILITY_TOL = 1e-10


class VelocityError(ValueError):
    pass


@dataclass(frozen=True)
class VelocityField:
    cells: np.ndarray  # (n_cells, dim)
    source: VelocitySpec
    potential: np.ndarray | None = None  # vertex values of V, when one exists
    stream: np.ndarray | None = None  # vertex values of psi for the mixed method
    method: str = ""

    def __post_init__(self) -> None:
        self.cells.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.cells.shape[1]

    def face_normal_velocity(self, mesh: Mesh) -> np.ndarray:
        """{u}.n_F on interior faces, the one-sided trace on boundary faces."""
        T1, T2 = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
        u1 = self.cells[T1]
        u2 = np.where((T2 >= 0)[:, None], self.cells[np.maximum(T2, 0)], u1)
        return np.einsum("fd,fd->f", 0.5 * (u1 + u2), mesh.face_normals)


def resolve_constant(direction, n_cells: int = 1, dim: int | None = None) -> VelocityField:
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    if dim is not None and v.size != dim:
        raise VelocityError(f"velocity has {v.size} components, mesh dimension is {dim}")
    if not np.any(v != 0.0):
        raise VelocityError("velocity vector must be nonzero")
    return VelocityField(np.tile(v, (n_cells, 1)), VelocitySpec.constant(*v), method="constant")


def resolve_velocity(
    mesh: Mesh, spec: VelocitySpec, segments: Sequence[BoundarySegment] | None = None
) -> VelocityField:
    if spec.kind is VelocityKind.CONSTANT:
        f = resolve_constant(spec.vector, mesh.n_cells, mesh.dim)
        return VelocityField(f.cells.copy(), spec, method="constant")
    if spec.kind is VelocityKind.GRADIENT_OF_LINEAR:
        f = resolve_constant(spec.vector, mesh.n_cells, mesh.dim)
        V = mesh.vertices @ np.asarray(spec.vector, dtype=float)
        return VelocityField(f.cells.copy(), spec, potential=V, method="linear")
    return solve_harmonic_potential(mesh, segments, method=spec.method, spec=spec)


# harmonic field ---------------------------------------------------------------


def _segment_kinds(mesh: Mesh, segments: Sequence[BoundarySegment] | None) -> dict[str, SegmentKind]:
    kinds: dict[str, SegmentKind] = {}
    by_tag = {s.tag: s.kind for s in segments} if segments is not None else {}
    for tag in mesh.boundary_tag_names():
        if tag in by_tag:
            kinds[tag] = by_tag[tag]
        elif segments is None and tag.startswith("inflow"):
            kinds[tag] = SegmentKind.INFLOW
        elif segments is None and tag.startswith("outflow"):
            kinds[tag] = SegmentKind.OUTFLOW
        elif segments is None and tag.startswith("wall"):
            kinds[tag] = SegmentKind.WALL
        else:
            raise VelocityError(f"boundary tag {tag!r} has no segment")
    return kinds


def boundary_normal_data(mesh: Mesh, segments: Sequence[BoundarySegment] | None = None) -> np.ndarray:
    """Prescribed dV/dn per boundary face (aligned with ``mesh.boundary_faces``)."""
    kinds = _segment_kinds(mesh, segments)
    value = {SegmentKind.INFLOW: -1.0, SegmentKind.OUTFLOW: 1.0, SegmentKind.WALL: 0.0}
    return np.array([value[kinds[str(t)]] for t in mesh.face_tags[mesh.boundary_faces]])


def p1_stiffness(mesh: Mesh) -> sp.csr_matrix:
    G = mesh.grads
    local = mesh.cell_measures[:, None, None] * np.einsum("cid,cjd->cij", G, G)
    m = mesh.dim + 1
    rows = np.repeat(mesh.cells[:, :, None], m, axis=2)
    cols = np.repeat(mesh.cells[:, None, :], m, axis=1)
    n = len(mesh.vertices)
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def solve_harmonic_potential(
    mesh: Mesh,
    segments: Sequence[BoundarySegment] | None = None,
    method: str = "mixed",
    pin: int | None = None,
    spec: VelocitySpec | None = None,
) -> VelocityField:
    """Velocity u = grad V_m of the harmonic corridor potential.

    ``method`` is ``"mixed"`` (exactly divergence-free, the default) or
    ``"p1"``; in 1D both reduce to the P1 solve, which is exact there.
    ``pin`` selects the vertex fixed to zero in the P1 solve (default: first
    vertex of the first boundary face).
    """
    if method not in ("mixed", "p1"):
        raise VelocityError(f"unknown harmonic method {method!r}")
    spec = spec or VelocitySpec.harmonic(method)
    g = boundary_normal_data(mesh, segments)
    B = mesh.boundary_faces
    net = float(np.sum(g * mesh.face_measures[B]))
    if abs(net) > COMPATIBILITY_TOL:
        raise VelocityError(
            f"inflow and outflow measures differ by {net:.3e}; the Neumann problem has no solution"
        )
    if method == "mixed" and mesh.dim == 2:
        psi = _stream_function(mesh, g)
        grad = np.einsum("ck,ckd->cd", psi[mesh.cells], mesh.grads)
        u = np.stack([grad[:, 1], -grad[:, 0]], axis=1)
        return VelocityField(u, spec, stream=psi, method="mixed")
    V = _neumann_p1(mesh, g, pin)
    u = np.einsum("ck,ckd->cd", V[mesh.cells], mesh.grads)
    return VelocityField(u, spec, potential=V, method="p1")


def _neumann_p1(mesh: Mesh, g: np.ndarray, pin: int | None) -> np.ndarray:
    n = len(mesh.vertices)
    K = p1_stiffness(mesh)
    b = np.zeros(n)
    B = mesh.boundary_faces
    share = (g * mesh.face_measures[B] / mesh.dim)[:, None]
    np.add.at(b, mesh.face_vertices[B].ravel(), np.repeat(share, mesh.dim, axis=1).ravel())
    if pin is None:
        pin = int(mesh.face_vertices[B[0], 0])
    if not 0 <= pin < n:
        raise VelocityError(f"pin vertex {pin} out of range")
    keep = np.flatnonzero(np.arange(n) != pin)
    Kr = K[keep][:, keep].tocsc()
    try:
        x = spla.splu(Kr).solve(b[keep])
    except RuntimeError as exc:
        raise VelocityError(f"pinned Neumann system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise VelocityError("pinned Neumann system is singular")
    V = np.zeros(n)
    V[keep] = x
    return V


def _boundary_loops(mesh: Mesh) -> tuple[list[list[int]], dict[tuple[int, int], int]]:
    """Boundary vertex loops, each oriented with the domain on the left."""
    nxt: dict[int, int] = {}
    edge_face: dict[tuple[int, int], int] = {}
    for k, f in enumerate(mesh.boundary_faces):
        a, b = (int(v) for v in mesh.face_vertices[f])
        c = int(mesh.face_cells[f, 0])
        third = [v for v in mesh.cells[c] if v != a and v != b][0]
        P = mesh.vertices
        cross = (P[b, 0] - P[a, 0]) * (P[third, 1] - P[a, 1]) - (P[b, 1] - P[a, 1]) * (P[third, 0] - P[a, 0])
        if cross < 0:
            a, b = b, a
        if a in nxt:
            raise VelocityError("boundary is not a union of simple loops")
        nxt[a] = b
        edge_face[(a, b)] = k
    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        v = nxt[start]
        while v != start:
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(loop)
    return loops, edge_face


def _stream_function(mesh: Mesh, g: np.ndarray) -> np.ndarray:
    loops, edge_face = _boundary_loops(mesh)
    P = mesh.vertices
    measures = mesh.face_measures[mesh.boundary_faces]

    def signed_area(loop):
        x, y = P[loop, 0], P[loop, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    # with the domain on the left, the outer loop is the counterclockwise one
    areas = [signed_area(lp) for lp in loops]
    outer = int(np.argmax(areas))
    n = len(P)
    psi_d = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    loop = loops[outer]
    for a, b in zip(loop, loop[1:]):
        k = edge_face[(a, b)]
        psi_d[b] = psi_d[a] + g[k] * measures[k]
    fixed[loop] = True
    # free unknowns: interior vertices, plus one shared unknown per hole
    col = -np.ones(n, dtype=np.int64)
    interior = np.flatnonzero(~fixed)
    hole_vertices = set()
    for i, lp in enumerate(loops):
        if i != outer:
            flux = sum(g[edge_face[(a, b)]] * measures[edge_face[(a, b)]] for a, b in zip(lp, lp[1:] + lp[:1]))
            if abs(flux) > COMPATIBILITY_TOL:
                raise VelocityError("inflow/outflow on an interior hole is not supported by the mixed method")
            hole_vertices.update(lp)
    free = [v for v in interior if v not in hole_vertices]
    col[free] = np.arange(len(free))
    m = len(free)
    for i, lp in enumerate(loops):
        if i != outer:
            col[lp] = m
            m += 1
    rows = np.flatnonzero(col >= 0)
    Pm = sp.csr_matrix((np.ones(len(rows)), (rows, col[rows])), shape=(n, m))
    K = p1_stiffness(mesh)
    A = (Pm.T @ K @ Pm).tocsc()
    rhs = -(Pm.T @ (K @ psi_d))
    psi = psi_d.copy()
    if m:
        psi += Pm @ spla.splu(A).solve(rhs)
    return psi


# diagnostics ------------------------------------------------------------------


def divergence_residual(field: VelocityField, mesh: Mesh) -> float:
    """sum over cells of |integral over the cell boundary of u.n| using face values {u}.n."""
    un = field.face_normal_velocity(mesh) * mesh.face_measures
    net = np.zeros(mesh.n_cells)
    T1, T2 = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    np.add.at(net, T1, un)
    inner = T2 >= 0
    np.add.at(net, T2[inner], -un[inner])
    return float(np.sum(np.abs(net)))


def boundary_flux_by_tag(field: VelocityField, mesh: Mesh) -> dict[str, float]:
    """Integral of u.n over the boundary faces of each tag."""
    un = field.face_normal_velocity(mesh) * mesh.face_measures
    out: dict[str, float] = {}
    for f in mesh.boundary_faces:
        t = str(mesh.face_tags[f])
        out[t] = out.get(t, 0.0) + float(un[f])
    return out


def flux_balance(field: VelocityField, mesh: Mesh) -> float:
    return float(sum(boundary_flux_by_tag(field, mesh).values()))
