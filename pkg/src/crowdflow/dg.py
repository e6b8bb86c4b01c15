"""Broken-P1 discontinuous Galerkin discretisation and pseudo-time iteration.

Each step solves

    (M + tau (S + U(rho_n) + R)) rho_{n+1} = M rho_n + tau f

with S the symmetric interior penalty diffusion matrix, U the upwind
advection matrix with the mobility frozen at the previous iterate, R the
Robin boundary matrix and f the inflow load.  Face terms of S and U run over
interior faces only; the Robin terms carry all boundary flux.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from . import kernels
from .mesh import Mesh
from .model import BoundarySegment, ModelParams, SegmentKind
from .quadrature import face_rule

log = logging.getLogger(__name__)

BACKWARD_ERROR_TOL = 64 * np.finfo(float).eps

if TYPE_CHECKING:
    from .analysis import FluxReport
    from .velocity import VelocityField


class LinearSolverError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class DgFunction:
    """Cell-wise linear function; ``coeffs[c, k]`` is the value at local vertex k."""

    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(
            self.mesh.n_cells, self.mesh.dim + 1
        )

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> DgFunction:
        return cls(mesh, np.full((mesh.n_cells, mesh.dim + 1), float(value)))

    @classmethod
    def from_vector(cls, mesh: Mesh, vec: np.ndarray) -> DgFunction:
        return cls(mesh, np.asarray(vec).reshape(mesh.n_cells, mesh.dim + 1))

    @classmethod
    def interpolate(cls, mesh: Mesh, func) -> DgFunction:
        """Nodal interpolation of ``func(points) -> values`` at cell vertices."""
        pts = mesh.vertices[mesh.cells].reshape(-1, mesh.dim)
        vals = np.asarray(func(pts if mesh.dim > 1 else pts[:, 0]), dtype=float)
        return cls(mesh, vals.reshape(mesh.n_cells, mesh.dim + 1))

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def copy(self) -> DgFunction:
        return DgFunction(self.mesh, self.coeffs.copy())

    def cell_gradients(self) -> np.ndarray:
        return np.einsum("ck,ckd->cd", self.coeffs, self.mesh.grads)

    def cell_means(self) -> np.ndarray:
        return self.coeffs.mean(axis=1)

    def face_traces(self, faces: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Traces from the T1 and T2 sides at the face quadrature points.

        Returns two arrays of shape (len(faces), nq); the T2 trace of a
        boundary face is NaN.
        """
        return _face_traces(self.mesh, self.coeffs, faces)

    def l2_norm(self) -> float:
        return math.sqrt(float(self.vector @ (mass_matrix(self.mesh) @ self.vector)))

    def integral(self) -> float:
        return float(np.sum(self.mesh.cell_measures * self.cell_means()))


def _face_lambdas(mesh: Mesh, faces: np.ndarray, side: int) -> np.ndarray:
    """Barycentric basis values (nfaces, nq, d+1) of the side cell at face points."""
    s, _ = face_rule(mesh.dim)
    nloc = mesh.dim + 1
    loc = mesh.face_local[faces, side]  # (nf, d)
    lam = np.zeros((len(faces), len(s), nloc))
    rows = np.arange(len(faces))
    valid = loc[:, 0] >= 0
    if mesh.dim == 1:
        lam[rows[valid], :, loc[valid, 0]] = 1.0
        return lam
    for q, sq in enumerate(s):
        lam[rows[valid], q, loc[valid, 0]] += 1.0 - sq
        lam[rows[valid], q, loc[valid, 1]] += sq
    return lam


def _face_traces(mesh: Mesh, coeffs: np.ndarray, faces=None):
    if faces is None:
        faces = np.arange(mesh.n_faces)
    faces = np.asarray(faces)
    lam1 = _face_lambdas(mesh, faces, 0)
    lam2 = _face_lambdas(mesh, faces, 1)
    T1 = mesh.face_cells[faces, 0]
    T2 = mesh.face_cells[faces, 1]
    tr1 = np.einsum("fqk,fk->fq", lam1, coeffs[T1])
    tr2 = np.einsum("fqk,fk->fq", lam2, coeffs[np.maximum(T2, 0)])
    tr2[T2 < 0] = np.nan
    return tr1, tr2


def face_average_jump(v: DgFunction, face: int) -> tuple[np.ndarray, np.ndarray]:
    """Average and jump (T1 trace minus T2 trace) at the face quadrature points."""
    mesh = v.mesh
    if mesh.face_cells[face, 1] < 0:
        raise ValueError(f"face {face} is a boundary face; use its single trace")
    tr1, tr2 = v.face_traces(np.array([face]))
    return 0.5 * (tr1[0] + tr2[0]), tr1[0] - tr2[0]


# assembly ---------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyConfig:
    eta: float = 10.0

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ValueError(f"penalty eta must be positive, got {self.eta}")


def _dofs(mesh: Mesh, cells: np.ndarray) -> np.ndarray:
    nloc = mesh.dim + 1
    return cells[:, None] * nloc + np.arange(nloc)[None, :]


def _scatter(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n: int) -> sp.csr_matrix:
    return sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)
    ).tocsr()


def _local_mass(mesh: Mesh) -> np.ndarray:
    d = mesh.dim
    nloc = d + 1
    ref = (np.ones((nloc, nloc)) + np.eye(nloc)) / ((d + 1) * (d + 2))
    return mesh.cell_measures[:, None, None] * ref[None]


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Block-diagonal P1 mass matrix (h/6 [[2,1],[1,2]] in 1D, |T|/12 (1 + I) in 2D)."""
    Ml = _local_mass(mesh)
    dofs = _dofs(mesh, np.arange(mesh.n_cells))
    rows = np.repeat(dofs[:, :, None], dofs.shape[1], axis=2)
    cols = np.repeat(dofs[:, None, :], dofs.shape[1], axis=1)
    return _scatter(rows, cols, Ml, mesh.n_dofs)


def _interior_face_data(mesh: Mesh):
    """Per interior face: dofs of both cells, jump/average basis values, weights."""
    F = mesh.interior_faces
    _, w = face_rule(mesh.dim)
    lam1 = _face_lambdas(mesh, F, 0)
    lam2 = _face_lambdas(mesh, F, 1)
    jump = np.concatenate([lam1, -lam2], axis=2)  # (nf, nq, 2(d+1))
    avg = 0.5 * np.concatenate([lam1, lam2], axis=2)
    T1, T2 = mesh.face_cells[F, 0], mesh.face_cells[F, 1]
    dofs = np.concatenate([_dofs(mesh, T1), _dofs(mesh, T2)], axis=1)
    wq = mesh.face_measures[F][:, None] * w[None, :]  # (nf, nq)
    return F, T1, T2, dofs, jump, avg, wq


def _face_scatter(dofs: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    m = dofs.shape[1]
    rows = np.repeat(dofs[:, :, None], m, axis=2)
    cols = np.repeat(dofs[:, None, :], m, axis=1)
    return _scatter(rows, cols, local, n)


def assemble_swip(mesh: Mesh, epsilon: float, penalty: PenaltyConfig = PenaltyConfig()) -> sp.csr_matrix:
    """Symmetric interior penalty matrix for -eps Laplace on the broken P1 space."""
    G = mesh.grads
    vol = epsilon * mesh.cell_measures[:, None, None] * np.einsum("cid,cjd->cij", G, G)
    dofs = _dofs(mesh, np.arange(mesh.n_cells))
    A = _face_scatter(dofs, vol, mesh.n_dofs)
    F, T1, T2, fdofs, jump, _, wq = _interior_face_data(mesh)
    if len(F) == 0:
        return A
    n = mesh.face_normals[F]
    # {grad phi} . n, constant along the face
    gn = 0.5 * np.concatenate(
        [np.einsum("fkd,fd->fk", G[T1], n), np.einsum("fkd,fd->fk", G[T2], n)], axis=1
    )
    Jw = jump * wq[:, :, None]
    Jint = Jw.sum(axis=1)  # integral of the jump of each basis function
    consistency = np.einsum("fi,fj->fij", Jint, gn)
    pen = penalty.eta * epsilon / mesh.face_h[F]
    local = -epsilon * (consistency + consistency.transpose(0, 2, 1)) + pen[:, None, None] * np.einsum(
        "fqi,fqj->fij", Jw, jump
    )
    return A + _face_scatter(fdofs, local, mesh.n_dofs)


def assemble_upwind(mesh: Mesh, velocity: VelocityField, rho_prev: DgFunction) -> sp.csr_matrix:
    """Linearised upwind advection matrix with mobility (1 - rho_prev).

    Volume:  -int rho (1 - rho_prev) u . grad(phi)          (exact, P1 x P1 x const)
    Faces:   int (1 - {rho_prev}) {u}.n {rho} [phi]
             + 1/2 |(1 - {rho_prev}) {u}.n| [rho] [phi]      (interior faces)
    """
    u = velocity.cells
    mob = 1.0 - rho_prev.coeffs
    Ml = _local_mass(mesh)
    Mm = np.einsum("cjk,ck->cj", Ml, mob)  # int phi_j (1 - rho_prev)
    ug = np.einsum("cid,cd->ci", mesh.grads, u)  # u . grad(phi_i)
    vol = -np.einsum("ci,cj->cij", ug, Mm)
    dofs = _dofs(mesh, np.arange(mesh.n_cells))
    A = _face_scatter(dofs, vol, mesh.n_dofs)
    F, T1, T2, fdofs, jump, avg, wq = _interior_face_data(mesh)
    if len(F) == 0:
        return A
    tr1, tr2 = _face_traces(mesh, rho_prev.coeffs, F)
    m_face = 1.0 - 0.5 * (tr1 + tr2)  # (nf, nq)
    un = np.einsum("fd,fd->f", 0.5 * (u[T1] + u[T2]), mesh.face_normals[F])
    wflux = m_face * un[:, None]
    centred = np.einsum("fq,fqi,fqj->fij", wq * wflux, jump, avg)
    stab = np.einsum("fq,fqi,fqj->fij", 0.5 * wq * np.abs(wflux), jump, jump)
    return A + _face_scatter(fdofs, centred + stab, mesh.n_dofs)


def assemble_boundary(mesh: Mesh, segments: Sequence[BoundarySegment]) -> tuple[sp.csr_matrix, np.ndarray]:
    """Robin matrix (alpha on inflow, beta on outflow) and the inflow load vector."""
    by_tag = {s.tag: s for s in segments}
    B = mesh.boundary_faces
    tags = mesh.face_tags[B]
    rate = np.zeros(len(B))
    is_in = np.zeros(len(B), dtype=bool)
    for i, t in enumerate(tags):
        seg = by_tag.get(str(t))
        if seg is None:
            raise ValueError(f"boundary tag {t!r} has no segment")
        if seg.kind is not SegmentKind.WALL:
            rate[i] = seg.rate
            is_in[i] = seg.kind is SegmentKind.INFLOW
    _, w = face_rule(mesh.dim)
    lam = _face_lambdas(mesh, B, 0)  # (nb, nq, d+1)
    wq = mesh.face_measures[B][:, None] * w[None, :]
    local = np.einsum("f,fq,fqi,fqj->fij", rate, wq, lam, lam)
    dofs = _dofs(mesh, mesh.face_cells[B, 0])
    A = _face_scatter(dofs, local, mesh.n_dofs)
    load = np.einsum("f,fq,fqi->fi", rate * is_in, wq, lam)
    f = np.zeros(mesh.n_dofs)
    np.add.at(f, dofs.ravel(), load.ravel())
    return A, f


# linear algebra ---------------------------------------------------------------


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    def __post_init__(self) -> None:
        n, m = self.matrix.shape
        if n != m or len(self.rhs) != n:
            raise ValueError("system must be square with a matching right-hand side")


def _bandwidth(A: sp.spmatrix) -> tuple[int, int]:
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0, 0
    d = coo.row - coo.col
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


def to_banded(A: sp.spmatrix, lower: int, upper: int) -> np.ndarray:
    """Compact band storage ab[upper + i - j, j] = A[i, j]."""
    coo = A.tocoo()
    ab = np.zeros((lower + upper + 1, A.shape[1]))
    np.add.at(ab, (upper + coo.row - coo.col, coo.col), coo.data)
    return ab


def solve_linear_system(
    system: SparseSystem, rtol: float = 1e-12, x0=None, method: str = "auto", refine: int = 3
) -> np.ndarray:
    """Solve a sparse system and check the relative residual against ``rtol``.

    Narrow-band systems (the 1D DG matrices) use banded elimination, the rest a
    sparse LU factorisation.  ``method="krylov"`` tries ILU-preconditioned
    BiCGSTAB first.
    """
    A = sp.csr_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    lower, upper = _bandwidth(A)
    x = None
    if method == "krylov":
        try:
            ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=5)
            M = spla.LinearOperator(A.shape, ilu.solve)
            x, info = spla.bicgstab(A, b, x0=x0, M=M, rtol=rtol * 0.1, atol=0.0, maxiter=500)
            if info != 0:
                x = None
        except RuntimeError:
            x = None
    if x is None:
        try:
            if max(lower, upper) <= 8 and A.shape[0] > 16:
                ab = to_banded(A, lower, upper)
                solve = lambda r: solve_banded((lower, upper), ab, r, check_finite=False)  # noqa: E731
            else:
                solve = spla.splu(A.tocsc()).solve
            x = solve(b)
            # a few rounds of iterative refinement with the same factors
            for _ in range(refine):
                r = b - A @ x
                if np.linalg.norm(r) <= rtol * bnorm:
                    break
                x = x + solve(r)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise LinearSolverError(f"factorisation failed: {exc}") from exc
    r = A @ x - b
    res = np.linalg.norm(r) / bnorm
    if not np.isfinite(res):
        raise LinearSolverError("linear solve produced non-finite values", res)
    if res > rtol:
        # Ill-conditioned systems can sit just above rtol at the round-off
        # floor; accept them only if the componentwise backward error is at
        # machine precision, otherwise report a breakdown.
        scale = abs(A) @ np.abs(x) + np.abs(b)
        berr = float(np.max(np.abs(r) / np.where(scale > 0, scale, 1.0)))
        if berr > BACKWARD_ERROR_TOL:
            raise LinearSolverError("linear solve did not reach the residual bound", res)
        log.debug("relative residual %.3e above %.0e at round-off floor (backward error %.1e)",
                    res, rtol, berr)
    return x


# operators and iteration ------------------------------------------------------


@dataclass
class Operators:
    """Step-invariant pieces of the scheme, cached for the pseudo-time loop."""

    mesh: Mesh
    velocity: VelocityField
    mass: sp.csr_matrix
    swip: sp.csr_matrix
    robin: sp.csr_matrix
    load: np.ndarray
    tau: float

    @classmethod
    def build(
        cls,
        params: ModelParams,
        mesh: Mesh,
        velocity: VelocityField,
        penalty: PenaltyConfig = PenaltyConfig(),
    ) -> Operators:
        robin, load = assemble_boundary(mesh, params.segments)
        return cls(
            mesh, velocity, mass_matrix(mesh), assemble_swip(mesh, params.epsilon, penalty),
            robin, load, params.tau,
        )

    def system(self, rho_n: DgFunction) -> SparseSystem:
        A = self.swip + assemble_upwind(self.mesh, self.velocity, rho_n) + self.robin
        return SparseSystem(
            (self.mass + self.tau * A).tocsr(), self.mass @ rho_n.vector + self.tau * self.load
        )

    def residual(self, rho: DgFunction) -> np.ndarray:
        """Stationary residual A(rho) rho - f."""
        A = self.swip + assemble_upwind(self.mesh, self.velocity, rho) + self.robin
        return A @ rho.vector - self.load


def step(rho_n: DgFunction, params: ModelParams, operators: Operators) -> DgFunction:
    """One semi-implicit pseudo-time step."""
    system = operators.system(rho_n)
    x = solve_linear_system(system, x0=rho_n.vector)
    return DgFunction.from_vector(rho_n.mesh, x)


@dataclass
class SolveReport:
    iterations: int
    final_update_norm: float
    converged: bool
    flux_summary: FluxReport | None = None
    tolerance: float = 1e-8
    kernel: str = ""
    history: list[float] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "final_update_norm": self.final_update_norm,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "kernel": self.kernel,
        }
        if self.flux_summary is not None:
            out["flux"] = self.flux_summary.as_dict()
        return out


def _is_interval_chain(mesh: Mesh) -> bool:
    if mesh.dim != 1:
        return False
    cells = mesh.cells
    return bool(np.all(cells[1:, 0] == cells[:-1, 1]))


def solve_stationary(
    params: ModelParams,
    mesh: Mesh,
    velocity: VelocityField | None = None,
    tol: float = 1e-8,
    max_iter: int = 1_000_000,
    penalty: PenaltyConfig = PenaltyConfig(),
    rho0: DgFunction | None = None,
    use_kernel: bool = True,
    record_history: bool = False,
) -> tuple[DgFunction, SolveReport]:
    """Iterate :func:`step` until ``||rho_{n+1} - rho_n||_L2 / tau <= tol``.

    Non-convergence within ``max_iter`` is flagged in the report.
    """
    from .analysis import compute_flux
    from .velocity import resolve_velocity

    if tol <= 0:
        raise ValueError("tol must be positive")
    if velocity is None:
        velocity = resolve_velocity(mesh, params.velocity, params.segments)
    ops = Operators.build(params, mesh, velocity, penalty)
    rho = rho0.copy() if rho0 is not None else DgFunction.constant(mesh, params.initial_density)

    if use_kernel and _is_interval_chain(mesh) and not record_history:
        static = (ops.mass + params.tau * (ops.swip + ops.robin)).tocsr()
        lo, up = _bandwidth(static)
        if lo <= 3 and up <= 3:
            ab = to_banded(static, 3, 3)
            x, it, norm, info = kernels.dg1d_iterate(
                np.ascontiguousarray(ab), np.ascontiguousarray(ops.load),
                np.ascontiguousarray(velocity.cells[:, 0]),
                np.ascontiguousarray(mesh.cell_measures), rho.vector.copy(),
                params.tau, tol, max_iter,
            )
            if info != 0:
                raise LinearSolverError(f"banded factorisation failed (info={info})")
            rho = DgFunction.from_vector(mesh, np.asarray(x))
            report = SolveReport(int(it), float(norm), bool(norm <= tol), tolerance=tol,
                                 kernel=kernels.IMPLEMENTATION)
            report.flux_summary = compute_flux(rho, params, mesh, velocity)
            return rho, report

    history: list[float] = []
    norm = math.inf
    it = 0
    while it < max_iter:
        new = step(rho, params, ops)
        d = new.vector - rho.vector
        norm = math.sqrt(max(float(d @ (ops.mass @ d)), 0.0)) / params.tau
        rho = new
        it += 1
        if record_history:
            history.append(norm)
        if norm <= tol:
            break
    report = SolveReport(it, norm, norm <= tol, tolerance=tol, kernel="sparse", history=history)
    report.flux_summary = compute_flux(rho, params, mesh, velocity)
    return rho, report
