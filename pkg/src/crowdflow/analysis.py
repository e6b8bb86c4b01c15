"""Fluxes, balance residuals, a-priori estimate checks and the phase-diagram scan."""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import directed_hausdorff
from skimage import measure

from .dg import DgFunction, PenaltyConfig, solve_stationary
from .mesh import Mesh, build_interval_mesh
from .model import ModelParams, SegmentKind
from .quadrature import cell_rule, face_rule
from .velocity import VelocityField

CLASSIFICATION_TOL = 1e-3
ESTIMATE_SLACK = 0.1
ESTIMATE_ATOL = 1e-10


class Phase(str, enum.Enum):
    INFLUX_LIMITED = "InfluxLimited"
    OUTFLUX_LIMITED = "OutfluxLimited"
    MAXIMAL_CURRENT = "MaximalCurrent"


def classify(j: float, alpha: float, beta: float, tol: float = CLASSIFICATION_TOL) -> Phase:
    if j >= 0.25 - tol:
        return Phase.MAXIMAL_CURRENT
    return Phase.INFLUX_LIMITED if alpha <= beta else Phase.OUTFLUX_LIMITED


# fluxes -----------------------------------------------------------------------


@dataclass(frozen=True)
class FluxReport:
    """Flux diagnostics of a DG solution.

    In 1D ``mean_flux`` and ``flux_stddev`` are taken over the cell means of
    j = -eps rho' + rho (1 - rho) u.  In 2D ``mean_flux`` is the outflow
    total divided by the outflow measure and ``flux_stddev`` is NaN.
    """

    mean_flux: float
    flux_stddev: float
    inflow_total: float
    outflow_total: float

    @property
    def balance_residual(self) -> float:
        return abs(self.inflow_total - self.outflow_total)

    def as_dict(self) -> dict:
        return {
            "mean_flux": self.mean_flux,
            "flux_stddev": self.flux_stddev,
            "inflow_total": self.inflow_total,
            "outflow_total": self.outflow_total,
            "balance_residual": self.balance_residual,
        }


def cell_fluxes(rho: DgFunction, epsilon: float, velocity: VelocityField) -> np.ndarray:
    """Cell averages of -eps grad(rho) + rho (1 - rho) u, shape (n_cells, dim)."""
    lam, w = cell_rule(rho.mesh.dim)
    vals = rho.coeffs @ lam.T  # (nc, nq)
    mob = (vals * (1.0 - vals)) @ w
    return -epsilon * rho.cell_gradients() + mob[:, None] * velocity.cells


def boundary_totals(rho: DgFunction, params: ModelParams, mesh: Mesh) -> tuple[float, float, float]:
    """(inflow total, outflow total, outflow measure) by face quadrature."""
    kinds = {s.tag: s for s in params.segments}
    B = mesh.boundary_faces
    tr, _ = rho.face_traces(B)
    _, w = face_rule(mesh.dim)
    inflow = outflow = out_measure = 0.0
    for k, f in enumerate(B):
        seg = kinds.get(str(mesh.face_tags[f]))
        if seg is None or seg.kind is SegmentKind.WALL:
            continue
        m = mesh.face_measures[f]
        if seg.kind is SegmentKind.INFLOW:
            inflow += seg.rate * m * float(w @ (1.0 - tr[k]))
        else:
            outflow += seg.rate * m * float(w @ tr[k])
            out_measure += m
    return inflow, outflow, out_measure


def compute_flux(rho: DgFunction, params: ModelParams, mesh: Mesh, velocity: VelocityField) -> FluxReport:
    inflow, outflow, out_measure = boundary_totals(rho, params, mesh)
    if mesh.dim == 1:
        j = cell_fluxes(rho, params.epsilon, velocity)[:, 0]
        return FluxReport(float(j.mean()), float(j.std()), inflow, outflow)
    mean = outflow / out_measure if out_measure > 0 else 0.0
    return FluxReport(mean, math.nan, inflow, outflow)


# estimates --------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    lhs: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class EstimateReport:
    """Two sides of each inequality; ``None`` marks a check that does not apply."""

    energy: Check | None
    maximal_current: Check | None
    maximal_current_flux: Check | None  # lhs = 1/4 - tol, bound = j
    plateau: Check | None
    bounds: Check | None  # lhs = violation amount, bound = 0

    bounds_min: float = math.nan
    bounds_max: float = math.nan

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in (self.energy, self.maximal_current, self.maximal_current_flux, self.plateau, self.bounds) if c)


def _check(lhs: float, bound: float, slack: float = ESTIMATE_SLACK) -> Check:
    return Check(lhs, bound, bool(lhs <= bound * (1.0 + slack) + ESTIMATE_ATOL))


def _integrate(rho: DgFunction, fun) -> float:
    lam, w = cell_rule(rho.mesh.dim)
    vals = rho.coeffs @ lam.T
    return float(np.sum(rho.mesh.cell_measures * (fun(vals) @ w)))


def rate_bounds(params: ModelParams) -> tuple[float, float]:
    """Bounds min/max over all segments of {alpha, 1 - beta}."""
    vals = [s.rate for s in params.segments if s.kind is SegmentKind.INFLOW]
    vals += [1.0 - s.rate for s in params.segments if s.kind is SegmentKind.OUTFLOW]
    return min(vals), max(vals)


def check_bounds(rho: DgFunction, params: ModelParams, slack: float = 1e-3) -> Check:
    """DOFs within [min(alpha, 1-beta) - slack, max(alpha, 1-beta) + slack]; lhs is the worst violation."""
    lo, hi = rate_bounds(params)
    v = rho.vector
    violation = float(max(lo - v.min(), v.max() - hi, 0.0))
    return Check(violation, slack, violation <= slack)


def check_phase_estimates(
    rho: DgFunction, params: ModelParams, flux: float | None = None,
    slack: float = ESTIMATE_SLACK, bound_slack: float = 1e-3,
) -> EstimateReport:
    """Evaluate the 1D a-priori estimates on a DG solution.

    energy:           int (rho - 1/2)^2 + beta rho(1) - 1/4 <= eps |1 - alpha - beta|
    maximal_current:  int (rho - 1/2)^2 <= eps |1 - alpha - beta| and j >= 1/4 - 1e-3
                      (only when min(alpha, beta) >= 1/2)
    plateau:          int |rho - alpha| <= eps (1 - alpha - beta)/(beta - alpha) for alpha < beta,
                      int |rho - 1 + beta| <= eps (1 - alpha - beta)/(alpha - beta) for alpha > beta
                      (only when max(alpha, beta) < 1/2)
    """
    mesh = rho.mesh
    lo, hi = rate_bounds(params)
    bounds = check_bounds(rho, params, bound_slack)
    if mesh.dim != 1:
        return EstimateReport(None, None, None, None, bounds, lo, hi)
    eps, a, b = params.epsilon, params.alpha, params.beta
    rho1 = float(rho.coeffs[-1, 1])
    sq = _integrate(rho, lambda v: (v - 0.5) ** 2)
    bound = eps * abs(1.0 - a - b)
    energy = _check(sq + b * rho1 - 0.25, bound, slack)
    maximal_current = maximal_current_flux = plateau = None
    if min(a, b) >= 0.5:
        maximal_current = _check(sq, bound, slack)
        j = flux if flux is not None else b * rho1
        maximal_current_flux = Check(0.25 - CLASSIFICATION_TOL, j, j >= 0.25 - CLASSIFICATION_TOL)
    if max(a, b) < 0.5 and a != b:
        target = a if a < b else 1.0 - b
        lhs = _integrate(rho, lambda v: np.abs(v - target))
        plateau = _check(lhs, eps * (1.0 - a - b) / abs(b - a), slack)
    return EstimateReport(energy, maximal_current, maximal_current_flux, plateau, bounds, lo, hi)


# phase diagram ----------------------------------------------------------------


@dataclass
class PhaseGrid:
    epsilon: float
    alphas: np.ndarray
    betas: np.ndarray
    flux: np.ndarray  # flux[i, k] at (alphas[i], betas[k])
    phase: np.ndarray  # object array of Phase
    converged: np.ndarray

    def __post_init__(self) -> None:
        shape = (len(self.alphas), len(self.betas))
        for name in ("flux", "phase", "converged"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def rows(self):
        for i, a in enumerate(self.alphas):
            for k, b in enumerate(self.betas):
                yield float(a), float(b), float(self.flux[i, k]), self.phase[i, k], bool(self.converged[i, k])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "beta", "j", "phase", "converged"])
            for a, b, j, ph, conv in self.rows():
                w.writerow([f"{a:.15g}", f"{b:.15g}", f"{j:.15g}", ph.value, int(conv)])

    @classmethod
    def read_csv(cls, path: str | Path, epsilon: float = math.nan) -> PhaseGrid:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        alphas = np.array(sorted({float(r["alpha"]) for r in rows}))
        betas = np.array(sorted({float(r["beta"]) for r in rows}))
        shape = (len(alphas), len(betas))
        flux = np.full(shape, np.nan)
        phase = np.empty(shape, dtype=object)
        conv = np.zeros(shape, dtype=bool)
        ia = {a: i for i, a in enumerate(alphas)}
        ib = {b: i for i, b in enumerate(betas)}
        for r in rows:
            i, k = ia[float(r["alpha"])], ib[float(r["beta"])]
            flux[i, k] = float(r["j"])
            phase[i, k] = Phase(r["phase"])
            conv[i, k] = r["converged"] in ("1", "True", "true")
        return cls(epsilon, alphas, betas, flux, phase, conv)


@dataclass(frozen=True)
class ScanConfig:
    n_cells: int = 200
    tau: float = 0.01
    tol: float = 1e-8
    max_iter: int = 1_000_000
    eta: float = 10.0
    warm_start: bool = True
    jobs: int = 1


def grid_values(step: float, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """lo, lo + step, ..., hi (step must divide the range)."""
    n = int(round((hi - lo) / step))
    if n < 1 or abs(n * step - (hi - lo)) > 1e-9:
        raise ValueError(f"step {step} does not divide [{lo}, {hi}] into at least one interval")
    return lo + step * np.arange(n + 1)


def _scan_row(epsilon: float, alpha: float, betas: Sequence[float], cfg: ScanConfig):
    mesh = build_interval_mesh(cfg.n_cells)
    fluxes, convs = [], []
    prev: DgFunction | None = None
    for beta in betas:
        params = ModelParams.one_dimensional(epsilon, alpha, float(beta), tau=cfg.tau)
        rho, rep = solve_stationary(
            params, mesh, tol=cfg.tol, max_iter=cfg.max_iter,
            penalty=PenaltyConfig(cfg.eta), rho0=prev if cfg.warm_start else None,
        )
        if not rep.converged and prev is not None:
            rho, rep = solve_stationary(params, mesh, tol=cfg.tol, max_iter=cfg.max_iter,
                                        penalty=PenaltyConfig(cfg.eta))
        fluxes.append(rep.flux_summary.mean_flux)
        convs.append(rep.converged)
        prev = rho if rep.converged else None
    return fluxes, convs


def scan_phase_diagram(
    epsilon: float, alphas: Sequence[float], betas: Sequence[float], config: ScanConfig = ScanConfig()
) -> PhaseGrid:
    """DG flux over an (alpha, beta) grid; rows (fixed alpha) are warm-started along beta."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if len(alphas) < 2 or len(betas) < 2:
        raise ValueError("phase scan needs at least two samples per axis")
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_scan_row, [epsilon] * len(alphas), alphas,
                                 [betas] * len(alphas), [config] * len(alphas)))
    else:
        rows = [_scan_row(epsilon, a, betas, config) for a in alphas]
    flux = np.array([r[0] for r in rows])
    conv = np.array([r[1] for r in rows], dtype=bool)
    phase = np.empty(flux.shape, dtype=object)
    for i, a in enumerate(alphas):
        for k, b in enumerate(betas):
            phase[i, k] = classify(flux[i, k], a, b)
    return PhaseGrid(epsilon, alphas, betas, flux, phase, conv)


def extract_quarter_contour(grid: PhaseGrid, level: float = 0.25) -> list[np.ndarray]:
    """Marching-squares level set of the flux grid, as (m, 2) arrays of (alpha, beta)."""
    lines = measure.find_contours(np.asarray(grid.flux, dtype=float), level)
    out = []
    ia = np.arange(len(grid.alphas))
    ib = np.arange(len(grid.betas))
    for ln in lines:
        a = np.interp(ln[:, 0], ia, grid.alphas)
        b = np.interp(ln[:, 1], ib, grid.betas)
        out.append(np.column_stack([a, b]))
    return out


def densify(polyline: np.ndarray, spacing: float) -> np.ndarray:
    """Insert points so that consecutive points are at most ``spacing`` apart."""
    pts = [polyline[:1]]
    for p, q in zip(polyline[:-1], polyline[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(q - p) / spacing)))
        t = np.arange(1, n + 1)[:, None] / n
        pts.append(p + t * (q - p))
    return np.vstack(pts)


def hausdorff_distance(a: np.ndarray, b: np.ndarray, spacing: float | None = None) -> float:
    """Symmetric Hausdorff distance between two polylines (densified when ``spacing`` is given)."""
    if spacing is not None:
        a, b = densify(a, spacing), densify(b, spacing)
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def write_contour_csv(lines: Sequence[np.ndarray], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line", "alpha", "beta"])
        for k, ln in enumerate(lines):
            for a, b in ln:
                w.writerow([k, f"{a:.15g}", f"{b:.15g}"])
