"""Steady states of crowded transport with inflow/outflow boundaries.

Closed-form 1D solutions and a shooting oracle (:mod:`.analytic1d`), a
broken-P1 discontinuous Galerkin solver in 1D and 2D (:mod:`.dg`), meshes and
velocity fields (:mod:`.mesh`, :mod:`.velocity`), diagnostics and phase
diagrams (:mod:`.analysis`) and a command-line front end (:mod:`.cli`).
"""

from .analytic1d import (
    constant_solution,
    eval_explicit,
    phase_boundary_alpha,
    phase_boundary_beta,
    phase_boundary_curve,
    quarterflux_constants,
    shooting_solve,
    solve_explicit,
    solve_flux_newton,
)
from .dg import DgFunction, PenaltyConfig, SolveReport, solve_stationary
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .mesh import GeometrySpec, Mesh, build_interval_mesh, build_mesh
from .model import BoundarySegment, ModelParams, VelocitySpec

__version__ = "0.1.0"

__all__ = [
    "BoundarySegment",
    "DgFunction",
    "GeometrySpec",
    "KERNEL_IMPLEMENTATION",
    "Mesh",
    "ModelParams",
    "PenaltyConfig",
    "SolveReport",
    "VelocitySpec",
    "build_interval_mesh",
    "build_mesh",
    "constant_solution",
    "eval_explicit",
    "phase_boundary_alpha",
    "phase_boundary_beta",
    "phase_boundary_curve",
    "quarterflux_constants",
    "shooting_solve",
    "solve_explicit",
    "solve_flux_newton",
    "solve_stationary",
]
