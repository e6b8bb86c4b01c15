"""Model parameters, boundary segment semantics and entropy-variable utilities.

The stationary problem is

    div(-eps grad(rho) + rho (1 - rho) u) = 0      in the domain,
    -j.n = alpha (1 - rho)                          on inflow segments,
     j.n = beta rho                                 on outflow segments,
     j.n = 0                                        on walls,

with j the total flux.  The entropy variable psi = log(rho) - log(1 - rho) - V
maps the density range (0, 1) onto the whole real line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .dg import DgFunction
    from .mesh import Mesh

LOG_CLIP = 1e-12


class SegmentKind(str, enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    WALL = "wall"


@dataclass(frozen=True)
class BoundarySegment:
    """A tagged part of the boundary carrying an inflow/outflow rate.

    ``tag`` is the name used by the mesh to label boundary faces.  Walls carry
    no rate.
    """

    tag: str
    kind: SegmentKind
    rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        if self.kind is SegmentKind.WALL:
            if self.rate != 0.0:
                raise ValueError(f"wall segment {self.tag!r} cannot carry a rate")
        elif not (0.0 <= self.rate <= 1.0):
            raise ValueError(
                f"rate of segment {self.tag!r} must lie in [0, 1], got {self.rate}"
            )

    @classmethod
    def inflow(cls, tag: str, alpha: float) -> BoundarySegment:
        return cls(tag, SegmentKind.INFLOW, alpha)

    @classmethod
    def outflow(cls, tag: str, beta: float) -> BoundarySegment:
        return cls(tag, SegmentKind.OUTFLOW, beta)

    @classmethod
    def wall(cls, tag: str = "wall") -> BoundarySegment:
        return cls(tag, SegmentKind.WALL)


class VelocityKind(str, enum.Enum):
    CONSTANT = "constant"
    GRADIENT_OF_LINEAR = "gradient_of_linear"
    GRADIENT_OF_HARMONIC = "gradient_of_harmonic"


@dataclass(frozen=True)
class VelocitySpec:
    """How the transport velocity is obtained.

    ``vector`` is the constant field (or the gradient of the linear potential);
    harmonic fields are computed from the mesh by :mod:`crowdflow.velocity`.
    ``method`` selects the discretisation used for the harmonic potential.
    """

    kind: VelocityKind
    vector: tuple[float, ...] = ()
    method: str = "mixed"

    @classmethod
    def constant(cls, *vector: float) -> VelocitySpec:
        return cls(VelocityKind.CONSTANT, tuple(float(v) for v in vector))

    @classmethod
    def linear_potential(cls, *direction: float) -> VelocitySpec:
        return cls(VelocityKind.GRADIENT_OF_LINEAR, tuple(float(v) for v in direction))

    @classmethod
    def harmonic(cls, method: str = "mixed") -> VelocitySpec:
        return cls(VelocityKind.GRADIENT_OF_HARMONIC, (), method)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    velocity: VelocitySpec
    segments: tuple[BoundarySegment, ...]
    tau: float = 0.01
    initial_density: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not (0.0 <= self.initial_density <= 1.0):
            raise ValueError("initial_density must lie in [0, 1]")
        tags = [s.tag for s in self.segments]
        if len(set(tags)) != len(tags):
            raise ValueError(f"duplicate segment tags in {tags}")

    @classmethod
    def one_dimensional(
        cls, epsilon: float, alpha: float, beta: float, **kwargs
    ) -> ModelParams:
        """Unit interval, u = 1, inflow at x=0 and outflow at x=1."""
        return cls(
            epsilon,
            VelocitySpec.constant(1.0),
            (BoundarySegment.inflow("inflow", alpha), BoundarySegment.outflow("outflow", beta)),
            **kwargs,
        )

    def segment(self, tag: str) -> BoundarySegment:
        for seg in self.segments:
            if seg.tag == tag:
                return seg
        raise KeyError(tag)

    @property
    def alpha(self) -> float:
        """Rate of the single inflow segment (1D convenience)."""
        return _single_rate(self.segments, SegmentKind.INFLOW)

    @property
    def beta(self) -> float:
        """Rate of the single outflow segment (1D convenience)."""
        return _single_rate(self.segments, SegmentKind.OUTFLOW)


def _single_rate(segments: Sequence[BoundarySegment], kind: SegmentKind) -> float:
    rates = [s.rate for s in segments if s.kind is kind]
    if not rates:
        return 0.0
    if len(set(rates)) > 1:
        raise ValueError(f"several {kind.value} segments with different rates")
    return rates[0]


@dataclass(frozen=True)
class EntropyState:
    rho: float
    psi: float
    V: float = 0.0

    @classmethod
    def from_rho(cls, rho: float, V: float = 0.0) -> EntropyState:
        return cls(rho, rho_to_psi(rho, V), V)

    @classmethod
    def from_psi(cls, psi: float, V: float = 0.0) -> EntropyState:
        return cls(psi_to_rho(psi, V), psi, V)


def rho_to_psi(rho, V=0.0):
    """Entropy variable log(rho) - log(1 - rho) - V."""
    r = np.asarray(rho, dtype=float)
    if np.any((r <= 0.0) | (r >= 1.0)) or np.any(np.isnan(r)):
        raise ValueError("rho must lie strictly inside (0, 1)")
    out = np.log(r) - np.log1p(-r) - V
    return float(out) if out.ndim == 0 else out


def psi_to_rho(psi, V=0.0):
    """Inverse of :func:`rho_to_psi`; a numerically stable logistic."""
    z = np.asarray(psi, dtype=float) + V
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


def mobility(psi, V=0.0):
    """A(psi, V) = e^(psi+V) / (1 + e^(psi+V))^2 = rho (1 - rho)."""
    z = -np.abs(np.asarray(psi, dtype=float) + V)
    ez = np.exp(z)
    out = np.minimum(ez / (1.0 + ez) ** 2, 0.25)  # rounding can exceed the maximum by an ulp
    return float(out) if out.ndim == 0 else out


def mobility_cosh(psi, V=0.0):
    """Same quantity as :func:`mobility` written as 1 / (2 (1 + cosh(psi + V)))."""
    out = 1.0 / (2.0 * (1.0 + np.cosh(np.asarray(psi, dtype=float) + V)))
    return float(out) if out.ndim == 0 else out


def entropy_density(rho, V=0.0):
    r = np.clip(np.asarray(rho, dtype=float), LOG_CLIP, 1.0 - LOG_CLIP)
    return r * np.log(r) - r * V + (1.0 - r) * np.log1p(-r)


def entropy(rho_field: DgFunction, V_field: DgFunction | None, mesh: Mesh) -> float:
    """Integral of rho log rho - rho V + (1 - rho) log(1 - rho) over the mesh.

    Both fields are broken P1 functions; the integrand is evaluated at a
    degree-5 cell quadrature.
    """
    from .quadrature import cell_rule

    lam, w = cell_rule(mesh.dim)
    rho_q = rho_field.coeffs @ lam.T  # (ncells, nq)
    if V_field is None:
        V_q = 0.0
    else:
        V_q = V_field.coeffs @ lam.T
    vals = entropy_density(rho_q, V_q)
    return float(np.sum(mesh.cell_measures[:, None] * vals * w[None, :]))


__all__ = [
    "BoundarySegment",
    "EntropyState",
    "ModelParams",
    "SegmentKind",
    "VelocityKind",
    "VelocitySpec",
    "entropy",
    "entropy_density",
    "mobility",
    "mobility_cosh",
    "psi_to_rho",
    "rho_to_psi",
]
