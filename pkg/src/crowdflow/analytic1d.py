"""Closed-form stationary solutions of the 1D problem and a shooting oracle.

On [0, 1] with u = 1 the flux j is constant and the density solves

    eps rho' = rho (1 - rho) - j,   j = alpha (1 - rho(0)) = beta rho(1).

Depending on j the solutions are

* constant, rho = alpha, when alpha + beta = 1;
* j = 1/4:  rho = 1/2 + eps / (x + c);
* j > 1/4:  rho = 1/2 - (k/2) tan(k (x + c) / (2 eps)),   k = sqrt(4j - 1);
* j < 1/4:  rho = 1/2 + s tanh(s (x + c) / eps)  (or coth),   s = sqrt(1 - 4j) / 2.

For j > 1/4 the flux solves G(j) = 0 with

    G(j) = k / (2 eps) + arctan(A) + arctan(B),
    A = (2j - alpha) / (alpha k),   B = (2j - beta) / (beta k),

and c = 2 eps arctan(A) / k.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels

SHOOTING_STEPS = 10_000
LANDING_TOL = 1e-10
CONSTANT_TOL = 1e-12
BOUNDARY_FALLBACK_TOL = 1e-7


class NoRootError(ValueError):
    """No j > 1/4 root of the flux equation exists for these rates."""


class NonBracketingError(ValueError):
    """The shooting residual has no sign change over the admissible flux range."""


class InadmissibleSolutionError(ValueError):
    """A closed-form profile would have a pole inside [0, 1]."""


def _check_rates(alpha: float, beta: float, open_left: bool = False) -> None:
    for name, v in (("alpha", alpha), ("beta", beta)):
        if open_left and not (0.0 < v <= 1.0):
            raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {v}")


# constant and j = 1/4 solutions -------------------------------------------------


def constant_solution(alpha: float, beta: float) -> tuple[float, float] | None:
    """(rho, j) of the constant solution, which exists iff alpha + beta = 1."""
    _check_rates(alpha, beta)
    if abs(alpha + beta - 1.0) > CONSTANT_TOL:
        return None
    return alpha, alpha * (1.0 - alpha)


def quarterflux_constants(epsilon: float, alpha: float, beta: float) -> tuple[float, float]:
    """Integration constants of rho = 1/2 + eps/(x + c) fitted at x=0 (c1) and x=1 (c2).

    A j = 1/4 solution exists iff c1 = c2 = c with c > 0 or c < -1.
    """
    if alpha == 0.5 or beta == 0.5:
        raise ZeroDivisionError("quarter-flux constants are undefined at a rate of 1/2")
    c1 = 4.0 * alpha * epsilon / (2.0 * alpha - 1.0)
    c2 = 4.0 * beta * epsilon / (1.0 - 2.0 * beta) - 1.0
    return c1, c2


def phase_boundary_lower_limit(epsilon: float) -> float:
    """Smallest rate for which the j = 1/4 partner rate is finite."""
    return (1.0 + 2.0 * epsilon) / (2.0 * (4.0 * epsilon + 1.0))


def _boundary_map(epsilon: float, r: float) -> float:
    e = epsilon
    return 0.5 * (4.0 * r * e + 2.0 * r - 1.0) / (8.0 * r * e + 2.0 * r - 2.0 * e - 1.0)


def phase_boundary_beta(epsilon: float, alpha: float) -> float:
    """beta > 1/2 for which (alpha, beta) carries a j = 1/4 solution.

    Valid for lower_limit(eps) < alpha <= 1/2; the map is an involution, so
    :func:`phase_boundary_alpha` is the same formula with the roles swapped.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo = phase_boundary_lower_limit(epsilon)
    if not (lo < alpha <= 0.5):
        raise ValueError(f"alpha must lie in ({lo:.6g}, 0.5], got {alpha}")
    return _boundary_map(epsilon, alpha)


def phase_boundary_alpha(epsilon: float, beta: float) -> float:
    """alpha > 1/2 for which (alpha, beta) carries a j = 1/4 solution."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo = phase_boundary_lower_limit(epsilon)
    if not (lo < beta <= 0.5):
        raise ValueError(f"beta must lie in ({lo:.6g}, 0.5], got {beta}")
    return _boundary_map(epsilon, beta)


class BoundarySide(str, enum.Enum):
    ALPHA_LIMITED = "AlphaLimited"
    BETA_LIMITED = "BetaLimited"


@dataclass(frozen=True)
class PhaseBoundarySample:
    alpha: float
    beta: float
    epsilon: float
    side: BoundarySide


def phase_boundary_curve(epsilon: float, n_samples: int = 101) -> list[PhaseBoundarySample]:
    """The j = 1/4 curve inside the unit square, ordered from (f(1), 1) to (1, f(1)).

    ``n_samples`` points are placed on each branch; the branches meet at
    (1/2, 1/2), which appears once.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    lo = phase_boundary_lower_limit(epsilon)
    # the partner of a rate close to the lower limit exceeds 1; clip the
    # parameter to the part of the curve inside the square
    top = min(1.0, _boundary_map(epsilon, lo + 1e-12)) if lo < 0.5 else 0.5
    betas = np.linspace(top, 0.5, n_samples)
    out = []
    for b in betas:
        a = 0.5 if b == 0.5 else _boundary_map(epsilon, b)
        out.append(PhaseBoundarySample(float(a), float(b), epsilon, BoundarySide.ALPHA_LIMITED))
    for b in betas[::-1][1:]:
        a = 0.5 if b == 0.5 else _boundary_map(epsilon, b)
        out.append(PhaseBoundarySample(float(b), float(a), epsilon, BoundarySide.BETA_LIMITED))
    return out


# explicit profiles --------------------------------------------------------------


@dataclass(frozen=True)
class ConstantProfile:
    rho: float
    j: float
    epsilon: float = 0.0

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.rho) if np.ndim(x) else self.rho


@dataclass(frozen=True)
class QuarterFluxProfile:
    c: float
    epsilon: float
    j: float = 0.25

    def __post_init__(self) -> None:
        if not (self.c > 0.0 or self.c < -1.0):
            raise InadmissibleSolutionError(f"pole x = {-self.c:.6g} lies in [0, 1]")

    def __call__(self, x):
        return 0.5 + self.epsilon / (np.asarray(x, dtype=float) + self.c)


@dataclass(frozen=True)
class TrigProfile:
    j: float
    c: float
    epsilon: float

    def __post_init__(self) -> None:
        if not self.j > 0.25:
            raise ValueError("trigonometric branch requires j > 1/4")
        k = self.k
        t0 = k * self.c / (2.0 * self.epsilon)
        t1 = k * (1.0 + self.c) / (2.0 * self.epsilon)
        # no odd multiple of pi/2 in [t0, t1]
        m = math.ceil(t0 / math.pi - 0.5)
        if (m + 0.5) * math.pi <= t1:
            raise InadmissibleSolutionError("tangent pole inside [0, 1]")

    @property
    def k(self) -> float:
        return math.sqrt(4.0 * self.j - 1.0)

    def __call__(self, x):
        k = self.k
        return 0.5 - 0.5 * k * np.tan(k * (np.asarray(x, dtype=float) + self.c) / (2.0 * self.epsilon))


@dataclass(frozen=True)
class HyperbolicProfile:
    j: float
    c: float
    epsilon: float
    branch: str  # "tanh" | "coth"

    def __post_init__(self) -> None:
        if not self.j < 0.25:
            raise ValueError("hyperbolic branch requires j < 1/4")
        if self.branch not in ("tanh", "coth"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.branch == "coth" and -1.0 <= self.c <= 0.0:
            raise InadmissibleSolutionError(f"coth pole x = {-self.c:.6g} lies in [0, 1]")

    @property
    def s(self) -> float:
        return 0.5 * math.sqrt(1.0 - 4.0 * self.j)

    def __call__(self, x):
        s = self.s
        z = s * (np.asarray(x, dtype=float) + self.c) / self.epsilon
        if self.branch == "tanh":
            return 0.5 + s * np.tanh(z)
        return 0.5 + s / np.tanh(z)


ExplicitSolution1D = Union[ConstantProfile, QuarterFluxProfile, TrigProfile, HyperbolicProfile]


def eval_explicit(sol: ExplicitSolution1D, x):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -1e-12) or np.any(xa > 1.0 + 1e-12):
        raise ValueError("x must lie in [0, 1]")
    out = sol(xa)
    return float(out) if np.ndim(out) == 0 else out


def bc_residuals(sol: ExplicitSolution1D, alpha: float, beta: float) -> tuple[float, float]:
    """|j - alpha (1 - rho(0))| and |j - beta rho(1)|."""
    r0, r1 = float(sol(0.0)), float(sol(1.0))
    return abs(sol.j - alpha * (1.0 - r0)), abs(sol.j - beta * r1)


# j > 1/4: flux equation ---------------------------------------------------------


def flux_equation(epsilon: float, alpha: float, beta: float, j: float) -> tuple[float, float]:
    """G(j) and G'(j) for the trigonometric branch."""
    k = math.sqrt(4.0 * j - 1.0)
    dk = 2.0 / k
    g = k / (2.0 * epsilon)
    dg = dk / (2.0 * epsilon)
    for r in (alpha, beta):
        a = (2.0 * j - r) / (r * k)
        da = 2.0 / (r * k) - (2.0 * j - r) / (r * k * k) * dk
        g += math.atan(a)
        dg += da / (1.0 + a * a)
    return g, dg


def solve_flux_newton(
    epsilon: float, alpha: float, beta: float, j_init: float | None = None,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Root j > 1/4 of G and the matching constant c.

    The bracket grows geometrically from j = 1/4 + 1e-8; inside it Newton
    steps are accepted only when they stay in the bracket, otherwise the
    step bisects.  Raises :class:`NoRootError` when G has no sign change on
    (1/4, min(alpha, beta)].
    """
    _check_rates(alpha, beta, open_left=True)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    j_max = min(alpha, beta)
    lo = 0.25 + 1e-8
    if j_max <= lo:
        raise NoRootError(f"j <= min(alpha, beta) = {j_max} leaves no room above 1/4")
    g_lo, _ = flux_equation(epsilon, alpha, beta, lo)
    if g_lo >= 0.0:
        raise NoRootError("flux equation is nonnegative just above j = 1/4")
    delta = 1e-6
    hi = min(lo + delta, j_max)
    g_hi, _ = flux_equation(epsilon, alpha, beta, hi)
    while g_hi < 0.0 and hi < j_max:
        lo, g_lo = hi, g_hi
        delta *= 2.0
        hi = min(lo + delta, j_max)
        g_hi, _ = flux_equation(epsilon, alpha, beta, hi)
    if g_hi < 0.0:
        raise NoRootError(f"no sign change of the flux equation on (1/4, {j_max}]")
    j = j_init if j_init is not None and lo < j_init < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        g, dg = flux_equation(epsilon, alpha, beta, j)
        if g == 0.0:
            break
        if g < 0.0:
            lo = j
        else:
            hi = j
        step = j - g / dg if dg > 0 else math.nan
        j_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(j_new - j) <= 4e-16 * j or hi - lo <= 4e-16 * hi:
            j = j_new
            break
        j = j_new
    k = math.sqrt(4.0 * j - 1.0)
    c = 2.0 * epsilon * math.atan((2.0 * j - alpha) / (alpha * k)) / k
    return j, c


# j < 1/4: hyperbolic branch -----------------------------------------------------


def _hyper_anchor(epsilon: float, j: float, rho_at: float, x_at: float) -> tuple[str, float] | None:
    """Branch and c of the hyperbolic profile with rho(x_at) = rho_at (None on a fixed point)."""
    s = 0.5 * math.sqrt(1.0 - 4.0 * j)
    z = (rho_at - 0.5) / s
    if abs(z) == 1.0:
        return None
    if abs(z) < 1.0:
        return "tanh", epsilon * math.atanh(z) / s - x_at
    return "coth", epsilon * math.atanh(1.0 / z) / s - x_at


def _hyper_endpoint(epsilon: float, j: float, rho_start: float, direction: int) -> float:
    x_start, x_end = (0.0, 1.0) if direction > 0 else (1.0, 0.0)
    anchor = _hyper_anchor(epsilon, j, rho_start, x_start)
    if anchor is None:
        return rho_start
    branch, c = anchor
    if branch == "coth" and min(x_start, x_end) <= -c <= max(x_start, x_end):
        # the trajectory runs into the pole before reaching the far end
        return math.inf if (rho_start > 0.5) == (direction < 0) else -math.inf
    s = 0.5 * math.sqrt(1.0 - 4.0 * j)
    z = s * (x_end + c) / epsilon
    return 0.5 + s * (math.tanh(z) if branch == "tanh" else 1.0 / math.tanh(z))


def _hyper_residual(epsilon, alpha, beta, j, direction):
    if direction > 0:
        return _hyper_endpoint(epsilon, j, 1.0 - j / alpha, 1) - j / beta
    return (1.0 - j / alpha) - _hyper_endpoint(epsilon, j, j / beta, -1)


def _bisect(fun, lo: float, hi: float, max_iter: int = 200) -> tuple[float, float, float, float]:
    r_lo, r_hi = fun(lo), fun(hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = fun(mid)
        if r > 0.0:
            lo, r_lo = mid, r
        else:
            hi, r_hi = mid, r
    return lo, hi, r_lo, r_hi


def solve_hyperbolic(epsilon: float, alpha: float, beta: float) -> HyperbolicProfile:
    """j < 1/4 closed form; the flux is found by bisection on the far-end residual."""
    _check_rates(alpha, beta, open_left=True)
    j_hi = min(alpha, beta, 0.25 - 1e-14)
    best: HyperbolicProfile | None = None
    best_res = math.inf
    order = (-1, 1) if alpha < beta else (1, -1)
    for direction in order:
        fun = lambda j, d=direction: _hyper_residual(epsilon, alpha, beta, j, d)  # noqa: E731
        if not (fun(1e-12) > 0.0 and fun(j_hi) <= 0.0):
            continue
        lo, hi, r_lo, r_hi = _bisect(fun, 1e-12, j_hi)
        j = lo if abs(r_lo) < abs(r_hi) else hi
        anchor_x, anchor_rho = (0.0, 1.0 - j / alpha) if direction > 0 else (1.0, j / beta)
        anchor = _hyper_anchor(epsilon, j, anchor_rho, anchor_x)
        if anchor is None:
            continue
        try:
            prof = HyperbolicProfile(j, anchor[1], epsilon, anchor[0])
        except InadmissibleSolutionError:
            continue
        res = max(bc_residuals(prof, alpha, beta))
        if res < best_res:
            best, best_res = prof, res
        if res <= LANDING_TOL:
            break
    if best is None:
        raise NoRootError("no j < 1/4 hyperbolic solution for these rates")
    return best


def solve_explicit(epsilon: float, alpha: float, beta: float) -> ExplicitSolution1D:
    """The closed-form solution for (eps, alpha, beta), whichever branch applies."""
    _check_rates(alpha, beta, open_left=True)
    const = constant_solution(alpha, beta)
    if const is not None:
        return ConstantProfile(const[0], const[1], epsilon)
    if alpha != 0.5 and beta != 0.5:
        c1, c2 = quarterflux_constants(epsilon, alpha, beta)
        if abs(c1 - c2) <= 1e-12 * max(1.0, abs(c1)) and (c1 > 0.0 or c1 < -1.0):
            return QuarterFluxProfile(0.5 * (c1 + c2), epsilon)
    try:
        j, c = solve_flux_newton(epsilon, alpha, beta)
        return TrigProfile(j, c, epsilon)
    except NoRootError:
        pass
    try:
        return solve_hyperbolic(epsilon, alpha, beta)
    except NoRootError:
        pass
    # Within round-off of the phase boundary |j - 1/4| is below what either
    # branch can resolve; the quarter-flux profile is then the solution.
    if alpha != 0.5 and beta != 0.5:
        c1, c2 = quarterflux_constants(epsilon, alpha, beta)
        c = 0.5 * (c1 + c2)
        if c > 0.0 or c < -1.0:
            try:
                prof = QuarterFluxProfile(c, epsilon)
            except InadmissibleSolutionError:
                prof = None
            if prof is not None and max(bc_residuals(prof, alpha, beta)) <= BOUNDARY_FALLBACK_TOL:
                return prof
    raise NoRootError(f"no closed-form solution found for alpha={alpha}, beta={beta}")


# shooting oracle ----------------------------------------------------------------


@dataclass(frozen=True)
class ShootingResult:
    j: float
    x: np.ndarray
    rho: np.ndarray
    landing_residual: float
    direction: int
    n_steps: int
    richardson_error: float = math.nan


def _shoot(epsilon, alpha, beta, n_steps, direction):
    j_cap = min(alpha, beta)
    lo = 1e-8
    hi = min(alpha, beta, 0.3)
    res = lambda j: kernels.landing_residual(epsilon, alpha, beta, j, n_steps, direction)  # noqa: E731
    if not res(lo) > 0.0:
        return None
    r_hi = res(hi)
    while r_hi > 0.0 and hi < j_cap:
        hi = min(j_cap, hi + 0.5 * (j_cap - hi) + 1e-3)
        r_hi = res(hi)
    if r_hi > 0.0:
        return None
    lo, hi, r_lo, r_hi = kernels.shoot_bisect(epsilon, alpha, beta, lo, hi, n_steps, direction, 200)
    return (lo, r_lo) if abs(r_lo) <= abs(r_hi) else (hi, r_hi)


def shooting_solve(
    epsilon: float, alpha: float, beta: float, n_steps: int = SHOOTING_STEPS,
    richardson: bool = True,
) -> ShootingResult:
    """Flux and profile by shooting on eps rho' = rho (1 - rho) - j with RK4.

    Integrates from the end where the trajectory is stable (x=1 backwards
    when alpha < beta, x=0 forwards otherwise) and bisects on j until the
    far boundary condition holds; switches direction if the landing error
    stays above 1e-10.  With ``richardson`` the solve is repeated at twice
    the step count and the flux difference is reported.
    """
    _check_rates(alpha, beta, open_left=True)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    first = -1 if alpha < beta else 1
    found = None
    for direction in (first, -first):
        out = _shoot(epsilon, alpha, beta, n_steps, direction)
        if out is None:
            continue
        if found is None or abs(out[1]) < abs(found[1]):
            found = (out[0], out[1], direction)
        if abs(out[1]) <= LANDING_TOL:
            break
    if found is None:
        raise NonBracketingError(
            f"landing residual does not change sign for eps={epsilon}, alpha={alpha}, beta={beta}"
        )
    j, r, direction = found
    start = 1.0 - j / alpha if direction > 0 else j / beta
    rho = np.asarray(kernels.rk4_profile(epsilon, j, start, n_steps, direction))
    if direction < 0:
        rho = rho[::-1].copy()
    x = np.linspace(0.0, 1.0, n_steps + 1)
    rich = math.nan
    if richardson:
        fine = _shoot(epsilon, alpha, beta, 2 * n_steps, direction)
        if fine is not None:
            rich = abs(fine[0] - j)
    return ShootingResult(j, x, rho, abs(r), direction, n_steps, rich)
