"""Reference computations that do not share code with the package."""

import math

import numpy as np
from scipy.integrate import solve_bvp
from scipy.optimize import brentq


def bvp_flux(eps, alpha, beta, j0=0.2):
    """Flux of eps rho' = rho (1 - rho) - j with Robin data, by collocation.

    j is carried as an unknown parameter; the two boundary conditions and
    the first-order ODE close the system.
    """
    x = np.linspace(0.0, 1.0, 401)

    def rhs(x, y, p):
        return (y * (1.0 - y) - p[0]) / eps

    def bc(ya, yb, p):
        j = p[0]
        return np.array([alpha * (1.0 - ya[0]) - j, beta * yb[0] - j])

    y0 = np.full((1, x.size), 0.5)
    sol = solve_bvp(rhs, bc, x, y0, p=[j0], tol=1e-10, max_nodes=200_000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.p[0]), sol


def quarter_partner_beta(eps, alpha):
    """beta with a j = 1/4 profile 1/2 + eps/(x + c), from the boundary data directly."""
    # x = 0: alpha (1 - rho(0)) = 1/4 fixes c
    rho0 = 1.0 - 0.25 / alpha
    c = eps / (rho0 - 0.5)
    rho1 = 0.5 + eps / (1.0 + c)
    return 0.25 / rho1


def quarter_partner_beta_root(eps, alpha, lo=0.5 + 1e-12, hi=1.0):
    """Same quantity found by root finding on the outflow condition."""
    c = eps / (0.5 - 0.25 / alpha)

    def g(beta):
        return beta * (0.5 + eps / (1.0 + c)) - 0.25

    return brentq(g, 0.0 + 1e-12, 10.0, xtol=1e-15)


def derivative(sol, x):
    """Exact rho'(x) of each closed-form family, written out by hand."""
    name = type(sol).__name__
    x = np.asarray(x, dtype=float)
    eps = sol.epsilon
    if name == "ConstantProfile":
        return np.zeros_like(x)
    if name == "QuarterFluxProfile":
        return -eps / (x + sol.c) ** 2
    if name == "TrigProfile":
        k = math.sqrt(4 * sol.j - 1)
        t = k * (x + sol.c) / (2 * eps)
        return -0.5 * k * (k / (2 * eps)) / np.cos(t) ** 2
    if name == "HyperbolicProfile":
        s = 0.5 * math.sqrt(1 - 4 * sol.j)
        z = s * (x + sol.c) / eps
        if sol.branch == "tanh":
            return s * (s / eps) / np.cosh(z) ** 2
        return -s * (s / eps) / np.sinh(z) ** 2
    raise TypeError(name)
