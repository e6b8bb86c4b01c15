"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

IMPLEMENTATION = "python"

_BLOWUP_LO = -1.0
_BLOWUP_HI = 2.0


def shoot_endpoint(eps, j, rho_start, n_steps, direction):
    h = direction / n_steps
    inv_eps = 1.0 / eps
    half = 0.5 * h
    rho = float(rho_start)
    for _ in range(n_steps):
        k1 = (rho * (1.0 - rho) - j) * inv_eps
        r = rho + half * k1
        k2 = (r * (1.0 - r) - j) * inv_eps
        r = rho + half * k2
        k3 = (r * (1.0 - r) - j) * inv_eps
        r = rho + h * k3
        k4 = (r * (1.0 - r) - j) * inv_eps
        rho = rho + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if rho < _BLOWUP_LO:
            return -math.inf
        if rho > _BLOWUP_HI:
            return math.inf
    return rho


def landing_residual(eps, alpha, beta, j, n_steps, direction):
    if direction > 0:
        return shoot_endpoint(eps, j, 1.0 - j / alpha, n_steps, 1) - j / beta
    return (1.0 - j / alpha) - shoot_endpoint(eps, j, j / beta, n_steps, -1)


def shoot_bisect(eps, alpha, beta, lo, hi, n_steps, direction, max_iter):
    r_lo = landing_residual(eps, alpha, beta, lo, n_steps, direction)
    r_hi = landing_residual(eps, alpha, beta, hi, n_steps, direction)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r_mid = landing_residual(eps, alpha, beta, mid, n_steps, direction)
        if r_mid > 0.0:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    return lo, hi, r_lo, r_hi


def rk4_profile(eps, j, rho_start, n_steps, direction):
    h = direction / n_steps
    inv_eps = 1.0 / eps
    out = np.empty(n_steps + 1)
    rho = float(rho_start)
    out[0] = rho
    for i in range(n_steps):
        k1 = (rho * (1.0 - rho) - j) * inv_eps
        r = rho + 0.5 * h * k1
        k2 = (r * (1.0 - r) - j) * inv_eps
        r = rho + 0.5 * h * k2
        k3 = (r * (1.0 - r) - j) * inv_eps
        r = rho + h * k3
        k4 = (r * (1.0 - r) - j) * inv_eps
        rho = rho + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i + 1] = rho
    return out


def dg1d_iterate(static_ab, f, u, h, rho0, tau, tol, max_iter):
    static_ab = np.asarray(static_ab, dtype=float)
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    rho = np.array(rho0, dtype=float)
    n = len(u)
    tf = tau * f
    hc = h / 6.0
    uc = tau * u / 6.0
    uface = 0.5 * (u[:-1] + u[1:])
    norm = math.inf
    it = 0
    while it < max_iter:
        ab = static_ab.copy()
        mp = 1.0 - rho[0::2]
        mq = 1.0 - rho[1::2]
        left = uc * (2.0 * mp + mq)
        right = uc * (2.0 * mq + mp)
        # ab[3 + i - j, j] = A[i, j]; p = 2c, q = 2c + 1
        ab[3, 0::2] += left
        ab[2, 1::2] += right
        ab[4, 0::2] -= left
        ab[3, 1::2] -= right
        if n > 1:
            w = (1.0 - 0.5 * (rho[1:-1:2] + rho[2::2])) * uface
            aw = np.abs(w)
            # a = 2c + 1, b = 2c + 2
            ab[3, 1:-1:2] += 0.5 * tau * (w + aw)
            ab[2, 2::2] += 0.5 * tau * (w - aw)
            ab[4, 1:-1:2] -= 0.5 * tau * (w + aw)
            ab[3, 2::2] += 0.5 * tau * (aw - w)
        rhs = np.empty_like(rho)
        rp, rq = rho[0::2], rho[1::2]
        rhs[0::2] = hc * (2.0 * rp + rq)
        rhs[1::2] = hc * (rp + 2.0 * rq)
        rhs += tf
        try:
            new = solve_banded((3, 3), ab, rhs, overwrite_ab=True, check_finite=False)
        except np.linalg.LinAlgError:
            return rho, it, norm, 1
        d = new - rho
        dp, dq = d[0::2], d[1::2]
        norm = math.sqrt(float(np.sum(hc * (2.0 * dp * dp + 2.0 * dp * dq + 2.0 * dq * dq)))) / tau
        rho = new
        it += 1
        if norm <= tol:
            break
    return rho, it, norm, 0
