"""Reference quadrature rules in barycentric form (weights sum to one)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# two-point Gauss on [0, 1]: exact up to cubics
GAUSS2_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS2_W = np.array([0.5, 0.5])


@lru_cache(maxsize=None)
def cell_rule(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree-5 rule on the reference interval/triangle.

    Returns barycentric points of shape (nq, dim + 1) and weights (nq,).
    """
    if dim == 1:
        x, w = np.polynomial.legendre.leggauss(3)
        s = 0.5 * (x + 1.0)
        lam = np.column_stack([1.0 - s, s])
        return lam, 0.5 * w
    if dim == 2:
        a1, b1, w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
        a2, b2, w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
        pts = [(1 / 3, 1 / 3, 1 / 3)]
        wts = [0.225]
        for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
            pts += [(a, b, b), (b, a, b), (b, b, a)]
            wts += [w, w, w]
        return np.array(pts), np.array(wts)
    raise ValueError(f"unsupported dimension {dim}")


def face_rule(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Points s in [0, 1] along a face and weights; a single point in 1D."""
    if dim == 1:
        return np.zeros(1), np.ones(1)
    return GAUSS2_S, GAUSS2_W
