"""Small irregular meshes for property tests."""

import numpy as np

from crowdflow.mesh import Mesh, _structured_triangles


def random_interval(rng, n):
    x = np.sort(rng.uniform(0.0, 1.0, n - 1))
    x = np.concatenate([[0.0], x, [1.0]])
    # keep cells from collapsing
    x = 0.5 * x + 0.5 * np.linspace(0.0, 1.0, n + 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(x, cells, {frozenset([0]): "inflow", frozenset([n]): "outflow"})


def jittered_square(rng, nx, ny, amount=0.25, tagger=None):
    """Structured triangulation of [0,1]^2 with interior vertices moved by up to amount*h."""
    V, C = _structured_triangles(nx, ny, 1.0, 1.0)
    V = V.copy()
    inner = (V[:, 0] > 0) & (V[:, 0] < 1) & (V[:, 1] > 0) & (V[:, 1] < 1)
    h = np.array([1.0 / nx, 1.0 / ny])
    V[inner] += amount * h * rng.uniform(-1, 1, (inner.sum(), 2))
    return Mesh(V, C, tagger or (lambda P: "wall"))


def reversed_cells(mesh, tagger):
    """Same triangulation with the cell list reversed (flips every T1/T2 pair)."""
    return Mesh(mesh.vertices.copy(), mesh.cells[::-1].copy(), tagger), np.arange(mesh.n_cells)[::-1]


def dof_permutation(cell_perm, nloc):
    return (cell_perm[:, None] * nloc + np.arange(nloc)[None, :]).ravel()
