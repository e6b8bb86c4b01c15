"""CSV and legacy-VTK output."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dg import DgFunction
from .velocity import VelocityField

FMT = "{:.15g}"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Comma-separated, header row, floats with 15 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([FMT.format(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data


def write_profile_csv(path: str | Path, rho: DgFunction, cell_flux: np.ndarray | None = None) -> None:
    """1D DG profile, one row per DOF: x, rho and the flux of the owning cell."""
    mesh = rho.mesh
    x = mesh.vertices[mesh.cells][:, :, 0]
    j = np.zeros(mesh.n_cells) if cell_flux is None else np.asarray(cell_flux).reshape(-1)
    rows = (
        (float(x[c, k]), float(rho.coeffs[c, k]), float(j[c]))
        for c in range(mesh.n_cells) for k in range(2)
    )
    write_csv(path, ["x", "rho", "j"], rows)


# VTK ----------------------------------------------------------------------------

_VTK_TYPE = {1: 3, 2: 5}  # VTK_LINE, VTK_TRIANGLE


def write_vtk(path: str | Path, rho: DgFunction, velocity: VelocityField | None = None,
              title: str = "crowdflow density") -> None:
    """Legacy ASCII unstructured grid with discontinuous (per-cell) points.

    Point data ``rho`` holds the DG coefficients; cell data ``velocity`` the
    per-cell field padded to three components.
    """
    mesh = rho.mesh
    nloc = mesh.dim + 1
    pts = mesh.vertices[mesh.cells].reshape(-1, mesh.dim)
    pts3 = np.zeros((len(pts), 3))
    pts3[:, : mesh.dim] = pts
    f = FMT.format
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts3)} double"]
    lines += [" ".join(f(v) for v in p) for p in pts3]
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (nloc + 1)}")
    lines += [" ".join(str(v) for v in [nloc, *range(c * nloc, (c + 1) * nloc)]) for c in range(mesh.n_cells)]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(_VTK_TYPE[mesh.dim])] * mesh.n_cells
    lines += [f"POINT_DATA {len(pts3)}", "SCALARS rho double 1", "LOOKUP_TABLE default"]
    lines += [f(v) for v in rho.vector]
    if velocity is not None:
        u3 = np.zeros((mesh.n_cells, 3))
        u3[:, : mesh.dim] = velocity.cells
        lines += [f"CELL_DATA {mesh.n_cells}", "VECTORS velocity double"]
        lines += [" ".join(f(v) for v in u) for u in u3]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class VtkData:
    points: np.ndarray
    cells: list[list[int]]
    cell_types: np.ndarray
    rho: np.ndarray
    velocity: np.ndarray | None


def read_vtk(path: str | Path) -> VtkData:
    """Reader for the files produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens[4:])
    points = cells = types = rho = vel = None
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            points = np.array([[float(v) for v in next(it).split()] for _ in range(n)])
        elif key == "CELLS":
            n = int(parts[1])
            cells = [[int(v) for v in next(it).split()[1:]] for _ in range(n)]
        elif key == "CELL_TYPES":
            types = np.array([int(next(it)) for _ in range(int(parts[1]))])
        elif key == "SCALARS":
            next(it)  # LOOKUP_TABLE
            rho = np.array([float(next(it)) for _ in range(len(points))])
        elif key == "VECTORS":
            vel = np.array([[float(v) for v in next(it).split()] for _ in range(len(cells))])
    if points is None or cells is None or rho is None:
        raise ValueError(f"{path}: not a crowdflow VTK file")
    return VtkData(points, cells, types, rho, vel)
