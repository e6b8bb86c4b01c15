"""Interval meshes and structured corridor triangulations with tagged boundaries."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

INTERIOR = "interior"
WALL = "wall"

# default corridor: [0, 2] x [0, 1], upper doors 0.65 < y < 0.85, lower 0.15 < y < 0.35
CORRIDOR_LENGTH = 2.0
CORRIDOR_HEIGHT = 1.0


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    def __init__(self, lineno: int | None, message: str):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Face:
    vertex_indices: tuple[int, ...]
    adjacent_cells: tuple[int, ...]
    normal: tuple[float, ...]
    measure: float
    tag: str
    h_F: float

    @property
    def is_boundary(self) -> bool:
        return len(self.adjacent_cells) == 1


Tagger = Callable[[np.ndarray], str]


class Mesh:
    """Simplicial mesh in 1D (intervals) or 2D (counterclockwise triangles).

    Faces are numbered in order of first appearance while sweeping the cells.
    For an interior face, ``face_cells[f] = (T1, T2)`` and the normal points
    from T1 to T2; boundary faces have ``T2 = -1`` and an outward normal.
    ``face_local[f, side, k]`` is the local index, inside cell ``side``, of
    the face's k-th vertex.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        cells: np.ndarray,
        boundary_tags: Mapping[frozenset, str] | Tagger,
    ):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] not in (2, 3):
            raise MeshError("cells must be vertex pairs (1D) or triples (2D)")
        dim = cells.shape[1] - 1
        if vertices.shape[1] != dim:
            raise MeshError(f"{dim}D cells need {dim}D vertices")
        if len(cells) == 0:
            raise MeshError("mesh has no cells")
        if cells.min() < 0 or cells.max() >= len(vertices):
            raise MeshError("cell references a vertex out of range")
        self.dim = dim
        self.vertices = vertices
        self.cells = cells
        self._geometry()
        self._topology()
        self._tag_boundary(boundary_tags)
        for arr in (
            self.vertices, self.cells, self.cell_measures, self.cell_diameters,
            self.grads, self.face_cells, self.face_vertices, self.face_local,
            self.face_normals, self.face_measures, self.face_h,
        ):
            arr.setflags(write=False)

    # construction helpers -------------------------------------------------

    def _geometry(self) -> None:
        X = self.vertices[self.cells]  # (nc, d+1, d)
        if self.dim == 1:
            length = X[:, 1, 0] - X[:, 0, 0]
            if np.any(length <= 0):
                raise MeshError("1D cells must have positive length (x1 > x0)")
            self.cell_measures = length
            self.cell_diameters = length.copy()
            g = np.stack([-1.0 / length, 1.0 / length], axis=1)
            self.grads = g[:, :, None]
            return
        e1 = X[:, 1] - X[:, 0]
        e2 = X[:, 2] - X[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            bad = int(np.argmin(det))
            raise MeshError(f"cell {bad} is degenerate or clockwise")
        self.cell_measures = 0.5 * det
        edges = np.stack([X[:, 2] - X[:, 1], X[:, 0] - X[:, 2], X[:, 1] - X[:, 0]], axis=1)
        self.cell_diameters = np.linalg.norm(edges, axis=2).max(axis=1)
        # grad(lambda_k) = inward normal of the opposite edge scaled by |e_k| / (2 |T|)
        self.grads = np.stack([-edges[:, :, 1], edges[:, :, 0]], axis=2) / det[:, None, None]

    def _topology(self) -> None:
        d = self.dim
        nloc = d + 1
        lookup: dict[tuple[int, ...], int] = {}
        fcells: list[list[int]] = []
        fverts: list[tuple[int, ...]] = []
        flocal: list[list[list[int]]] = []
        for c, cell in enumerate(self.cells.tolist()):
            for k in range(nloc):
                if d == 1:
                    verts = (cell[k],)
                    loc = [k]
                else:
                    loc = [(k + 1) % 3, (k + 2) % 3]
                    verts = (cell[loc[0]], cell[loc[1]])
                key = tuple(sorted(verts))
                f = lookup.get(key)
                if f is None:
                    lookup[key] = len(fcells)
                    fcells.append([c, -1])
                    fverts.append(verts)
                    flocal.append([loc, [-1] * d])
                else:
                    if fcells[f][1] != -1:
                        raise MeshError(f"face {key} shared by more than two cells")
                    fcells[f][1] = c
                    pos = {v: i for i, v in enumerate(cell)}
                    flocal[f][1] = [pos[v] for v in fverts[f]]
        self.face_cells = np.array(fcells, dtype=np.int64)
        self.face_vertices = np.array(fverts, dtype=np.int64)
        self.face_local = np.array(flocal, dtype=np.int64)
        P = self.vertices[self.face_vertices]  # (nf, d, d)
        if d == 1:
            self.face_measures = np.ones(len(fcells))
            sign = np.where(self.face_local[:, 0, 0] == 1, 1.0, -1.0)
            self.face_normals = sign[:, None]
        else:
            t = P[:, 1] - P[:, 0]
            ln = np.linalg.norm(t, axis=1)
            self.face_measures = ln
            self.face_normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / ln[:, None]
        h = self.cell_diameters
        T1, T2 = self.face_cells[:, 0], self.face_cells[:, 1]
        interior = T2 >= 0
        self.face_h = np.where(interior, 0.5 * (h[T1] + h[np.maximum(T2, 0)]), h[T1])
        self.interior_faces = np.flatnonzero(interior)
        self.boundary_faces = np.flatnonzero(~interior)

    def _tag_boundary(self, boundary_tags) -> None:
        tags = np.full(len(self.face_cells), INTERIOR, dtype=object)
        if callable(boundary_tags):
            for f in self.boundary_faces:
                tags[f] = boundary_tags(self.vertices[self.face_vertices[f]])
        else:
            remaining = dict(boundary_tags)
            for f in self.boundary_faces:
                key = frozenset(self.face_vertices[f].tolist())
                if key not in remaining:
                    raise MeshError(
                        f"boundary face with vertices {sorted(key)} has no tag"
                    )
                tags[f] = remaining.pop(key)
            if remaining:
                key = next(iter(remaining))
                raise MeshError(f"tagged face {sorted(key)} is not a boundary face")
        self.face_tags = tags

    # queries ----------------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.face_cells)

    @property
    def n_dofs(self) -> int:
        return self.n_cells * (self.dim + 1)

    @property
    def faces(self) -> list[Face]:
        return [self.face(f) for f in range(self.n_faces)]

    def face(self, f: int) -> Face:
        T1, T2 = self.face_cells[f]
        adj = (int(T1),) if T2 < 0 else (int(T1), int(T2))
        return Face(
            tuple(int(v) for v in self.face_vertices[f]),
            adj,
            tuple(float(x) for x in self.face_normals[f]),
            float(self.face_measures[f]),
            str(self.face_tags[f]),
            float(self.face_h[f]),
        )

    def boundary_tag_names(self) -> list[str]:
        return sorted({str(self.face_tags[f]) for f in self.boundary_faces})

    def faces_with_tag(self, tag: str) -> np.ndarray:
        return np.flatnonzero(self.face_tags == tag)

    def tag_measure(self, tag: str) -> float:
        return float(self.face_measures[self.faces_with_tag(tag)].sum())

    @property
    def measure(self) -> float:
        return float(self.cell_measures.sum())

    def cell_centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    def is_connected(self) -> bool:
        return len(self._reachable(0)) == self.n_cells

    def _reachable(self, start: int) -> set[int]:
        nbrs: list[list[int]] = [[] for _ in range(self.n_cells)]
        for f in self.interior_faces:
            a, b = self.face_cells[f]
            nbrs[a].append(int(b))
            nbrs[b].append(int(a))
        seen = {start}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for n in nbrs[c]:
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return seen

    def boundary_tag_map(self) -> dict[frozenset, str]:
        return {
            frozenset(self.face_vertices[f].tolist()): str(self.face_tags[f])
            for f in self.boundary_faces
        }

    def __repr__(self) -> str:
        return f"Mesh(dim={self.dim}, cells={self.n_cells}, faces={self.n_faces})"


# geometry specifications ------------------------------------------------------


@dataclass(frozen=True)
class Door:
    """Boundary opening on the left or right corridor wall, ``lo < y < hi``."""

    tag: str
    side: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.side not in ("left", "right"):
            raise MeshError(f"door side must be 'left' or 'right', got {self.side!r}")


DEFAULT_DOORS = (
    Door("inflow1", "left", 0.65, 0.85),
    Door("inflow2", "left", 0.15, 0.35),
    Door("outflow1", "right", 0.65, 0.85),
    Door("outflow2", "right", 0.15, 0.35),
)


@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "corridor"
    n_cells: int = 200
    nx: int = 80
    ny: int = 40
    doors: tuple[Door, ...] = DEFAULT_DOORS
    center: tuple[float, float] = (1.7, 0.5)
    radius: float = 0.2
    length: float = CORRIDOR_LENGTH
    height: float = CORRIDOR_HEIGHT

    @classmethod
    def interval(cls, n_cells: int) -> GeometrySpec:
        return cls(kind="interval", n_cells=n_cells)

    @classmethod
    def corridor(cls, nx: int, ny: int, doors: Sequence[Door] = DEFAULT_DOORS) -> GeometrySpec:
        return cls(kind="corridor", nx=nx, ny=ny, doors=tuple(doors))

    @classmethod
    def obstacle(
        cls,
        nx: int,
        ny: int,
        center: tuple[float, float] = (1.7, 0.5),
        radius: float = 0.2,
        doors: Sequence[Door] = DEFAULT_DOORS,
    ) -> GeometrySpec:
        return cls(kind="obstacle", nx=nx, ny=ny, doors=tuple(doors),
                   center=tuple(center), radius=radius)


def build_mesh(spec: GeometrySpec) -> Mesh:
    if spec.kind == "interval":
        return build_interval_mesh(spec.n_cells)
    if spec.kind == "corridor":
        return build_corridor_mesh(spec)
    if spec.kind == "obstacle":
        return build_obstacle_mesh(spec)
    raise MeshError(f"unknown geometry kind {spec.kind!r}")


def build_interval_mesh(n: int, inflow_tag: str = "inflow", outflow_tag: str = "outflow") -> Mesh:
    """Uniform mesh of [0, 1]; x=0 is tagged inflow and x=1 outflow."""
    if n < 1:
        raise MeshError(f"need at least one cell, got {n}")
    x = np.linspace(0.0, 1.0, n + 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(x, cells, {frozenset([0]): inflow_tag, frozenset([n]): outflow_tag})


def _snapped_doors(spec: GeometrySpec) -> list[tuple[Door, float, float]]:
    dy = spec.height / spec.ny
    out = []
    for door in spec.doors:
        if not (0.0 <= door.lo < door.hi <= spec.height):
            raise MeshError(f"door {door.tag!r} interval ({door.lo}, {door.hi}) outside [0, {spec.height}]")
        lo = round(door.lo / dy) * dy
        hi = round(door.hi / dy) * dy
        if hi - lo < 0.5 * dy:
            raise MeshError(f"door {door.tag!r} is narrower than one cell at ny={spec.ny}")
        out.append((door, lo, hi))
    for side in ("left", "right"):
        raw = sorted((d.lo, d.hi, d.tag) for d, _, _ in out if d.side == side)
        for (_, hi1, t1), (lo2, _, t2) in zip(raw, raw[1:]):
            if lo2 < hi1:
                raise MeshError(f"doors {t1!r} and {t2!r} overlap")
        spans = sorted((lo, hi, d.tag) for d, lo, hi in out if d.side == side)
        for (lo1, hi1, t1), (lo2, hi2, t2) in zip(spans, spans[1:]):
            if lo2 < hi1 - 1e-12:
                raise MeshError(f"doors {t1!r} and {t2!r} overlap")
    return out


def _corridor_tagger(spec: GeometrySpec) -> Tagger:
    doors = _snapped_doors(spec)
    tol = 1e-9 * max(spec.length, spec.height)

    def tag(P: np.ndarray) -> str:
        xs, ys = P[:, 0], P[:, 1]
        if np.all(np.abs(xs) < tol):
            side = "left"
        elif np.all(np.abs(xs - spec.length) < tol):
            side = "right"
        else:
            return WALL
        ymid = ys.mean()
        for door, lo, hi in doors:
            if door.side == side and lo < ymid < hi:
                return door.tag
        return WALL

    return tag


def _structured_triangles(nx: int, ny: int, length: float, height: float):
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    # diagonal from lower-left to upper-right; both triangles counterclockwise
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return vertices, cells


def build_corridor_mesh(spec: GeometrySpec) -> Mesh:
    """Rectangle-split triangulation of [0, length] x [0, height] with door tags.

    Door limits snap to the nearest horizontal grid line; with the default
    doors, ``ny`` divisible by 20 reproduces them exactly.
    """
    if spec.nx < 1 or spec.ny < 1:
        raise MeshError("nx and ny must be positive")
    vertices, cells = _structured_triangles(spec.nx, spec.ny, spec.length, spec.height)
    return Mesh(vertices, cells, _corridor_tagger(spec))


def build_obstacle_mesh(spec: GeometrySpec) -> Mesh:
    """Corridor mesh with every triangle whose centroid lies in the disk removed."""
    if spec.nx < 1 or spec.ny < 1:
        raise MeshError("nx and ny must be positive")
    (cx, cy), r = spec.center, spec.radius
    dx = spec.length / spec.nx
    if r <= 0:
        raise MeshError("obstacle radius must be positive")
    if not (dx <= cx - r and cx + r <= spec.length - dx and 0 < cy - r and cy + r < spec.height):
        raise MeshError("obstacle must lie strictly inside the corridor, clear of the door columns")
    vertices, cells = _structured_triangles(spec.nx, spec.ny, spec.length, spec.height)
    centroids = vertices[cells].mean(axis=1)
    keep = np.hypot(centroids[:, 0] - cx, centroids[:, 1] - cy) >= r
    cells = cells[keep]
    used = np.unique(cells)
    renumber = np.full(len(vertices), -1)
    renumber[used] = np.arange(len(used))
    mesh = Mesh(vertices[used], renumber[cells], _corridor_tagger(spec))
    if not mesh.is_connected():
        raise MeshError("obstacle disconnects the mesh")
    return mesh


# plain-text mesh files --------------------------------------------------------


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    lines = [f"# crowdflow mesh, dim {mesh.dim}", "NODES"]
    for i, v in enumerate(mesh.vertices):
        lines.append(" ".join([str(i)] + [repr(float(x)) for x in v]))
    lines.append("CELLS")
    for i, c in enumerate(mesh.cells):
        lines.append(" ".join(str(int(x)) for x in (i, *c)))
    lines.append("TAGS")
    lines.extend(mesh.boundary_tag_names())
    lines.append("BOUNDARY")
    for f in mesh.boundary_faces:
        verts = " ".join(str(int(v)) for v in mesh.face_vertices[f])
        lines.append(f"{verts} {mesh.face_tags[f]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_SECTIONS = ("NODES", "CELLS", "TAGS", "BOUNDARY")


def read_mesh(path: str | Path) -> Mesh:
    text = Path(path).read_text(encoding="utf-8")
    section = None
    nodes: list[list[float]] = []
    cells: list[list[int]] = []
    cell_lines: list[int] = []
    tags: set[str] | None = None
    boundary: dict[frozenset, str] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in _SECTIONS:
            if line in seen:
                raise MeshFormatError(lineno, f"duplicate section {line}")
            section = line
            seen.add(line)
            if line == "TAGS":
                tags = set()
            continue
        parts = line.split()
        try:
            if section == "NODES":
                idx = int(parts[0])
                if idx != len(nodes):
                    raise MeshFormatError(lineno, f"node index {idx}, expected {len(nodes)}")
                coords = [float(p) for p in parts[1:]]
                if len(coords) not in (1, 2):
                    raise MeshFormatError(lineno, "node needs 1 or 2 coordinates")
                if nodes and len(coords) != len(nodes[0]):
                    raise MeshFormatError(lineno, "inconsistent node dimension")
                nodes.append(coords)
            elif section == "CELLS":
                idx = int(parts[0])
                if idx != len(cells):
                    raise MeshFormatError(lineno, f"cell index {idx}, expected {len(cells)}")
                verts = [int(p) for p in parts[1:]]
                if len(verts) not in (2, 3):
                    raise MeshFormatError(lineno, "cell needs 2 or 3 vertices")
                for v in verts:
                    if not 0 <= v < len(nodes):
                        raise MeshFormatError(lineno, f"vertex index {v} out of range")
                cells.append(verts)
                cell_lines.append(lineno)
            elif section == "TAGS":
                if len(parts) != 1:
                    raise MeshFormatError(lineno, "one tag name per line")
                tags.add(parts[0])  # type: ignore[union-attr]
            elif section == "BOUNDARY":
                if len(parts) < 2:
                    raise MeshFormatError(lineno, "boundary line needs vertices and a tag")
                name = parts[-1]
                verts = [int(p) for p in parts[:-1]]
                for v in verts:
                    if not 0 <= v < len(nodes):
                        raise MeshFormatError(lineno, f"vertex index {v} out of range")
                if tags is not None and name not in tags:
                    raise MeshFormatError(lineno, f"undeclared tag {name!r}")
                key = frozenset(verts)
                if key in boundary:
                    raise MeshFormatError(lineno, "duplicate boundary face")
                boundary[key] = name
            else:
                raise MeshFormatError(lineno, "data outside of a section")
        except ValueError as exc:
            if isinstance(exc, MeshFormatError):
                raise
            raise MeshFormatError(lineno, f"cannot parse {raw.strip()!r}") from exc
    if not nodes:
        raise MeshFormatError(None, "empty NODES section")
    if not cells:
        raise MeshFormatError(None, "empty CELLS section")
    dim = len(nodes[0])
    for verts, lineno in zip(cells, cell_lines):
        if len(verts) != dim + 1:
            raise MeshFormatError(lineno, f"{dim}D mesh needs {dim + 1} vertices per cell")
    try:
        return Mesh(np.array(nodes), np.array(cells), boundary)
    except MeshFormatError:
        raise
    except MeshError as exc:
        raise MeshFormatError(None, str(exc)) from exc
