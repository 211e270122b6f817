"""Meshes made of cells sharing a global vertex list."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from .errors import GeometryError


@dataclass(frozen=True, eq=False)
class SharedFace:
    key: frozenset  # global vertex ids
    owners: tuple  # ((cell, local_face), ...) with one or two entries

    @property
    def interior(self) -> bool:
        return len(self.owners) == 2


@dataclass(frozen=True, eq=False)
class CellMesh:
    vertices: np.ndarray
    cell_vertices: tuple  # per cell: tuple of global vertex ids, cell-local order
    cells: tuple  # geometry.Cell objects built from the ids above
    kinds: tuple = ()
    hull_measure: float | None = None
    faces: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return len(self.cells)

    def face_key(self, cell: int, face: int) -> frozenset:
        ids = self.cell_vertices[cell]
        return frozenset(ids[v] for v in self.cells[cell].faces[face].vertices)

    def neighbours(self, cell: int) -> list[int]:
        out = []
        for f in self.faces:
            cs = [c for c, _ in f.owners]
            if f.interior and cell in cs:
                out.append(cs[0] if cs[1] == cell else cs[1])
        return sorted(out)


def _cell_from(points, kind, faces=None):
    kind = geo.CellKind(kind)
    if kind in (geo.CellKind.TRIANGLE, geo.CellKind.QUADRILATERAL) or (
        kind == geo.CellKind.POLYTOPE and points.shape[1] == 2
    ):
        return geo.polygon(points, kind)
    if kind == geo.CellKind.TETRAHEDRON:
        return geo.tetrahedron(points)
    if kind == geo.CellKind.PYRAMID:
        return geo.pyramid(points[0], points[1:])
    if faces is None:
        raise GeometryError(f"{kind.value} cells in a mesh need explicit faces")
    return geo.polytope(points, faces, kind)


def build_mesh(vertices, cell_vertices: Sequence, kinds=None, cell_faces=None, hull_measure=None) -> CellMesh:
    """Assemble a mesh and its face adjacency; every face may have at most two owners.

    2D cells list their vertices in boundary order.  ``hull_measure``, when
    given, is checked against the summed cell measures.
    """
    vertices = np.asarray(vertices, dtype=float)
    cell_vertices = tuple(tuple(int(v) for v in cv) for cv in cell_vertices)
    if kinds is None:
        d = vertices.shape[1]
        default = {(2, 3): "Triangle", (2, 4): "Quadrilateral", (3, 4): "Tetrahedron"}
        kinds = [default.get((d, len(cv)), "GenericPolytope") for cv in cell_vertices]
    cells = []
    for ci, cv in enumerate(cell_vertices):
        if any(v < 0 or v >= len(vertices) for v in cv):
            raise GeometryError(f"cell {ci} references a vertex out of range")
        faces = None if cell_faces is None else cell_faces[ci]
        cells.append(_cell_from(vertices[list(cv)], kinds[ci], faces))
    owners: dict[frozenset, list] = {}
    for ci, c in enumerate(cells):
        for fi, f in enumerate(c.faces):
            key = frozenset(cell_vertices[ci][v] for v in f.vertices)
            owners.setdefault(key, []).append((ci, fi))
    faces = []
    for key, own in owners.items():
        if len(own) > 2:
            raise GeometryError(f"face {sorted(key)} is shared by {len(own)} cells")
        faces.append(SharedFace(key, tuple(own)))
    total = sum(geo.measure(c) for c in cells)
    if hull_measure is not None and abs(total - hull_measure) > 1e-9 * max(hull_measure, 1.0):
        raise GeometryError(f"cells cover measure {total}, expected {hull_measure}")
    return CellMesh(vertices, cell_vertices, tuple(cells), tuple(k if isinstance(k, str) else k.value for k in kinds), hull_measure, tuple(faces))


def square_mesh(n: int, m: int | None = None, h: float = 1.0) -> CellMesh:
    """``n x m`` uniform mesh of squares with side ``h``; cells ordered row by row."""
    m = n if m is None else m
    xs, ys = np.meshgrid(np.arange(n + 1) * h, np.arange(m + 1) * h)
    verts = np.c_[xs.ravel(), ys.ravel()]

    def vid(i, j):
        return j * (n + 1) + i

    cells = [
        (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)) for j in range(m) for i in range(n)
    ]
    return build_mesh(verts, cells, hull_measure=n * m * h * h)


def triangle_mesh(n: int, m: int | None = None, h: float = 1.0) -> CellMesh:
    """Each square of :func:`square_mesh` cut along its rising diagonal (``2nm`` right triangles)."""
    sq = square_mesh(n, m, h)
    cells = []
    for a, b, c, d in sq.cell_vertices:
        cells += [(a, b, c), (a, c, d)]
    return build_mesh(sq.vertices, cells, hull_measure=sq.hull_measure)
