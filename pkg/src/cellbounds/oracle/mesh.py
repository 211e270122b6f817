"""Uniformly refined simplicial meshes of a cell.

Each coarse simplex is refined with the Freudenthal (Kuhn) subdivision into
``2**(d*level)`` congruent-class simplices.  Points are identified across
coarse simplices by their integer barycentric weights with respect to the
coarse vertices, so shared facets match exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import geometry as geo
from ..errors import GeometryError


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    points: np.ndarray
    simplices: np.ndarray
    # tag -> (k, d) array of facet vertex indices; int tags are cell faces
    facets: dict
    level: int

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_points(self) -> int:
        return len(self.points)

    def facet_measures(self, tag) -> np.ndarray:
        f = self.points[self.facets[tag]]
        if self.dim == 2:
            return np.linalg.norm(f[:, 1] - f[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(f[:, 1] - f[:, 0], f[:, 2] - f[:, 0]), axis=1)

    def facet_normals(self, tag) -> np.ndarray:
        f = self.points[self.facets[tag]]
        if self.dim == 2:
            d = f[:, 1] - f[:, 0]
            n = np.c_[d[:, 1], -d[:, 0]]
        else:
            n = np.cross(f[:, 1] - f[:, 0], f[:, 2] - f[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]


@lru_cache(maxsize=None)
def kuhn_lattice(dim: int, n: int):
    """Integer points of ``{n >= x1 >= ... >= xd >= 0}`` and its Freudenthal simplices.

    Returns ``(weights, simplices)`` with barycentric integer weights (sum n)
    of every lattice point with respect to the Kuhn vertices.
    """
    grid = np.array(list(itertools.product(range(n + 1), repeat=dim)))
    keep = np.all(np.diff(grid, axis=1) <= 0, axis=1) if dim > 1 else np.ones(len(grid), bool)
    pts = grid[keep]
    index = -np.ones((n + 1,) * dim, dtype=np.int64)
    index[tuple(pts.T)] = np.arange(len(pts))
    simplices = []
    bases = np.array(list(itertools.product(range(n), repeat=dim)))
    eye = np.eye(dim, dtype=np.int64)
    for perm in itertools.permutations(range(dim)):
        verts = [bases]
        cur = bases.copy()
        for k in perm:
            cur = cur + eye[k]
            verts.append(cur)
        verts = np.stack(verts, axis=1)  # (m, d+1, d)
        ids = index[tuple(np.moveaxis(verts, -1, 0))]
        ok = np.all(ids >= 0, axis=1)
        simplices.append(ids[ok])
    simp = np.vstack(simplices)
    weights = np.empty((len(pts), dim + 1), dtype=np.int64)
    weights[:, 0] = n - pts[:, 0]
    for k in range(1, dim):
        weights[:, k] = pts[:, k - 1] - pts[:, k]
    weights[:, dim] = pts[:, dim - 1]
    return weights, simp


def refine(points, simplices, facet_tags, level: int) -> SimplicialMesh:
    """Refine a conforming coarse simplicial mesh ``level`` times uniformly."""
    if level < 0:
        raise ValueError("level must be non-negative")
    points = np.asarray(points, dtype=float)
    simplices = np.asarray(simplices)
    dim = points.shape[1]
    n = 2**level
    weights, local = kuhn_lattice(dim, n)
    ncoarse = len(points)
    keys, all_simp, facet_rows = [], [], {}
    offset = 0
    for s in simplices:
        s = [int(v) for v in s]
        dense = np.zeros((len(weights), ncoarse), dtype=np.int64)
        dense[:, s] = weights
        keys.append(dense)
        all_simp.append(local + offset)
        # facets of refined simplices lying on coarse facet "opposite local vertex j"
        for j in range(dim + 1):
            coarse_key = frozenset(v for i, v in enumerate(s) if i != j)
            tag = facet_tags.get(coarse_key)
            if tag is None:
                continue
            zero = weights[:, j] == 0
            for omit in range(dim + 1):
                fv = np.delete(local, omit, axis=1)
                on = np.all(zero[fv], axis=1)
                if np.any(on):
                    facet_rows.setdefault(tag, []).append(fv[on] + offset)
        offset += len(weights)
    keys = np.vstack(keys)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    coords = (uniq @ points) / n
    simp = inverse[np.vstack(all_simp)]
    facets = {}
    for tag, rows in facet_rows.items():
        f = inverse[np.vstack(rows)]
        f = np.unique(np.sort(f, axis=1), axis=0)
        facets[tag] = f
    return SimplicialMesh(coords, simp, facets, level)


def points_per_level(cell, level: int) -> int:
    """Vertex count of ``triangulate(cell, level)`` without building it.

    ``cell`` may also be a ready :class:`geometry.Decomposition`.
    """
    dec = cell if isinstance(cell, geo.Decomposition) else geo.decompose(cell)
    d = dec.points.shape[1]
    n = 2**level
    # shared sub-simplices are counted once: inclusion via faces of the coarse complex
    total = 0
    seen = set()
    for s in dec.simplices:
        for k in range(1, d + 2):
            for sub in itertools.combinations(sorted(int(v) for v in s), k):
                if sub in seen:
                    continue
                seen.add(sub)
                # interior lattice points of a (k-1)-simplex with n segments
                total += math.comb(n - 1, k - 1)
    return total


def triangulate(cell, level: int, extra_tags=None) -> SimplicialMesh:
    """Simplicial mesh of ``cell`` refined ``level`` times; boundary facets carry face tags.

    A :class:`geometry.Decomposition` may be passed instead of a cell to
    control the coarse split, e.g. to tag interior segments.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    if isinstance(cell, geo.Decomposition):
        dec = cell
    elif cell.kind in set(geo.CellKind):
        dec = geo.decompose(cell)
    else:
        raise GeometryError(f"unsupported cell kind {cell.kind}")
    tags = dict(dec.facet_tags)
    if extra_tags:
        tags.update(extra_tags)
    return refine(dec.points, dec.simplices, tags, level)


def max_level(cell, max_unknowns: int = 50_000, components: int = 1, cap: int = 8) -> int:
    """Finest level whose unknown count stays within ``max_unknowns``."""
    level = 0
    while level < cap and components * points_per_level(cell, level + 1) <= max_unknowns:
        level += 1
    return level
