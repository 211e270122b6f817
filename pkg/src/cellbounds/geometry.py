"""Cells, faces, measures, normals and the normal-system matrices.

Cells are immutable.  Two-dimensional cells are stored counter-clockwise and
three-dimensional faces are stored with outward (right-hand rule) orientation,
so every downstream routine can read normals off the vertex order.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CurvilinearFaceError,
    DegenerateGeometryError,
    DependentNormalsError,
    GeometryError,
)

REL_TOL = 1e-9
DET_TOL = 1e-9


class CellKind(str, enum.Enum):
    TRIANGLE = "Triangle"
    QUADRILATERAL = "Quadrilateral"
    TETRAHEDRON = "Tetrahedron"
    PYRAMID = "Pyramid"
    PRISM = "Prism"
    POLYTOPE = "GenericPolytope"
    MACROCELL = "Macrocell"


@dataclass(frozen=True, eq=False)
class Face:
    """A face given by indices into the owning cell's vertex array.

    ``subfacets`` turns the face into a curvilinear one: an ordered array of
    segments (2D, shape ``(m, 2, 2)``) or triangles (3D, shape ``(m, 3, 3)``)
    approximating the curved surface between the face's end vertices.
    """

    vertices: tuple[int, ...]
    subfacets: np.ndarray | None = None

    @property
    def curvilinear(self) -> bool:
        return self.subfacets is not None and len(self.subfacets) > 1


@dataclass(frozen=True, eq=False)
class Cell:
    kind: CellKind
    vertices: np.ndarray
    faces: tuple[Face, ...]
    children: tuple["Cell", ...] = ()
    # Prism only: height at each base vertex.
    heights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def face_points(self, index: int) -> np.ndarray:
        return self.vertices[list(self.faces[index].vertices)]


@dataclass(frozen=True, eq=False)
class NormalSystem:
    normals: np.ndarray
    det: float

    @property
    def matrix(self) -> np.ndarray:
        return self.normals

    @property
    def valid(self) -> bool:
        return abs(self.det) > DET_TOL

    @classmethod
    def from_vectors(cls, vectors, check: bool = True) -> "NormalSystem":
        n = np.array(vectors, dtype=float)
        if n.ndim != 2 or n.shape[0] != n.shape[1]:
            raise DependentNormalsError(f"need d vectors in R^d, got shape {n.shape}")
        lengths = np.linalg.norm(n, axis=1)
        if np.any(np.abs(lengths - 1.0) > REL_TOL):
            raise GeometryError("normal vectors must have unit length")
        ns = cls(n, float(np.linalg.det(n)))
        if check and not ns.valid:
            raise DependentNormalsError(f"|det N| = {abs(ns.det):.3e} below {DET_TOL}")
        return ns


@dataclass(frozen=True, eq=False)
class TMatrix:
    entries: np.ndarray
    lambda_min: float


# ---------------------------------------------------------------------------
# construction


def _as_points(points, dim=None) -> np.ndarray:
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise GeometryError(f"points must have shape (n, 2) or (n, 3), got {pts.shape}")
    if dim is not None and pts.shape[1] != dim:
        raise GeometryError(f"expected {dim}D points")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinate")
    return pts


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon(points, kind: CellKind | None = None, subfacets=None) -> Cell:
    """Polygonal cell with counter-clockwise oriented edges.

    ``subfacets`` maps an edge index (edge ``i`` joins vertex ``i`` and
    ``i + 1`` in the given order) to a polyline of points from the first to
    the second vertex, making that edge curvilinear.
    """
    pts = _as_points(points, 2)
    n = len(pts)
    if n < 3:
        raise DegenerateGeometryError("a polygon needs at least three vertices")
    subfacets = dict(subfacets or {})
    polylines = {}
    for i in range(n):
        line = subfacets.get(i)
        polylines[i] = (
            np.array([pts[i], pts[(i + 1) % n]]) if line is None else _as_points(line, 2)
        )
        if not np.allclose(polylines[i][0], pts[i]) or not np.allclose(
            polylines[i][-1], pts[(i + 1) % n]
        ):
            raise GeometryError(f"polyline of edge {i} must join its end vertices")
    loop = np.vstack([polylines[i][:-1] for i in range(n)])
    ccw = _signed_area(loop) > 0
    faces = []
    for i in range(n):
        # keep the caller's face numbering; clockwise input gets reversed edges
        line = polylines[i] if ccw else polylines[i][::-1]
        verts = (i, (i + 1) % n) if ccw else ((i + 1) % n, i)
        sub = np.stack([line[:-1], line[1:]], axis=1) if len(line) > 2 else None
        faces.append(Face(verts, sub))
    if kind is None:
        kind = {3: CellKind.TRIANGLE, 4: CellKind.QUADRILATERAL}.get(n, CellKind.POLYTOPE)
    cell = Cell(kind, pts, tuple(faces))
    _check_cell(cell)
    return cell


def triangle(points) -> Cell:
    return polygon(points, CellKind.TRIANGLE)


def quadrilateral(points) -> Cell:
    return polygon(points, CellKind.QUADRILATERAL)


def rectangle(h1: float, h2: float) -> Cell:
    return quadrilateral([(0, 0), (h1, 0), (h1, h2), (0, h2)])


def right_triangle(h: float = 1.0) -> Cell:
    """``conv{(0,0), (h,0), (0,h)}``; faces: 0 leg on x2=0, 1 hypotenuse, 2 leg on x1=0."""
    return triangle([(0, 0), (h, 0), (0, h)])


def _orient_faces_3d(pts: np.ndarray, faces: Sequence[Sequence[int]], center=None):
    center = pts.mean(axis=0) if center is None else center
    out = []
    for f in faces:
        f = list(f)
        fp = pts[f]
        n = _newell(fp)
        if np.dot(fp.mean(axis=0) - center, n) < 0:
            f = f[::-1]
        out.append(tuple(f))
    return out


def polytope(points, faces, kind: CellKind = CellKind.POLYTOPE, subfacets=None, **extra) -> Cell:
    """Three-dimensional cell from vertex coordinates and face index lists.

    Faces are re-oriented outward with respect to the vertex centroid, which
    is correct for convex cells and for cells star-shaped about the centroid.
    ``subfacets`` maps a face index to an array of triangles (m, 3, 3).
    """
    pts = _as_points(points, 3)
    oriented = _orient_faces_3d(pts, faces)
    subfacets = dict(subfacets or {})
    fs = []
    for i, f in enumerate(oriented):
        sub = subfacets.get(i)
        if sub is not None:
            sub = np.array(sub, dtype=float)
            ref = _newell(pts[list(f)])
            flip = np.einsum("ij,j->i", _tri_normals(sub), ref) < 0
            sub = sub.copy()
            sub[flip] = sub[flip][:, ::-1]
        fs.append(Face(f, sub))
    cell = Cell(kind, pts, tuple(fs), **extra)
    _check_cell(cell)
    return cell


def tetrahedron(points) -> Cell:
    pts = _as_points(points, 3)
    faces = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]  # face i is opposite vertex i
    return polytope(pts, faces, CellKind.TETRAHEDRON)


def pyramid(apex, base) -> Cell:
    """Pyramid OABCD; vertex 0 is the apex, face 0 the quadrilateral base ABCD."""
    pts = _as_points([apex] + list(base), 3)
    faces = [(1, 2, 3, 4), (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 1)]
    return polytope(pts, faces, CellKind.PYRAMID)


def prism(base, heights) -> Cell:
    """Prism ``{(x1,x2) in base, 0 <= x3 <= H(x1,x2)}``.

    ``base`` is a convex polygon in the plane x3 = 0 and ``heights`` gives H at
    each base vertex (a scalar means constant height); H is interpolated
    linearly over a fan triangulation of the base.  Face 0 is the base.
    """
    b = _as_points(base, 2)
    if _signed_area(b) < 0:
        b = b[::-1]
    m = len(b)
    h = np.broadcast_to(np.asarray(heights, dtype=float), (m,)).copy()
    if np.any(h <= 0):
        raise GeometryError("prism heights must be positive")
    pts = np.vstack([np.c_[b, np.zeros(m)], np.c_[b, h]])
    faces = [tuple(range(m))]
    if np.allclose(h, h[0]) or m == 3:
        faces.append(tuple(range(m, 2 * m)))
    else:
        faces += [(m, m + i, m + i + 1) for i in range(1, m - 1)]
    faces += [(i, (i + 1) % m, m + (i + 1) % m, m + i) for i in range(m)]
    return polytope(pts, faces, CellKind.PRISM, heights=h)


def box(h1: float, h2: float, h3: float) -> Cell:
    """Axis-aligned box; face 0 is x3=0 and face 5 is x1=0."""
    return prism([(0, 0), (h1, 0), (h1, h2), (0, h2)], h3)


def macrocell(children: Sequence[Cell]) -> Cell:
    """Glue child cells along complete shared faces.

    The boundary faces of the macrocell are the child faces that are not
    shared; ``meta['face_owner']`` maps each to ``(child, child_face)``.
    """
    children = tuple(children)
    if not children:
        raise GeometryError("a macrocell needs at least one child")
    dim = children[0].dim
    if any(c.dim != dim for c in children):
        raise GeometryError("children of mixed dimension")
    scale = max(diameter(c) for c in children)
    all_pts = np.vstack([c.vertices for c in children])
    keys = np.round(all_pts / (scale * 1e-9)).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    pts = all_pts[first]
    offsets = np.cumsum([0] + [len(c.vertices) for c in children])
    counts: dict[frozenset, list] = {}
    for ci, c in enumerate(children):
        for fi, f in enumerate(c.faces):
            key = frozenset(int(inverse[offsets[ci] + v]) for v in f.vertices)
            counts.setdefault(key, []).append((ci, fi))
    faces, owner = [], []
    for ci, c in enumerate(children):
        for fi, f in enumerate(c.faces):
            key = frozenset(int(inverse[offsets[ci] + v]) for v in f.vertices)
            if len(counts[key]) > 2:
                raise GeometryError("a face is shared by more than two children")
            if len(counts[key]) == 1:
                faces.append(Face(tuple(int(inverse[offsets[ci] + v]) for v in f.vertices), f.subfacets))
                owner.append((ci, fi))
    total = sum(measure(c) for c in children)
    cell = Cell(
        CellKind.MACROCELL,
        pts,
        tuple(faces),
        children=children,
        meta={"face_owner": tuple(owner), "measure": total},
    )
    if dim == 2:
        _check_boundary_closed_2d(cell)
    return cell


def _check_boundary_closed_2d(cell: Cell):
    degree = np.zeros(len(cell.vertices), dtype=int)
    for f in cell.faces:
        for v in f.vertices:
            degree[v] += 1
    used = degree > 0
    if np.any(degree[used] % 2):
        raise GeometryError("children are not glued along complete faces")


# ---------------------------------------------------------------------------
# elementary helpers


def _newell(pts: np.ndarray) -> np.ndarray:
    """Area vector (|area| * unit normal) of a planar 3D polygon."""
    return 0.5 * np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)


def _tri_normals(tris: np.ndarray) -> np.ndarray:
    return 0.5 * np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])


def face_subfacets(cell: Cell, index: int) -> np.ndarray:
    """Outward-oriented simplices (segments or triangles) covering a face."""
    f = cell.faces[index]
    if f.subfacets is not None:
        return np.asarray(f.subfacets)
    pts = cell.face_points(index)
    if cell.dim == 2:
        return pts[None, :, :]
    return np.array([[pts[0], pts[i], pts[i + 1]] for i in range(1, len(pts) - 1)])


def _subfacet_area_vectors(cell: Cell, index: int) -> np.ndarray:
    """measure * outward unit normal for every sub-facet of a face."""
    sub = face_subfacets(cell, index)
    if cell.dim == 2:
        d = sub[:, 1] - sub[:, 0]
        return np.c_[d[:, 1], -d[:, 0]]
    return _tri_normals(sub)


def _check_cell(cell: Cell):
    pts = cell.vertices
    diam = diameter(cell)
    for i, f in enumerate(cell.faces):
        if any(v < 0 or v >= len(pts) for v in f.vertices):
            raise GeometryError(f"face {i} references a vertex out of range")
        if cell.dim == 3 and f.subfacets is None:
            fp = pts[list(f.vertices)]
            a = _newell(fp)
            if np.linalg.norm(a) <= (REL_TOL * diam) ** 2:
                raise DegenerateGeometryError(f"face {i} has zero area")
            n = a / np.linalg.norm(a)
            dev = np.abs((fp - fp.mean(axis=0)) @ n)
            if np.max(dev) > REL_TOL * diam:
                raise GeometryError(f"face {i} is not planar (deviation {np.max(dev):.3e})")
        if f.curvilinear:
            mean_normal(cell, i)
    if measure(cell) <= (REL_TOL * diam) ** cell.dim:
        raise DegenerateGeometryError("cell has zero measure")


# ---------------------------------------------------------------------------
# measures and normals


def all_points(cell: Cell) -> np.ndarray:
    pts = [cell.vertices]
    for f in cell.faces:
        if f.subfacets is not None:
            pts.append(np.asarray(f.subfacets).reshape(-1, cell.dim))
    return np.vstack(pts)


def diameter(cell: Cell) -> float:
    pts = all_points(cell)
    diffs = pts[:, None, :] - pts[None, :, :]
    d = float(np.sqrt((diffs**2).sum(axis=-1)).max())
    if d == 0.0:
        raise DegenerateGeometryError("all points coincide")
    return d


def face_measure(cell: Cell, index: int) -> float:
    return float(np.linalg.norm(_subfacet_area_vectors(cell, index), axis=1).sum())


def boundary_loop(cell: Cell) -> np.ndarray:
    """2D only: the closed boundary polyline (counter-clockwise, not repeated)."""
    by_start = {}
    for i, f in enumerate(cell.faces):
        by_start[f.vertices[0]] = i
    start = cell.faces[0].vertices[0]
    v, parts = start, []
    for _ in range(len(cell.faces)):
        i = by_start[v]
        parts.append(face_subfacets(cell, i)[:, 0])
        v = cell.faces[i].vertices[1]
        if v == start:
            break
    if v != start or sum(len(p) for p in parts) < 3:
        raise GeometryError("boundary is not a single closed loop")
    return np.vstack(parts)


def measure(entity: Cell, face: int | None = None) -> float:
    """Cell volume/area, or the measure of face ``face`` when given."""
    cell = entity
    if face is not None:
        return face_measure(cell, face)
    if cell.kind == CellKind.MACROCELL:
        return float(sum(measure(c) for c in cell.children))
    if cell.dim == 2:
        total = 0.0
        for i in range(len(cell.faces)):
            seg = face_subfacets(cell, i)
            total += 0.5 * float(np.sum(seg[:, 0, 0] * seg[:, 1, 1] - seg[:, 1, 0] * seg[:, 0, 1]))
        return abs(total)
    total = 0.0
    for i in range(len(cell.faces)):
        sub = face_subfacets(cell, i)
        total += float(np.einsum("ij,ij->", sub.mean(axis=1), _tri_normals(sub))) / 3.0
    return abs(total)


def centroid(cell: Cell) -> np.ndarray:
    from .quadrature import integrate_cell

    return integrate_cell(cell, lambda x: x, order=1) / measure(cell)


def outward_unit_normal(cell: Cell, face: int) -> np.ndarray:
    f = cell.faces[face]
    if f.curvilinear:
        raise GeometryError(f"face {face} is curvilinear; use mean_normal")
    a = _subfacet_area_vectors(cell, face).sum(axis=0)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise DegenerateGeometryError(f"face {face} has zero measure")
    return a / norm


def mean_normal(cell: Cell, face: int) -> np.ndarray:
    """Measure-weighted average of the pointwise outward unit normals of a face."""
    a = _subfacet_area_vectors(cell, face)
    lengths = np.linalg.norm(a, axis=1)
    if np.any(lengths == 0.0):
        raise DegenerateGeometryError(f"face {face} has a zero-measure sub-facet")
    units = a / lengths[:, None]
    if len(units) > 1:
        gram = units @ units.T
        if np.min(gram) <= 0.0:
            raise CurvilinearFaceError(
                f"face {face}: normals of two sub-facets have non-positive inner product"
            )
    return a.sum(axis=0) / lengths.sum()


def face_normal(cell: Cell, face: int) -> np.ndarray:
    """Unit normal for planar faces, mean normal for curvilinear ones."""
    if cell.faces[face].curvilinear:
        return mean_normal(cell, face)
    return outward_unit_normal(cell, face)


def is_convex(cell: Cell) -> bool:
    from scipy.spatial import ConvexHull

    hull = ConvexHull(all_points(cell))
    return bool(hull.volume <= measure(cell) * (1 + 1e-9))


# ---------------------------------------------------------------------------
# triangle angles


def sigma_from_angles(alpha: float, beta: float) -> float:
    ca, cb = 1.0 / math.tan(alpha), 1.0 / math.tan(beta)
    return ca * ca + cb * cb - ca * cb + 3.0


def triangle_frame(cell: Cell, gamma: int):
    """Return ``(A, B, C, h)``: Gamma = AC, B the opposite vertex, h the height over AC."""
    if cell.kind != CellKind.TRIANGLE:
        raise GeometryError("a triangle is required")
    ia, ic = cell.faces[gamma].vertices
    ib = 3 - ia - ic
    A, B, C = cell.vertices[ia], cell.vertices[ib], cell.vertices[ic]
    base = np.linalg.norm(C - A)
    if base == 0.0:
        raise DegenerateGeometryError("zero-length edge")
    h = 2.0 * measure(cell) / base
    if h <= REL_TOL * diameter(cell):
        raise DegenerateGeometryError("degenerate triangle")
    return A, B, C, h


def triangle_angles(cell: Cell, gamma: int) -> tuple[float, float]:
    """Interior angles (alpha at A, beta at C) adjacent to the edge Gamma = AC."""
    A, B, C, _ = triangle_frame(cell, gamma)

    def angle(p, q, r):
        u, v = q - p, r - p
        return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(np.dot(u, v)))

    return angle(A, C, B), angle(C, A, B)


def sigma_alpha_beta(cell: Cell, gamma: int) -> float:
    """Cotangent combination of the two angles adjacent to edge ``gamma``."""
    alpha, beta = triangle_angles(cell, gamma)
    return sigma_from_angles(alpha, beta)


def sigma_vector_form(cell: Cell, gamma: int) -> float:
    A, B, C, h = triangle_frame(cell, gamma)
    ab, bc = B - A, C - B
    return float((ab @ ab + bc @ bc + (A - B) @ bc) / h**2)


# ---------------------------------------------------------------------------
# normal systems


def normal_system(cell: Cell, faces: Sequence[int], check: bool = True) -> NormalSystem:
    faces = list(faces)
    if len(faces) != cell.dim:
        raise DependentNormalsError(f"need exactly {cell.dim} faces, got {len(faces)}")
    rows = []
    for f in faces:
        n = face_normal(cell, f)
        # mean normals are not unit; the system uses them as they are
        rows.append(n)
    n = np.array(rows)
    ns = NormalSystem(n, float(np.linalg.det(n)))
    if check and not ns.valid:
        raise DependentNormalsError(f"faces {faces}: |det N| = {abs(ns.det):.3e}")
    return ns


def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(a, dtype=float)
    n = len(a)
    scale = max(np.abs(a).max(), 1.0)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off <= tol * scale:
            break
        for p, q in itertools.combinations(range(n), 2):
            if abs(a[p, q]) < 1e-300:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(n)
            rot[p, p] = rot[q, q] = c
            rot[p, q], rot[q, p] = s, -s
            a = rot.T @ a @ rot
    else:
        raise GeometryError("Jacobi rotations did not converge")
    return np.sort(np.diag(a))


def t_matrix(ns: NormalSystem, method: str = "auto") -> TMatrix:
    """``T = sum_k n_k (x) n_k`` and its smallest eigenvalue.

    For d = 2 the closed form ``1 - sqrt(1 - det(N)^2)`` is used (valid for
    unit normals); ``method="jacobi"`` forces the iterative solve.
    """
    n = ns.normals
    t = n.T @ n
    d = len(n)
    unit = np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=REL_TOL)
    if method == "auto" and d == 2 and unit:
        lam = 1.0 - math.sqrt(max(0.0, 1.0 - ns.det**2))
        if lam < 1e-4:
            # cancellation: 1 - sqrt(1 - x) = x / (1 + sqrt(1 - x))
            lam = ns.det**2 / (1.0 + math.sqrt(max(0.0, 1.0 - ns.det**2)))
    else:
        lam = float(jacobi_eigenvalues(t)[0])
    return TMatrix(t, lam)


def rotation_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random proper rotation (used by invariance tests and oracles)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def transform(cell: Cell, matrix=None, shift=None, scale: float = 1.0) -> Cell:
    """Apply ``x -> scale * matrix @ x + shift`` to every coordinate of a cell.

    Orientation-preserving maps only; face orientation is carried over as is.
    """
    d = cell.dim
    m = np.eye(d) if matrix is None else np.asarray(matrix, dtype=float)
    s = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
    if np.linalg.det(m) <= 0:
        raise GeometryError("transform must preserve orientation")

    def f(x):
        return scale * np.asarray(x) @ m.T + s

    faces = tuple(
        Face(fc.vertices, None if fc.subfacets is None else f(fc.subfacets)) for fc in cell.faces
    )
    heights = None if cell.heights is None else cell.heights * scale
    return Cell(
        cell.kind,
        f(cell.vertices),
        faces,
        children=tuple(transform(c, m, s, scale) for c in cell.children),
        heights=heights,
        meta={k: (v * scale**d if k == "measure" else v) for k, v in cell.meta.items()},
    )


# ---------------------------------------------------------------------------
# coarse simplicial decomposition


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Conforming simplicial split of a cell.

    ``facet_tags`` maps a facet (frozenset of point indices) to the index of
    the cell face containing it; interior facets may carry string labels.
    """

    points: np.ndarray
    simplices: np.ndarray
    facet_tags: dict


def _ear_clip(loop: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon by ear clipping."""
    idx = list(range(len(loop)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(loop) ** 2:
            raise GeometryError("ear clipping failed; polygon is not simple")
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = loop[i0], loop[i1], loop[i2]
            if cross(a, b, c) <= 0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = loop[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
        else:
            raise GeometryError("ear clipping failed; polygon is not simple")
    tris.append(tuple(idx))
    return tris


def _tag_planar(simplices: np.ndarray, faces: Sequence[Face]) -> dict:
    tags = {}
    sets = [set(f.vertices) for f in faces]
    d = simplices.shape[1] - 1
    count: dict[frozenset, int] = {}
    for s in simplices:
        for facet in itertools.combinations(s, d):
            key = frozenset(int(v) for v in facet)
            count[key] = count.get(key, 0) + 1
    for key, c in count.items():
        if c != 1:
            continue
        for fi, fs in enumerate(sets):
            if key <= fs:
                tags[key] = fi
                break
    return tags


def decompose(cell: Cell) -> Decomposition:
    """Coarse simplicial split (triangle: itself, quadrilateral: two triangles,
    pyramid: two tetrahedra, prism: three tetrahedra per column, ...)."""
    if cell.kind == CellKind.MACROCELL:
        return _decompose_macro(cell)
    curved = any(f.subfacets is not None for f in cell.faces)
    if cell.dim == 2:
        if not curved and cell.kind in (CellKind.TRIANGLE, CellKind.QUADRILATERAL) and is_convex(cell):
            first = cell.faces[0].vertices[0]
            loop = [first]
            by_start = {f.vertices[0]: f.vertices[1] for f in cell.faces}
            while len(loop) < len(cell.faces):
                loop.append(by_start[loop[-1]])
            simp = np.array([(loop[0], loop[i], loop[i + 1]) for i in range(1, len(loop) - 1)])
            return Decomposition(cell.vertices.copy(), simp, _tag_planar(simp, cell.faces))
        # general polygon: ear clipping on the full boundary polyline
        points, tags, loop_ids = [], {}, []
        by_start = {f.vertices[0]: i for i, f in enumerate(cell.faces)}
        v = cell.faces[0].vertices[0]
        for _ in range(len(cell.faces)):
            fi = by_start[v]
            seg = face_subfacets(cell, fi)
            for k in range(len(seg)):
                loop_ids.append(fi)
                points.append(seg[k, 0])
            v = cell.faces[fi].vertices[1]
        pts = np.array(points)
        n = len(pts)
        for k in range(n):
            tags[frozenset((k, (k + 1) % n))] = loop_ids[k]
        simp = np.array(_ear_clip(pts))
        return Decomposition(pts, simp, tags)
    if not curved and cell.kind == CellKind.TETRAHEDRON:
        simp = np.array([[0, 1, 2, 3]])
        return Decomposition(cell.vertices.copy(), simp, _tag_planar(simp, cell.faces))
    if not curved and cell.kind == CellKind.PYRAMID:
        simp = np.array([[0, 1, 2, 3], [0, 1, 3, 4]])
        return Decomposition(cell.vertices.copy(), simp, _tag_planar(simp, cell.faces))
    if not curved and cell.kind == CellKind.PRISM:
        m = len(cell.heights)
        simp = []
        for i in range(1, m - 1):
            a, b, c = sorted((0, i, i + 1))
            # lower-of-smaller to upper-of-larger diagonals keep columns conforming
            simp += [
                [a, b, c, c + m],
                [a, b, b + m, c + m],
                [a, a + m, b + m, c + m],
            ]
        simp = np.array(simp)
        tags = _tag_planar(simp, cell.faces)
        return Decomposition(cell.vertices.copy(), simp, tags)
    # star-shaped fallback: cone from the vertex centroid over every face triangle
    center = all_points(cell).mean(axis=0)
    points, simp, tags = [center], [], {}
    for fi in range(len(cell.faces)):
        for tri in face_subfacets(cell, fi):
            base = len(points)
            points.extend(tri)
            simp.append([0, base, base + 1, base + 2])
            tags[frozenset((base, base + 1, base + 2))] = fi
    return _merge(np.array(points), np.array(simp), tags, diameter(cell))


def _merge(points, simplices, tags, scale):
    keys = np.round(points / (scale * 1e-9)).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    new_tags = {}
    for key, t in tags.items():
        new_tags[frozenset(int(inverse[v]) for v in key)] = t
    return Decomposition(points[first], inverse[simplices], new_tags)


def _decompose_macro(cell: Cell) -> Decomposition:
    owner = {o: i for i, o in enumerate(cell.meta["face_owner"])}
    points, simplices, tags = [], [], {}
    offset = 0
    for ci, child in enumerate(cell.children):
        dec = decompose(child)
        points.append(dec.points)
        simplices.append(dec.simplices + offset)
        for key, fi in dec.facet_tags.items():
            if isinstance(fi, int) and (ci, fi) in owner:
                tags[frozenset(v + offset for v in key)] = owner[(ci, fi)]
        offset += len(dec.points)
    return _merge(np.vstack(points), np.vstack(simplices), tags, diameter(cell))


def union_polygon(children: Sequence[Cell]):
    """Merge 2D cells glued along whole edges into one polygon.

    Returns ``(cell, face_map)``.  Consecutive collinear boundary edges are
    fused; ``face_map[(child, face)]`` gives the polygon face that coincides
    with that child face, for child faces that survive as complete faces.
    """
    if any(c.dim != 2 for c in children):
        raise GeometryError("union_polygon is two-dimensional")
    macro = macrocell(children)
    owner = macro.meta["face_owner"]
    by_start = {f.vertices[0]: i for i, f in enumerate(macro.faces)}
    if len(by_start) != len(macro.faces):
        raise GeometryError("union boundary is not a simple loop")
    order, v = [], macro.faces[0].vertices[0]
    for _ in range(len(macro.faces)):
        i = by_start[v]
        order.append(i)
        v = macro.faces[i].vertices[1]
    if v != macro.faces[0].vertices[0] or len(set(order)) != len(order):
        raise GeometryError("union boundary is not a single closed loop")
    pts = macro.vertices

    def direction(i):
        a, b = macro.faces[i].vertices
        e = pts[b] - pts[a]
        return e / np.linalg.norm(e)

    def straight(i):
        return not macro.faces[i].curvilinear

    def continues(prev, cur):
        if not (straight(prev) and straight(cur)):
            return False
        p, q = direction(prev), direction(cur)
        return abs(p[0] * q[1] - p[1] * q[0]) <= REL_TOL and p @ q > 0

    n = len(order)
    # start the walk at a genuine corner
    start = next((k for k in range(n) if not continues(order[k - 1], order[k])), None)
    if start is None:
        raise DegenerateGeometryError("union has no corners")
    order = order[start:] + order[:start]
    groups = []
    for k, i in enumerate(order):
        if k and continues(order[k - 1], i):
            groups[-1].append(i)
        else:
            groups.append([i])
    corners = [pts[macro.faces[g[0]].vertices[0]] for g in groups]
    subfacets = {}
    for gi, g in enumerate(groups):
        if len(g) == 1 and macro.faces[g[0]].curvilinear:
            line = face_subfacets(macro, g[0])
            subfacets[gi] = np.vstack([line[:, 0], line[-1:, 1]])
    cell = polygon(corners, subfacets=subfacets)
    face_map = {owner[g[0]]: gi for gi, g in enumerate(groups) if len(g) == 1}
    return cell, face_map


def chord_decomposition(cell: Cell, p, q, tag="chord") -> Decomposition:
    """Split a convex polygon along the chord ``pq`` (endpoints on the boundary).

    The chord facet is tagged ``tag``; boundary facets keep their face index.
    """
    if cell.dim != 2 or any(f.curvilinear for f in cell.faces) or not is_convex(cell):
        raise GeometryError("chord splitting needs a convex polygon with straight edges")
    p, q = np.asarray(p, float), np.asarray(q, float)
    tol = REL_TOL * diameter(cell)
    by_start = {f.vertices[0]: i for i, f in enumerate(cell.faces)}
    v = cell.faces[0].vertices[0]
    pts, owner = [], []  # boundary loop points; owner[k] tags segment k -> k+1
    ends = []
    for _ in range(len(cell.faces)):
        fi = by_start[v]
        a, b = cell.vertices[list(cell.faces[fi].vertices)]
        pts.append(a)
        owner.append(fi)
        e = b - a
        inner = []
        for x in (p, q):
            t = float((x - a) @ e / (e @ e))
            off = np.linalg.norm(a + t * e - x)
            if off <= tol and tol < t * np.linalg.norm(e) < np.linalg.norm(e) - tol:
                inner.append((t, x))
        for _, x in sorted(inner, key=lambda z: z[0]):
            pts.append(x)
            owner.append(fi)
        v = cell.faces[fi].vertices[1]
    pts = np.array(pts)
    for x in (p, q):
        hit = np.flatnonzero(np.linalg.norm(pts - x, axis=1) <= tol)
        if len(hit) != 1:
            raise GeometryError(f"chord endpoint {x} is not on the boundary")
        ends.append(int(hit[0]))
    i, j = sorted(ends)
    if j - i in (0, 1) or (i == 0 and j == len(pts) - 1):
        raise GeometryError("chord coincides with a boundary edge")
    n = len(pts)
    tags = {frozenset((k, (k + 1) % n)): owner[k] for k in range(n)}
    tags[frozenset((i, j))] = tag
    simp = []
    for loop in (list(range(i, j + 1)), list(range(j, n)) + list(range(0, i + 1))):
        simp += [(loop[0], loop[k], loop[k + 1]) for k in range(1, len(loop) - 1)]
    return Decomposition(pts, np.array(simp), tags)
