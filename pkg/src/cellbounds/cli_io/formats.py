"""Line-oriented cell and mesh documents.

A document is a sequence of sections; a header line names the section and
its size, the following lines hold its rows.  ``#`` starts a comment.

Cell document::

    DIMENSION 2
    KIND Quadrilateral
    VERTICES 4
    0 0
    1 0
    1 1
    0 1
    GAMMA 3

Further sections: ``FACES n`` (vertex index rows; required for generic 3D
polytopes), ``SUBFACETS face m`` (polyline points in 2D, triangles as nine
numbers in 3D), ``BASE m`` plus ``HEIGHTS m`` for prisms.

Mesh document: ``DIMENSION``, ``VERTICES``, ``CELLS m`` with rows
``Kind i j k ...``, an optional ``HULL measure`` line and an optional
``VALUES m k`` section holding one row per cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import geometry as geo
from ..cellmesh import CellMesh, build_mesh
from ..errors import CellBoundsError, GeometryError, ParseError

KINDS = {k.value: k for k in geo.CellKind}


@dataclass(frozen=True, eq=False)
class CellDocument:
    cell: geo.Cell
    gamma: tuple = ()


@dataclass(frozen=True, eq=False)
class MeshDocument:
    mesh: CellMesh
    values: np.ndarray | None = None


class _Lines:
    def __init__(self, text: str):
        self.rows = []
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                self.rows.append((no, line.split()))
        self.pos = 0

    def done(self):
        return self.pos >= len(self.rows)

    def next(self):
        if self.done():
            no = self.rows[-1][0] if self.rows else 1
            raise ParseError("unexpected end of document", no)
        row = self.rows[self.pos]
        self.pos += 1
        return row


def _int(tok, no, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{what}: expected an integer, got {tok!r}", no) from None


def _floats(toks, no, n, what):
    if len(toks) != n:
        raise ParseError(f"{what}: expected {n} numbers, got {len(toks)}", no)
    try:
        return [float(t) for t in toks]
    except ValueError:
        raise ParseError(f"{what}: malformed number in {' '.join(toks)!r}", no) from None


def _count(head, no):
    if len(head) < 2:
        raise ParseError(f"{head[0]} needs a row count", no)
    n = _int(head[1], no, head[0])
    if n < 0:
        raise ParseError(f"{head[0]}: negative count", no)
    return n


def _rows(lines, n, width, what):
    out = []
    for _ in range(n):
        no, toks = lines.next()
        out.append(_floats(toks, no, width, what))
    return out


def _sections(text: str):
    """Yield ``(line_no, header_tokens, lines)``; the caller consumes rows."""
    lines = _Lines(text)
    while not lines.done():
        no, head = lines.next()
        yield no, [head[0].upper()] + head[1:], lines


def parse_cell(text: str) -> CellDocument:
    """Parse and validate a cell document."""
    dim = kind = None
    verts = faces = base = heights = None
    subfacets, gamma = {}, ()
    kind_line = 1
    for no, head, lines in _sections(text):
        key = head[0]
        if key == "DIMENSION":
            dim = _int(head[1] if len(head) > 1 else "", no, "DIMENSION")
            if dim not in (2, 3):
                raise ParseError(f"DIMENSION must be 2 or 3, got {dim}", no)
        elif key == "KIND":
            if len(head) != 2 or head[1] not in KINDS:
                raise ParseError(f"KIND must be one of {sorted(KINDS)}", no)
            kind, kind_line = KINDS[head[1]], no
        elif key == "VERTICES":
            if dim is None:
                raise ParseError("DIMENSION must precede VERTICES", no)
            verts = _rows(lines, _count(head, no), dim, "VERTICES")
        elif key == "FACES":
            faces = []
            for _ in range(_count(head, no)):
                fno, toks = lines.next()
                faces.append((fno, [_int(t, fno, "FACES") for t in toks]))
        elif key == "SUBFACETS":
            if len(head) != 3 or dim is None:
                raise ParseError("SUBFACETS needs a face index and a row count after DIMENSION", no)
            f, m = _int(head[1], no, "SUBFACETS"), _int(head[2], no, "SUBFACETS")
            width = 2 if dim == 2 else 9
            rows = np.array(_rows(lines, m, width, "SUBFACETS"))
            subfacets[f] = (no, rows if dim == 2 else rows.reshape(-1, 3, 3))
        elif key == "BASE":
            base = _rows(lines, _count(head, no), 2, "BASE")
        elif key == "HEIGHTS":
            n = _count(head, no)
            no2, toks = lines.next()
            heights = _floats(toks, no2, n, "HEIGHTS")
        elif key == "GAMMA":
            gamma = tuple(_int(t, no, "GAMMA") for t in head[1:])
        else:
            raise ParseError(f"unknown section {head[0]!r}", no)
    if dim is None:
        raise ParseError("missing DIMENSION", 1)
    if kind is None:
        raise ParseError("missing KIND", 1)
    try:
        cell = _make_cell(dim, kind, verts, faces, subfacets, base, heights, kind_line)
    except ParseError:
        raise
    except CellBoundsError as exc:
        raise GeometryError(f"invalid cell: {exc}") from exc
    for g in gamma:
        if not 0 <= g < len(cell.faces):
            raise ParseError(f"GAMMA face {g} out of range (cell has {len(cell.faces)} faces)")
    return CellDocument(cell, gamma)


def _make_cell(dim, kind, verts, faces, subfacets, base, heights, kind_line):
    if kind == geo.CellKind.MACROCELL:
        raise ParseError("macrocells are read from mesh documents", kind_line)
    if kind == geo.CellKind.PRISM:
        if base is None or heights is None:
            raise ParseError("a prism needs BASE and HEIGHTS", kind_line)
        if len(heights) not in (1, len(base)):
            raise ParseError("HEIGHTS must give one value or one per base vertex", kind_line)
        return geo.prism(base, heights if len(heights) > 1 else heights[0])
    if verts is None:
        raise ParseError("missing VERTICES", kind_line)
    nv = len(verts)
    if faces is not None:
        for fno, f in faces:
            if any(v < 0 or v >= nv for v in f):
                raise ParseError(f"face index out of range 0..{nv - 1}", fno)
    for f, (no, _) in subfacets.items():
        nf = nv if dim == 2 else (len(faces) if faces else {4: 4, 5: 5}.get(nv, 0))
        if not 0 <= f < nf:
            raise ParseError(f"SUBFACETS face {f} out of range", no)
    expect = {
        geo.CellKind.TRIANGLE: 3,
        geo.CellKind.QUADRILATERAL: 4,
        geo.CellKind.TETRAHEDRON: 4,
        geo.CellKind.PYRAMID: 5,
    }
    if kind in expect and nv != expect[kind]:
        raise ParseError(f"{kind.value} needs {expect[kind]} vertices, got {nv}", kind_line)
    if dim == 2:
        if faces is not None:
            for i, (fno, f) in enumerate(faces):
                if sorted(f) != sorted((i, (i + 1) % nv)):
                    raise ParseError("2D faces must join consecutive vertices in order", fno)
        return geo.polygon(verts, kind, {f: rows for f, (_, rows) in subfacets.items()})
    subs = {f: rows for f, (_, rows) in subfacets.items()}
    if kind == geo.CellKind.TETRAHEDRON and faces is None and not subs:
        return geo.tetrahedron(verts)
    if kind == geo.CellKind.PYRAMID and faces is None and not subs:
        return geo.pyramid(verts[0], verts[1:])
    if faces is None:
        raise ParseError(f"{kind.value} cells need a FACES section", kind_line)
    return geo.polytope(verts, [f for _, f in faces], kind, subs)


def _fmt(x) -> str:
    return repr(float(x))


def _polyline(cell: geo.Cell, i: int) -> np.ndarray:
    seg = geo.face_subfacets(cell, i)
    line = np.vstack([seg[:, 0], seg[-1:, 1]])
    return line if cell.faces[i].vertices[0] == i else line[::-1]


def serialize_cell(cell: geo.Cell, gamma=()) -> str:
    """Document text that parses back to an identical cell."""
    out = [f"DIMENSION {cell.dim}", f"KIND {cell.kind.value}"]
    if cell.kind == geo.CellKind.MACROCELL:
        raise GeometryError("macrocells are written as mesh documents")
    if cell.kind == geo.CellKind.PRISM:
        m = len(cell.heights)
        out.append(f"BASE {m}")
        out += [" ".join(_fmt(x) for x in p[:2]) for p in cell.vertices[:m]]
        out.append(f"HEIGHTS {m}")
        out.append(" ".join(_fmt(h) for h in cell.heights))
    else:
        out.append(f"VERTICES {len(cell.vertices)}")
        out += [" ".join(_fmt(x) for x in p) for p in cell.vertices]
        generic3d = cell.dim == 3 and (
            cell.kind not in (geo.CellKind.TETRAHEDRON, geo.CellKind.PYRAMID)
            or any(f.subfacets is not None for f in cell.faces)
        )
        if generic3d:
            out.append(f"FACES {len(cell.faces)}")
            out += [" ".join(str(v) for v in f.vertices) for f in cell.faces]
        for i, f in enumerate(cell.faces):
            if f.subfacets is None:
                continue
            if cell.dim == 2:
                line = _polyline(cell, i)
                out.append(f"SUBFACETS {i} {len(line)}")
                out += [" ".join(_fmt(x) for x in p) for p in line]
            else:
                out.append(f"SUBFACETS {i} {len(f.subfacets)}")
                out += [" ".join(_fmt(x) for x in t.ravel()) for t in f.subfacets]
    if gamma:
        out.append("GAMMA " + " ".join(str(int(g)) for g in gamma))
    return "\n".join(out) + "\n"


def cells_identical(a: geo.Cell, b: geo.Cell) -> bool:
    if a.kind != b.kind or a.vertices.shape != b.vertices.shape:
        return False
    if not np.array_equal(a.vertices, b.vertices):
        return False
    if [f.vertices for f in a.faces] != [f.vertices for f in b.faces]:
        return False
    for fa, fb in zip(a.faces, b.faces):
        if (fa.subfacets is None) != (fb.subfacets is None):
            return False
        if fa.subfacets is not None and not np.array_equal(fa.subfacets, fb.subfacets):
            return False
    ha, hb = a.heights, b.heights
    return (ha is None and hb is None) or (ha is not None and hb is not None and np.array_equal(ha, hb))


def parse_mesh(text: str) -> MeshDocument:
    dim = verts = cells = values = None
    kinds, hull = [], None
    for no, head, lines in _sections(text):
        key = head[0]
        if key == "DIMENSION":
            dim = _int(head[1] if len(head) > 1 else "", no, "DIMENSION")
            if dim not in (2, 3):
                raise ParseError(f"DIMENSION must be 2 or 3, got {dim}", no)
        elif key == "VERTICES":
            if dim is None:
                raise ParseError("DIMENSION must precede VERTICES", no)
            verts = _rows(lines, _count(head, no), dim, "VERTICES")
        elif key == "CELLS":
            cells = []
            for _ in range(_count(head, no)):
                cno, toks = lines.next()
                if not toks or toks[0] not in KINDS:
                    raise ParseError(f"cell row must start with a kind from {sorted(KINDS)}", cno)
                kinds.append(toks[0])
                ids = [_int(t, cno, "CELLS") for t in toks[1:]]
                if verts is not None and any(v < 0 or v >= len(verts) for v in ids):
                    raise ParseError("cell vertex index out of range", cno)
                cells.append(ids)
        elif key == "HULL":
            hull = _floats(head[1:], no, 1, "HULL")[0]
        elif key == "VALUES":
            if len(head) != 3:
                raise ParseError("VALUES needs a row count and a width", no)
            m, k = _int(head[1], no, "VALUES"), _int(head[2], no, "VALUES")
            values = np.array(_rows(lines, m, k, "VALUES"))
            if k == 1:
                values = values[:, 0]
        else:
            raise ParseError(f"unknown section {head[0]!r}", no)
    if dim is None or verts is None or cells is None:
        raise ParseError("a mesh needs DIMENSION, VERTICES and CELLS", 1)
    try:
        mesh = build_mesh(verts, cells, kinds, hull_measure=hull)
    except CellBoundsError as exc:
        raise GeometryError(f"invalid mesh: {exc}") from exc
    if values is not None and len(values) != len(mesh.cells):
        raise ParseError(f"VALUES has {len(values)} rows for {len(mesh.cells)} cells")
    return MeshDocument(mesh, values)


def serialize_mesh(mesh: CellMesh, values=None) -> str:
    out = [f"DIMENSION {mesh.dim}", f"VERTICES {len(mesh.vertices)}"]
    out += [" ".join(_fmt(x) for x in p) for p in mesh.vertices]
    out.append(f"CELLS {len(mesh.cells)}")
    for kind, ids in zip(mesh.kinds, mesh.cell_vertices):
        out.append(kind + " " + " ".join(str(v) for v in ids))
    if mesh.hull_measure is not None:
        out.append(f"HULL {_fmt(mesh.hull_measure)}")
    if values is not None:
        vals = np.asarray(values, dtype=float)
        rows = vals[:, None] if vals.ndim == 1 else vals
        out.append(f"VALUES {len(rows)} {rows.shape[1]}")
        out += [" ".join(_fmt(x) for x in r) for r in rows]
    return "\n".join(out) + "\n"


def meshes_identical(a: CellMesh, b: CellMesh) -> bool:
    return (
        np.array_equal(a.vertices, b.vertices)
        and a.cell_vertices == b.cell_vertices
        and tuple(a.kinds) == tuple(b.kinds)
        and a.hull_measure == b.hull_measure
    )
