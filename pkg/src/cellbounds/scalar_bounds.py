"""Closed-form bounds and tabulated exact values for C_P and C_Gamma.

Every function returns a :class:`ConstantBound`.  ``gamma`` arguments are a
face index or a sequence of face indices of the cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from .errors import GeometryError, InvalidFluxError, PreconditionError

J01 = 2.404825557695773  # first zero of J_0
J11 = 3.831705970207512  # first zero of J_1
ZETA = 2.02876  # first root used in the tabulated triangle-leg constant

FLUX_TOL = 1e-8


@dataclass(frozen=True)
class ConstantBound:
    value: float
    kind: str  # "upper" | "lower" | "exact"
    formula: str
    preconditions: dict = field(default_factory=dict)
    notes: tuple = ()

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"constant must be positive, got {self.value}")
        if self.kind not in ("upper", "lower", "exact"):
            raise ValueError(f"unknown bound kind {self.kind!r}")

    @property
    def disputed(self) -> bool:
        return any(n.startswith("disputed") for n in self.notes)

    def scaled(self, factor: float) -> "ConstantBound":
        return ConstantBound(self.value * factor, self.kind, self.formula, self.preconditions, self.notes)


def _faces(gamma) -> tuple[int, ...]:
    if isinstance(gamma, (int, np.integer)):
        return (int(gamma),)
    return tuple(sorted(int(g) for g in gamma))


def gamma_measure(cell: geo.Cell, gamma) -> float:
    return sum(geo.measure(cell, f) for f in _faces(gamma))


# ---------------------------------------------------------------------------
# C_P


def cp_upper_classical(cell: geo.Cell) -> ConstantBound:
    d = geo.diameter(cell)
    if cell.dim == 3:
        return ConstantBound(0.75 * d, "upper", "poincare-3d")
    return ConstantBound(math.sqrt(7.0 / 24.0) * d, "upper", "poincare-2d")


def cp_upper_convex(cell: geo.Cell) -> ConstantBound:
    if not geo.is_convex(cell):
        raise PreconditionError("diameter/pi bound needs a convex cell")
    return ConstantBound(geo.diameter(cell) / math.pi, "upper", "payne-weinberger", {"convex": True})


def cp_lower_cheng(cell: geo.Cell) -> ConstantBound:
    if cell.dim != 2:
        raise PreconditionError("Cheng's lower bound is two-dimensional")
    return ConstantBound(geo.diameter(cell) / (2 * J01), "lower", "cheng")


def _edge_lengths(cell):
    return [geo.measure(cell, i) for i in range(len(cell.faces))]


def is_isosceles(cell: geo.Cell, tol: float = 1e-9) -> bool:
    if cell.kind != geo.CellKind.TRIANGLE:
        return False
    a = _edge_lengths(cell)
    d = max(a)
    return any(abs(x - y) <= tol * d for x, y in itertools.combinations(a, 2))


def cp_upper_isosceles(cell: geo.Cell) -> ConstantBound:
    if not is_isosceles(cell):
        raise PreconditionError("the J_1 bound needs an isosceles triangle")
    return ConstantBound(geo.diameter(cell) / J11, "upper", "laugesen-siudeja", {"isosceles": True})


def cp_upper(cell: geo.Cell, cp_mode="convex") -> ConstantBound:
    """Resolve the C_P upper bound that feeds composite formulas.

    ``cp_mode`` is ``"convex"`` (diameter/pi, convex cells only),
    ``"classical"``, a number, or a ready :class:`ConstantBound`.
    """
    if isinstance(cp_mode, ConstantBound):
        if cp_mode.kind == "lower":
            raise PreconditionError("a lower bound cannot feed an upper bound")
        return cp_mode
    if isinstance(cp_mode, (int, float)):
        return ConstantBound(float(cp_mode), "upper", "user")
    if cp_mode == "convex":
        return cp_upper_convex(cell)
    if cp_mode == "classical":
        return cp_upper_classical(cell)
    raise ValueError(f"unknown cp_mode {cp_mode!r}")


# ---------------------------------------------------------------------------
# tabulated sharp constants


def _is_rectangle(cell) -> bool:
    if cell.kind != geo.CellKind.QUADRILATERAL or cell.dim != 2:
        return False
    if any(f.curvilinear for f in cell.faces):
        return False
    n = [geo.outward_unit_normal(cell, i) for i in range(4)]
    return all(abs(n[i] @ n[(i + 1) % 4]) < 1e-9 for i in range(4))


def _box_axes(cell):
    """Edge lengths per axis if the cell is a rectangular box, else None."""
    if cell.dim != 3 or len(cell.vertices) != 8 or len(cell.faces) != 6:
        return None
    if any(f.subfacets is not None for f in cell.faces):
        return None
    normals = np.array([geo.outward_unit_normal(cell, i) for i in range(6)])
    gram = np.abs(normals @ normals.T)
    if not np.all((np.abs(gram) < 1e-9) | (np.abs(gram - 1) < 1e-9)):
        return None
    if not all(len(f.vertices) == 4 for f in cell.faces):
        return None
    return normals


def _box_extent(cell, normal):
    proj = cell.vertices @ normal
    return float(proj.max() - proj.min())


def _right_isosceles(cell):
    """(h, right-angle vertex) for a right isosceles triangle, else None."""
    if cell.kind != geo.CellKind.TRIANGLE or any(f.curvilinear for f in cell.faces):
        return None
    pts = cell.vertices
    for i in range(3):
        u, v = pts[(i + 1) % 3] - pts[i], pts[(i + 2) % 3] - pts[i]
        lu, lv = np.linalg.norm(u), np.linalg.norm(v)
        if abs(u @ v) <= 1e-9 * lu * lv and abs(lu - lv) <= 1e-9 * lu:
            return float(lu), i
    return None


def exact_tabulated(cell: geo.Cell, gamma) -> ConstantBound | None:
    """Tabulated sharp C_Gamma, or None when the cell/Gamma pair is not tabulated.

    The hypotenuse row is reproduced as printed (sqrt(2) h / zeta) and marked
    as disputed: it exceeds the closed-form upper bound of the same triangle.
    """
    g = _faces(gamma)
    if _is_rectangle(cell):
        if len(g) == 4:
            h1 = geo.measure(cell, 0)
            h2 = geo.measure(cell, 1)
            return ConstantBound(max(h1, h2) / math.pi, "exact", "tabulated:rectangle-boundary")
        if len(g) == 1:
            along = geo.measure(cell, g[0])
            across = geo.measure(cell, (g[0] + 1) % 4)
            return ConstantBound(max(2 * across, along) / math.pi, "exact", "tabulated:rectangle-side")
        return None
    normals = _box_axes(cell)
    if normals is not None and len(g) == 1:
        n = normals[g[0]]
        others = [m for m in normals if abs(m @ n) < 0.5]
        across = _box_extent(cell, n)
        sides = [_box_extent(cell, m) for m in others]
        return ConstantBound(max([2 * across] + sides) / math.pi, "exact", "tabulated:box-face")
    ri = _right_isosceles(cell)
    if ri is not None:
        h, corner = ri
        legs = [i for i, f in enumerate(cell.faces) if corner in f.vertices]
        hyp = [i for i in range(3) if i not in legs]
        if len(g) == 1 and g[0] in legs:
            return ConstantBound(h / ZETA, "exact", "tabulated:triangle-leg")
        if sorted(g) == sorted(legs):
            return ConstantBound(h / math.pi, "exact", "tabulated:triangle-two-legs")
        if list(g) == hyp:
            return ConstantBound(
                math.sqrt(2) * h / ZETA,
                "exact",
                "tabulated:triangle-hypotenuse",
                notes=(
                    "disputed: printed value exceeds the triangle upper bound; "
                    "the operator comparison uses h/(zeta*sqrt(2))",
                ),
            )
    return None


def hypotenuse_alternative(h: float) -> float:
    """h/(zeta*sqrt(2)), the hypotenuse constant quoted in the operator comparison."""
    return h / (ZETA * math.sqrt(2))


# ---------------------------------------------------------------------------
# flux-field majorant


@dataclass(frozen=True, eq=False)
class FluxField:
    """Piecewise-affine vector field given by nodal values per simplex.

    ``values[k, i]`` is the field at vertex ``i`` of simplex ``k``; the field
    may be discontinuous as long as normal components match across facets.
    """

    points: np.ndarray
    simplices: np.ndarray
    values: np.ndarray
    facet_tags: dict

    @property
    def dim(self):
        return self.points.shape[1]


def _simplex_volumes(points, simplices):
    d = points.shape[1]
    v = points[simplices]
    jac = v[:, 1:] - v[:, :1]
    return np.abs(np.linalg.det(jac)) / math.factorial(d)


def flux_norm_squared(tau: FluxField) -> float:
    """Exact L2 norm squared of the piecewise-affine field."""
    d = tau.dim
    vol = _simplex_volumes(tau.points, tau.simplices)
    a = tau.values
    s = np.einsum("kij,kij->k", a, a) + np.einsum("kj,kj->k", a.sum(axis=1), a.sum(axis=1))
    return float(np.sum(vol * s) / ((d + 1) * (d + 2)))


def _affine_divergence(pts, vals):
    """Divergence of the affine field with nodal values ``vals`` on simplex ``pts``."""
    jac = (pts[1:] - pts[0]).T
    dv = (vals[1:] - vals[0]).T  # columns: value differences
    grad = dv @ np.linalg.inv(jac)  # d tau_i / d x_j
    return float(np.trace(grad))


def _facet_normal(pts):
    if len(pts) == 2:
        d = pts[1] - pts[0]
        n = np.array([d[1], -d[0]])
    else:
        n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
    return n / np.linalg.norm(n)


def check_flux(cell: geo.Cell, gamma, tau: FluxField, tol: float = FLUX_TOL):
    """Raise InvalidFluxError unless div tau = |Gamma|/|Omega|, tau.n = 1 on
    Gamma, tau.n = 0 on the rest of the boundary, and normal traces match."""
    g = set(_faces(gamma))
    area = geo.measure(cell)
    target = gamma_measure(cell, g) / area
    vol = _simplex_volumes(tau.points, tau.simplices)
    if abs(vol.sum() - area) > tol * area:
        raise InvalidFluxError("flux support does not cover the cell")
    scale = max(1.0, np.abs(tau.values).max())
    for k, s in enumerate(tau.simplices):
        div = _affine_divergence(tau.points[s], tau.values[k])
        if abs(div - target) > tol * max(target, 1.0) * scale:
            raise InvalidFluxError(f"simplex {k}: div tau = {div:.6g}, expected {target:.6g}")
    d = tau.dim
    facets: dict[frozenset, list] = {}
    for k, s in enumerate(tau.simplices):
        for local in itertools.combinations(range(d + 1), d):
            key = frozenset(int(s[i]) for i in local)
            facets.setdefault(key, []).append((k, local))
    centre = tau.points[tau.simplices].mean(axis=1)
    for key, owners in facets.items():
        k, local = owners[0]
        s = tau.simplices[k]
        pts = tau.points[[s[i] for i in local]]
        n = _facet_normal(pts)
        if np.dot(pts.mean(axis=0) - centre[k], n) < 0:
            n = -n
        tn = tau.values[k][list(local)] @ n
        if len(owners) == 1:
            tag = tau.facet_tags.get(key)
            if tag is None:
                raise InvalidFluxError("boundary facet without a face tag")
            want = 1.0 if tag in g else 0.0
            if np.max(np.abs(tn - want)) > tol * scale:
                raise InvalidFluxError(f"tau.n = {tn} on face {tag}, expected {want}")
        else:
            k2, local2 = owners[1]
            s2 = tau.simplices[k2]
            order = {int(s[i]): j for j, i in enumerate(local)}
            tn2 = np.empty(d)
            for i in local2:
                tn2[order[int(s2[i])]] = tau.values[k2][i] @ n
            if np.max(np.abs(tn - tn2)) > tol * scale:
                raise InvalidFluxError("normal component jumps across an interior facet")


def cone_flux(cell: geo.Cell, gamma) -> FluxField:
    """tau = (x - apex) / h for cones over a planar Gamma (simplices, pyramids).

    The field is parallel to every face through the apex and has unit normal
    component on Gamma, so it satisfies all side conditions.
    """
    g = _faces(gamma)
    if len(g) != 1 or cell.faces[g[0]].curvilinear:
        raise PreconditionError("cone flux needs a single planar face")
    face = set(cell.faces[g[0]].vertices)
    apex_ids = [i for i in range(len(cell.vertices)) if i not in face]
    if len(apex_ids) != 1:
        raise PreconditionError("cell is not a cone over Gamma")
    apex = cell.vertices[apex_ids[0]]
    n = geo.outward_unit_normal(cell, g[0])
    h = float((cell.face_points(g[0])[0] - apex) @ n)
    dec = geo.decompose(cell)
    vals = (dec.points[dec.simplices] - apex) / h
    return FluxField(dec.points, dec.simplices, vals, dec.facet_tags)


def incenter_flux(cell: geo.Cell) -> FluxField:
    """tau = (x - c) / r for cells with an inscribed ball touching every face (Gamma = boundary)."""
    if any(f.curvilinear for f in cell.faces):
        raise PreconditionError("incentre flux needs planar faces")
    m = len(cell.faces)
    normals = np.array([geo.outward_unit_normal(cell, i) for i in range(m)])
    offsets = np.array([normals[i] @ cell.face_points(i)[0] for i in range(m)])
    # n_i . c + r = offset_i for every face
    a = np.c_[normals, np.ones(m)]
    sol, *_ = np.linalg.lstsq(a, offsets, rcond=None)
    c, r = sol[:-1], sol[-1]
    if r <= 0 or np.max(np.abs(a @ sol - offsets)) > 1e-9 * geo.diameter(cell):
        raise PreconditionError("cell has no inscribed ball touching all faces")
    dec = geo.decompose(cell)
    vals = (dec.points[dec.simplices] - c) / r
    return FluxField(dec.points, dec.simplices, vals, dec.facet_tags)


def c_gamma_majorant_generic(cell: geo.Cell, gamma, tau: FluxField, cp) -> ConstantBound:
    check_flux(cell, gamma, tau)
    cp = cp_upper(cell, cp)
    area = geo.measure(cell)
    g2 = gamma_measure(cell, gamma) ** 2
    value = math.sqrt(cp.value**2 + area / g2 * flux_norm_squared(tau))
    return ConstantBound(value, "upper", "flux-majorant", {"cp": cp.formula})


# ---------------------------------------------------------------------------
# cell-specific majorants


def c_gamma_triangle(cell: geo.Cell, gamma: int, cp_mode="convex") -> ConstantBound:
    _, _, _, h = geo.triangle_frame(cell, gamma)
    sigma = geo.sigma_alpha_beta(cell, gamma)
    cp = cp_upper(cell, cp_mode)
    return ConstantBound(
        math.sqrt(cp.value**2 + h * h * sigma / 24.0), "upper", "triangle", {"cp": cp.formula}
    )


def c_gamma_lower(cell: geo.Cell) -> ConstantBound:
    if cell.dim != 2:
        raise PreconditionError("the C_Gamma minorant is two-dimensional")
    return ConstantBound(geo.diameter(cell) / (2 * J01), "lower", "cheng-minorant")


def quadrilateral_splits(cell: geo.Cell, gamma: int):
    """Valid (omega1, omega2) triangle pairs; omega1 contains the edge gamma."""
    if cell.kind != geo.CellKind.QUADRILATERAL:
        raise GeometryError("a quadrilateral is required")
    p, q = cell.faces[gamma].vertices
    nxt = {f.vertices[0]: f.vertices[1] for f in cell.faces}
    r = nxt[q]
    s = nxt[r]
    pts = cell.vertices
    area = geo.measure(cell)
    out = []
    for o1, o2 in (((p, q, r), (p, r, s)), ((p, q, s), (q, r, s))):
        t1, t2 = pts[list(o1)], pts[list(o2)]
        a1, a2 = geo._signed_area(t1), geo._signed_area(t2)
        if a1 > 0 and a2 > 0 and abs(a1 + a2 - area) <= 1e-9 * area:
            out.append((o1, o2, a1, a2))
    return out


def c_gamma_quadrilateral(cell: geo.Cell, gamma: int, split="auto", cp=None) -> ConstantBound:
    """Triangle flux on omega1 (containing Gamma), zero flux on omega2.

    ``split`` is ``"auto"`` (largest omega1) or 0/1 selecting the diagonal
    through the second or first endpoint of Gamma.
    """
    options = quadrilateral_splits(cell, gamma)
    if split == "auto":
        if not options:
            raise PreconditionError("no valid diagonal split")
        o1, o2, a1, a2 = max(options, key=lambda o: o[2])
    else:
        p, q = cell.faces[gamma].vertices
        wanted = [o for o in options if (o[1][0] == p) == (split == 0)]
        if not wanted:
            raise PreconditionError(f"split {split} is not valid for this quadrilateral")
        o1, o2, a1, a2 = wanted[0]
    if cp is None:
        cp = "convex"
    cpb = cp_upper(cell, cp)
    tri = geo.triangle(cell.vertices[list(o1)])
    sigma = geo.sigma_alpha_beta(tri, 0)
    kappa = math.sqrt(a2 / a1)
    area = geo.measure(cell)
    g = geo.measure(cell, gamma)
    term = kappa * cpb.value + math.sqrt(sigma) * area / (math.sqrt(6.0) * g)
    return ConstantBound(
        math.sqrt(cpb.value**2 + term**2),
        "upper",
        "quadrilateral",
        {"cp": cpb.formula, "kappa": kappa},
    )


def c_gamma_tetrahedron(cell: geo.Cell, gamma: int) -> ConstantBound:
    if cell.kind != geo.CellKind.TETRAHEDRON:
        raise GeometryError("a tetrahedron is required")
    face = cell.faces[gamma].vertices
    apex = cell.vertices[[i for i in range(4) if i not in face][0]]
    e = cell.vertices[list(face)] - apex
    s = sum(e[i] @ e[j] for i in range(3) for j in range(i, 3))
    d = geo.diameter(cell)
    return ConstantBound(math.sqrt(d * d / math.pi**2 + s / 90.0), "upper", "tetrahedron")


def c_gamma_pyramid(cell: geo.Cell, gamma: int = 0) -> ConstantBound:
    """Pyramid OABCD with Gamma the base; eta, zeta, sigma, chi = A-O, ..., D-O."""
    if cell.kind != geo.CellKind.PYRAMID:
        raise GeometryError("a pyramid is required")
    if gamma != 0:
        raise PreconditionError("Gamma must be the quadrilateral base (face 0)")
    o, a, b, c, dd = cell.vertices
    abc = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    acd = 0.5 * np.linalg.norm(np.cross(c - a, dd - a))
    if abs(abc - acd) > 1e-8 * max(abc, acd):
        raise PreconditionError(f"base triangles ABC and ACD differ in area ({abc:.6g} vs {acd:.6g})")
    eta, zeta, sig, chi = a - o, b - o, c - o, dd - o
    s = 2 * eta @ eta + zeta @ zeta + 2 * sig @ sig + chi @ chi + 2 * eta @ sig + (eta + sig) @ (chi + zeta)
    d = geo.diameter(cell)
    return ConstantBound(math.sqrt(d * d / math.pi**2 + s / 180.0), "upper", "pyramid")


def prism_height_stats(cell: geo.Cell) -> tuple[float, float]:
    """Mean height over the base and minimal height."""
    if cell.kind != geo.CellKind.PRISM:
        raise GeometryError("a prism is required")
    h = cell.heights
    m = len(h)
    base = cell.vertices[:m, :2]
    total = area = 0.0
    for i in range(1, m - 1):
        t = abs(geo._signed_area(base[[0, i, i + 1]]))
        total += t * (h[0] + h[i] + h[i + 1]) / 3.0
        area += t
    return total / area, float(h.min())


def c_gamma_prism(cell: geo.Cell, cp=None) -> ConstantBound:
    """Bound for Gamma = base of a prism with height function H >= H_min."""
    mean_h, h_min = prism_height_stats(cell)
    if h_min <= 0:
        raise PreconditionError("H_min must be positive")
    if cp is None:
        try:
            cp = cp_upper_convex(cell)
        except PreconditionError:
            raise PreconditionError("non-convex prism: supply a C_P upper bound") from None
    cpb = cp_upper(cell, cp)
    kappa = math.sqrt(max(0.0, mean_h / h_min - 1.0))
    value = math.sqrt(cpb.value**2 + (mean_h / math.sqrt(3.0) + cpb.value * kappa) ** 2)
    return ConstantBound(value, "upper", "prism", {"cp": cpb.formula, "kappa": kappa})


def c_gamma_prism_constant_height(cell: geo.Cell) -> ConstantBound:
    """sqrt((d_Gamma^2 + (1 + pi^2/3) H^2) / pi^2) for constant H over a convex base."""
    h = cell.heights
    if not np.allclose(h, h[0], rtol=1e-12):
        raise PreconditionError("height is not constant")
    base = geo.polygon(cell.vertices[: len(h), :2])
    if not geo.is_convex(base):
        raise PreconditionError("base is not convex")
    d_base = geo.diameter(base)
    value = math.sqrt((d_base**2 + (1 + math.pi**2 / 3) * h[0] ** 2) / math.pi**2)
    return ConstantBound(value, "upper", "prism-constant-height")


def prism_box_ratio(a: float, b: float, height: float) -> float:
    """Closed-form bound divided by the exact constant for the box (0,a)x(0,b)x(0,H)."""
    cell = geo.box(a, b, height)
    bound = c_gamma_prism_constant_height(cell).value
    exact = exact_tabulated(cell, 0).value
    return bound / exact


# ---------------------------------------------------------------------------
# dispatch


def best_c_gamma(cell: geo.Cell, gamma) -> ConstantBound:
    """Smallest rigorous constant available for (cell, Gamma).

    Tabulated exact values win unless disputed; otherwise the cell-specific
    majorant is used.  Raises PreconditionError when nothing applies.
    """
    candidates = applicable_c_gamma(cell, gamma)
    usable = [b for b in candidates if b.kind in ("upper", "exact") and not b.disputed]
    if not usable:
        raise PreconditionError(
            f"no closed-form C_Gamma for {cell.kind.value} with Gamma={_faces(gamma)}; "
            "generic majorant requires a flux field"
        )
    return min(usable, key=lambda b: b.value)


def applicable_c_gamma(cell: geo.Cell, gamma) -> list[ConstantBound]:
    g = _faces(gamma)
    out = []
    exact = exact_tabulated(cell, g)
    if exact is not None:
        out.append(exact)
    convex = geo.is_convex(cell)
    if len(g) == 1 and not cell.faces[g[0]].curvilinear:
        f = g[0]
        if cell.kind == geo.CellKind.TRIANGLE:
            out.append(c_gamma_triangle(cell, f))
        elif cell.kind == geo.CellKind.QUADRILATERAL and convex:
            out.append(c_gamma_quadrilateral(cell, f))
        elif cell.kind == geo.CellKind.TETRAHEDRON:
            out.append(c_gamma_tetrahedron(cell, f))
        elif cell.kind == geo.CellKind.PYRAMID and f == 0:
            try:
                out.append(c_gamma_pyramid(cell, f))
            except PreconditionError:
                out.append(c_gamma_majorant_generic(cell, f, cone_flux(cell, f), "convex"))
        elif cell.kind == geo.CellKind.PRISM and f == 0 and convex:
            out.append(c_gamma_prism(cell))
    if len(g) == len(cell.faces) and convex and cell.kind != geo.CellKind.MACROCELL:
        try:
            out.append(c_gamma_majorant_generic(cell, g, incenter_flux(cell), "convex"))
        except PreconditionError:
            pass
    if cell.dim == 2:
        out.append(c_gamma_lower(cell))
    return out


def best_cp(cell: geo.Cell) -> ConstantBound:
    """Smallest applicable C_P upper bound."""
    out = [cp_upper_classical(cell)]
    if geo.is_convex(cell):
        out.append(cp_upper_convex(cell))
    if is_isosceles(cell):
        out.append(cp_upper_isosceles(cell))
    return min(out, key=lambda b: b.value)
