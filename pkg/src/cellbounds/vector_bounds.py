"""Constants for vector fields with zero mean normal components on d faces.

The vector constant combines scalar constants ``C_Gamma_k`` with the
geometry of the normals through ``lambda_1``, the smallest eigenvalue of
``T = sum_k n_k (x) n_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import scalar_bounds as sb
from .errors import DependentNormalsError, GeometryError, PreconditionError

FORMULA_ANGLE = "two-face-angle"
FORMULA_EIGEN = "normal-eigenvalue"
FORMULA_MACRO = "macrocell-max"


@dataclass(frozen=True)
class VectorConstant:
    value: float
    scalar_constants: tuple = ()
    lambda_min: float = 1.0
    formula: str = FORMULA_EIGEN
    notes: tuple = field(default=())

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"vector constant must be finite and positive, got {self.value}")


def _value(c) -> float:
    if isinstance(c, sb.ConstantBound):
        if c.kind == "lower":
            raise PreconditionError("a lower bound cannot feed a vector constant")
        return c.value
    return float(c)


def _as_bound(c) -> sb.ConstantBound:
    return c if isinstance(c, sb.ConstantBound) else sb.ConstantBound(float(c), "upper", "user")


def vector_constant_2d(c1, c2, beta: float) -> VectorConstant:
    """``max(c1, c2) * sqrt((1 + |cos b|) / (1 - |cos b|))`` for normals at angle ``beta``."""
    if not 0.0 < beta < math.pi:
        raise DependentNormalsError(f"angle between normals must lie in (0, pi), got {beta}")
    s = math.sin(beta)
    if s <= geo.DET_TOL:
        raise DependentNormalsError(f"|det N| = sin(beta) = {s:.3e} below tolerance")
    c = abs(math.cos(beta))
    lam = 1.0 - c
    if lam < 1e-4:
        lam = s * s / (1.0 + c)
    factor = math.sqrt((1.0 + c) / lam)
    big = max(_value(c1), _value(c2))
    return VectorConstant(big * factor, (_as_bound(c1), _as_bound(c2)), lam, FORMULA_ANGLE)


def vector_constant_general(constants: Sequence, ns: geo.NormalSystem) -> VectorConstant:
    """``max_k C_k * sqrt(d / lambda_1)`` for any valid normal system."""
    d = len(ns.normals)
    if len(constants) != d:
        raise PreconditionError(f"need {d} scalar constants, got {len(constants)}")
    if not ns.valid:
        raise DependentNormalsError(f"|det N| = {abs(ns.det):.3e} below tolerance")
    lam = geo.t_matrix(ns).lambda_min
    big = max(_value(c) for c in constants)
    return VectorConstant(
        big * math.sqrt(d / lam), tuple(_as_bound(c) for c in constants), lam, FORMULA_EIGEN
    )


def normal_angle(ns: geo.NormalSystem) -> float:
    """Angle between the two rows of a planar normal system."""
    n1, n2 = ns.normals
    cosb = float(n1 @ n2 / (np.linalg.norm(n1) * np.linalg.norm(n2)))
    return math.acos(max(-1.0, min(1.0, cosb)))


def vector_constant_for_cell(cell: geo.Cell, faces: Sequence[int], general: bool = False, constants=None):
    """Vector constant for ``cell`` with zero mean normal flux on ``faces``.

    Scalar constants default to :func:`scalar_bounds.best_c_gamma` per face.
    In 2D with planar faces the sharper angle formula is returned unless
    ``general`` is set; mean normals of curvilinear faces are not unit
    vectors, so those always take the eigenvalue route.
    """
    faces = [int(f) for f in faces]
    ns = geo.normal_system(cell, faces)
    if constants is None:
        constants = [sb.best_c_gamma(cell, f) for f in faces]
    unit = np.allclose(np.linalg.norm(ns.normals, axis=1), 1.0, atol=geo.REL_TOL)
    if cell.dim == 2 and unit and not general:
        return vector_constant_2d(constants[0], constants[1], normal_angle(ns))
    return vector_constant_general(constants, ns)


def macrocell_scalar_constant(children: Sequence) -> sb.ConstantBound:
    """Largest child constant; ``children`` holds ``(cell, bound)`` pairs or bounds."""
    if not children:
        raise PreconditionError("no child constants given")
    bounds = [c[1] if isinstance(c, tuple) else c for c in children]
    kinds = {b.kind for b in bounds}
    if "lower" in kinds:
        raise PreconditionError("lower bounds cannot be composed into an upper bound")
    best = max(bounds, key=lambda b: b.value)
    return sb.ConstantBound(best.value, "upper", "macrocell-max", {"children": len(bounds)})


@dataclass(frozen=True)
class FacePair:
    """Children glued into one subdomain and the two faces carrying flux conditions.

    ``faces`` holds ``(child, child_face)`` tuples; a lone child uses two of
    its own faces.
    """

    children: tuple
    faces: tuple


def pair_constant(macro: geo.Cell, pair: FacePair, constants=None) -> VectorConstant:
    """Vector constant of the union of the paired children."""
    if macro.dim != 2:
        raise PreconditionError("vector macrocell pairing is two-dimensional")
    kids = [macro.children[i] for i in pair.children]
    if len(pair.children) == 1:
        union, face_map = kids[0], {(pair.children[0], f): f for f in range(len(kids[0].faces))}
    else:
        union, local = geo.union_polygon(kids)
        face_map = {(pair.children[k], f): g for (k, f), g in local.items()}
    try:
        faces = [face_map[tuple(f)] for f in pair.faces]
    except KeyError as exc:
        raise PreconditionError(
            f"face {exc.args[0]} is not a complete face of the paired subdomain; "
            "supply its scalar constants explicitly"
        ) from None
    return vector_constant_for_cell(union, faces, constants=constants)


def macrocell_vector_constant(pairs: Sequence, macro: geo.Cell | None = None) -> VectorConstant:
    """Largest pair constant; checks that the pairs cover every child of ``macro``.

    ``pairs`` holds ``(FacePair, VectorConstant)`` tuples or bare constants
    (coverage is then not checked).
    """
    if not pairs:
        raise PreconditionError("no pairs given")
    consts, covered = [], []
    for p in pairs:
        if isinstance(p, tuple):
            pair, vc = p
            covered.extend(pair.children)
        else:
            vc = p
        if vc.lambda_min <= 0:
            raise DependentNormalsError("pair normals are dependent")
        consts.append(vc)
    if macro is not None and any(isinstance(p, tuple) for p in pairs):
        n = len(macro.children)
        if sorted(covered) != list(range(n)):
            raise GeometryError(f"pairs cover children {sorted(covered)}, expected each of 0..{n - 1} once")
    best = max(consts, key=lambda v: v.value)
    return VectorConstant(best.value, best.scalar_constants, best.lambda_min, FORMULA_MACRO)
