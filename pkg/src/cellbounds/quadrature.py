"""Quadrature on segments, triangles and tetrahedra.

Reference simplices are ``conv{0, e_1, ..., e_d}``; weights sum to the
reference measure (1, 1/2, 1/6).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from . import geometry as geo


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # barycentric-free reference coordinates, shape (q, d)
    weights: np.ndarray
    order: int


@lru_cache(maxsize=None)
def segment_rule(order: int = 7) -> QuadratureRule:
    n = max(1, math.ceil((order + 1) / 2))
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(((x + 1) / 2)[:, None], w / 2, 2 * n - 1)


# symmetric 12-point degree-6 rule (Dunavant): (weight, orbit generator)
_DUNAVANT6 = [
    (0.116786275726379, (0.249286745170910, 0.249286745170910)),
    (0.050844906370207, (0.063089014491502, 0.063089014491502)),
    (0.082851075618374, (0.053145049844817, 0.310352451033784)),
]


def _orbit(a, b):
    c = 1.0 - a - b
    pts = {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}
    return sorted(pts)


@lru_cache(maxsize=None)
def _dunavant6() -> QuadratureRule:
    pts, wts = [], []
    for w, (a, b) in _DUNAVANT6:
        for lam in _orbit(a, b):
            pts.append(lam[1:])
            wts.append(w / 2)
    return QuadratureRule(np.array(pts), np.array(wts), 6)


def _gauss_jacobi01(n: int, alpha: float):
    """Nodes/weights on [0, 1] for the weight (1 - u)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1) / 2, w / 2 ** (alpha + 1)


@lru_cache(maxsize=None)
def conical_rule(dim: int, order: int) -> QuadratureRule:
    """Collapsed-coordinate (Stroud conical product) rule of any order."""
    n = max(1, math.ceil((order + 1) / 2))
    if dim == 1:
        return segment_rule(order)
    u, wu = _gauss_jacobi01(n, dim - 1)
    if dim == 2:
        v, wv = _gauss_jacobi01(n, 0)
        U, V = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu, wv)
        pts = np.c_[U.ravel(), ((1 - U) * V).ravel()]
        return QuadratureRule(pts, W.ravel(), 2 * n - 1)
    v, wv = _gauss_jacobi01(n, 1)
    t, wt = _gauss_jacobi01(n, 0)
    U, V, T = np.meshgrid(u, v, t, indexing="ij")
    W = wu[:, None, None] * wv[None, :, None] * wt[None, None, :]
    pts = np.c_[U.ravel(), ((1 - U) * V).ravel(), ((1 - U) * (1 - V) * T).ravel()]
    return QuadratureRule(pts, W.ravel(), 2 * n - 1)


def simplex_rule(dim: int, order: int = 6) -> QuadratureRule:
    if dim == 2 and order <= 6:
        return _dunavant6()
    return conical_rule(dim, order)


def map_rule(simplex: np.ndarray, rule: QuadratureRule):
    """Physical points and weights of ``rule`` on one simplex ``(k+1, d)``."""
    v0 = simplex[0]
    jac = (simplex[1:] - v0).T  # (d, k)
    pts = v0 + rule.points @ jac.T
    k = jac.shape[1]
    if jac.shape[0] == k:
        scale = abs(np.linalg.det(jac))
    else:
        scale = math.sqrt(abs(np.linalg.det(jac.T @ jac)))
    return pts, rule.weights * scale


def cell_points(cell, order: int = 6):
    """Quadrature points and weights covering a whole cell."""
    dec = geo.decompose(cell)
    rule = simplex_rule(cell.dim, order)
    pts, wts = [], []
    for s in dec.simplices:
        p, w = map_rule(dec.points[s], rule)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def face_points(cell, face: int, order: int = 7):
    """Quadrature points, weights and pointwise outward unit normals on a face."""
    sub = geo.face_subfacets(cell, face)
    rule = segment_rule(order) if cell.dim == 2 else simplex_rule(2, order)
    pts, wts, nrm = [], [], []
    for s in sub:
        p, w = map_rule(s, rule)
        if cell.dim == 2:
            d = s[1] - s[0]
            n = np.array([d[1], -d[0]])
        else:
            n = np.cross(s[1] - s[0], s[2] - s[0])
        n = n / np.linalg.norm(n)
        pts.append(p)
        wts.append(w)
        nrm.append(np.broadcast_to(n, p.shape))
    return np.vstack(pts), np.concatenate(wts), np.vstack(nrm)


def integrate_cell(cell, f, order: int = 6):
    pts, wts = cell_points(cell, order)
    vals = np.asarray(f(pts))
    return np.tensordot(wts, vals, axes=(0, 0))


def integrate_face(cell, face: int, f, order: int = 7):
    pts, wts, _ = face_points(cell, face, order)
    vals = np.asarray(f(pts))
    return np.tensordot(wts, vals, axes=(0, 0))
