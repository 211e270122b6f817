"""Exact P1 stiffness, mass and face forms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import GeometryError
from .mesh import SimplicialMesh


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    face_load: dict  # tag -> vector of int_Gamma phi_i
    face_mass: dict  # tag -> sparse int_Gamma phi_i phi_j

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]


def element_gradients(points: np.ndarray, simplices: np.ndarray):
    """Barycentric gradients (m, d+1, d) and volumes (m,) of every simplex."""
    d = points.shape[1]
    v = points[simplices]
    jac = np.transpose(v[:, 1:] - v[:, :1], (0, 2, 1))  # columns are edges
    det = np.linalg.det(jac)
    vol = np.abs(det) / math.factorial(d)
    scale = np.abs(v).max() if len(v) else 1.0
    if np.any(vol <= 1e-14 * scale**d):
        raise GeometryError("inverted or degenerate simplex in mesh")
    inv = np.linalg.inv(jac)  # rows: grad of lambda_1..lambda_d
    grads = np.empty((len(simplices), d + 1, d))
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    return grads, vol


def _scatter(simplices, local, n):
    k = simplices.shape[1]
    rows = np.repeat(simplices, k, axis=1).ravel()
    cols = np.tile(simplices, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _simplex_mass(vol, k, dim):
    """Local P1 mass matrices on k-vertex simplices of dimension ``dim``."""
    base = (np.ones((k, k)) + np.eye(k)) / ((dim + 1) * (dim + 2))
    return vol[:, None, None] * base[None]


def assemble(mesh: SimplicialMesh) -> AssembledSystem:
    n = mesh.num_points
    d = mesh.dim
    grads, vol = element_gradients(mesh.points, mesh.simplices)
    k_local = vol[:, None, None] * np.einsum("mik,mjk->mij", grads, grads)
    m_local = _simplex_mass(vol, d + 1, d)
    stiffness = _scatter(mesh.simplices, k_local, n)
    mass = _scatter(mesh.simplices, m_local, n)
    face_load, face_mass = {}, {}
    for tag, facets in mesh.facets.items():
        area = mesh.facet_measures(tag)
        load = np.zeros(n)
        np.add.at(load, facets.ravel(), np.repeat(area / d, d))
        face_load[tag] = load
        face_mass[tag] = _scatter(facets, _simplex_mass(area, d, d - 1), n)
    return AssembledSystem(stiffness, mass, face_load, face_mass)
