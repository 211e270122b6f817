"""Sharp-constant oracle: constrained smallest eigenpairs on refined meshes."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import geometry as geo
from ..errors import PreconditionError
from .assemble import AssembledSystem, assemble
from .eigen import largest_ratio_sample, smallest_eigenpair
from .mesh import SimplicialMesh, max_level, triangulate

log = logging.getLogger(__name__)

DEFAULT_UNKNOWNS = 50_000
MODES = ("cp", "scalar", "trace", "vector")


@dataclass(frozen=True)
class LevelRow:
    level: int
    unknowns: int
    eigenvalue: float
    constant: float
    delta: float  # relative change of the constant against the previous level


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Finest-level constant with the history that produced it.

    ``constant == eigenvalue ** -0.5``; ``extrapolated`` is a Richardson
    estimate from the two finest eigenvalues assuming O(h^2) convergence.
    """

    mode: str
    constant: float
    eigenvalue: float
    level: int
    unknowns: int
    residual: float
    constraint_residual: float
    extrapolated: float
    rows: tuple = ()
    vector: np.ndarray | None = field(default=None, repr=False)

    @property
    def last_delta(self) -> float:
        return self.rows[-1].delta if len(self.rows) > 1 else math.nan


@dataclass(frozen=True, eq=False)
class _Problem:
    K: sp.spmatrix
    B: sp.spmatrix
    C: np.ndarray
    constants: np.ndarray  # null space of K, used by the sampler


def _gamma_tags(gamma) -> tuple:
    if gamma is None:
        return ()
    if isinstance(gamma, (int, np.integer, str)):
        return (gamma,)
    return tuple(gamma)


def _face_load(mesh: SimplicialMesh, system: AssembledSystem, tags) -> np.ndarray:
    missing = [t for t in tags if t not in system.face_load]
    if missing:
        raise PreconditionError(f"face(s) {missing} carry no mesh facets")
    return sum(system.face_load[t] for t in tags)


def _normal_load(mesh: SimplicialMesh, tag, outward) -> np.ndarray:
    """Columns j of int_Gamma phi_i n_j with facetwise normals, shape (n, d).

    Facet vertex order carries no orientation, so each normal is flipped to
    agree with ``outward``.
    """
    facets = mesh.facets[tag]
    area = mesh.facet_measures(tag)
    nrm = mesh.facet_normals(tag)
    nrm *= np.where(nrm @ outward >= 0, 1.0, -1.0)[:, None]
    d = mesh.dim
    out = np.zeros((mesh.num_points, d))
    for j in range(d):
        np.add.at(out[:, j], facets.ravel(), np.repeat(area * nrm[:, j] / d, d))
    return out


def _build(cell, mesh: SimplicialMesh, system: AssembledSystem, mode: str, gamma) -> _Problem:
    n = mesh.num_points
    ones = np.ones(n)
    tags = _gamma_tags(gamma)
    if mode == "cp":
        return _Problem(system.stiffness, system.mass, system.mass @ ones, ones[:, None])
    if mode == "scalar":
        return _Problem(system.stiffness, system.mass, _face_load(mesh, system, tags), ones[:, None])
    if mode == "trace":
        b = _face_load(mesh, system, tags)
        B = sum(system.face_mass[t] for t in tags)
        return _Problem(system.stiffness, B, b, ones[:, None])
    if mode == "vector":
        d = mesh.dim
        if len(tags) != d:
            raise PreconditionError(f"vector mode needs exactly {d} faces, got {len(tags)}")
        geo.normal_system(cell, tags)  # raises on dependent normals
        _face_load(mesh, system, tags)
        C = np.zeros((d * n, d))
        for i, t in enumerate(tags):
            load = _normal_load(mesh, t, geo.mean_normal(cell, t))
            for j in range(d):
                C[j * n:(j + 1) * n, i] = load[:, j]
        K = sp.block_diag([system.stiffness] * d, format="csr")
        M = sp.block_diag([system.mass] * d, format="csr")
        E = np.kron(np.eye(d), ones[:, None])
        return _Problem(K, M, C, E)
    raise ValueError(f"unknown oracle mode {mode!r}; expected one of {MODES}")


def _components(cell, mode):
    return cell.dim if mode == "vector" else 1


def run(
    cell: geo.Cell,
    mode: str,
    gamma=None,
    level: int | None = None,
    levels: int = 3,
    max_unknowns: int = DEFAULT_UNKNOWNS,
    tol: float = 1e-10,
    extra_tags=None,
    keep_vector: bool = False,
    decomposition: geo.Decomposition | None = None,
) -> OracleResult:
    """Solve on ``levels`` successive refinements ending at ``level``.

    ``level=None`` picks the finest level within ``max_unknowns``.  A coarse
    ``decomposition`` of ``cell`` may carry extra facet tags (interior
    segments such as a diagonal), which can then be used in ``gamma``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown oracle mode {mode!r}; expected one of {MODES}")
    source = cell if decomposition is None else decomposition
    if level is None:
        level = max_level(source, max_unknowns, components=_components(cell, mode))
    first = max(0, level - levels + 1)
    rows, prev, res = [], None, None
    for lev in range(first, level + 1):
        mesh = triangulate(source, lev, extra_tags)
        if mesh.num_points < 3:
            if lev == level:
                raise PreconditionError(f"level {lev} gives only {mesh.num_points} vertices")
            continue
        system = assemble(mesh)
        prob = _build(cell, mesh, system, mode, gamma)
        res = smallest_eigenpair(prob.K, prob.B, prob.C, tol=tol)
        const = res.eigenvalue ** -0.5
        delta = math.nan if prev is None else abs(const - prev) / const
        rows.append(LevelRow(lev, prob.K.shape[0], res.eigenvalue, const, delta))
        log.info("%s level=%d unknowns=%d constant=%.10f", mode, lev, prob.K.shape[0], const)
        prev = const
    mu = rows[-1].eigenvalue
    if len(rows) > 1:
        mu_ext = mu + (mu - rows[-2].eigenvalue) / 3.0
        ext = mu_ext ** -0.5 if mu_ext > 0 else math.nan
    else:
        ext = math.nan
    u = res.vector
    cres = float(np.abs(prob.C.T @ u).max() / max(np.linalg.norm(u), 1e-300))
    return OracleResult(
        mode=mode,
        constant=rows[-1].constant,
        eigenvalue=mu,
        level=level,
        unknowns=rows[-1].unknowns,
        residual=res.residual,
        constraint_residual=cres,
        extrapolated=ext,
        rows=tuple(rows),
        vector=u if keep_vector else None,
    )


def sharp_cp(cell: geo.Cell, level: int | None = None, **kw) -> OracleResult:
    """Sharp constant of ``||w - <w>|| <= C ||grad w||``."""
    return run(cell, "cp", None, level, **kw)


def sharp_c_gamma(cell: geo.Cell, gamma, level: int | None = None, **kw) -> OracleResult:
    """Sharp constant under a zero mean trace on ``gamma`` (one face or several)."""
    return run(cell, "scalar", gamma, level, **kw)


def sharp_trace_constant(cell: geo.Cell, gamma, level: int | None = None, **kw) -> OracleResult:
    """Sharp constant of ``||w||_Gamma <= C ||grad w||`` for zero-mean traces."""
    return run(cell, "trace", gamma, level, **kw)


def sharp_vector_constant(cell: geo.Cell, faces, level: int | None = None, **kw) -> OracleResult:
    """Sharp constant for vector fields with zero mean normal flux on ``d`` faces."""
    return run(cell, "vector", faces, level, **kw)


def rayleigh_sample(
    cell: geo.Cell,
    gamma,
    count: int,
    seed: int = 0,
    mode: str = "scalar",
    level: int = 3,
    eigenvector: bool = False,
) -> float:
    """Largest observed ratio over ``count`` random nodal fields on the constraint set.

    With ``eigenvector=True`` the computed eigenvector (slightly perturbed)
    is added to the sample, so the ratio approaches the oracle constant.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    mesh = triangulate(cell, level)
    system = assemble(mesh)
    prob = _build(cell, mesh, system, mode, gamma)
    seeds = ()
    if eigenvector:
        seeds = (smallest_eigenpair(prob.K, prob.B, prob.C).vector,)
    return largest_ratio_sample(prob.K, prob.B, prob.constants, prob.C, count, seed, seeds)


def convergence_table(result: OracleResult, fmt: str = "text") -> str:
    header = ("level", "unknowns", "eigenvalue", "constant", "delta")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in result.rows:
            w.writerow([r.level, r.unknowns, repr(r.eigenvalue), repr(r.constant), repr(r.delta)])
        return buf.getvalue()
    lines = [f"{header[0]:>5} {header[1]:>9} {header[2]:>18} {header[3]:>14} {header[4]:>10}"]
    for r in result.rows:
        delta = "-" if math.isnan(r.delta) else f"{r.delta:.3e}"
        lines.append(f"{r.level:>5} {r.unknowns:>9} {r.eigenvalue:>18.10f} {r.constant:>14.10f} {delta:>10}")
    lines.append(f"extrapolated constant: {result.extrapolated:.10f}")
    return "\n".join(lines) + "\n"
