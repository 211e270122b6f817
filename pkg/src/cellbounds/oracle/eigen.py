"""Smallest eigenpair of ``K u = mu B u`` on the subspace ``C^T u = 0``.

Solves with the operator restricted to the constraint subspace use a sparse
LU factorisation of ``A = K + rho B`` (symmetric positive definite for
``rho > 0`` whenever ``B`` does not vanish on constants) and a ``k x k``
Schur complement for the ``k`` constraints:

    x = A^-1 f - A^-1 Q S^-1 Q^T A^-1 f,   S = Q^T A^-1 Q,

which is the exact solution of the projected system ``P A x = P f`` with
``Q^T x = 0`` and ``P`` the orthogonal projector onto ``range(Q)^perp``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SolverError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalue: float
    vector: np.ndarray
    residual: float
    iterations: int


class ConstrainedOperator:
    def __init__(self, K, B, C):
        self.K = sp.csr_matrix(K)
        self.B = sp.csr_matrix(B)
        C = np.asarray(C, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        self.Q, _ = np.linalg.qr(C)
        self.n = self.K.shape[0]
        self.k = self.Q.shape[1]

    def project(self, x):
        """Euclidean projection onto ``C^T x = 0``."""
        return x - self.Q @ (self.Q.T @ x)

    def factor(self, rho: float):
        A = (self.K + rho * self.B).tocsc()
        lu = spla.splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True),
        )
        AQ = lu.solve(self.Q)
        S = self.Q.T @ AQ

        def solve(F):
            Y = lu.solve(np.ascontiguousarray(F))
            return Y - AQ @ np.linalg.solve(S, self.Q.T @ Y)

        return solve

    def default_shift(self) -> float:
        # tiny relative to the largest eigenvalue, comfortably above round-off
        kd = np.abs(self.K.diagonal()).mean()
        bd = np.abs(self.B.diagonal()).mean()
        return 1e-6 * kd / bd

    def residual(self, mu, u):
        r = self.project(self.K @ u - mu * (self.B @ u))
        return float(np.linalg.norm(r) / max(np.linalg.norm(self.K @ u), 1e-300))


def smallest_eigenpair(
    K,
    B,
    C,
    tol: float = 1e-10,
    maxiter: int = 1000,
    block: int = 6,
    seed: int = 0,
    shift: float | None = None,
) -> EigenResult:
    """Inverse subspace iteration with Rayleigh-Ritz extraction.

    ``K`` must be positive definite on the constraint subspace; ``B`` may be
    semidefinite (boundary mass).  The iteration stops once the relative
    change of the Ritz value falls below ``tol`` on two consecutive steps.
    ``shift`` (``rho``) defaults to a value far below the wanted eigenvalue.
    """
    op = ConstrainedOperator(K, B, C)
    n = op.n
    p = max(1, min(block, n - op.k))
    rng = np.random.default_rng(seed)
    X = op.project(rng.standard_normal((n, p)))
    solve = op.factor(op.default_shift() if shift is None else shift)
    mu_old, hits = np.inf, 0
    for it in range(1, maxiter + 1):
        Y = solve(op.B @ X)
        Kr = Y.T @ (op.K @ Y)
        Kr = 0.5 * (Kr + Kr.T)
        # K-orthonormal basis of span(Y); a low-rank B (boundary mass) makes
        # Y rank deficient, so dependent directions are dropped
        try:
            s, W = sla.eigh(Kr)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Rayleigh-Ritz failed: {exc}") from exc
        keep = s > 1e-12 * max(s.max(), 1e-300)
        if not keep.any():
            raise SolverError("iteration subspace collapsed")
        Z = Y @ (W[:, keep] / np.sqrt(s[keep]))
        Br = Z.T @ (op.B @ Z)
        # largest nu of Br v = nu v gives the smallest mu = 1/nu
        nu, V = sla.eigh(0.5 * (Br + Br.T))
        nu, V = nu[::-1], V[:, ::-1]
        if nu[0] <= 0:
            raise SolverError("B vanishes on the iteration subspace")
        mu = 1.0 / nu[0]
        X = Z @ V
        if X.shape[1] < p:
            # refill the block so later steps can recover lost directions
            X = np.c_[X, op.project(rng.standard_normal((n, p - X.shape[1])))]
        X /= np.linalg.norm(X, axis=0)
        hits = hits + 1 if abs(mu - mu_old) <= tol * abs(mu) else 0
        mu_old = mu
        if hits >= 2:
            break
    else:
        raise SolverError(f"eigen-solver did not reach {tol} in {maxiter} iterations")
    u = op.project(X[:, 0])
    u /= np.sqrt(u @ (op.B @ u))
    mu = float(u @ (op.K @ u))
    res = op.residual(mu, u)
    log.debug("eigensolve n=%d mu=%.12g iters=%d residual=%.2e", n, mu, it, res)
    return EigenResult(mu, u, res, it)


def largest_ratio_sample(K, B, constants, C, count: int, seed: int = 0, seed_vectors=()):
    """Worst ``sqrt(u^T B u / u^T K u)`` over random vectors moved into ``C^T u = 0``.

    Vectors are shifted along the span of ``constants`` (columns), which
    leaves ``K``-energy unchanged; constants themselves map to zero.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    E = np.asarray(constants, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    coupling = C.T @ E
    rng = np.random.default_rng(seed)
    n = K.shape[0]
    samples = [rng.standard_normal(n) for _ in range(count)]
    for v in seed_vectors:
        samples.append(np.asarray(v) + 1e-3 * rng.standard_normal(n) * np.abs(v).max())
    worst = 0.0
    for u in samples:
        a = np.linalg.solve(coupling, C.T @ u)
        u = u - E @ a
        num = float(u @ (B @ u))
        den = float(u @ (K @ u))
        if den <= 1e-300 * max(num, 1.0):
            continue
        worst = max(worst, np.sqrt(max(num, 0.0) / den))
    return worst
