"""Combined local/global operator and its generalized eigenvectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ContractError, SolverError


@dataclass(frozen=True)
class EigenBasis:
    """Smallest nontrivial generalized eigenpairs, columns D-normalised."""

    vectors: np.ndarray     # (N, d)
    values: np.ndarray      # (d,) ascending
    residuals: np.ndarray   # (d,) ||A y - lambda D y|| / ||D y||

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(x):
    for attr in ("W", "K"):
        if hasattr(x, attr):
            return getattr(x, attr)
    return x


def assemble_operator(W, K, mu: float):
    """Return ``(A, D)`` with ``A = (D - W) + mu (I - K)^T (I - K)``.

    ``W`` and ``K`` may be LocalAffinity / GlobalCoefficients instances or
    plain (sparse) matrices.
    """
    Wm = sparse.csr_matrix(_as_matrix(W), dtype=np.float64)
    Km = sparse.csr_matrix(_as_matrix(K), dtype=np.float64)
    if Wm.shape != Km.shape or Wm.shape[0] != Wm.shape[1]:
        raise ContractError(f"W {Wm.shape} and K {Km.shape} must be equal square shapes")
    if mu < 0:
        raise ContractError(f"mu must be nonnegative, got {mu}")
    n = Wm.shape[0]
    D = np.asarray(Wm.sum(axis=1)).ravel()
    A = sparse.diags(D) - Wm
    if mu:
        ImK = sparse.identity(n, format="csr") - Km
        A = A + mu * (ImK.T @ ImK)
    A = sparse.csr_matrix(A)
    A = ((A + A.T) * 0.5).tocsr()
    A.sum_duplicates()
    return A, D


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0:
            V[:, k] = -col
    return V


def _ritz(A, D: np.ndarray, V: np.ndarray, d: int):
    """Rayleigh-Ritz on span(V) after removing the constant direction."""
    ones = np.ones(len(D)) / np.sqrt(D.sum())
    V = V - np.outer(ones, ones @ (D[:, None] * V))
    S = V.T @ (D[:, None] * V)
    s, U = linalg.eigh((S + S.T) * 0.5)
    keep = s > 1e-10 * s.max()
    Q = V @ (U[:, keep] / np.sqrt(s[keep]))
    T = Q.T @ (A @ Q)
    theta, X = linalg.eigh((T + T.T) * 0.5)
    Y = Q @ X[:, :d]
    return theta[:d], Y


def residuals(A, D, Y, values):
    DY = D[:, None] * Y
    R = A @ Y - DY * values[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(DY, axis=0)


def solve_partitions(A, D, d: int, tol: float = 1e-8, maxiter: int | None = None,
                     seed: int = 0) -> EigenBasis:
    """The ``d`` smallest nontrivial solutions of ``A y = lambda D y``.

    Uses shift-invert Lanczos (ARPACK) just below zero, deflates the constant
    vector in the D inner product and tidies the result with a Rayleigh-Ritz
    step. Each column is scaled so that ``y^T D y = 1`` and its first
    nonzero entry is positive.
    """
    D = np.asarray(D, dtype=np.float64)
    A = sparse.csr_matrix(A)
    n = len(D)
    if np.any(D <= 0) or not np.all(np.isfinite(D)):
        raise ContractError("D must be a positive diagonal")
    if not 1 <= d < n - 1:
        raise ContractError(f"need 1 <= d < N - 1, got d={d}, N={n}")
    maxiter = 300 * d if maxiter is None else maxiter
    scale = A.diagonal().sum() / D.sum()
    sigma = -1e-3 * scale if scale > 0 else -1e-3
    Dm = sparse.diags(D).tocsc()
    v0 = np.random.default_rng(seed).standard_normal(n)
    best = None
    for k in sorted({min(n - 1, d + 3), min(n - 1, 2 * d + 4)}):
        try:
            _, V = eigsh(A.tocsc(), k=k, M=Dm, sigma=sigma, which="LM",
                         v0=v0, tol=tol * 1e-4, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            if exc.eigenvectors is None or exc.eigenvectors.shape[1] < d + 1:
                continue
            V = exc.eigenvectors
        values, Y = _ritz(A, D, V, d)
        if Y.shape[1] < d:
            continue
        Y = Y / np.sqrt(np.einsum("ij,ij->j", Y, D[:, None] * Y))[None, :]
        res = residuals(A, D, Y, values)
        best = (values, Y, res)
        if np.all(res <= tol):
            break
    if best is None:
        raise SolverError("eigensolver did not converge")
    values, Y, res = best
    if np.any(res > tol):
        raise SolverError(f"eigensolver residuals {res.max():.3g} exceed {tol:g}",
                          residuals=res)
    return EigenBasis(_fix_signs(Y), values, res)


def normalize_eigenvector(y) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant vector maps to 0.5."""
    y = np.asarray(y, dtype=np.float64)
    lo, hi = y.min(), y.max()
    if hi - lo <= 1e-12 * max(abs(lo), abs(hi), 1e-300):
        return np.full_like(y, 0.5)
    return (y - lo) / (hi - lo)
