"""Small numeric helpers shared across modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg

DEFAULT_EPS_RANK = 1e-8
STABILITY_MARGIN = 1e-10

# eigenvalue computation up to this matrix size, power iteration beyond
_EIG_SIZE_CAP = 400


def numeric_rank(M: np.ndarray, eps_rank: float = DEFAULT_EPS_RANK) -> int:
    """Rank with singular values below eps_rank * sigma_max counted as zero."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0
    s = scipy.linalg.svdvals(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > eps_rank * s[0]))


def spectral_radius(M: np.ndarray) -> float:
    M = np.atleast_2d(M)
    if M.shape[0] == 0:
        return 0.0
    if M.shape[0] <= _EIG_SIZE_CAP:
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    return _power_iteration_radius(M)


def _power_iteration_radius(M: np.ndarray, iters: int = 2000, tol: float = 1e-12) -> float:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(iters):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(ny - rho) <= tol * max(1.0, ny):
            return ny
        rho = ny
    return rho


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def orthonormal_basis(M: np.ndarray, eps_rank: float = DEFAULT_EPS_RANK) -> np.ndarray:
    """Orthonormal basis of the column span with a deterministic sign
    convention (first entry of largest magnitude made positive)."""
    M = np.atleast_2d(M)
    if M.size == 0 or M.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = scipy.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[0], 0))
    r = int(np.sum(s > eps_rank * s[0]))
    U = U[:, :r]
    for j in range(r):
        k = int(np.argmax(np.abs(U[:, j])))
        if U[k, j] < 0:
            U[:, j] = -U[:, j]
    return U


def psd_solve_range(S: np.ndarray, B: np.ndarray, eps: float):
    """Solve X @ S = B for symmetric PSD S on its numeric range.

    Eigenvalues below eps * lambda_max are treated as zero. Returns
    ``(X, residual)`` where residual = ||X S - B||_F / max(1, ||B||_F); a
    large residual means B is not in the range of S.
    """
    S = symmetrize(np.atleast_2d(S))
    w, V = np.linalg.eigh(S)
    wmax = float(np.max(w)) if w.size else 0.0
    if wmax <= 0.0:
        X = np.zeros_like(B)
        res = np.linalg.norm(B) / max(1.0, np.linalg.norm(B))
        return X, res
    inv = np.where(w > eps * wmax, 1.0 / np.where(w > eps * wmax, w, 1.0), 0.0)
    Sinv = V @ np.diag(inv) @ V.T
    X = B @ Sinv
    res = np.linalg.norm(X @ S - B) / max(1.0, np.linalg.norm(B))
    return X, res


def min_eig_sym(S: np.ndarray) -> float:
    S = symmetrize(np.atleast_2d(S))
    if S.shape[0] == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(S)))
