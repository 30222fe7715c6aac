"""Self-contained dense real linear algebra for small matrices.

Everything the rest of the package needs from linear algebra lives here:
a cyclic Jacobi eigensolver for symmetric matrices, a nullspace routine
built on it, Gaussian elimination with partial pivoting, and eigenvalue
clustering.  Sizes are tiny (n <= ~32), so the provably convergent O(n^3)
algorithms are used without any performance tricks.  numpy supplies array
storage and elementwise arithmetic only.

Deterministic conventions make golden tests stable: eigenvalues ascend,
each eigenvector's first non-negligible component is non-negative, and the
Jacobi sweep order is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinalgError",
    "NonSquareError",
    "AsymmetricMatrixError",
    "SingularMatrixError",
    "EigenDecomposition",
    "sym_eigen",
    "nullspace",
    "singular_values",
    "solve_linear",
    "is_invertible",
    "cluster_eigenvalues",
]


class LinalgError(Exception):
    """Base class for linear-algebra errors."""


class NonSquareError(LinalgError):
    pass


class AsymmetricMatrixError(LinalgError):
    pass


class SingularMatrixError(LinalgError):
    """A pivot fell below threshold: the matrix is numerically singular.

    For kinetic matrices this signals a violated invertibility hypothesis
    (the dynamics of the weighted system is then not well posed).
    """


_SIGN_EPS = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order with an orthogonal matrix of
    column eigenvectors, so that Q.T @ M @ Q = diag(eigenvalues)."""

    eigenvalues: np.ndarray
    Q: np.ndarray


def _frobenius(M: np.ndarray) -> float:
    return float(np.sqrt(np.sum(M * M)))


def _fix_column_signs(Q: np.ndarray) -> np.ndarray:
    for j in range(Q.shape[1]):
        col = Q[:, j]
        nonzero = np.nonzero(np.abs(col) > _SIGN_EPS)[0]
        lead = nonzero[0] if nonzero.size else 0
        if col[lead] < 0.0:
            Q[:, j] = -col
    return Q


def sym_eigen(M, max_sweeps: int = 50) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    M : (n, n) array_like
        Symmetric matrix; asymmetry up to 1e-10 relative (Frobenius) is
        tolerated and symmetrized away, more raises AsymmetricMatrixError.
    max_sweeps : int
        Safety cap on full sweeps; convergence is quadratic and 50 sweeps
        are far more than n <= 32 ever needs.

    Returns
    -------
    EigenDecomposition
        Ascending eigenvalues and orthogonal Q with deterministic column
        signs (first non-negligible component of each column >= 0).
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgError("matrix entries must be finite")
    n = A.shape[0]
    norm = _frobenius(A)
    if norm > 0.0 and _frobenius(A - A.T) > 1e-10 * norm:
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")
    S = (A + A.T) / 2.0
    V = np.eye(n)
    if norm == 0.0 or n == 1:
        vals = np.diag(S).copy()
        return EigenDecomposition(vals, V)

    target = 1e-14 * norm
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(S, 1) ** 2))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if apq == 0.0:
                    continue
                tau = (S[q, q] - S[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 1.0 / (2.0 * tau)
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                    if tau == 0.0:
                        t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # S <- J^T S J with the rotation in the (p, q) plane
                Sp, Sq = S[:, p].copy(), S[:, q].copy()
                S[:, p] = c * Sp - s * Sq
                S[:, q] = s * Sp + c * Sq
                Rp, Rq = S[p, :].copy(), S[q, :].copy()
                S[p, :] = c * Rp - s * Rq
                S[q, :] = s * Rp + c * Rq
                S[p, q] = 0.0
                S[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq

    order = np.argsort(np.diag(S), kind="stable")
    vals = np.diag(S)[order].copy()
    Q = _fix_column_signs(V[:, order].copy())
    return EigenDecomposition(vals, Q)


def _mgs(columns: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on the columns; drops nothing (inputs are
    assumed numerically independent)."""
    Q = columns.astype(float).copy()
    for j in range(Q.shape[1]):
        for k in range(j):
            Q[:, j] -= np.dot(Q[:, k], Q[:, j]) * Q[:, k]
        Q[:, j] /= np.linalg.norm(Q[:, j])
    return Q


def _right_singular_system(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right singular vectors (columns) and their singular values.

    Vectors come from the eigendecomposition of M^T M; each sigma is then
    refined as ||M v|| because eigenvalues of the squared system carry an
    absolute eps*||M||^2 error that would drown singular values near
    sqrt(eps)*sigma_max (exact null directions must report as ~0, not
    ~1e-8 * sigma_max).
    """
    G = A.T @ A
    eig = sym_eigen(G)
    sigmas = np.array([float(np.linalg.norm(A @ eig.Q[:, i]))
                       for i in range(G.shape[0])])
    return eig.Q, sigmas


def singular_values(M) -> np.ndarray:
    """Singular values in descending order (refined, see above)."""
    A = np.atleast_2d(np.asarray(M, dtype=float))
    _, sigmas = _right_singular_system(A)
    return np.sort(sigmas)[::-1].copy()


def nullspace(M, rel_tol: float, atol: float = 0.0) -> list[np.ndarray]:
    """Orthonormal basis of the numerical nullspace of ``M``.

    Right singular vectors whose singular value is at most
    max(rel_tol * sigma_max, atol) are kept; sigma_max == 0 yields the full
    space.  Computed from the eigendecomposition of M^T M with per-vector
    sigma refinement, which is adequate for the small well-scaled
    constraint systems used here.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    A = np.atleast_2d(np.asarray(M, dtype=float))
    k = A.shape[1]
    Q, sigmas = _right_singular_system(A)
    sigma_max = float(np.max(sigmas)) if k else 0.0
    if sigma_max == 0.0:
        vectors = [Q[:, i].copy() for i in range(k)]
    else:
        threshold = max(rel_tol * sigma_max, atol)
        vectors = [Q[:, i].copy() for i in range(k) if sigmas[i] <= threshold]
    if len(vectors) > 1:
        ortho = _mgs(np.column_stack(vectors))
        vectors = [ortho[:, i].copy() for i in range(ortho.shape[1])]
    return vectors


def solve_linear(A, b) -> np.ndarray:
    """Solve A x = b by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError when a pivot is smaller than
    1e-13 * ||A||_inf, which is how callers detect non-invertible kinetic
    matrices.
    """
    U = np.array(A, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {U.shape}")
    x = np.array(b, dtype=float)
    n = U.shape[0]
    if x.shape != (n,):
        raise LinalgError(f"right-hand side has shape {x.shape}, expected ({n},)")
    norm_inf = float(np.max(np.sum(np.abs(U), axis=1))) if n else 0.0
    if norm_inf == 0.0:
        raise SingularMatrixError("zero matrix")
    threshold = 1e-13 * norm_inf
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(U[k:, k])))
        if abs(U[pivot_row, k]) < threshold:
            raise SingularMatrixError(
                f"pivot {U[pivot_row, k]:.3e} below threshold {threshold:.3e} "
                f"in column {k}: matrix is numerically singular")
        if pivot_row != k:
            U[[k, pivot_row]] = U[[pivot_row, k]]
            x[[k, pivot_row]] = x[[pivot_row, k]]
        for i in range(k + 1, n):
            factor = U[i, k] / U[k, k]
            if factor != 0.0:
                U[i, k:] -= factor * U[k, k:]
                x[i] -= factor * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - np.dot(U[k, k + 1:], x[k + 1:])) / U[k, k]
    return x


def is_invertible(A) -> bool:
    """Whether partial-pivot elimination succeeds on A (pivot contract as
    in solve_linear)."""
    try:
        solve_linear(A, np.zeros(np.asarray(A).shape[0]))
    except SingularMatrixError:
        return False
    return True


def cluster_eigenvalues(vals, tol: float) -> list[tuple[int, int]]:
    """Greedy left-to-right grouping of an ascending sequence.

    A value joins the current cluster iff it lies within
    tol * max(1, |leader|) of the cluster leader.  Returns half-open index
    ranges covering the whole sequence.
    """
    v = np.asarray(vals, dtype=float)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if v.size and np.any(np.diff(v) < 0):
        raise ValueError("eigenvalues must be in ascending order")
    ranges: list[tuple[int, int]] = []
    start = 0
    for i in range(1, v.size):
        leader = v[start]
        if abs(v[i] - leader) > tol * max(1.0, abs(leader)):
            ranges.append((start, i))
            start = i
    if v.size:
        ranges.append((start, v.size))
    return ranges
