"""Spectral frames: coordinates adapted to a chosen kinetic matrix.

An orthogonal matrix Q diagonalizing the symmetric kinetic matrix A
defines spectral coordinates x = Q^T q.  Eigenvalue clusters of A group
the coordinates into blocks; within a block the eigenvector basis is fixed
by modified Gram-Schmidt in solver output order (any rotation inside a
block is equally valid, so only block-level quantities should be asserted
downstream).

Also provides the closed-form pointwise spectrum of the q-dependent
kinetic matrix compatible with the generalized Henon-Heiles potential,
cross-checked against the dense eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import ParsedPotential
from .linalg import cluster_eigenvalues, sym_eigen

__all__ = [
    "SpectralFrame",
    "SpectralPotential",
    "default_cluster_tol",
    "build_frame",
    "to_spectral",
    "from_spectral",
    "pullback",
    "hh_pointwise_matrix",
    "hh_pointwise_frame",
]


def default_cluster_tol(eigenvalues) -> float:
    """1e-8 times max(1, spectral radius); the grouping scale for deciding
    when two eigenvalues count as equal."""
    radius = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return 1e-8 * max(1.0, radius)


@dataclass(frozen=True)
class SpectralFrame:
    """A kinetic matrix with its diagonalizing data.

    ``blocks`` are half-open index ranges into the ascending ``eigenvalues``
    grouping equal values; Q columns are the matching eigenvectors.
    """

    A: np.ndarray
    Q: np.ndarray
    eigenvalues: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    cluster_tol: float

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(hi - lo for lo, hi in self.blocks)

    @property
    def block_eigenvalues(self) -> tuple[float, ...]:
        """One representative eigenvalue per block (the leader)."""
        return tuple(float(self.eigenvalues[lo]) for lo, _ in self.blocks)

    def is_simple(self) -> bool:
        return all(size == 1 for size in self.block_sizes)


def _orthonormalize_blocks(Q: np.ndarray, blocks) -> np.ndarray:
    out = Q.copy()
    for lo, hi in blocks:
        for j in range(lo, hi):
            for k in range(lo, j):
                out[:, j] -= np.dot(out[:, k], out[:, j]) * out[:, k]
            out[:, j] /= np.linalg.norm(out[:, j])
    return out


def build_frame(A, cluster_tol: float | None = None) -> SpectralFrame:
    """Diagonalize A, cluster its eigenvalues and fix the block bases."""
    A = np.asarray(A, dtype=float)
    eig = sym_eigen(A)
    tol = default_cluster_tol(eig.eigenvalues) if cluster_tol is None else float(cluster_tol)
    blocks = tuple(cluster_eigenvalues(eig.eigenvalues, tol))
    Q = _orthonormalize_blocks(eig.Q, blocks)
    return SpectralFrame(A=A, Q=Q, eigenvalues=eig.eigenvalues.copy(),
                         blocks=blocks, cluster_tol=tol)


def to_spectral(frame: SpectralFrame, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != frame.n:
        raise ValueError(f"point dimension {q.shape[-1]} != frame dimension {frame.n}")
    return q @ frame.Q


def from_spectral(frame: SpectralFrame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != frame.n:
        raise ValueError(f"point dimension {x.shape[-1]} != frame dimension {frame.n}")
    return x @ frame.Q.T


class SpectralPotential:
    """The potential expressed in spectral coordinates.

    value(x) = U(Qx), gradient(x) = Q^T grad U(Qx),
    hessian(x) = Q^T (hess U)(Qx) Q; plain chain rule through the constant
    orthogonal change of coordinates.
    """

    __slots__ = ("potential", "frame")

    def __init__(self, potential: ParsedPotential, frame: SpectralFrame):
        if potential.n != frame.n:
            raise ValueError("potential and frame dimensions differ")
        self.potential = potential
        self.frame = frame

    @property
    def n(self) -> int:
        return self.frame.n

    def value(self, x) -> float:
        return self.potential.value(from_spectral(self.frame, x))

    def gradient(self, x) -> np.ndarray:
        q = from_spectral(self.frame, x)
        return self.frame.Q.T @ self.potential.gradient(q)

    def hessian(self, x) -> np.ndarray:
        q = from_spectral(self.frame, x)
        H = self.potential.hessian(q)
        return self.frame.Q.T @ H @ self.frame.Q


def pullback(potential: ParsedPotential, frame: SpectralFrame) -> SpectralPotential:
    return SpectralPotential(potential, frame)


def hh_pointwise_matrix(params, q) -> np.ndarray:
    """The q-dependent compatible kinetic matrix for the generalized
    Henon-Heiles potential: d I on the isotropic sector, coupling column
    mu(q_n) q_{1:n-1} with mu = 2 a d / (beta + 6 b q_n)."""
    alpha, beta, a, b, d = (float(v) for v in params)
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if n < 3:
        raise ValueError("pointwise frame needs dimension n >= 3")
    denom = beta + 6.0 * b * q[-1]
    if abs(denom) < 1e-12 * max(1.0, abs(beta), abs(6.0 * b * q[-1])):
        raise ZeroDivisionError("mu(q_n) pole: beta + 6 b q_n vanishes")
    mu = 2.0 * a * d / denom
    A = np.zeros((n, n))
    A[:n - 1, :n - 1] = d * np.eye(n - 1)
    A[:n - 1, -1] = mu * q[:-1]
    A[-1, :n - 1] = mu * q[:-1]
    A[-1, -1] = d
    return A


def hh_pointwise_frame(params, q) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form spectrum of :func:`hh_pointwise_matrix` at one point.

    Returns ascending eigenvalues and matching orthonormal eigenvector
    columns: d with multiplicity n-2 on vectors (y, 0) with y orthogonal to
    the transverse configuration, and d +/- mu ||q_t|| on
    (q_t, +/- ||q_t||) / (sqrt(2) ||q_t||).  The result is cross-checked
    against the dense eigensolver to 1e-10 before being returned.
    """
    alpha, beta, a, b, d = (float(v) for v in params)
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    A = hh_pointwise_matrix(params, q)
    qt = q[:-1]
    rho = float(np.linalg.norm(qt))
    if rho == 0.0:
        raise ValueError("transverse configuration q_{1:n-1} must be nonzero")
    denom = beta + 6.0 * b * q[-1]
    mu = 2.0 * a * d / denom

    unit = qt / rho
    kernel_vecs = []
    for i in range(n - 1):
        v = np.zeros(n - 1)
        v[i] = 1.0
        v -= np.dot(unit, v) * unit
        for w in kernel_vecs:
            v -= np.dot(w, v) * w
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            kernel_vecs.append(v / norm)
        if len(kernel_vecs) == n - 2:
            break
    columns = [np.concatenate([v, [0.0]]) for v in kernel_vecs]
    values = [d] * (n - 2)
    for sign in (+1.0, -1.0):
        h = np.concatenate([qt, [sign * rho]]) / (np.sqrt(2.0) * rho)
        columns.append(h)
        values.append(d + sign * mu * rho)

    values = np.array(values)
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = np.column_stack([columns[i] for i in order])

    check = sym_eigen(A)
    if np.max(np.abs(check.eigenvalues - values)) > 1e-10 * max(1.0, abs(d), abs(mu * rho)):
        raise AssertionError("closed-form spectrum disagrees with the eigensolver")
    return values, vectors
