"""Inverse question for a constant invertible, possibly non-symmetric,
kinetic matrix: when is the weighted system A q'' = -grad tildeU the same
dynamics as a fully separated canonical system q'' = -f'(q)?

The separated forces must satisfy grad tildeU = A (f_1'(q_1), ..., f_n'(q_n)),
and conservativity of that field couples the pairs: A_ik f_k''(q_k) =
A_ki f_i''(q_i) for i != k.  Wherever the coupling entry A_ik is nonzero
this pins f_k'' to a constant, so f_k is (at most) quadratic: f_i'(q) =
2 alpha_i q + beta_i with the alphas constrained pairwise by
A_ij alpha_j = A_ji alpha_i.  The admissible companion potentials are then
the explicit quadratic family built below.  Indices whose column has no
nonzero off-diagonal entry escape the argument and admit arbitrary smooth
profiles; the forced set makes that split visible instead of asserting the
all-quadratic conclusion blindly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import ExprNode, ParsedPotential, binary, const, var
from .linalg import nullspace, solve_linear

__all__ = [
    "InverseReport",
    "SeparabilityCheck",
    "forced_quadratic_set",
    "solve_alpha_constraints",
    "build_tilde_potential",
    "separated_potential",
    "check_inverse_separability",
]

NONZERO_FACTOR = 1e-13
ALPHA_REL_TOL = 1e-8
COMPAT_TOL = 1e-10


def _check_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def _assert_invertible(A: np.ndarray) -> None:
    solve_linear(A, np.zeros(A.shape[0]))


def forced_quadratic_set(A, nonzero_factor: float = NONZERO_FACTOR) -> set[int]:
    """Indices k whose profile f_k is forced to constant second derivative.

    k is forced exactly when some off-diagonal entry A_ik of column k
    exceeds the threshold nonzero_factor * ||A||_inf; A must be invertible.
    """
    A = _check_square(A)
    _assert_invertible(A)
    threshold = nonzero_factor * float(np.max(np.sum(np.abs(A), axis=1)))
    n = A.shape[0]
    forced = set()
    for k in range(n):
        for i in range(n):
            if i != k and abs(A[i, k]) > threshold:
                forced.add(k)
                break
    return forced


def _alpha_constraint_matrix(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    C = np.zeros((len(pairs), n))
    for row, (i, j) in enumerate(pairs):
        C[row, j] += A[i, j]
        C[row, i] -= A[j, i]
    return C


def solve_alpha_constraints(A, rel_tol: float = ALPHA_REL_TOL) -> list[np.ndarray]:
    """Orthonormal basis of {alpha : A_ij alpha_j = A_ji alpha_i, i < j}."""
    A = _check_square(A)
    C = _alpha_constraint_matrix(A)
    scale = float(np.max(np.abs(A)))
    return nullspace(C, rel_tol, atol=1e-12 * max(1.0, scale))


def _alpha_violation(A: np.ndarray, alpha: np.ndarray) -> float:
    C = _alpha_constraint_matrix(A)
    if C.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(C @ alpha)))


def _linear_combination(terms: list[tuple[float, ExprNode]]) -> ExprNode:
    """Sum of coeff * node terms, skipping zero coefficients."""
    acc = None
    for coeff, node in terms:
        if coeff == 0.0:
            continue
        term = node if coeff == 1.0 else binary("mul", const(coeff), node)
        acc = term if acc is None else binary("add", acc, term)
    return acc if acc is not None else const(0.0)


def build_tilde_potential(A, alpha, beta, variables=None) -> ParsedPotential:
    """The companion potential sum_ij (alpha_j A_ij q_i q_j + beta_j A_ij q_i),
    normalized to vanish at the origin.

    ``alpha`` must satisfy the pairwise compatibility to 1e-10 (otherwise
    the field A f' is not conservative and no potential exists); it is
    validated and rejected here rather than producing a bogus expression.
    """
    A = _check_square(A)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = A.shape[0]
    if alpha.shape != (n,) or beta.shape != (n,):
        raise ValueError("alpha and beta must have the matrix dimension")
    violation = _alpha_violation(A, alpha)
    scale = max(1.0, float(np.max(np.abs(A))) * float(np.max(np.abs(alpha), initial=0.0)))
    if violation > COMPAT_TOL * scale:
        raise ValueError(
            f"alpha violates the pairwise compatibility condition by {violation:.3e}")
    if variables is None:
        variables = tuple(f"q{i+1}" for i in range(n))
    terms: list[tuple[float, ExprNode]] = []
    for i in range(n):
        for j in range(n):
            if A[i, j] == 0.0:
                continue
            terms.append((alpha[j] * A[i, j], binary("mul", var(i), var(j))))
            terms.append((beta[j] * A[i, j], var(i)))
    return ParsedPotential(variables, _linear_combination(terms))


def separated_potential(alpha, beta, variables=None) -> ParsedPotential:
    """The canonical separated potential sum_i (alpha_i q_i^2 + beta_i q_i),
    whose dynamics the compatible weighted system must reproduce."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = alpha.shape[0]
    if variables is None:
        variables = tuple(f"q{i+1}" for i in range(n))
    terms: list[tuple[float, ExprNode]] = []
    for i in range(n):
        terms.append((alpha[i], binary("pow", var(i), const(2.0))))
        terms.append((beta[i], var(i)))
    return ParsedPotential(variables, _linear_combination(terms))


@dataclass(frozen=True)
class SeparabilityCheck:
    """Outcome of the coordinatewise-force test g = A^{-1} grad tildeU."""

    verdict: bool
    residual: float
    f_prime: tuple[Callable[[float], float], ...]


def check_inverse_separability(A, tilde: ParsedPotential, samples,
                               tol: float = 1e-8, h: float = 1e-5) -> SeparabilityCheck:
    """Decide whether g(q) = A^{-1} grad tildeU(q) is coordinatewise.

    At each sample the off-diagonal Jacobian entries dg_i/dq_j (central
    differences, j != i) are measured; the verdict is true when the largest
    stays at or below ``tol``.  On success the recovered per-coordinate
    forces f_i'(xi) = g_i(xi e_i) are returned as callables.
    """
    A = _check_square(A)
    _assert_invertible(A)
    n = A.shape[0]

    def g(q):
        return solve_linear(A, tilde.gradient(q))

    residual = 0.0
    for q in samples:
        q = np.asarray(q, dtype=float)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            column = (g(q + e) - g(q - e)) / (2.0 * h)
            off = [abs(column[i]) for i in range(n) if i != j]
            if off:
                residual = max(residual, max(off))
    verdict = residual <= tol

    def axis_force(i: int) -> Callable[[float], float]:
        def f_prime(xi: float) -> float:
            q = np.zeros(n)
            q[i] = xi
            return float(g(q)[i])
        return f_prime

    return SeparabilityCheck(verdict, residual,
                             tuple(axis_force(i) for i in range(n)))


@dataclass(frozen=True)
class InverseReport:
    """Everything the inverse analysis produces for one kinetic matrix."""

    A: np.ndarray
    forced_quadratic: tuple[int, ...]
    alpha_basis: tuple[np.ndarray, ...]
    alpha: np.ndarray
    beta: np.ndarray
    tilde: ParsedPotential
    separated_eom: tuple[tuple[float, float], ...]   # (2 alpha_i, beta_i) per i
    verdict: bool
    residual: float
