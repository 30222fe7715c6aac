"""Constant symmetric matrices commuting with the sampled Hessian family.

The compatibility condition between the two kinetic matrices is that the
candidate matrix commutes with the Hessian of the potential at every
configuration.  "Every configuration" is discretized by seeded random
sampling, which is probabilistically complete for analytic Hessians: each
scalar commutation constraint is analytic in q, so it either vanishes
identically or on a measure-zero set.  A fresh validation sample and a
doubled-count stability re-check guard the discretization in practice.

Unknowns are the upper triangle of the symmetric candidate, with
off-diagonal entries carrying weight sqrt(2) so the parametrization is an
isometry for the Frobenius inner product; singular-value thresholds of the
assembled linear system then have a direct geometric meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import ParsedPotential
from .linalg import cluster_eigenvalues, nullspace, singular_values, sym_eigen
from .rng import XorShift64Star, derive_seed

__all__ = [
    "SampleSet",
    "CommutantBasis",
    "default_sample_count",
    "sample_points",
    "assemble_commutant_system",
    "solve_commutant",
    "compute_commutant",
    "commutation_residual",
    "center_basis",
    "select_generic_element",
    "symmetric_basis",
    "sym_to_vec",
    "vec_to_sym",
]

_VALIDATION_STREAM = 1
_SELECT_STREAM = 2

DEFAULT_REL_TOL = 1e-8


def default_sample_count(n: int) -> int:
    return max(20, n * (n + 1))


@dataclass(frozen=True)
class SampleSet:
    """Seeded sample of configuration points inside a box.

    ``below_recommended`` flags counts under n(n+1)/2, the minimum needed
    to determine a symmetric matrix from one constraint row per pair.
    """

    points: np.ndarray
    box: tuple[tuple[float, float], ...]
    seed: int
    below_recommended: bool

    def __len__(self):
        return self.points.shape[0]


def sample_points(box, count: int, seed: int) -> SampleSet:
    """Draw ``count`` points, uniform per coordinate, bit-reproducible for a
    given seed on any platform."""
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if count < 1:
        raise ValueError("sample count must be at least 1")
    for lo, hi in box:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid box interval ({lo}, {hi})")
    gen = XorShift64Star(seed)
    pts = np.array([gen.point(box) for _ in range(count)])
    n = len(box)
    return SampleSet(pts, box, seed, below_recommended=count < n * (n + 1) // 2)


def symmetric_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of Sym(n): E_ii and (E_ij+E_ji)/sqrt(2),
    ordered by upper-triangle row-major position."""
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            basis.append(E)
    return basis


def sym_to_vec(A: np.ndarray) -> np.ndarray:
    """Coordinates of a symmetric matrix in the orthonormal basis above."""
    n = A.shape[0]
    out = []
    for i in range(n):
        for j in range(i, n):
            out.append(A[i, i] if i == j else A[i, j] * math.sqrt(2.0))
    return np.array(out)


def vec_to_sym(u: np.ndarray, n: int) -> np.ndarray:
    A = np.zeros((n, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            if i == j:
                A[i, i] = u[k]
            else:
                A[i, j] = A[j, i] = u[k] / math.sqrt(2.0)
            k += 1
    return A


def assemble_commutant_system(potential: ParsedPotential, samples: SampleSet) -> np.ndarray:
    """Linear system whose nullspace is the space of commuting matrices.

    One block of n(n-1)/2 rows per sample: the strictly-upper entries of
    [H(q), A] as linear functions of the isometric unknown vector (the
    commutator of two symmetric matrices is antisymmetric, so these rows
    carry all the information).  Row blocks follow sample order, which
    makes the output independent of any evaluation parallelism.
    """
    n = potential.n
    basis = symmetric_basis(n)
    iu = np.triu_indices(n, 1)
    pairs = len(iu[0])
    unknowns = len(basis)
    rows = np.zeros((len(samples) * pairs, unknowns))
    for s, q in enumerate(samples.points):
        try:
            H = potential.hessian(q)
        except Exception as exc:
            raise type(exc)(f"{exc} (while sampling Hessian at sample {s})") from exc
        for c, E in enumerate(basis):
            C = H @ E - E @ H
            rows[s * pairs:(s + 1) * pairs, c] = C[iu]
    return rows


def commutation_residual(potential: ParsedPotential, A: np.ndarray, points) -> float:
    """max over points of ||[H(q), A]||_F."""
    worst = 0.0
    for q in points:
        H = potential.hessian(q)
        C = H @ A - A @ H
        worst = max(worst, float(np.sqrt(np.sum(C * C))))
    return worst


@dataclass(frozen=True)
class CommutantBasis:
    """Frobenius-orthonormal basis of the commuting space plus diagnostics.

    ``singular_values`` (descending) of the constraint system expose how
    clear-cut the nullspace decision was; ``max_residual`` is the largest
    commutation residual of any basis element over a fresh validation
    sample drawn with a different seed.
    """

    matrices: tuple[np.ndarray, ...]
    singular_values: np.ndarray
    max_residual: float
    below_recommended: bool = False

    @property
    def dimension(self) -> int:
        return len(self.matrices)

    def gap_report(self) -> list[float]:
        """Successive singular-value ratios sigma_k / sigma_{k+1} (inf where
        the denominator vanishes)."""
        s = self.singular_values
        out = []
        for k in range(len(s) - 1):
            out.append(float(s[k] / s[k + 1]) if s[k + 1] > 0.0 else math.inf)
        return out

    def projection_residual(self, M: np.ndarray) -> float:
        """Frobenius distance from M/||M|| to the span of the basis."""
        norm = np.sqrt(np.sum(M * M))
        if norm == 0.0:
            return 0.0
        Mh = M / norm
        residual = Mh - sum(np.sum(Mh * B) * B for B in self.matrices)
        return float(np.sqrt(np.sum(residual * residual)))


def solve_commutant(system: np.ndarray, rel_tol: float = DEFAULT_REL_TOL, *,
                    potential: ParsedPotential | None = None,
                    box=None, seed: int = 0,
                    below_recommended: bool = False) -> CommutantBasis:
    """Nullspace of the assembled system, mapped back to symmetric matrices.

    When the potential and box are supplied, every basis matrix is
    re-validated on a fresh 10-point sample drawn from a derived seed and
    the worst commutation residual is recorded (nan otherwise).
    """
    system = np.atleast_2d(np.asarray(system, dtype=float))
    n_unknowns = system.shape[1]
    n = int(round((math.isqrt(1 + 8 * n_unknowns) - 1) / 2))
    vectors = nullspace(system, rel_tol)
    matrices = tuple(vec_to_sym(u, n) for u in vectors)
    sigmas = singular_values(system)
    max_residual = math.nan
    if potential is not None and box is not None:
        fresh = sample_points(box, 10, derive_seed(seed, _VALIDATION_STREAM))
        max_residual = 0.0
        for B in matrices:
            max_residual = max(max_residual,
                               commutation_residual(potential, B, fresh.points))
    return CommutantBasis(matrices, sigmas, max_residual,
                          below_recommended=below_recommended)


def compute_commutant(potential: ParsedPotential, box=None, count: int | None = None,
                      seed: int = 0, rel_tol: float = DEFAULT_REL_TOL) -> CommutantBasis:
    """Sample, assemble and solve in one call (the common library entry)."""
    if box is None:
        box = [(-1.0, 1.0)] * potential.n
    if count is None:
        count = default_sample_count(potential.n)
    samples = sample_points(box, count, seed)
    system = assemble_commutant_system(potential, samples)
    return solve_commutant(system, rel_tol, potential=potential, box=box, seed=seed,
                           below_recommended=samples.below_recommended)


def center_basis(matrices, rel_tol: float = DEFAULT_REL_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the center of the commuting space.

    The center (elements commuting with the whole space) is the part whose
    eigenvalue clusters are canonical: a generic commutant element would
    happily split an isotypic block along an arbitrary rotation, inventing
    separations the potential does not force.  For an abelian commutant
    the center is the whole space and this is a no-op.
    """
    mats = list(matrices)
    dim = len(mats)
    if dim <= 1:
        return mats
    n = mats[0].shape[0]
    iu = np.triu_indices(n, 1)
    pairs = len(iu[0])
    rows = np.zeros((dim * pairs, dim))
    for i, Bi in enumerate(mats):
        for j, Bj in enumerate(mats):
            C = Bj @ Bi - Bi @ Bj
            rows[i * pairs:(i + 1) * pairs, j] = C[iu]
    # commutators of unit-norm matrices are O(1) scaled; the absolute floor
    # keeps an exactly-abelian space (rows ~ roundoff) at full dimension
    coeffs = nullspace(rows, rel_tol, atol=1e-10)
    return [sum(c[j] * mats[j] for j in range(dim)) for c in coeffs]


def _sign_normalize(A: np.ndarray) -> np.ndarray:
    flat = A.ravel()
    nonzero = np.nonzero(np.abs(flat) > 1e-12)[0]
    if nonzero.size and flat[nonzero[0]] < 0.0:
        return -A
    return A


def _cluster_profile(A: np.ndarray) -> tuple[int, float]:
    eig = sym_eigen(A)
    vals = eig.eigenvalues
    tol = 1e-8 * max(1.0, float(np.max(np.abs(vals))))
    blocks = cluster_eigenvalues(vals, tol)
    if len(blocks) < 2:
        return len(blocks), math.inf
    leaders = [vals[lo] for lo, _ in blocks]
    min_gap = min(leaders[k + 1] - leaders[k] for k in range(len(leaders) - 1))
    return len(blocks), float(min_gap)


def select_generic_element(basis: CommutantBasis, seed: int = 0) -> np.ndarray:
    """Pick one matrix from the commuting space for spectral analysis.

    Draws up to 16 seeded unit combinations of the center basis, keeping
    the draw with the most distinct eigenvalue clusters (ties: largest
    minimum cluster gap, then draw order).  Restricting to the center keeps
    degenerate blocks degenerate; see :func:`center_basis`.  The result has
    unit Frobenius norm and a deterministic overall sign.
    """
    if basis.dimension == 0:
        raise ValueError("empty commutant basis")
    center = center_basis(basis.matrices)
    if len(center) == 1:
        return _sign_normalize(center[0].copy())
    gen = XorShift64Star(derive_seed(seed, _SELECT_STREAM))
    best = None
    best_key = (-1, -math.inf)
    for _ in range(16):
        c = gen.unit_vector(len(center))
        A = sum(c[j] * center[j] for j in range(len(center)))
        key = _cluster_profile(A)
        if key > best_key:
            best, best_key = A, key
    return _sign_normalize(best)
