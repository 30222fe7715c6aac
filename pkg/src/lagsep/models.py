"""Built-in example systems used by the tests, demos and CLI gallery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import ParsedPotential, parse

__all__ = [
    "ModelSpec",
    "sawada_kotera",
    "henon_heiles",
    "henon_heiles_case",
    "r4_transcendental",
    "MODEL_NAMES",
    "build_model",
]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dimension: int
    parameters: dict = field(default_factory=dict)
    potential: ParsedPotential = None
    description: str = ""


def sawada_kotera() -> ModelSpec:
    """Two-dimensional integrable cubic system from the Sawada-Kotera
    hierarchy: U = (q1^2+q2^2)/2 + q1^2 q2 + q2^3/3.  Its Hessian has equal
    diagonal entries, so the commuting family is two-dimensional and the
    spectrum of a generic element is simple: the dynamics separates fully
    in the rotated coordinates (q1 +/- q2)/sqrt(2)."""
    source = "0.5*(q1^2 + q2^2) + q1^2*q2 + (1/3)*q2^3"
    return ModelSpec(
        name="sawada-kotera",
        dimension=2,
        parameters={},
        potential=parse(source, ["q1", "q2"]),
        description="integrable cubic two-oscillator system, fully separable "
                    "in rotated coordinates",
    )


def henon_heiles(n: int = 2, alpha: float = 1.0, beta: float = 1.0,
                 a: float = 1.0, b: float = 1.0) -> ModelSpec:
    """Generalized Henon-Heiles potential on R^n:

        U = alpha/2 sum_{i<n} q_i^2 + beta/2 q_n^2
            + a q_n sum_{i<n} q_i^2 + b q_n^3

    n = 2 with the default parameters is the classical chaotic system.  The
    constant-commutant structure depends only on which of a, b vanish; see
    :func:`henon_heiles_case`.  The classical integrable parameter families
    (the 1:6:1, 1:6:8, 1:12:16 ratios) are particular (a, b) choices of
    this same constructor, not separate models.
    """
    if n < 2:
        raise ValueError("henon_heiles needs dimension n >= 2")
    names = [f"q{i+1}" for i in range(n)]
    sumsq = " + ".join(f"{v}^2" for v in names[:-1])
    qn = names[-1]
    source = (f"({alpha!r}/2)*({sumsq}) + ({beta!r}/2)*{qn}^2"
              f" + {a!r}*{qn}*({sumsq}) + {b!r}*{qn}^3")
    return ModelSpec(
        name="henon-heiles",
        dimension=n,
        parameters={"n": n, "alpha": float(alpha), "beta": float(beta),
                    "a": float(a), "b": float(b)},
        potential=parse(source, names),
        description=f"generalized cubic oscillator system, case {henon_heiles_case(a, b)}",
    )


def henon_heiles_case(a: float, b: float) -> str:
    """Parameter classification of the generalized Henon-Heiles family.

    I  (a != 0, b = 0): integrable two-dimensional core plus n-2 harmonic
       oscillators; the compatible kinetic matrix is configuration-dependent
       and the constant-matrix analysis reports a trivial commutant.
    II (a = 0, b != 0): uncoupled oscillators, separable but trivially so.
    III (a != 0, b != 0): the compatible kinetic matrix varies along the
       motion, so no constant-matrix separation exists.
    """
    if a != 0.0 and b == 0.0:
        return "I"
    if a == 0.0 and b != 0.0:
        return "II"
    if a == 0.0 and b == 0.0:
        return "II (pure quadratic)"
    return "III"


def r4_transcendental() -> tuple[ModelSpec, np.ndarray]:
    """Four-dimensional transcendental potential with pair couplings
    (q1, q3) and (q2, q4), together with the kinetic matrix its couplings
    suggest (ones on the diagonal and on the paired entries).

    That matrix is a diagnostic input, not a certified commuting one: it is
    singular (each coupling block has eigenvalues 2 and 0) and its measured
    commutation and conservativity residuals are O(1); downstream analyses
    report those numbers instead of asserting separation.
    """
    source = ("exp(q1)*sin(q2) + atan(q3) + ln(1 + q4^2)"
              " + q1*q3 + q2*q4")
    spec = ModelSpec(
        name="r4",
        dimension=4,
        parameters={},
        potential=parse(source, ["q1", "q2", "q3", "q4"]),
        description="transcendental four-dimensional diagnostic system",
    )
    A = np.array([[1.0, 0.0, 1.0, 0.0],
                  [0.0, 1.0, 0.0, 1.0],
                  [1.0, 0.0, 1.0, 0.0],
                  [0.0, 1.0, 0.0, 1.0]])
    return spec, A


MODEL_NAMES = ("sawada-kotera", "henon-heiles", "r4")


def build_model(name: str, params: dict | None = None) -> ModelSpec:
    """CLI-facing constructor: model by name with numeric parameters."""
    params = dict(params or {})
    if name == "sawada-kotera":
        if params:
            raise ValueError("sawada-kotera takes no parameters")
        return sawada_kotera()
    if name == "henon-heiles":
        n = int(params.pop("n", 2))
        allowed = {"alpha", "beta", "a", "b"}
        unknown = set(params) - allowed
        if unknown:
            raise ValueError(f"unknown henon-heiles parameters: {sorted(unknown)}")
        return henon_heiles(n=n, **{k: float(v) for k, v in params.items()})
    if name == "r4":
        if params:
            raise ValueError("r4 takes no parameters")
        return r4_transcendental()[0]
    raise ValueError(f"unknown model {name!r}; available: {', '.join(MODEL_NAMES)}")
