"""Symplectic integration and conserved-quantity traces.

Velocity Verlet is used for both equation systems: the canonical one,
q'' = -grad U(q), and the kinetic-weighted one, A q'' = -grad tildeU(q),
the latter integrated in the original coordinates with a per-step linear
solve so the weighted equations are exercised exactly as written.  Verlet
is second order and exactly symplectic for a fixed step; its bounded
energy oscillation is itself a diagnostic, so no adaptivity is offered.

Energy traces evaluate the canonical energy E, the companion energy
tildeE = 1/2 v.Av + tildeU(q) and, when a separating frame is available,
the per-block integrals I_k = 1/2 |xdot_(k)|^2 + H_k(x_(k)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import DomainError, ParsedPotential
from .linalg import solve_linear
from .separation import BlockPotential
from .spectral import SpectralFrame

__all__ = [
    "State",
    "Trajectory",
    "EnergyTrace",
    "IntegrationAborted",
    "integrate_canonical",
    "integrate_weighted",
    "energies",
    "equivalence_gap",
    "relative_drift",
    "export_trace_csv",
]

MAX_RECORDS = 100_000


@dataclass(frozen=True)
class State:
    """Phase-space point: time, configuration and velocity."""

    t: float
    q: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one integration at a uniform stride.

    ``times`` is strictly increasing with spacing h * stride; row i of
    ``qs``/``vs`` is the state at times[i].
    """

    times: np.ndarray
    qs: np.ndarray
    vs: np.ndarray
    h: float
    steps: int
    stride: int
    integrator: str

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, i: int) -> State:
        return State(float(self.times[i]), self.qs[i].copy(), self.vs[i].copy())

    @property
    def final_state(self) -> State:
        return self.state(len(self) - 1)


class IntegrationAborted(Exception):
    """A domain error interrupted the integration; carries the partial
    trajectory and the failing step index."""

    def __init__(self, message: str, trajectory: Trajectory, step: int):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step


def _resolve_stride(steps: int, stride: int | None) -> int:
    if stride is not None:
        if stride < 1:
            raise ValueError("stride must be positive")
        return stride
    return 1 if steps <= MAX_RECORDS else math.ceil(steps / MAX_RECORDS)


def _verlet(acceleration: Callable, s0: State, h: float, steps: int,
            stride: int | None, tag: str) -> Trajectory:
    if h <= 0:
        raise ValueError("step h must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    stride = _resolve_stride(steps, stride)
    q = np.asarray(s0.q, dtype=float).copy()
    v = np.asarray(s0.v, dtype=float).copy()
    if q.shape != v.shape:
        raise ValueError("q and v have mismatched shapes")
    t0 = float(s0.t)

    records = steps // stride + 1
    times = np.empty(records)
    qs = np.empty((records, q.shape[0]))
    vs = np.empty((records, q.shape[0]))

    def record(slot: int, i: int):
        times[slot] = t0 + i * h
        qs[slot] = q
        vs[slot] = v

    record(0, 0)
    slot = 1
    half = 0.5 * h
    try:
        a = acceleration(q)
    except DomainError as exc:
        raise IntegrationAborted(
            f"domain error at the initial state: {exc}",
            Trajectory(times[:1].copy(), qs[:1].copy(), vs[:1].copy(),
                       h, 0, stride, tag), 0) from exc
    for i in range(1, steps + 1):
        v_half = v + half * a
        q = q + h * v_half
        try:
            a = acceleration(q)
        except DomainError as exc:
            partial = Trajectory(times[:slot].copy(), qs[:slot].copy(), vs[:slot].copy(),
                                 h, i - 1, stride, tag)
            raise IntegrationAborted(
                f"domain error at step {i}: {exc}", partial, i) from exc
        v = v_half + half * a
        if i % stride == 0:
            record(slot, i)
            slot += 1
    return Trajectory(times[:slot], qs[:slot], vs[:slot], h, steps, stride, tag)


def integrate_canonical(potential: ParsedPotential, s0: State, h: float,
                        steps: int, stride: int | None = None) -> Trajectory:
    """Velocity Verlet for q'' = -grad U(q)."""

    def acceleration(q):
        return -potential.gradient(q)

    return _verlet(acceleration, s0, h, steps, stride, "velocity-verlet")


def integrate_weighted(A, grad_tilde: Callable, s0: State, h: float,
                       steps: int, stride: int | None = None) -> Trajectory:
    """Velocity Verlet for A q'' = -grad tildeU(q).

    ``grad_tilde`` returns the gradient of the companion potential at q;
    each step solves the linear system for the acceleration, so a singular
    kinetic matrix fails loudly (invertibility is its standing hypothesis).
    """
    A = np.asarray(A, dtype=float)
    solve_linear(A, np.zeros(A.shape[0]))  # invertibility up front, clearer error

    def acceleration(q):
        return solve_linear(A, -np.asarray(grad_tilde(q), dtype=float))

    return _verlet(acceleration, s0, h, steps, stride, "velocity-verlet-weighted")


def relative_drift(series: np.ndarray) -> float:
    """max |X(t) - X(0)| / max(1, |X(0)|)."""
    x0 = float(series[0])
    return float(np.max(np.abs(series - x0))) / max(1.0, abs(x0))


@dataclass
class EnergyTrace:
    """Per-state conserved-quantity values and their drift statistics."""

    E: np.ndarray
    Etilde: np.ndarray | None = None
    block_integrals: list[np.ndarray] = field(default_factory=list)
    drift: dict = field(default_factory=dict)


def energies(traj: Trajectory, potential: ParsedPotential, A=None,
             tilde_value: Callable | None = None,
             frame: SpectralFrame | None = None,
             block_potentials=None) -> EnergyTrace:
    """Evaluate E (always), tildeE (when A and tilde_value are given) and
    per-block integrals I_k (when a frame with block potentials is given)
    along the trajectory, with relative drifts."""
    m = len(traj)
    E = np.empty(m)
    for i in range(m):
        q, v = traj.qs[i], traj.vs[i]
        E[i] = 0.5 * float(np.dot(v, v)) + potential.value(q)

    Etilde = None
    if A is not None and tilde_value is not None:
        A = np.asarray(A, dtype=float)
        Etilde = np.empty(m)
        for i in range(m):
            q, v = traj.qs[i], traj.vs[i]
            Etilde[i] = 0.5 * float(v @ A @ v) + tilde_value(q)

    block_integrals: list[np.ndarray] = []
    if frame is not None and block_potentials:
        X = traj.qs @ frame.Q
        Xdot = traj.vs @ frame.Q
        for k, (lo, hi) in enumerate(frame.blocks):
            Hk: BlockPotential = block_potentials[k]
            I = np.empty(m)
            for i in range(m):
                I[i] = 0.5 * float(np.dot(Xdot[i, lo:hi], Xdot[i, lo:hi])) + Hk(X[i, lo:hi])
            block_integrals.append(I)

    drift = {"E": relative_drift(E)}
    if Etilde is not None:
        drift["Etilde"] = relative_drift(Etilde)
    if block_integrals:
        drift["I"] = [relative_drift(I) for I in block_integrals]
    return EnergyTrace(E=E, Etilde=Etilde, block_integrals=block_integrals, drift=drift)


def equivalence_gap(t1: Trajectory, t2: Trajectory) -> float:
    """max over recorded steps of ||q1-q2||_inf + ||v1-v2||_inf.

    Both trajectories must share the step, stride and record count (they
    are meant to start from the same state)."""
    if t1.qs.shape != t2.qs.shape:
        raise ValueError(f"mismatched trajectory shapes {t1.qs.shape} vs {t2.qs.shape}")
    if t1.h != t2.h or t1.stride != t2.stride:
        raise ValueError("trajectories use different steps or strides")
    dq = np.max(np.abs(t1.qs - t2.qs), axis=1)
    dv = np.max(np.abs(t1.vs - t2.vs), axis=1)
    return float(np.max(dq + dv))


def export_trace_csv(path, traj: Trajectory, trace: EnergyTrace | None = None) -> None:
    """Write t, q_1..q_n, v_1..v_n[, E, Etilde, I_1..I_r] rows at
    17-significant-digit precision."""
    n = traj.qs.shape[1]
    header = ["t"] + [f"q_{i+1}" for i in range(n)] + [f"v_{i+1}" for i in range(n)]
    if trace is not None:
        header.append("E")
        if trace.Etilde is not None:
            header.append("Etilde")
        header.extend(f"I_{k+1}" for k in range(len(trace.block_integrals)))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(traj)):
            row = [format(traj.times[i], ".17g")]
            row.extend(format(x, ".17g") for x in traj.qs[i])
            row.extend(format(x, ".17g") for x in traj.vs[i])
            if trace is not None:
                row.append(format(trace.E[i], ".17g"))
                if trace.Etilde is not None:
                    row.append(format(trace.Etilde[i], ".17g"))
                row.extend(format(I[i], ".17g") for I in trace.block_integrals)
            writer.writerow(row)
