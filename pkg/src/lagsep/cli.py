"""Command-line front end.

``lagsep analyze`` runs the whole pipeline on one potential: sample the
Hessian, compute the commuting-matrix space, pick a generic element of its
center, build the spectral frame, verify and extract the separation,
reconstruct the companion potential, and validate everything dynamically
by symplectic integration.  Results land in ``report.json`` (schema 1,
17-significant-digit decimals, byte-identical for identical seeded
requests), ``trace.csv`` and one ``f_k.csv`` per singleton block.

Exit codes: 0 separation found, 2 no usable separation (trivial commutant,
or a verification that came back negative, e.g. diagnostic kinetic files),
1 any error.  ``lagsep simulate`` integrates without the analysis;
``lagsep inverse`` runs the non-symmetric kinetic-matrix analysis on a
JSON matrix file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import commutant as cmt
from . import dynamics as dyn
from . import inverse as inv
from . import separation as sep
from . import spectral as spc
from .expr import parse
from .linalg import is_invertible
from .models import MODEL_NAMES, build_model, r4_transcendental

__all__ = ["AnalysisRequest", "AnalysisReport", "run_analysis", "main",
           "dumps_report"]

SCHEMA_VERSION = 1
DEFAULT_SEED = 42
DEFAULT_H = 1e-3
DEFAULT_STEPS = 10_000


# ---------------------------------------------------------------------------
# deterministic JSON with 17-significant-digit decimals


def _emit(value, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(value.items()):
            out.append(f"{pad}  {json.dumps(k)}: ")
            _emit(v, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
        return
    if isinstance(value, (list, tuple)):
        seq = list(value)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad + "  ")
            _emit(v, indent + 1, out)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
        return
    if isinstance(value, str):
        out.append(json.dumps(value))
        return
    if value is None:
        out.append("null")
        return
    if isinstance(value, (bool, np.bool_)):
        out.append("true" if value else "false")
        return
    if isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
        return
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x) or math.isinf(x):
            out.append("null")    # JSON has no inf/nan; raw columns carry the data
            return
        out.append(format(x, ".17g"))
        return
    raise TypeError(f"cannot serialize {type(value)!r}")


def dumps_report(obj) -> str:
    out: list[str] = []
    _emit(obj, 0, out)
    out.append("\n")
    return "".join(out)


def _listify(array) -> list:
    return np.asarray(array, dtype=float).tolist()


# ---------------------------------------------------------------------------
# analyze


@dataclass
class AnalysisRequest:
    """One fully specified analysis run; exactly one potential source."""

    model: str | None = None
    params: dict = field(default_factory=dict)
    potential: str | None = None
    variables: tuple[str, ...] | None = None
    box: list | None = None
    samples: int | None = None
    seed: int = DEFAULT_SEED
    commutant_tol: float = cmt.DEFAULT_REL_TOL
    cluster_tol: float | None = None
    sep_tol: float = sep.DEFAULT_SEPARATION_TOL
    h: float = DEFAULT_H
    steps: int = DEFAULT_STEPS
    q0: tuple | None = None
    v0: tuple | None = None
    out: str = "."
    verbose: bool = False
    kinetic_file: str | None = None

    def __post_init__(self):
        if (self.model is None) == (self.potential is None):
            raise ValueError("exactly one of model or potential must be given")
        for name, value in (("commutant_tol", self.commutant_tol),
                            ("sep_tol", self.sep_tol), ("h", self.h)):
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cluster_tol is not None and self.cluster_tol <= 0:
            raise ValueError("cluster_tol must be positive")


@dataclass
class AnalysisReport:
    """Structured pipeline outcome; ``to_dict`` fixes the JSON schema."""

    request: dict
    commutant: dict
    kinetic: dict
    frame: dict | None
    separation: dict
    dynamics: dict | None
    outputs: dict
    verdict: dict

    @property
    def exit_code(self) -> int:
        return self.verdict["exit_code"]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "request": self.request,
            "commutant": self.commutant,
            "kinetic": self.kinetic,
            "frame": self.frame,
            "separation": self.separation,
            "dynamics": self.dynamics,
            "outputs": self.outputs,
            "verdict": self.verdict,
        }


def _resolve_potential(req: AnalysisRequest):
    if req.model is not None:
        spec = build_model(req.model, req.params)
        return spec.potential, {"model": spec.name, "parameters": spec.parameters}
    variables = req.variables
    if not variables:
        raise ValueError("--vars is required with --potential")
    p = parse(req.potential, variables)
    return p, {"expression": req.potential, "variables": list(variables)}


def _resolve_box(req: AnalysisRequest, n: int):
    if not req.box:
        return [(-1.0, 1.0)] * n
    box = [tuple(map(float, pair)) for pair in req.box]
    if len(box) == 1 and n > 1:
        box = box * n
    if len(box) != n:
        raise ValueError(f"--box given {len(box)} times for dimension {n}")
    return box


def _default_state(n: int, q0, v0):
    # small enough that the built-in cubic models stay inside their wells
    q = np.array([0.05 * (i + 1) for i in range(n)]) if q0 is None else np.asarray(q0, float)
    v = np.zeros(n) if v0 is None else np.asarray(v0, float)
    if q.shape != (n,) or v.shape != (n,):
        raise ValueError(f"initial state must have dimension {n}")
    return dyn.State(0.0, q, v)


def run_analysis(req: AnalysisRequest) -> AnalysisReport:
    potential, source_echo = _resolve_potential(req)
    n = potential.n
    box = _resolve_box(req, n)
    count = req.samples if req.samples is not None else cmt.default_sample_count(n)

    request_echo = {
        "source": source_echo,
        "box": [list(pair) for pair in box],
        "samples": count,
        "seed": req.seed,
        "tolerances": {
            "commutant_rel_tol": req.commutant_tol,
            "cluster_tol": req.cluster_tol,
            "separation_tol": req.sep_tol,
        },
        "dynamics": {"h": req.h, "steps": req.steps},
    }

    # commuting-matrix space, with a doubled-sample stability re-check
    samples = cmt.sample_points(box, count, req.seed)
    system = cmt.assemble_commutant_system(potential, samples)
    basis = cmt.solve_commutant(system, req.commutant_tol, potential=potential,
                                box=box, seed=req.seed,
                                below_recommended=samples.below_recommended)
    doubled = cmt.sample_points(box, 2 * count, req.seed)
    doubled_basis = cmt.solve_commutant(
        cmt.assemble_commutant_system(potential, doubled), req.commutant_tol)
    center = cmt.center_basis(basis.matrices) if basis.dimension else []
    sv = basis.singular_values
    kept = len(sv) - basis.dimension
    if basis.dimension == 0 or kept == 0:
        sv_gap = None
    else:
        dropped = float(sv[kept])
        sv_gap = math.inf if dropped == 0.0 else float(sv[kept - 1]) / dropped
    commutant_echo = {
        "dimension": basis.dimension,
        "center_dimension": len(center),
        "singular_values": _listify(sv),
        "sv_gap_kept_dropped": sv_gap,
        "max_commutation_residual": basis.max_residual,
        "basis": [_listify(B) for B in basis.matrices],
        "sample_count": count,
        "below_recommended_count": basis.below_recommended,
        "stability": {
            "doubled_sample_dimension": doubled_basis.dimension,
            "stable": doubled_basis.dimension == basis.dimension,
        },
    }

    fresh = cmt.sample_points(box, 10, req.seed + 101)
    report = AnalysisReport(
        request=request_echo, commutant=commutant_echo, kinetic={},
        frame=None, separation={}, dynamics=None, outputs={}, verdict={},
    )

    # kinetic matrix: diagnostic file, or a generic element of the center
    if req.kinetic_file is not None:
        A = np.asarray(json.loads(Path(req.kinetic_file).read_text()), dtype=float)
        if A.shape != (n, n):
            raise ValueError(f"kinetic matrix has shape {A.shape}, expected ({n}, {n})")
        kinetic_source = "file"
    else:
        trivial = basis.dimension <= 1 and n > 1
        if trivial:
            report.kinetic = {"source": "none", "A": None, "invertible": None,
                              "commutation_residual": None}
            report.separation = {"mode": "none", "verified": False,
                                 "reason": "commutant is trivial (scalar matrices only)"}
            report.verdict = _verdict(report, commutant_trivial=True)
            return report
        A = cmt.select_generic_element(basis, seed=req.seed)
        kinetic_source = "selected"

    a_residual = cmt.commutation_residual(potential, A, fresh.points)
    report.kinetic = {
        "source": kinetic_source,
        "A": _listify(A),
        "invertible": bool(is_invertible(A)),
        "commutation_residual": a_residual,
    }

    frame = spc.build_frame(A, req.cluster_tol)
    report.frame = {
        "eigenvalues": _listify(frame.eigenvalues),
        "blocks": [list(b) for b in frame.blocks],
        "block_sizes": list(frame.block_sizes),
        "Q": _listify(frame.Q),
        "cluster_tol": frame.cluster_tol,
    }

    pot_x = spc.pullback(potential, frame)
    xs = [spc.to_spectral(frame, q) for q in samples.points]
    check = sep.verify_block_separation(pot_x, frame, xs, req.sep_tol)

    # conservativity diagnostics at a few sample targets (straight vs
    # axis-aligned line integrals of the weighted force field)
    targets = fresh.points[:3]
    max_path_gap = max(sep.path_disagreement(potential, A, t) for t in targets)

    separation_echo = {
        "mode": "none",
        "verified": bool(check.verdict),
        "cross_block_residual": check.residual,
        "hessian_scale": check.scale,
        "max_path_disagreement": max_path_gap,
    }

    if not check.verdict:
        separation_echo["reason"] = "cross-block Hessian entries do not vanish"
        report.separation = separation_echo
        report.verdict = _verdict(report, commutant_trivial=False)
        return report

    blocks, constant = sep.extract_block_potentials(
        pot_x, frame, validation_box=box, seed=req.seed, tol=sep.RECONSTRUCTION_TOL)
    mode = "full" if frame.is_simple() else "block"
    tilde = sep.SeparatedTilde(frame, blocks)

    # line-integral reconstruction vs the separated representation, and the
    # finite-difference gradient relation, at fresh points
    recon_points = fresh.points[:5]
    recon_err = 0.0
    for t in recon_points:
        value = sep.reconstruct_tilde(potential, A, t)
        recon_err = max(recon_err, abs(value - tilde(t)))
    grad_residual = sep.verify_gradient_relation(
        potential, lambda p: sep.reconstruct_tilde(potential, A, p, audit=False),
        A, recon_points)

    separation_echo.update({
        "mode": mode,
        "constant": constant,
        "tilde_constant": 0.0,
        "reconstruction_residual": recon_err,
        "gradient_relation_residual": grad_residual,
    })
    report.separation = separation_echo

    # dynamical validation: canonical vs weighted, energies and drifts
    if report.kinetic["invertible"]:
        s0 = _default_state(n, req.q0, req.v0)
        canonical = dyn.integrate_canonical(potential, s0, req.h, req.steps)
        weighted = dyn.integrate_weighted(
            A, lambda q: A @ potential.gradient(q), s0, req.h, req.steps)
        gap = dyn.equivalence_gap(canonical, weighted)
        trace = dyn.energies(canonical, potential, A, tilde, frame, blocks)
        report.dynamics = {
            "h": req.h,
            "steps": req.steps,
            "q0": _listify(s0.q),
            "v0": _listify(s0.v),
            "equivalence_gap": gap,
            "drift": {
                "E": trace.drift["E"],
                "Etilde": trace.drift["Etilde"],
                "I": list(trace.drift["I"]),
            },
        }
        outdir = Path(req.out)
        outdir.mkdir(parents=True, exist_ok=True)
        dyn.export_trace_csv(outdir / "trace.csv", canonical, trace)
        report.outputs["trace"] = "trace.csv"
    else:
        report.dynamics = {
            "skipped": "kinetic matrix is singular; the weighted system is not well posed",
        }

    lo = min(pair[0] for pair in box)
    hi = max(pair[1] for pair in box)
    block_files = []
    outdir = Path(req.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for k, (blo, bhi) in enumerate(frame.blocks):
        if bhi - blo == 1:
            name = f"f_{k+1}.csv"
            sep.export_block_csv(outdir / name, blocks[k], lo, hi, label=f"f_{k+1}")
            block_files.append(name)
    report.outputs["blocks"] = block_files

    report.verdict = _verdict(report, commutant_trivial=False)
    return report


def _verdict(report: AnalysisReport, commutant_trivial: bool) -> dict:
    mode = report.separation.get("mode", "none")
    separated = mode in ("full", "block")
    return {
        "commutant_trivial": commutant_trivial,
        "mode": mode,
        "separated": separated,
        "exit_code": 0 if separated else 2,
    }


def _write_report(report_dict: dict, outdir: str) -> Path:
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / "report.json"
    target.write_text(dumps_report(report_dict))
    return target


def cmd_analyze(args) -> int:
    req = AnalysisRequest(
        model=args.model, params=dict(args.param or []),
        potential=args.potential,
        variables=tuple(args.vars.split(",")) if args.vars else None,
        box=args.box, samples=args.samples, seed=args.seed,
        commutant_tol=args.commutant_tol, cluster_tol=args.cluster_tol,
        sep_tol=args.sep_tol, h=args.h, steps=args.steps,
        q0=args.q0, v0=args.v0, out=args.out, verbose=args.verbose,
        kinetic_file=args.kinetic_file,
    )
    report = run_analysis(req)
    target = _write_report(report.to_dict(), req.out)
    if args.verbose:
        sv = report.commutant["singular_values"]
        print("commutant dimension:", report.commutant["dimension"],
              f"(center {report.commutant['center_dimension']})")
        print("singular values:", " ".join(format(s, ".3e") for s in sv))
        gap = report.commutant["sv_gap_kept_dropped"]
        print("kept/dropped gap:", "inf" if gap is None else format(gap, ".3e"))
        if report.frame:
            print("eigenvalues:", report.frame["eigenvalues"])
            print("blocks:", report.frame["blocks"])
    print(f"mode={report.verdict['mode']} "
          f"commutant_dim={report.commutant['dimension']} "
          f"exit={report.exit_code} report={target}")
    return report.exit_code


def cmd_simulate(args) -> int:
    req_params = dict(args.param or [])
    if args.model is not None:
        potential = build_model(args.model, req_params).potential
    elif args.potential is not None:
        if not args.vars:
            raise ValueError("--vars is required with --potential")
        potential = parse(args.potential, tuple(args.vars.split(",")))
    else:
        raise ValueError("one of --model or --potential is required")
    s0 = _default_state(potential.n, args.q0, args.v0)
    traj = dyn.integrate_canonical(potential, s0, args.h, args.steps)
    trace = dyn.energies(traj, potential)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    dyn.export_trace_csv(outdir / "trace.csv", traj, trace)
    print(f"steps={args.steps} h={args.h} E_drift={trace.drift['E']:.3e} "
          f"trace={outdir / 'trace.csv'}")
    return 0


def cmd_inverse(args) -> int:
    A = np.asarray(json.loads(Path(args.a_file).read_text()), dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"kinetic matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    forced = sorted(inv.forced_quadratic_set(A))
    alpha_basis = inv.solve_alpha_constraints(A)
    if args.alpha is not None:
        alpha = np.asarray(args.alpha, dtype=float)
    elif alpha_basis:
        alpha = alpha_basis[0]
    else:
        alpha = np.zeros(n)
    beta = np.asarray(args.beta, dtype=float) if args.beta is not None else np.zeros(n)
    tilde = inv.build_tilde_potential(A, alpha, beta)
    box = [(-1.0, 1.0)] * n
    points = cmt.sample_points(box, args.samples, args.seed).points
    check = inv.check_inverse_separability(A, tilde, points)
    symmetric = bool(np.allclose(A, A.T, rtol=0.0, atol=1e-14))

    report = {
        "schema": SCHEMA_VERSION,
        "A": _listify(A),
        "symmetric": symmetric,
        "note": ("matrix is symmetric: the forward spectral analysis "
                 "(lagsep analyze) applies as well" if symmetric else None),
        "forced_quadratic": [k + 1 for k in forced],   # 1-based, matches q1..qn
        "alpha_space_dimension": len(alpha_basis),
        "alpha_basis": [_listify(v) for v in alpha_basis],
        "alpha": _listify(alpha),
        "beta": _listify(beta),
        "tilde_potential": tilde.render(),
        "separated_eom": [{"coordinate": f"q{i+1}",
                           "stiffness": 2.0 * float(alpha[i]),
                           "constant_force": float(beta[i])} for i in range(n)],
        "separable": bool(check.verdict),
        "residual": check.residual,
    }
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    target = outdir / "inverse_report.json"
    target.write_text(dumps_report(report))
    print(f"alpha_dim={len(alpha_basis)} forced={report['forced_quadratic']} "
          f"separable={check.verdict} report={target}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, which would collide with the
    # "no separation" code; remap to the generic error code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    key, value = text.split("=", 1)
    return key, float(value)


def _interval(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _floats(text: str):
    return tuple(float(v) for v in text.split(","))


def _add_potential_options(p):
    p.add_argument("--model", choices=MODEL_NAMES, help="built-in model name")
    p.add_argument("--potential", help="potential expression, e.g. '0.5*(q1^2+q2^2)'")
    p.add_argument("--vars", help="comma-separated variable names for --potential")
    p.add_argument("--param", action="append", type=_kv, metavar="NAME=VALUE",
                   help="model parameter (repeatable)")


def _add_dynamics_options(p):
    p.add_argument("--q0", type=_floats, help="initial configuration, comma-separated")
    p.add_argument("--v0", type=_floats, help="initial velocity, comma-separated")
    p.add_argument("--h", type=float, default=DEFAULT_H, help="integration step")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="number of steps")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="lagsep",
                             description="spectral separation analysis of "
                                         "natural Lagrangian systems")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", parents=[], help="full pipeline on one potential")
    _add_potential_options(pa)
    pa.add_argument("--box", action="append", type=_interval, metavar="LO:HI",
                    help="sampling interval per coordinate (repeatable; one "
                         "occurrence broadcasts)")
    pa.add_argument("--samples", type=int, help="Hessian sample count "
                                                "(default max(20, n(n+1)))")
    pa.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pa.add_argument("--commutant-tol", type=float, default=cmt.DEFAULT_REL_TOL,
                    help="singular-value threshold, relative")
    pa.add_argument("--cluster-tol", type=float, default=None,
                    help="eigenvalue clustering tolerance "
                         "(default 1e-8 * max(1, spectral radius))")
    pa.add_argument("--sep-tol", type=float, default=sep.DEFAULT_SEPARATION_TOL,
                    help="cross-block Hessian tolerance, relative")
    _add_dynamics_options(pa)
    pa.add_argument("--kinetic-file", help="JSON n x n array: analyze this "
                                           "kinetic matrix instead of selecting one")
    pa.add_argument("--out", default=".", help="output directory")
    pa.add_argument("--verbose", action="store_true",
                    help="print the commutant singular-value spectrum")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="integrate the canonical system only")
    _add_potential_options(ps)
    _add_dynamics_options(ps)
    ps.add_argument("--out", default=".", help="output directory")
    ps.set_defaults(func=cmd_simulate)

    pi = sub.add_parser("inverse", help="non-symmetric kinetic matrix analysis")
    pi.add_argument("--a-file", required=True,
                    help="JSON file holding the n x n kinetic matrix")
    pi.add_argument("--alpha", type=_floats, help="quadratic coefficients "
                                                  "(default: first admissible basis vector)")
    pi.add_argument("--beta", type=_floats, help="linear coefficients (default 0)")
    pi.add_argument("--samples", type=int, default=20)
    pi.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pi.add_argument("--out", default=".", help="output directory")
    pi.set_defaults(func=cmd_inverse)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:   # uniform error surface: module, message, code 1
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{module}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
