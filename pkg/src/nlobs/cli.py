"""Command-line front end.

Subcommands: estimate | synthesize | analyze | simulate | reproduce.
Stdout carries only the report (JSON with --json, human-readable otherwise);
warnings go to stderr. Exit codes: 0 ok, 2 bad input/schema, 3 estimation
infeasibility, 4 structural infeasibility, 5 no feasible alpha,
6 integration failure, 7 reproduction mismatch.
"""

import argparse
import json
import math
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .certificates import (
    check_corollary1,
    check_theorem1,
    construct_P,
    lyapunov_certificate,
    xi_value,
)
from .errors import (
    DimensionMismatch,
    EmptyRegion,
    InfeasibleSamples,
    NewtonDivergence,
    NlobsError,
    NoFeasibleAlpha,
    NonFiniteState,
    NotPositiveDefiniteP,
    ParseError,
    PreconditionViolated,
    SchemaError,
    StructurallyInfeasible,
    Unbounded,
    UnknownBuiltin,
)
from .regularity import SamplePlan, estimate_regularity, qib_region_radius
from .simulate import error_metrics, simulate_observer, write_csv
from .synthesis import (
    design_observer,
    feasibility_window,
    identity_P_analysis,
    min_gain,
)
from .systems import Region, builtin, parse_system

EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_STRUCTURAL = 4
EXIT_NO_ALPHA = 5
EXIT_INTEGRATION = 6
EXIT_MISMATCH = 7

_EXIT_BY_ERROR = (
    ((StructurallyInfeasible,), EXIT_STRUCTURAL),
    ((NoFeasibleAlpha,), EXIT_NO_ALPHA),
    ((NewtonDivergence, NonFiniteState), EXIT_INTEGRATION),
    ((EmptyRegion, InfeasibleSamples, Unbounded), EXIT_ESTIMATION),
    (
        (
            ParseError,
            SchemaError,
            DimensionMismatch,
            UnknownBuiltin,
            PreconditionViolated,
            NotPositiveDefiniteP,
            NlobsError,
        ),
        EXIT_INPUT,
    ),
)


@dataclass
class RunReport:
    command: str
    inputs: dict
    results: dict
    warnings: list = field(default_factory=list)
    version: str = __version__

    def to_dict(self):
        return {
            "command": self.command,
            "inputs": _jsonable(self.inputs),
            "results": _jsonable(self.results),
            "warnings": list(self.warnings),
            "version": self.version,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _value(v, provenance):
    return {"value": _jsonable(v), "provenance": provenance}


def _print_report(report, as_json):
    if as_json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(_render_human(report))
    for w in report.warnings:
        print(f"warning: {w}", file=_sys.stderr)


def _render_human(report):
    lines = [f"nlobs {report.command} (v{report.version})"]
    for key, val in report.inputs.items():
        lines.append(f"  in  {key} = {_compact(val)}")
    for key, val in report.results.items():
        lines.append(f"  out {key} = {_compact(val)}")
    return "\n".join(lines)


def _compact(val):
    val = _jsonable(val)
    if isinstance(val, dict) and set(val) == {"value", "provenance"}:
        return f"{_compact(val['value'])}  [{val['provenance']}]"
    if isinstance(val, dict):
        return "{" + ", ".join(f"{k}: {_compact(v)}" for k, v in val.items()) + "}"
    if isinstance(val, list):
        return "[" + ", ".join(_compact(v) for v in val) + "]"
    if isinstance(val, float):
        return f"{val:.10g}"
    return str(val)


# --- argument plumbing ----------------------------------------------------

def _add_system_args(sub):
    sub.add_argument("--builtin", help="name of a builtin example system")
    sub.add_argument("--system", help="path of a system JSON file")
    sub.add_argument("--radius", type=float, help="override: ball radius (or box half-width for interval builtins)")
    sub.add_argument(
        "--box",
        type=float,
        nargs="+",
        help="override: box region as lo1 hi1 lo2 hi2 ...",
    )


def _load_system(args):
    if bool(args.builtin) == bool(args.system):
        raise PreconditionViolated("exactly one of --builtin or --system is required")
    if args.builtin:
        sys_ = builtin(args.builtin, radius=args.radius)
        source = {"builtin": args.builtin}
    else:
        try:
            with open(args.system) as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read system file {args.system!r}: {exc}") from exc
        sys_ = parse_system(text)
        source = {"file": args.system}
        if args.radius is not None:
            sys_ = _replace_region(sys_, Region.ball(args.radius, sys_.n))
    if args.box is not None:
        vals = args.box
        if len(vals) != 2 * sys_.n:
            raise PreconditionViolated(
                f"--box needs {2 * sys_.n} values (lo hi per axis), got {len(vals)}"
            )
        lower = vals[0::2]
        upper = vals[1::2]
        sys_ = _replace_region(sys_, Region.box(lower, upper))
    return sys_, source


def _replace_region(sys_, region):
    from dataclasses import replace

    return replace(sys_, region=region)


def _region_dict(region):
    if region.shape == "ball":
        return {"shape": "ball", "r": region.r}
    return {"shape": "box", "lower": list(region.lower), "upper": list(region.upper)}


def _load_design(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read design file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"design file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("", "design file must hold a JSON object")
    out = {}
    for key in ("L", "alpha", "lambda", "rho", "beta", "gamma"):
        if key not in obj:
            raise SchemaError(key, f"design file is missing {key!r}")
        out[key] = obj[key]
    try:
        out["L"] = np.asarray(out["L"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError("L", "L must be a numeric matrix") from exc
    if out["L"].ndim != 2:
        raise SchemaError("L", "L must be a matrix (list of rows)")
    for key in ("alpha", "lambda", "rho", "beta", "gamma"):
        if not isinstance(obj[key], (int, float)) or isinstance(obj[key], bool):
            raise SchemaError(key, f"{key!r} must be a number")
        out[key] = float(obj[key])
    return out


def _witness_dict(w):
    d = {"kind": w.kind, "value": w.value, "x1": w.x1}
    if w.x2 is not None:
        d["x2"] = w.x2
    return d


def _report_dict(cert):
    return {
        "name": cert.name,
        "inequalities": [
            {"label": i.label, "margin": i.margin, "holds": i.holds}
            for i in cert.inequalities
        ],
        "overall": cert.overall,
        "notes": list(cert.notes),
    }


# --- subcommands ----------------------------------------------------------

def _cmd_estimate(args):
    sys_, source = _load_system(args)
    plan = SamplePlan(count=args.points, seed=args.seed, pair_count=args.pairs)
    est = estimate_regularity(sys_, plan=plan, alpha=args.alpha)
    report = RunReport(
        command="estimate",
        inputs={
            **source,
            "region": _region_dict(sys_.region),
            "pairs": args.pairs,
            "points": args.points,
            "seed": args.seed,
            "alpha": args.alpha,
        },
        results={
            "lipschitz": _value(est.lip, "estimated"),
            "one_sided": _value(est.rho, "estimated"),
            "beta": _value(est.beta, "estimated"),
            "gamma": _value(est.gamma, "estimated"),
            "region": _region_dict(est.region),
            "witnesses": {k: _witness_dict(w) for k, w in est.witnesses.items()},
            "method": est.method,
            "certainty": f"lower bounds; no violation search beyond {est.method}",
        },
    )
    if est.beta is None:
        report.warnings.append("inner-bound fit is unbounded at this alpha/rho")
    _print_report(report, args.json)
    return 0


def _cmd_synthesize(args):
    sys_, source = _load_system(args)
    design = design_observer(sys_.A, sys_.C, args.rho, args.beta, args.gamma, args.alpha)
    results = {
        "L": _value(design.L, "closed-form"),
        "alpha": _value(design.alpha, "closed-form" if args.alpha is None else "given"),
        "lambda": _value(design.lam, "closed-form"),
        "xi": _value(design.xi, "closed-form"),
        "sigma_star": _value(design.sigma_star, "closed-form"),
        "window": {
            "lambda_low": design.window.lambda_low,
            "lambda_high": design.window.lambda_high,
            "empty": design.window.empty,
        },
        "margins": {k: _value(v, "closed-form") for k, v in design.margins.items()},
    }
    report = RunReport(
        command="synthesize",
        inputs={
            **source,
            "rho": args.rho,
            "beta": args.beta,
            "gamma": args.gamma,
            "alpha": args.alpha,
        },
        results=results,
    )
    if args.out:
        payload = {
            "L": design.L.tolist(),
            "alpha": design.alpha,
            "lambda": design.lam,
            "rho": design.rho,
            "beta": design.beta,
            "gamma": design.gamma,
        }
        with open(args.out, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        report.results["design_file"] = args.out
    _print_report(report, args.json)
    return 0


def _cmd_analyze(args):
    sys_, source = _load_system(args)
    design = _load_design(args.design)
    gain = design["L"]
    lam = design["lambda"]
    alpha = design["alpha"]
    rho, beta, gamma = design["rho"], design["beta"], design["gamma"]
    xi = xi_value(rho, beta, gamma, alpha)
    results = {}
    warnings = []
    if args.mode in ("certificates", "all"):
        cor1 = check_corollary1(sys_.A, sys_.C, gain, lam, alpha, rho, beta, gamma)
        results["corollary1"] = _report_dict(cor1)
        if sys_.n >= 2 and 0.0 < lam < 1.0:
            p = construct_P(lam, sys_.n)
            m = sys_.A - gain @ sys_.C
            s = m.T @ p + p @ m
            q = -s
            thm1 = check_theorem1(
                sys_.A, sys_.C, gain, p, q, alpha, rho, beta, gamma
            )
            results["theorem1"] = _report_dict(thm1)
            results["lyapunov_scalar"] = _value(
                lyapunov_certificate(sys_.A, sys_.C, gain, alpha, xi, p),
                "closed-form",
            )
        else:
            warnings.append(
                "theorem-level check skipped: needs n >= 2 and lambda in (0, 1)"
            )
    if args.mode in ("identity", "all"):
        idp = identity_P_analysis(sys_.A, sys_.C, gain, rho)
        results["identity_P"] = {
            "sufficient": idp.sufficient,
            "sufficient_margin": idp.sufficient_margin,
            "necessary": idp.necessary,
            "necessary_margin": idp.necessary_margin,
            "shift_feasible": idp.shift_feasible,
            "log_norm": idp.log_norm,
            "max_real_eig": idp.max_real_eig,
            "eig_method": idp.eig_method,
        }
    report = RunReport(
        command="analyze",
        inputs={
            **source,
            "design": args.design,
            "mode": args.mode,
            "lambda": lam,
            "alpha": alpha,
            "rho": rho,
            "beta": beta,
            "gamma": gamma,
        },
        results=results,
        warnings=warnings,
    )
    _print_report(report, args.json)
    return 0


def _cmd_simulate(args):
    if args.h <= 0:
        raise PreconditionViolated(f"--h must be positive, got {args.h}")
    if args.t1 <= 0:
        raise PreconditionViolated(f"--t1 must be positive, got {args.t1}")
    sys_, source = _load_system(args)
    design = _load_design(args.design)
    p = None
    if sys_.n >= 2 and 0.0 < design["lambda"] < 1.0:
        p = construct_P(design["lambda"], sys_.n)
    trace = simulate_observer(
        sys_,
        design["L"],
        x0=args.x0,
        xhat0=args.xhat0,
        t1=args.t1,
        h=args.h,
        method=args.method,
        P=p,
    )
    write_csv(trace, args.out)
    metrics = error_metrics(trace)
    report = RunReport(
        command="simulate",
        inputs={
            **source,
            "design": args.design,
            "x0": list(args.x0),
            "xhat0": list(args.xhat0),
            "t1": args.t1,
            "h": args.h,
            "method": args.method,
        },
        results={
            "trace_file": args.out,
            "samples": int(len(trace.times)),
            "final_error_ratio": _value(metrics.final_ratio, "simulated"),
            "time_to_one_percent": _value(metrics.time_to_one_percent, "simulated"),
            "max_lyapunov_increase": _value(metrics.max_lyapunov_increase, "simulated"),
            "region_exit": trace.region_exit,
        },
        warnings=list(trace.warnings),
    )
    _print_report(report, args.json)
    return 0


_REPRO_RHO, _REPRO_BETA, _REPRO_GAMMA, _REPRO_ALPHA = 0.0, -200.0, -141.0, 70.6
_REPRO_LAMBDA = 0.999892
_REPRO_XI = -199.0


def _cmd_reproduce(args):
    sys_ = builtin("example3")
    a, c = sys_.A, sys_.C
    rows = []

    def row(quantity, value, reference, tol, ok, provenance):
        rows.append(
            {
                "quantity": quantity,
                "value": _jsonable(value),
                "provenance": provenance,
                "reference": _jsonable(reference),
                "tolerance": tol,
                "status": "ok" if ok else "mismatch",
            }
        )

    r = qib_region_radius(_REPRO_BETA, _REPRO_GAMMA)
    row("region_radius", r, 5.9372, 1e-3, abs(r - 5.9372) <= 1e-3, "closed-form")

    gain, sigma_star = min_gain(a, c)
    ref_gain = np.array([[-1.0], [1.0]])
    row(
        "gain_L",
        gain,
        ref_gain,
        1e-12,
        float(np.max(np.abs(gain - ref_gain))) <= 1e-12,
        "closed-form",
    )
    row(
        "sigma_star",
        sigma_star,
        math.sqrt(2.0),
        1e-9,
        abs(sigma_star - math.sqrt(2.0)) <= 1e-9,
        "closed-form",
    )

    window = feasibility_window(
        _REPRO_RHO, _REPRO_BETA, _REPRO_GAMMA, _REPRO_ALPHA, sigma_star
    )
    row(
        "lambda_window_contains_published",
        [window.lambda_low, window.lambda_high],
        _REPRO_LAMBDA,
        0.0,
        window.contains(_REPRO_LAMBDA),
        "closed-form",
    )

    p = construct_P(_REPRO_LAMBDA, 2)
    scal = lyapunov_certificate(a, c, gain, _REPRO_ALPHA, _REPRO_XI, p)
    row("lyapunov_scalar", scal, -0.4187, 1e-3, abs(scal - (-0.4187)) <= 1e-3, "closed-form")

    idp = identity_P_analysis(a, c, gain, _REPRO_RHO)
    row(
        "identity_P_sufficient_fails_while_design_holds",
        {"sufficient": idp.sufficient, "max_real_eig": idp.max_real_eig},
        {"sufficient": False, "unstable_A_minus_LC": True},
        0.0,
        (not idp.sufficient) and idp.max_real_eig > 0.0,
        "closed-form",
    )

    lip = 3.0 * r * r
    row(
        "lipschitz_at_radius_context",
        lip,
        105.75,
        0.05,
        abs(lip - 105.75) <= 0.05,
        "closed-form",
    )
    rows.append(
        {
            "quantity": "lipschitz_context l=1.0324",
            "value": 1.0324,
            "provenance": "literature, not reproduced",
            "reference": 1.0324,
            "tolerance": None,
            "status": "context",
        }
    )

    mismatches = sum(1 for rr in rows if rr["status"] == "mismatch")
    report = RunReport(
        command="reproduce",
        inputs={
            "builtin": "example3",
            "rho": _REPRO_RHO,
            "beta": _REPRO_BETA,
            "gamma": _REPRO_GAMMA,
            "alpha": _REPRO_ALPHA,
        },
        results={"rows": rows, "mismatches": mismatches},
    )
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"nlobs reproduce (v{report.version})")
        widths = (44, 26, 26, 9, 10)
        head = ("quantity", "value", "reference", "tol", "status")
        print("  " + "  ".join(h.ljust(w) for h, w in zip(head, widths)))
        for rr in rows:
            cells = (
                str(rr["quantity"])[:44],
                _compact(rr["value"])[:26],
                _compact(rr["reference"])[:26],
                "" if rr["tolerance"] is None else f"{rr['tolerance']:g}",
                rr["status"],
            )
            print("  " + "  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return EXIT_MISMATCH if mismatches else 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nlobs",
        description="Observer design toolkit for one-sided Lipschitz systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_est = subs.add_parser("estimate", help="estimate regularity constants")
    _add_system_args(p_est)
    p_est.add_argument("--pairs", type=int, default=2000)
    p_est.add_argument("--points", type=int, default=512)
    p_est.add_argument("--seed", type=int, default=42)
    p_est.add_argument("--alpha", type=float, default=1.0)
    p_est.add_argument("--json", action="store_true")
    p_est.set_defaults(func=_cmd_estimate)

    p_syn = subs.add_parser("synthesize", help="design an observer gain")
    _add_system_args(p_syn)
    p_syn.add_argument("--rho", type=float, required=True)
    p_syn.add_argument("--beta", type=float, required=True)
    p_syn.add_argument("--gamma", type=float, required=True)
    p_syn.add_argument("--alpha", type=float)
    p_syn.add_argument("--out", help="write the design JSON here")
    p_syn.add_argument("--json", action="store_true")
    p_syn.set_defaults(func=_cmd_synthesize)

    p_ana = subs.add_parser("analyze", help="check certificates for a design")
    _add_system_args(p_ana)
    p_ana.add_argument("--design", required=True)
    p_ana.add_argument(
        "--mode", choices=("certificates", "identity", "all"), default="all"
    )
    p_ana.add_argument("--json", action="store_true")
    p_ana.set_defaults(func=_cmd_analyze)

    p_sim = subs.add_parser("simulate", help="simulate plant and observer")
    _add_system_args(p_sim)
    p_sim.add_argument("--design", required=True)
    p_sim.add_argument("--x0", type=float, nargs="+", required=True)
    p_sim.add_argument("--xhat0", type=float, nargs="+", required=True)
    p_sim.add_argument("--t1", type=float, default=30.0)
    p_sim.add_argument("--h", type=float, default=1e-3)
    p_sim.add_argument("--method", choices=("rk4", "implicit_euler"), default="rk4")
    p_sim.add_argument("--out", default="trace.csv")
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=_cmd_simulate)

    p_rep = subs.add_parser("reproduce", help="re-derive the worked example numbers")
    p_rep.add_argument("--json", action="store_true")
    p_rep.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NlobsError as exc:
        for classes, code in _EXIT_BY_ERROR:
            if isinstance(exc, classes):
                print(f"error: {exc}", file=_sys.stderr)
                return code
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    _sys.exit(main())
