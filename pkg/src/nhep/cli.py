"""Command-line front end: ``nhep simulate|stability|verify|sweep``.

Exit status: 0 success, 1 verification failure, 2 input error.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import runs
from .scenario import ScenarioError, load_scenario, parse_equilibrium

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT = 2


def _fmt(x):
    return format(float(x), ".10g")


def _fmt_complex(z):
    z = complex(z)
    if z.imag == 0:
        return _fmt(z.real)
    return f"{_fmt(z.real)}{'+' if z.imag >= 0 else '-'}{_fmt(abs(z.imag))}j"


def _apply_overrides(sc, args):
    if getattr(args, "dt", None) is not None:
        if args.dt <= 0:
            raise ScenarioError("--dt must be positive")
        sc.integrator["dt"] = args.dt
    if getattr(args, "t_end", None) is not None:
        if args.t_end <= 0:
            raise ScenarioError("--t-end must be positive")
        sc.integrator["t_end"] = args.t_end
    return sc


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_simulate(args):
    sc = _apply_overrides(load_scenario(args.scenario), args)
    summary = runs.simulate(sc)
    targets = [dict(o) for o in sc.outputs]
    if args.out:
        targets = [{"path": args.out, "columns": targets[0].get("columns") if targets else None}]
    for target in targets:
        cols, rows = runs.select_columns(summary.columns, summary.rows, target.get("columns"))
        runs.write_csv(target["path"], cols, rows)
    lines = [f"model: {sc.model}", f"steps: {summary.steps}", f"runtime_s: {summary.runtime:.3f}"]
    lines.append("fall_time: " + (_fmt(summary.event_time) if summary.event_time is not None else "none"))
    if summary.min_gamma3 is not None:
        lines.append(f"min_Gamma3: {_fmt(summary.min_gamma3)}")
    for name, d in summary.drifts.items():
        lines.append(f"drift {name}: abs={d['absolute']:.3e} rel={d['relative']:.3e}")
    lines.append("final: " + json.dumps({k: float(v) for k, v in summary.final_state.items()}))
    for target in targets:
        lines.append(f"wrote: {target['path']}")
    _say(args, *lines)
    return EXIT_OK


def _equilibrium_from_args(sc, args):
    if args.equilibrium is None:
        if sc.equilibrium is None:
            raise ScenarioError("no equilibrium given: use --equilibrium or an 'equilibrium' block")
        return sc.equilibrium
    section = {"kind": args.equilibrium}
    if args.Y0 is not None:
        section["Y0"] = args.Y0
    if args.Omega0 is not None:
        section["Omega0"] = args.Omega0
    if args.zeta is not None:
        section["zeta"] = args.zeta
    if args.multipliers is not None:
        section["multipliers"] = args.multipliers
    return parse_equilibrium(section)


def cmd_stability(args):
    sc = load_scenario(args.scenario)
    eq = _equilibrium_from_args(sc, args)
    res = runs.stability(sc, eq)
    cert = res["certificate"]
    ec = "stable (energy-Casimir)" if cert.ec_verdict == "stable" else cert.ec_verdict
    lines = [
        f"equilibrium: {res['report'].kind} zeta={[float(x) for x in res['report'].zeta_eq]}",
        f"residual: {res['report'].residual:.3e}",
        "eigenvalues: " + ", ".join(_fmt_complex(z) for z in cert.eigenvalues),
        f"linear verdict: {cert.linear_verdict}",
        "multipliers: " + ", ".join(_fmt(c) for c in cert.ec_multipliers),
        "restricted Hessian eigenvalues: " + ", ".join(_fmt(x) for x in cert.restricted_eigenvalues),
        f"energy-Casimir verdict: {ec}",
    ]
    for name, value in res["thresholds"].items():
        lines.append(f"{name}: {_fmt(value)}")
    for note in res["notes"]:
        lines.append(f"note: {note}")
    _say(args, *lines)
    return EXIT_OK


def cmd_verify(args):
    sc = _apply_overrides(load_scenario(args.scenario), args)
    checks = runs.verify(sc)
    ok = all(c.passed for c in checks)
    width = max(len(c.name) for c in checks)
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.value:.3e} <= {c.threshold:.0e}" for c in checks]
    lines.append(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    _say(args, *lines)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_sweep(args):
    sc = load_scenario(args.scenario)
    if args.num < 1:
        raise ScenarioError("--num must be at least 1")
    if args.num > 1 and args.start == args.stop:
        raise ScenarioError("empty range: --start equals --stop")
    grid = np.linspace(args.start, args.stop, args.num)
    doc = sc.to_dict()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(runs.sweep_point, [doc] * len(grid), [args.parameter] * len(grid), grid.tolist()))
    else:
        rows = [runs.sweep_point(doc, args.parameter, float(v)) for v in grid]
    threshold = runs.sweep_threshold(sc, args.parameter)
    columns = [args.parameter, "ec_verdict", "linear_verdict", "max_real_eig", "restricted_min", "restricted_max", "threshold"]
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        out.write(",".join(columns) + "\r\n")
        for r in rows:
            vals = [format(r["value"], ".17g"), r["ec_verdict"], r["linear_verdict"]]
            vals += [format(r[k], ".17g") for k in ("max_real_eig", "restricted_min", "restricted_max")]
            vals.append(format(threshold, ".17g"))
            out.write(",".join(vals) + "\r\n")
    finally:
        if args.out:
            out.close()
    if not args.quiet:
        brackets = runs.transitions(rows)
        # keep stdout pure CSV when no --out is given
        stream = sys.stdout if args.out else sys.stderr
        print(f"threshold: {_fmt(threshold)}", file=stream)
        print("transitions: " + (", ".join(f"[{_fmt(a)}, {_fmt(b)}]" for a, b in brackets) or "none"), file=stream)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nhep", description="Nonholonomic skate simulation and stability toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, integrator=True):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--quiet", action="store_true", help="suppress the summary")
        if integrator:
            p.add_argument("--dt", type=float, help="override integrator step")
            p.add_argument("--t-end", dest="t_end", type=float, help="override horizon")

    p = sub.add_parser("simulate", help="integrate a scenario and write CSV")
    common(p)
    p.add_argument("--out", help="CSV path (overrides the scenario outputs)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="linearization and energy-Casimir certificate")
    common(p, integrator=False)
    p.add_argument("--equilibrium", choices=["sliding", "spinning", "custom"])
    p.add_argument("--Y0", type=float)
    p.add_argument("--Omega0", type=float)
    p.add_argument("--zeta", type=float, nargs=5)
    p.add_argument("--multipliers", type=float, nargs=3)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("verify", help="run the consistency suite for a scenario")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="certificate verdicts over a parameter grid")
    common(p, integrator=False)
    p.add_argument("--parameter", required=True, choices=list(runs.SWEEP_PARAMETERS))
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--num", type=int, default=101)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def _join_negative_values(argv):
    """Rewrite ``--opt -2e-5`` as ``--opt=-2e-5``; argparse mistakes it for a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            try:
                float(argv[i + 1])
            except ValueError:
                pass
            else:
                out.append(f"{tok}={argv[i + 1]}")
                i += 2
                continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
