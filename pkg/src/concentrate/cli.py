"""Command-line front end.

Exit status: 0 when every checked inequality holds, 2 when a violation was
verified (the report carries the witness), 1 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, entropy, herbst, hopf_lax, kernels, measure, regularity
from .cost import CostPair, dlstar, h_array, lstar
from .errors import (DensityUnavailableError, DivergenceError, FitError, GradientRestrictionError, SpecError)

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
SPEC_DIR = Path(__file__).parent / "data" / "specs"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def versions() -> dict:
    return {"concentrate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": kernels.BACKEND}


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CONCENTRATE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CONCENTRATE_SEED must be an integer, got {env!r}") from None


def _load_spec(path: str) -> measure.MeasureSpec:
    p = Path(path)
    if not p.exists() and (SPEC_DIR / path).exists():
        p = SPEC_DIR / path
    if not p.exists() and (SPEC_DIR / f"{path}.json").exists():
        p = SPEC_DIR / f"{path}.json"
    if not p.exists():
        raise UsageError(f"spec file not found: {path}")
    return measure.load_spec(p)


def _cost(args) -> CostPair:
    if args.beta == 0:
        return CostPair(0.0, getattr(args, "delta", None))
    if getattr(args, "delta", None) is not None:
        raise UsageError("--delta only applies to --beta 0")
    return CostPair(args.beta)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def _axis(text: str) -> hopf_lax.Axis:
    vals = _floats(text)
    if len(vals) != 3:
        raise UsageError("--grid takes min,max,count")
    return hopf_lax.Axis(vals[0], vals[1], int(vals[2]))


def _sigma_pow(args) -> float:
    if args.sigma_pow is not None:
        return args.sigma_pow
    if args.sigma is not None:
        return args.sigma ** (args.beta + 1)
    raise UsageError("give --sigma or --sigma-pow")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# subcommands; each returns (exit status, result dict, optional CSV rows)


def cmd_conjugate(args):
    cost = _cost(args)
    if args.t is not None:
        value = lstar(cost, args.t)
        print(f"{value:.15g}")
        return EXIT_OK, {"t": args.t, "lstar": value, "dlstar": dlstar(cost, args.t)}, None
    t = np.linspace(args.t_min, args.t_max, args.points)
    hs = h_array(cost, t)
    rows = [["t", "lstar", "dlstar", "H"]]
    for ti, li, di, hi, mi in zip(t, lstar(cost, t), dlstar(cost, t), hs.data, np.ma.getmaskarray(hs)):
        rows.append([ti, li, di, "inf" if mi else hi])
    return EXIT_OK, {"points": int(args.points)}, rows


def _m_values(args) -> list[float]:
    if args.m_list is not None:
        if args.m is not None:
            raise UsageError("give --m or --m-list, not both")
        return _floats(args.m_list)
    if args.m is None:
        raise UsageError("give --m or --m-list")
    return [args.m]


def _sweep(args, one):
    """Run ``one(m)`` for every requested m; a single m reports unwrapped."""
    results = [one(m) for m in _m_values(args)]
    status = EXIT_VIOLATION if any(s != EXIT_OK for s, _ in results) else EXIT_OK
    if args.m_list is None:
        return status, results[0][1], None
    return status, {"sweep": [r for _, r in results]}, None


def cmd_check_tail(args):
    spec = _load_spec(args.spec)
    cfg = regularity.GridConfig(points=args.grid_points)
    sigma_pow = _sigma_pow(args)

    def one(m):
        cert = regularity.check_membership(spec, args.beta, m, sigma_pow, cfg)
        return (EXIT_OK if cert.certified else EXIT_VIOLATION), cert.to_dict()

    return _sweep(args, one)


def cmd_estimate_sigma(args):
    spec = _load_spec(args.spec)
    cfg = regularity.GridConfig(points=args.grid_points)

    def one(m):
        sp = regularity.estimate_sigma(spec, args.beta, m, cfg)
        out = {"m": m, "sigma_pow": sp, "sigma": sp ** (1 / (args.beta + 1)) if math.isfinite(sp) else math.inf}
        if not math.isfinite(sp):
            out["reason"] = "no finite sigma: nu-tail infinite"
            return EXIT_VIOLATION, out
        return EXIT_OK, out

    return _sweep(args, one)


def cmd_shift_check(args):
    spec = _load_spec(args.spec)
    if args.m is None:
        raise UsageError("shift-check needs --m")
    if args.h is not None and args.alpha is not None:
        cond = regularity.ShiftCondition(args.h, args.alpha, args.m)
    elif args.sigma_pow is not None or args.sigma is not None:
        cond = regularity.convert_conditions("i_to_ii", args.beta, args.m, sigma_pow=_sigma_pow(args))
    else:
        raise UsageError("give --h and --alpha, or --sigma/--sigma-pow to convert")
    res = regularity.check_shift_condition(spec, args.beta, cond, regularity.GridConfig(points=args.grid_points))
    out = {"h": cond.h, "alpha": cond.alpha, "m": cond.m, **res.to_dict()}
    return (EXIT_OK if res.holds else EXIT_VIOLATION), out, None


def _bound_from_args(args) -> herbst.ConcentrationBound:
    if args.beta == 0:
        if args.binf is None or args.m_plus_3sigma is None:
            raise UsageError("beta = 0 bounds need --binf and --m-plus-3sigma")
        mode = "lipschitz" if args.lipschitz else "beta0"
        return herbst.ConcentrationBound(0.0, args.C, mode, args.A, Binf=args.binf, m_plus_3sigma=args.m_plus_3sigma)
    if args.B is None:
        raise UsageError("beta > 0 bounds need --B")
    return herbst.ConcentrationBound(args.beta, args.C, "lipschitz" if args.lipschitz else "smooth", args.A, B=args.B)


def cmd_herbst_bound(args):
    bound = _bound_from_args(args)
    t = np.linspace(0.0, args.t_max, args.points)
    if args.spec is None:
        rows = [["t", "bound"]] + [[a, b] for a, b in zip(t, herbst.tail_bound(bound, t))]
        return EXIT_OK, {"bound": bound.__dict__}, rows
    spec = _load_spec(args.spec)
    phi = entropy.make_test_function(args.function, args.n, args.amplitude)
    x = entropy.draw(spec, args.n, args.N, _seed(args), workers=args.workers)
    cmp = herbst.empirical_tail_compare(phi.value(x), bound, t)
    rows = [["t", "bound", "empirical_tail", "band_halfwidth"]]
    rows += [list(r) for r in zip(cmp.t, cmp.bound, cmp.empirical, cmp.band)]
    status = EXIT_OK if not cmp.violations else EXIT_VIOLATION
    return status, {"bound": bound.__dict__, "violations": cmp.violations}, rows


def cmd_mc_lsi(args):
    spec = _load_spec(args.spec)
    seed = _seed(args)
    limit = None
    if args.beta == 0:
        if args.m is None or args.sigma is None:
            raise UsageError("beta = 0 needs --m and --sigma for the gradient restriction")
        limit = entropy.gradient_limit(args.m, args.sigma)
    amps = _floats(args.amplitudes)
    phi = entropy.make_test_function(args.function, 1)
    fit = entropy.fit_constant(spec, phi, args.beta, amps, args.N, seed, limit, workers=args.workers)
    C = fit.C_hat if args.C is None else args.C
    sweep = entropy.dimension_sweep(spec, phi, args.beta, C, _ints(args.n_list), amps, args.N, seed, limit,
                                    workers=args.workers)
    reports = [{"n": n, "holds": ok, **rep.to_dict()} for n, rep, ok in sweep]
    rows = [["n", "function", "lhs", "lhs_halfwidth", "rhs", "rhs_halfwidth", "ratio", "holds"]]
    for n, rep, ok in sweep:
        rows.append([n, rep.function, rep.lhs_entropy.value, rep.lhs_entropy.halfwidth,
                     rep.rhs_functional.value, rep.rhs_functional.halfwidth, rep.ratio, int(ok)])
    bad = [r for r in reports if not r["holds"]]
    out = {"C_hat": fit.C_hat, "C_used": C, "reports": reports}
    if bad:
        out["witness"] = bad[0]
    return (EXIT_VIOLATION if bad else EXIT_OK), out, rows


def _grid_input(args) -> hopf_lax.GridFunction:
    if args.input:
        return hopf_lax.GridFunction.from_csv(args.input)
    axis = _axis(args.grid)
    fns = hopf_lax.catalog_1d(axis, args.amplitude)
    fns["linear"] = hopf_lax.GridFunction.from_function(lambda x: args.amplitude * x, [axis])
    if args.function not in fns:
        raise UsageError(f"unknown grid function {args.function!r}; choose from {sorted(fns)}")
    return fns[args.function]


def cmd_infconv(args):
    f = _grid_input(args)
    q = hopf_lax.infconv_nd(f, args.t, _cost(args))
    if args.output_grid:
        q.to_csv(args.output_grid)
    return EXIT_OK, {"boundary_active_points": int(q.boundary_active.sum()), "min": float(q.values.min()),
                     "max": float(q.values.max()), "output_grid": args.output_grid}, None


def cmd_hj_check(args):
    f = _grid_input(args)
    rep = hopf_lax.hj_residual(f, _floats(args.t_list), _cost(args))
    out = rep.to_dict()
    if args.tolerance is not None:
        out["tolerance"] = args.tolerance
        if rep.max_residual > args.tolerance:
            return EXIT_VIOLATION, out, None
    return EXIT_OK, out, None


def cmd_hypercontract(args):
    spec = _load_spec(args.spec)
    f = _grid_input(args)
    delta = args.delta if args.beta == 0 else None
    sched = hopf_lax.Schedule(args.beta, args.B, args.t0, delta, prefactor=args.prefactor)
    rep = hopf_lax.hypercontractivity_check(spec, f, sched, _floats(args.t_list))
    out = {"k0": sched.k(0.0), "k_t0": sched.k(args.t0), **rep.to_dict()}
    return (EXIT_OK if rep.min_margin >= -args.tolerance else EXIT_VIOLATION), out, None


def cmd_dual_transport(args):
    spec = _load_spec(args.spec)
    f = _grid_input(args)
    value = hopf_lax.dual_transport_check(spec, f, args.b, _cost(args))
    return (EXIT_OK if value <= 1 + args.tolerance else EXIT_VIOLATION), {"lhs": value}, None


def _discrete(text: str) -> hopf_lax.DiscreteMeasure:
    atoms = []
    for part in text.split(","):
        try:
            x, p = part.split(":")
            atoms.append((float(x), float(p)))
        except ValueError:
            raise UsageError(f"atoms are written x:mass, got {part!r}") from None
    return hopf_lax.DiscreteMeasure(tuple(atoms))


def cmd_weak_transport(args):
    mu, nu = _discrete(args.mu), _discrete(args.nu)
    cost = _cost(args)
    res = hopf_lax.weak_transport_discrete(mu, nu, cost, seed=_seed(args))
    H = hopf_lax.relative_entropy_discrete(nu, mu)
    b = args.b if args.b is not None else hopf_lax.fit_dual_constant(mu, cost).b
    holds = hopf_lax.transport_inequality_holds(res.value, b, H)
    out = {"transport": res.to_dict(), "relative_entropy": "inf" if H is hopf_lax.INF else H, "b": b, "holds": holds}
    return (EXIT_OK if holds else EXIT_VIOLATION), out, None


def cmd_report(args):
    """Standard bundle over the bundled specs; every part is written to the output directory."""
    bundle = [
        ["check-tail", "--spec", "symmetric_exponential", "--beta", "0", "--m", "1", "--sigma", "1"],
        ["check-tail", "--spec", "weibull_1_5", "--beta", "0.5", "--m", "1", "--sigma-pow", "1.5"],
        ["check-tail", "--spec", "cauchy_table", "--beta", "0", "--m", "1", "--sigma", "1"],
        ["estimate-sigma", "--spec", "symmetric_exponential", "--beta", "0", "--m", "1"],
        ["herbst-bound", "--beta", "1", "--C", "1", "--A", "1", "--B", "1", "--t-max", "4", "--points", "5"],
        ["hj-check", "--beta", "0.5", "--function", "linear", "--amplitude", "0.5", "--grid=-4,4,801",
         "--t-list", "0.5,1", "--tolerance", "1e-8"],
        ["weak-transport", "--beta", "1", "--mu", "0:0.5,1:0.5", "--nu", "0:1"],
    ]
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, argv in enumerate(bundle):
        target = outdir / f"{i:02d}_{argv[0]}.json"
        status = main(argv + ["--seed", str(_seed(args)), "--format", "json", "--output", str(target)],
                      quiet=True)
        summary.append({"argv": argv, "status": status, "report": target.name})
    # refuting the heavy-tailed spec is the expected outcome of that entry
    expected = {2: EXIT_VIOLATION}
    unexpected = [s for i, s in enumerate(summary) if s["status"] != expected.get(i, EXIT_OK)]
    status = EXIT_OK if not unexpected else (EXIT_ERROR if any(s["status"] == EXIT_ERROR for s in unexpected)
                                            else EXIT_VIOLATION)
    return status, {"entries": summary, "unexpected": unexpected}, None


def cmd_rerun(args):
    obj = json.loads(Path(args.report).read_text())
    argv = obj.get("config", {}).get("argv")
    if not argv:
        raise UsageError(f"{args.report} has no embedded argv")
    cleaned, skip = [], False
    for tok in argv:
        if skip:
            skip = False
        elif tok == "--output":
            skip = True
        elif not tok.startswith("--output="):
            cleaned.append(tok)
    extra = ["--output", args.output] if args.output else []
    status = main(cleaned + extra)
    return status, None, None


# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--output", help="write the report (JSON) or table (CSV) here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (fallback: $CONCENTRATE_SEED, then 0)")
    p.add_argument("--workers", type=int, default=1)


def _beta(p, delta=True):
    p.add_argument("--beta", type=float, required=True)
    if delta:
        p.add_argument("--delta", type=float, default=None, help="scale of the beta = 0 cost (default 1)")


def _tail_args(p):
    p.add_argument("--spec", required=True, help="measure spec JSON (path or bundled name)")
    _beta(p, delta=False)
    p.add_argument("--m", type=float)
    p.add_argument("--m-list", help="comma-separated thresholds to sweep")
    p.add_argument("--sigma", type=float)
    p.add_argument("--sigma-pow", type=float)
    p.add_argument("--grid-points", type=int, default=4096)


def _grid_args(p, default_function="abs"):
    p.add_argument("--input", help="grid function CSV with a '# {\"axes\": ...}' header")
    p.add_argument("--function", default=default_function)
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--grid", default="-40,40,80001", help="min,max,count")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="concentrate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("conjugate", help="L*, its derivative and H (single value or table)")
    _beta(p)
    p.add_argument("--t", type=float)
    p.add_argument("--t-min", type=float, default=-30.0)
    p.add_argument("--t-max", type=float, default=30.0)
    p.add_argument("--points", type=int, default=601)
    _common(p)
    p.set_defaults(func=cmd_conjugate)

    p = sub.add_parser("check-tail", help="certify or refute membership in the tail class")
    _tail_args(p)
    _common(p)
    p.set_defaults(func=cmd_check_tail)

    p = sub.add_parser("estimate-sigma", help="smallest certified sigma^(beta+1)")
    _tail_args(p)
    _common(p)
    p.set_defaults(func=cmd_estimate_sigma)

    p = sub.add_parser("shift-check", help="check the shift form of the tail condition")
    _tail_args(p)
    p.add_argument("--h", type=float)
    p.add_argument("--alpha", type=float)
    _common(p)
    p.set_defaults(func=cmd_shift_check)

    p = sub.add_parser("herbst-bound", help="deviation bound table, optionally against samples")
    _beta(p, delta=False)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--B", type=float)
    p.add_argument("--binf", type=float)
    p.add_argument("--m-plus-3sigma", type=float)
    p.add_argument("--lipschitz", action="store_true", help="A and B are Lipschitz constants")
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=51)
    p.add_argument("--spec")
    p.add_argument("--function", default="linear", choices=entropy.CATALOG)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--N", type=int, default=100_000)
    _common(p)
    p.set_defaults(func=cmd_herbst_bound)

    p = sub.add_parser("mc-lsi", help="fit C at n = 1 and check the inequality across dimensions")
    p.add_argument("--spec", required=True)
    _beta(p, delta=False)
    p.add_argument("--function", default="linear", choices=entropy.CATALOG)
    p.add_argument("--amplitudes", default="0.25,0.5,1")
    p.add_argument("--n-list", default="2,4,16")
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--m", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--C", type=float, help="use this constant instead of the fitted one")
    _common(p)
    p.set_defaults(func=cmd_mc_lsi)

    p = sub.add_parser("infconv", help="grid Hopf-Lax step")
    _beta(p)
    _grid_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--output-grid", help="write Q_t f as grid CSV")
    _common(p)
    p.set_defaults(func=cmd_infconv)

    p = sub.add_parser("hj-check", help="Hamilton-Jacobi residual of the grid semigroup")
    _beta(p)
    _grid_args(p)
    p.add_argument("--t-list", default="0.5,1")
    p.add_argument("--tolerance", type=float)
    _common(p)
    p.set_defaults(func=cmd_hj_check)

    p = sub.add_parser("hypercontract", help="margins of the hypercontractive inequality")
    p.add_argument("--spec", required=True)
    _beta(p)
    _grid_args(p)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-list", default="0.1,0.5,1,2")
    p.add_argument("--prefactor", action="store_true", help="beta = 0: multiply k(t) by 1/B")
    p.add_argument("--tolerance", type=float, default=1e-6)
    _common(p)
    p.set_defaults(func=cmd_hypercontract)

    p = sub.add_parser("dual-transport", help="left-hand side of the dual transport inequality")
    p.add_argument("--spec", required=True)
    _beta(p)
    _grid_args(p)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=1e-6)
    _common(p)
    p.set_defaults(func=cmd_dual_transport)

    p = sub.add_parser("weak-transport", help="weak transport cost between small discrete measures")
    _beta(p)
    p.add_argument("--mu", required=True, help="atoms as x:mass,x:mass")
    p.add_argument("--nu", required=True)
    p.add_argument("--b", type=float, help="constant for the transport inequality (default: fitted)")
    _common(p)
    p.set_defaults(func=cmd_weak_transport)

    p = sub.add_parser("report", help="run the standard bundle")
    p.add_argument("--output-dir", required=True)
    _common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="re-run a report from its embedded configuration")
    p.add_argument("report")
    p.add_argument("--output")
    p.set_defaults(func=cmd_rerun, seed=None, format=None)
    return parser


def _write_csv(rows, fh):
    for row in rows:
        fh.write(",".join(f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")


def _emit(args, argv, status, result, rows, quiet):
    if result is None:
        return
    fmt = args.format or ("csv" if rows is not None and args.command in ("conjugate", "herbst-bound") else "json")
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config["argv"] = list(argv)
    report = {"command": args.command, "status": status, "config": config,
              "seed": getattr(args, "seed_used", None), "versions": versions(), "result": result}
    if fmt == "csv" and rows is not None:
        if args.output:
            with open(args.output, "w") as fh:
                _write_csv(rows, fh)
            meta = Path(args.output).with_suffix(".report.json")
            meta.write_text(json.dumps(_clean(report), indent=2) + "\n")
        elif not quiet:
            _write_csv(rows, sys.stdout)
        return
    if rows is not None:
        report["table"] = rows
    text = json.dumps(_clean(report), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    elif not quiet and not (args.command == "conjugate" and args.t is not None):
        sys.stdout.write(text)


def main(argv=None, quiet: bool = False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "workers") and args.workers < 1:
            raise UsageError("--workers must be at least 1")
        if hasattr(args, "seed") and args.command != "rerun":
            args.seed_used = _seed(args)
            args.seed = args.seed_used
        status, result, rows = args.func(args)
        _emit(args, argv, status, result, rows, quiet)
        return status
    except UsageError as exc:
        print(f"concentrate: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SpecError, OSError, ValueError, DensityUnavailableError, GradientRestrictionError,
            FitError, DivergenceError) as exc:
        print(f"concentrate: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
