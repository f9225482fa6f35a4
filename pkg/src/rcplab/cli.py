"""Command-line front end.

Subcommands: simulate | sweep | critical | crossing | blocks | bounds |
verify.  Results go to CSV (probabilities with 6 significant digits,
times and rates with 9); report-style subcommands also render a PNG
figure next to the CSV unless --no-figures is given.

Exit codes: 0 success, 2 configuration error, 3 verify assertion outside
tolerance, 4 runtime error.

A config file (--config) holds `key = value` lines with `#` comments;
keys are the long option names of the chosen subcommand.  Command-line
flags override config values, which override built-in defaults.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import crossings, engine, estimators, figures, renorm, verify
from .errors import RcplabError
from .laws import parse_law
from .streams import replica_seeds

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STATISTICAL = 3
EXIT_RUNTIME = 4


def fmt_prob(x) -> str:
    return f"{float(x):.6g}"


def fmt_time(x) -> str:
    return f"{float(x):.9g}"


def _write_csv(path, header, rows, formats):
    """formats: one of 'prob'|'time'|'int'|'str' per column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            out = []
            for v, kind in zip(row, formats):
                if v is None or (isinstance(v, float) and math.isnan(v)):
                    out.append("")
                elif kind == "prob":
                    out.append(fmt_prob(v))
                elif kind == "time":
                    out.append(fmt_time(v))
                elif kind == "int":
                    out.append(str(int(v)))
                else:
                    out.append(str(v))
            w.writerow(out)
    return path


def _default_workers() -> int:
    env = os.environ.get("RCPLAB_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parse_grid(text) -> list:
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _parse_sites(text) -> list:
    return [int(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _add_common(p, n_default=1000):
    p.add_argument("--law", default="exp(1)", help="interarrival law, e.g. weibull(0.7,1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=n_default, help="replica count")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: RCPLAB_WORKERS or all cores)")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--no-figures", action="store_true",
                   help="suppress the PNG rendered next to the CSV")
    p.add_argument("--config", default=None, help="key = value config file")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="rcplab",
        description="Monte Carlo laboratory for the renewal contact process",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    subparsers = {}

    p = sub.add_parser("simulate", help="replicated extinction runs")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--L", type=int, default=50)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--tau", default="zero", help="zero | stationary | uniform:a")
    p.add_argument("--initial", default="0", help="comma-separated infected sites")
    p.add_argument("--method", default="auto", choices=["auto", "direct", "graphical"])
    p.add_argument("--trajectory", default=None,
                   help="also write one replica's trajectory CSV here")
    p.add_argument("--traj-grid", type=int, default=0,
                   help="resample the trajectory onto this many uniform times")
    subparsers["simulate"] = p

    p = sub.add_parser("sweep", help="coupled survival curve over a rate grid")
    _add_common(p, n_default=500)
    p.add_argument("--lambdas", required=True, help="comma-separated increasing rates")
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--tau", default="zero")
    p.add_argument("--initial", default="0")
    subparsers["sweep"] = p

    p = sub.add_parser("critical", help="pseudo-critical rate by coupled bisection")
    _add_common(p, n_default=2000)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--target", type=float, default=0.5)
    p.add_argument("--bracket", required=True, help="lo,hi")
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--tau", default="zero")
    p.add_argument("--initial", default="0")
    subparsers["critical"] = p

    p = sub.add_parser("crossing", help="box-crossing probability on a time grid")
    _add_common(p, n_default=10000)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--kind", required=True, choices=["horizontal", "vertical"])
    p.add_argument("--scheme", required=True, choices=["bounded", "dfr"])
    p.add_argument("--b", type=float, default=None, help="support bound (bounded scheme)")
    p.add_argument("--t-grid", dest="t_grid", default=None, help="comma-separated base times")
    p.add_argument("--tau", default="zero")
    p.add_argument("--method", default="auto", choices=["auto", "direct", "engine"])
    subparsers["crossing"] = p

    p = sub.add_parser("blocks", help="block field dump or dependency report")
    _add_common(p, n_default=200)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--scheme", default="bounded", choices=["bounded", "dfr"])
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--tau", default="zero")
    p.add_argument("--sampler", default="auto", choices=["auto", "shared", "boxwise"])
    p.add_argument("--report", action="store_true",
                   help="emit marginal/dependency report over --n replicas")
    subparsers["blocks"] = p

    p = sub.add_parser("bounds", help="closed-form constructive thresholds")
    p.add_argument("formula", choices=[
        "lambda-h", "lambda-v-bounded", "lambda-v-dfr", "a0-bounded", "a0-dfr",
    ])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--u1", type=float, default=None)
    p.add_argument("--u0", type=float, default=None)
    p.add_argument("--K0", type=int, default=None)
    p.add_argument("--w0", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    subparsers["bounds"] = p

    p = sub.add_parser("verify", help="quantitative verification suite")
    _add_common(p, n_default=20000)
    p.add_argument("check", choices=sorted(verify.CHECKS) + ["all"])
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--scheme", default="bounded", choices=["bounded", "dfr"])
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--w", type=float, default=None, help="single gap width for dfr-gap")
    p.add_argument("--p0", type=float, default=0.1)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--L", type=int, default=50)
    p.add_argument("--T", type=float, default=None)
    subparsers["verify"] = p

    return ap, subparsers


def _load_config(path) -> dict:
    cfg = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            cfg[key.strip()] = val.strip()
    return cfg


def _apply_config(subparser, cfg: dict):
    """Convert config strings with each option's own type and install them
    as defaults, so explicit flags still win."""
    by_name = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_name[opt[2:]] = action
    defaults = {}
    for key, raw in cfg.items():
        action = by_name.get(key)
        if action is None:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            defaults[action.dest] = action.type(raw)
        else:
            defaults[action.dest] = raw
    subparser.set_defaults(**defaults)


def _out_path(args, cmd) -> Path:
    return Path(args.out) if args.out else Path(f"rcplab_{cmd}.csv")


def _maybe_figure(args, render, *render_args) -> None:
    if getattr(args, "no_figures", False):
        return
    png = _out_path(args, args.cmd).with_suffix(".png")
    render(*render_args, png)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    law = parse_law(args.law)
    initial = _parse_sites(args.initial)
    survived, ext = estimators.extinction_times(
        law, args.lam, args.L, args.T, initial=initial, tau_policy=args.tau,
        n=args.n, seed=args.seed, workers=args.workers, method=args.method,
    )
    rows = [
        (i, int(survived[i]), None if survived[i] else float(ext[i]))
        for i in range(args.n)
    ]
    out = _write_csv(
        _out_path(args, "simulate"),
        ("replica", "survived", "extinction_time"),
        rows, ("int", "int", "time"),
    )
    k = int(survived.sum())
    print(f"simulate law={args.law} lambda={fmt_time(args.lam)} L={args.L} "
          f"T={fmt_time(args.T)}: survival {k}/{args.n} -> {out}")
    _maybe_figure(args, figures.extinction_figure, ext, args.n)
    if args.trajectory:
        sample_seed = int(replica_seeds(args.seed, "cli-trajectory", 1)[0])
        outcome = engine.simulate(
            law, args.lam, args.L, args.T, initial, tau_policy=args.tau,
            seed=sample_seed, record_snapshots=True,
        )
        snaps = outcome.snapshots
        if args.traj_grid > 0:
            snaps = engine.resample_trajectory(
                snaps, np.linspace(0.0, args.T, args.traj_grid)
            )
        _write_csv(
            Path(args.trajectory),
            ("time", "infected_count", "leftmost", "rightmost"),
            snaps, ("time", "int", "int", "int"),
        )
        if not args.no_figures:
            figures.trajectory_figure(
                outcome.snapshots, Path(args.trajectory).with_suffix(".png"),
                title=f"{args.law} lambda={args.lam:g}",
            )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    law = parse_law(args.law)
    sweep = estimators.lambda_sweep(
        law, _parse_grid(args.lambdas), args.L, args.T,
        initial=_parse_sites(args.initial), tau_policy=args.tau,
        n=args.n, seed=args.seed, workers=args.workers,
    )
    out = _write_csv(
        _out_path(args, "sweep"), sweep.CSV_HEADER, sweep.csv_rows(),
        ("str", "int", "time", "str", "str", "int", "int", "time", "prob", "prob"),
    )
    print(f"sweep law={args.law}: {len(sweep.lambdas)} rates, survival "
          f"{fmt_prob(sweep.estimates[0])}..{fmt_prob(sweep.estimates[-1])} -> {out}")
    _maybe_figure(args, figures.sweep_figure, sweep)
    return EXIT_OK


def _cmd_critical(args) -> int:
    law = parse_law(args.law)
    bracket = _parse_grid(args.bracket)
    if len(bracket) != 2:
        raise ValueError("--bracket needs exactly two rates: lo,hi")
    res = estimators.pseudo_critical(
        law, args.L, args.T, args.target, bracket, args.tol,
        n=args.n, initial=_parse_sites(args.initial), tau_policy=args.tau,
        seed=args.seed, workers=args.workers,
    )
    out = _write_csv(
        _out_path(args, "critical"), res.CSV_HEADER, res.csv_rows(),
        ("str", "int", "time", "str", "str", "int", "int", "prob", "time",
         "time", "time", "time", "prob", "prob"),
    )
    print(f"critical law={args.law}: pseudo-critical rate {fmt_time(res.value)} "
          f"(target {fmt_prob(args.target)}) -> {out}")
    _maybe_figure(args, figures.critical_figure, res)
    return EXIT_OK


def _cmd_crossing(args) -> int:
    law = parse_law(args.law)
    t_grid = _parse_grid(args.t_grid) if args.t_grid else None
    est = crossings.estimate_crossing(
        law, args.lam, args.kind, args.scheme, t_grid=t_grid,
        tau_policy=args.tau, n=args.n, seed=args.seed, b=args.b,
        workers=args.workers, method=args.method,
    )
    rows = [
        (args.scheme, args.kind, args.lam, r.coords["t"], args.tau,
         r.value, r.sigma, r.n)
        for r in est.rows
    ]
    out = _write_csv(
        _out_path(args, "crossing"),
        ("scheme", "kind", "lambda", "t", "tau_policy", "estimate", "ci", "n"),
        rows, ("str", "str", "time", "time", "str", "prob", "prob", "int"),
    )
    print(f"crossing {args.kind}/{args.scheme} lambda={fmt_time(args.lam)}: "
          f"grid-min {fmt_prob(est.min_value)} -> {out}")
    _maybe_figure(args, figures.crossing_figure, est,)
    return EXIT_OK


def _cmd_blocks(args) -> int:
    law = parse_law(args.law)
    b = args.b if args.scheme == "bounded" else None
    depth = args.depth if args.depth is not None else args.rows
    if args.report:
        rep = renorm.marginal_and_dependency_report(
            law, args.lam, args.scheme, args.n, n_cols=args.cols,
            n_rows=args.rows, b=b, tau_policy=args.tau, seed=args.seed,
            sampler=args.sampler, depth=depth,
        )
        out = _write_csv(
            _out_path(args, "blocks"),
            ("kind", "label", "value", "sigma", "note"),
            rep.csv_rows(), ("str", "str", "prob", "prob", "str"),
        )
        print(f"blocks report law={args.law} lambda={fmt_time(args.lam)}: "
              f"marginals H={fmt_prob(rep.marginal_h.value)} "
              f"V={fmt_prob(rep.marginal_v.value)}, percolation "
              f"{fmt_prob(rep.percolation.value)} -> {out}")
        return EXIT_OK
    fld = renorm.sample_block_field(
        law, args.lam, args.scheme, args.cols, args.rows, b=b,
        tau_policy=args.tau, seed=args.seed, sampler=args.sampler,
    )
    out = _write_csv(
        _out_path(args, "blocks"), ("x", "y", "edge_kind", "open"),
        fld.csv_rows(), ("int", "int", "str", "int"),
    )
    perc = renorm.percolates(fld, depth)
    print(f"blocks law={args.law} lambda={fmt_time(args.lam)} "
          f"{args.cols}x{args.rows}: percolates(depth={depth}) = {perc} -> {out}")
    _maybe_figure(args, figures.field_figure, fld)
    return EXIT_OK


def _require(args, names):
    vals = []
    for name in names:
        v = getattr(args, name)
        if v is None:
            raise ValueError(f"bounds {args.formula} needs --{name}")
        vals.append(v)
    return vals


def _cmd_bounds(args) -> int:
    if args.formula == "lambda-h":
        eps, a0 = _require(args, ["eps", "a0"])
        value = crossings.lambda_h_bound(eps, a0)
    elif args.formula == "lambda-v-bounded":
        eps, u1, K0 = _require(args, ["eps", "u1", "K0"])
        value = crossings.lambda_v_bound_bounded(eps, u1, K0)
    elif args.formula == "lambda-v-dfr":
        eps, u0 = _require(args, ["eps", "u0"])
        value = crossings.lambda_v_bound_dfr(eps, u0)
    elif args.formula == "a0-bounded":
        w0, b = _require(args, ["w0", "b"])
        value = crossings.a0_bounded(w0, b)
    else:
        (w0,) = _require(args, ["w0"])
        value = crossings.a0_dfr(w0)
    print(fmt_time(value))
    if args.out:
        _write_csv(Path(args.out), ("formula", "value"),
                   [(args.formula, value)], ("str", "time"))
    return EXIT_OK


def _cmd_verify(args) -> int:
    law = parse_law(args.law)
    names = sorted(verify.CHECKS) if args.check == "all" else [args.check]
    reports = []
    for name in names:
        kwargs = {"seed": args.seed, "workers": args.workers}
        if name == "degenerate":
            kwargs.update(L=args.L, n=args.n)
            if args.T is not None:
                kwargs["T"] = args.T
        elif name == "dfr-gap":
            kwargs.update(law=law, n=args.n)
            if args.w is not None:
                kwargs["w_grid"] = [args.w]
        elif name in ("gap-grid", "count-tail", "proximity"):
            kwargs.update(law=law, p0=args.p0, n=args.n)
            if name == "count-tail":
                kwargs["b"] = args.b
        elif name == "crossing-thresholds":
            kwargs.update(law=law, scheme=args.scheme, eps=args.eps,
                          b=args.b if args.scheme == "bounded" else None,
                          n_quantile=max(args.n, 20000), n_cross=args.n)
        elif name == "block-field":
            kwargs.update(law=law, lam=args.lam, scheme=args.scheme,
                          b=args.b if args.scheme == "bounded" else None,
                          n=args.n, n_cols=args.cols, n_rows=args.rows,
                          eps=args.eps)
        elif name == "coupling":
            kwargs.update(law=law, n=min(args.n, 2000))
            if args.L:
                kwargs["L"] = args.L
            if args.T is not None:
                kwargs["T"] = args.T
        elif name == "additivity":
            kwargs.update(law=law, n=min(args.n, 2000))
        elif name == "determinism":
            kwargs.pop("workers")
            kwargs.update(law=law, n=min(args.n, 5000))
        reports.append(verify.CHECKS[name](**kwargs))

    rows = []
    for rep in reports:
        rows.extend(rep.csv_rows())
        print(rep.summary())
    out = _write_csv(
        _out_path(args, "verify"), verify.CheckReport.CSV_HEADER, rows,
        ("str", "str", "prob", "prob", "prob", "int"),
    )
    print(f"verify -> {out}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_STATISTICAL


_DISPATCH = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "critical": _cmd_critical,
    "crossing": _cmd_crossing,
    "blocks": _cmd_blocks,
    "bounds": _cmd_bounds,
    "verify": _cmd_verify,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap, subparsers = _build_parser()

    # config defaults must be installed before the real parse
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        cmd = next((a for a in argv if a in subparsers), None)
        try:
            cfg = _load_config(cfg_path)
            if cmd is not None:
                _apply_config(subparsers[cmd], cfg)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    if hasattr(args, "workers") and args.workers is None:
        args.workers = _default_workers()

    try:
        return _DISPATCH[args.cmd](args)
    except RcplabError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
