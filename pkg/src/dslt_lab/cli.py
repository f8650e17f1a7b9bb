"""``dslt-lab`` command line.

Subcommands: ``simulate``, ``constants``, ``chaos``, ``clt``, ``existence``,
``report``.  Exit status: 0 success, 1 invalid input, 2 numerical
non-convergence, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .constants import (
    LINE_SPEC,
    OCTANT_SPEC,
    SIMPLEX_SPEC,
    TETRA_SPEC,
    Regime,
    RegimeParams,
    bar_sigma_ms,
    chaos_variances_at_eps,
    hat_sigma_ms,
    odd_chaos_combinatorial_sum,
    sigma_squared_closed_form,
    sigma_squared_integral_form,
    sigma_squared_limit,
    total_variance_at_eps,
)
from .errors import ConfigInvalid, DsltLabError, NotConverged
from .estimator import path_steps_for
from .experiments import (
    ExperimentPlan,
    existence_probe,
    read_samples_csv,
    resolve_threads,
    run_clt_experiment,
    summarize,
)
from .fbm import FbmConfig, sample_path
from .manifest import write_manifest
from .quadrature import QuadratureResult

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 1, 2, 3

CONSTANTS_HEADER = ("quantity", "H", "d", "t", "eps", "value", "error_estimate", "converged")
CHAOS_HEADER = ("m", "d", "brute_force", "closed_form", "equal")
CONSISTENCY_HEADER = ("m", "chaos_value", "partial_sum", "total", "relative_gap")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation status instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="key = value configuration file")
    p.add_argument("--seed", type=int, default=d(None), help="master seed (overrides the config)")
    p.add_argument("--out", default=d(None), help="output directory")
    p.add_argument("--threads", type=int, default=d(None), help="worker threads (fallback: DSLT_LAB_THREADS)")
    p.add_argument("--quiet", action="store_true", default=d(False), help="no progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dslt-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample fBm paths to CSV")
    p.add_argument("--steps", type=int, help="grid size n (default: from --eps and the resolution guard)")
    p.add_argument("--eps", type=float, help="bandwidth used to choose n")
    p.add_argument("--paths", type=int, default=1, help="number of paths")

    p = sub.add_parser("constants", help="limit constants and per-chaos tables")
    p.add_argument("--m-max", type=int, help="chaos orders to tabulate (default: chaos_m_max)")
    p.add_argument("--at-eps", action="store_true", help="also evaluate variances at each eps of the sweep")

    p = sub.add_parser("chaos", help="combinatorial identity and chaos-vs-total tables")
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--d-max", type=int, default=5)
    p.add_argument("--consistency-eps", type=float, help="compare partial chaos sums with the total at this eps")

    sub.add_parser("clt", help="normalised-estimator Monte Carlo over the eps sweep")

    p = sub.add_parser("existence", help="raw-variance scaling across the existence threshold")
    p.add_argument("--hurst-list", required=True, help="comma-separated Hurst indices")
    p.add_argument("--check-eps", type=float, default=0.1, help="bandwidth of the quadrature cross-check")

    p = sub.add_parser("report", help="re-render a report from persisted samples")
    p.add_argument("run_dir", help="directory of a previous clt run")

    for name, sp in sub.choices.items():
        _global_flags(sp, suppress=True)
    return parser


# --------------------------------------------------------------------------
# helpers


class _Ctx:
    def __init__(self, args):
        self.args = args
        self.quiet = args.quiet
        self.threads = resolve_threads(args.threads)
        self.cfg: RunConfig | None = None
        if args.config:
            self.cfg = load_config(args.config).with_seed(args.seed)

    def need_cfg(self) -> RunConfig:
        if self.cfg is None:
            raise ConfigInvalid([f"{self.args.command} needs --config"])
        return self.cfg

    def out_dir(self, required=True):
        out = self.args.out
        if out is None:
            if required:
                raise ConfigInvalid([f"{self.args.command} needs --out"])
            return None
        os.makedirs(out, exist_ok=True)
        return out

    def log(self, msg):
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)

    def progress(self, k, done, total):
        if not self.quiet and (done == total or done % max(1, total // 10) == 0):
            print(f"  eps[{k}]: {done}/{total}", file=sys.stderr, flush=True)


def _g(x):
    return "" if x is None else f"{x:.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _emit_table(ctx, name, header, rows):
    out = ctx.out_dir(required=False)
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return []
    _write_csv(os.path.join(out, name), header, rows)
    return [name]


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(ctx):
    cfg = ctx.need_cfg()
    args = ctx.args
    steps = args.steps
    if steps is None:
        if args.eps is None:
            raise ConfigInvalid(["simulate needs --steps or --eps"])
        steps = path_steps_for(args.eps, cfg.hurst, cfg.horizon)
    if args.paths < 1:
        raise ConfigInvalid(["--paths must be >= 1"])
    out = ctx.out_dir()
    fcfg = FbmConfig(cfg.hurst, cfg.dim, cfg.horizon, steps, cfg.seed)
    files = []
    for k in range(args.paths):
        name = f"path_{k:04d}.csv"
        sample_path(fcfg, k).to_csv(os.path.join(out, name))
        files.append(name)
    ctx.log(f"wrote {len(files)} path(s) with n={steps}")
    write_manifest(out, "simulate", {**cfg.echo(), "steps": steps, "paths": args.paths}, cfg.seed, files)
    return EXIT_OK


def _rows_for(name, results, cfg, eps=None, first_order=1):
    if isinstance(results, QuadratureResult):
        results = [results]
        names = [name]
    else:
        names = [f"{name}[{m}]" for m in range(first_order, first_order + len(results))]
    return [
        (n, _g(cfg.hurst), cfg.dim, _g(cfg.horizon), _g(eps), _g(r.value), _g(r.error_estimate), str(bool(r.converged)).lower())
        for n, r in zip(names, results)
    ]


def cmd_constants(ctx):
    cfg = ctx.need_cfg()
    m_max = ctx.args.m_max or cfg.chaos_m_max
    regime = RegimeParams(cfg.hurst, cfg.dim, cfg.horizon).regime
    H, d, t = cfg.hurst, cfg.dim, cfg.horizon

    def spec(default):
        return default if cfg.quad_rel_tol is None else default.with_(rel_tol=cfg.quad_rel_tol)

    rows = []
    ok = True
    if regime is Regime.SUPERCRITICAL:
        exact = QuadratureResult(sigma_squared_closed_form(H, d, t), 0.0, 0, True)
        rows += _rows_for("sigma_squared", exact, cfg)
        rows += _rows_for("sigma_squared_limit", QuadratureResult(sigma_squared_limit(H, d, t), 0.0, 0, True), cfg)
        integral = sigma_squared_integral_form(H, d, t, spec(LINE_SPEC))
        ok &= integral.converged
        rows += _rows_for("sigma_squared_integral", integral, cfg)
    else:
        if regime is Regime.SUBCRITICAL:
            fn, label, default = hat_sigma_ms, "hat_sigma", OCTANT_SPEC
        else:
            fn, label, default = bar_sigma_ms, "bar_sigma", SIMPLEX_SPEC
        ctx.log(f"evaluating {label} constants (m <= {m_max})")
        res = fn(m_max, H, d, t, spec(default), include_total=True)
        ok &= all(r.converged for r in res)
        rows += _rows_for(f"{label}_squared", res[-1], cfg)
        rows += _rows_for(f"{label}_m", res[:-1], cfg)
    if ctx.args.at_eps:
        for eps in cfg.eps_sweep:
            ctx.log(f"evaluating variances at eps={eps}")
            res = chaos_variances_at_eps(m_max, eps, H, d, t, spec(TETRA_SPEC), include_total=True)
            ok &= all(r.converged for r in res)
            rows += _rows_for("total_variance", res[-1], cfg, eps)
            rows += _rows_for("chaos_variance", res[:-1], cfg, eps)
    files = _emit_table(ctx, "constants.csv", CONSTANTS_HEADER, rows)
    if files:
        write_manifest(ctx.args.out, "constants", {**cfg.echo(), "m_max": m_max}, cfg.seed, files)
    if not ok:
        ctx.log("warning: at least one quadrature did not converge")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_chaos(ctx):
    args = ctx.args
    if args.m_max < 1 or args.d_max < 1:
        raise ConfigInvalid(["--m-max and --d-max must be >= 1"])
    rows = []
    for m in range(1, args.m_max + 1):
        for d in range(1, args.d_max + 1):
            brute, closed = odd_chaos_combinatorial_sum(m, d)
            rows.append((m, d, str(brute), str(closed), str(brute == closed).lower()))
    files = _emit_table(ctx, "chaos_identity.csv", CHAOS_HEADER, rows)
    status = EXIT_OK
    echo = {"m_max": args.m_max, "d_max": args.d_max}
    if args.consistency_eps is not None:
        cfg = ctx.need_cfg()
        m_max = cfg.chaos_m_max
        res = chaos_variances_at_eps(m_max, args.consistency_eps, cfg.hurst, cfg.dim, cfg.horizon, include_total=True)
        total = res[-1].value
        partial = np.cumsum([r.value for r in res[:-1]])
        crow = [
            (m, _g(r.value), _g(s), _g(total), _g(abs(total - s) / abs(total)))
            for m, (r, s) in enumerate(zip(res[:-1], partial), 1)
        ]
        files += _emit_table(ctx, "chaos_vs_total.csv", CONSISTENCY_HEADER, crow)
        echo.update(cfg.echo(), consistency_eps=args.consistency_eps)
        if not all(r.converged for r in res):
            status = EXIT_NOT_CONVERGED
    if files:
        write_manifest(args.out, "chaos", echo, ctx.cfg.seed if ctx.cfg else 0, files)
    return status


def _plan_from(cfg: RunConfig, out):
    if not cfg.eps_sweep:
        raise ConfigInvalid(["eps_sweep is required for Monte Carlo runs"])
    return ExperimentPlan(
        hurst=cfg.hurst,
        dim=cfg.dim,
        eps_sweep=cfg.eps_sweep,
        replications=cfg.replications,
        horizon=cfg.horizon,
        master_seed=cfg.seed,
        regime=cfg.regime or "auto",
        output_dir=out,
    )


def cmd_clt(ctx):
    cfg = ctx.need_cfg()
    out = ctx.out_dir()
    plan = _plan_from(cfg, out)
    ctx.log(f"clt: {plan.replications} replicates at eps {list(plan.eps_sweep)}")
    report = run_clt_experiment(plan, ctx.threads, ctx.progress)
    _dump_json(os.path.join(out, "report.json"), report.to_dict())
    write_manifest(out, "clt", cfg.echo(), cfg.seed, ["samples.csv", "report.json"])
    return EXIT_OK


def cmd_existence(ctx):
    cfg = ctx.need_cfg()
    out = ctx.out_dir()
    try:
        hursts = [float(h) for h in ctx.args.hurst_list.split(",") if h.strip()]
    except ValueError:
        raise ConfigInvalid([f"--hurst-list: cannot parse {ctx.args.hurst_list!r}"]) from None
    if not cfg.eps_sweep:
        raise ConfigInvalid(["eps_sweep is required for Monte Carlo runs"])
    result = existence_probe(
        hursts,
        cfg.dim,
        cfg.eps_sweep,
        cfg.replications,
        cfg.horizon,
        cfg.seed,
        ctx.threads,
        ctx.progress,
        out,
        check_eps=ctx.args.check_eps,
    )
    _dump_json(os.path.join(out, "existence.json"), result)
    files = [f"samples_h{i}.csv" for i in range(len(hursts))] + ["existence.json"]
    write_manifest(out, "existence", {**cfg.echo(), "hurst_list": hursts}, cfg.seed, files)
    return EXIT_OK


def rerender_report(run_dir) -> dict:
    """Recompute a clt report from ``samples.csv`` and the stored plan."""
    with open(os.path.join(run_dir, "report.json")) as fh:
        old = json.load(fh)
    echo = dict(old["plan"])
    echo["eps_sweep"] = tuple(echo["eps_sweep"])
    echo["path_steps"] = tuple(echo["path_steps"])
    plan = ExperimentPlan(**echo)
    samples = read_samples_csv(os.path.join(run_dir, "samples.csv"))
    regime = plan.regime_params()
    return summarize(plan, samples, regime).to_dict()


def cmd_report(ctx):
    report = rerender_report(ctx.args.run_dir)
    out = ctx.out_dir(required=False)
    if out is None:
        json.dump(report, sys.stdout, indent=2, sort_keys=True, allow_nan=False)
        sys.stdout.write("\n")
        return EXIT_OK
    _dump_json(os.path.join(out, "report.json"), report)
    write_manifest(out, "report", {"run_dir": os.path.abspath(ctx.args.run_dir)}, report["plan"]["master_seed"], ["report.json"])
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "constants": cmd_constants,
    "chaos": cmd_chaos,
    "clt": cmd_clt,
    "existence": cmd_existence,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        ctx = _Ctx(args)
        return COMMANDS[args.command](ctx)
    except NotConverged as exc:
        print(f"dslt-lab: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OSError as exc:
        print(f"dslt-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, DsltLabError, MemoryError) as exc:
        print(f"dslt-lab: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
