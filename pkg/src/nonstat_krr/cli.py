"""Command line front end: ``nonstat-krr {run,rate,diagnose}``.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure.
"""
import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config, experiment, io
from .errors import ConfigError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _ts_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def build_parser():
    parser = _Parser(prog="nonstat-krr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="scenario YAML (default: shipped canonical config)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--replicates", type=_positive_int, help="replicate count override")
        p.add_argument("--threads", type=_positive_int,
                       help="worker threads (default: $NONSTAT_KRR_THREADS or CPU count)")
        p.add_argument("--output", help="output directory override")

    common(sub.add_parser("run", help="reproduce the checkpoint experiment"))
    rate = sub.add_parser("rate", help="log-log convergence rate over a checkpoint ladder")
    common(rate)
    rate.add_argument("--ts", type=_ts_list, help="comma separated ladder, e.g. 250,500,1000,2000")
    diag = sub.add_parser("diagnose", help="smoothness trace or covariance diagnostic")
    common(diag)
    diag.add_argument("--mode", choices=("smoothness", "covariance"), default="smoothness")
    diag.add_argument("--sampler", choices=("independent", "metropolis"),
                      help="sampler override for the covariance diagnostic")
    return parser


def _threads(args):
    if args.threads:
        return args.threads
    env = os.environ.get("NONSTAT_KRR_THREADS")
    if env:
        try:
            return _positive_int(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"NONSTAT_KRR_THREADS must be a positive integer, got {env!r}")
    return os.cpu_count() or 1


def _load(args):
    cfg = config.load(args.config) if args.config else config.canonical_config()
    return config.with_overrides(cfg, args.seed, args.replicates, args.output)


def _grid_csv(path, grid, columns):
    names = list(columns)
    rows = zip(grid.nodes, *(columns[n] for n in names))
    io.write_csv(path, ["node", *names], rows)


def _echo_without_output_dir(cfg):
    # the destination must not leak into the artefact, or reruns elsewhere would differ
    echo = cfg.echo()
    echo["output"].pop("directory")
    return echo


def cmd_run(args):
    cfg = _load(args)
    scen = cfg.scenario
    report = experiment.run_scenario(scen, threads=_threads(args))
    out = Path(cfg.output_dir)
    grid = scen.grid
    if "csv" in cfg.formats:
        io.write_csv(out / "report.csv", report.columns, report.rows())
        _grid_csv(out / "mu.csv", grid, {"mu": report.mu.values})
        for t in scen.checkpoints:
            est = report.estimates[t]
            _grid_csv(out / f"estimate_t{t}.csv", grid,
                      {"replicate_0": est[0], "mean": est.mean(axis=0)})
            avg = scen.schedule.average_density(t)
            _grid_csv(out / f"avg_density_t{t}.csv", grid, {"density": avg.pdf(grid.nodes)})
    aggregates = report.aggregate()
    if "json" in cfg.formats:
        bounds = {}
        for t in scen.checkpoints:
            p = scen.schedule.average_density(t).pdf(grid.nodes)
            bounds[str(t)] = {"min": float(p.min()), "max": float(p.max())}
        io.write_json(out / "summary.json", {
            "version": __version__,
            "config": _echo_without_output_dir(cfg),
            "seeds": [experiment.split_seed(scen.master_seed, k) for k in range(scen.replicates)],
            "aggregates": aggregates,
            "density_bounds": bounds,
        })
    print(f"{'t':>6} {'gamma':>11} {'sup_err mean':>13} {'sup_err std':>12} "
          f"{'||L^-1 mu||':>13} {'dfl dist':>10}")
    for row in aggregates:
        print(f"{row['t']:>6} {row['gamma_mean']:>11.4e} {row['sup_error_mean']:>13.5f} "
              f"{row['sup_error_std']:>12.5f} {row['smoothness_norm_mean']:>13.5g} "
              f"{row['dfl_distance_mean']:>10.3e}")
    print(f"wall time {sum(report.timings):.1f}s over {len(report.timings)} replicates")
    return EXIT_OK


def cmd_rate(args):
    cfg = _load(args)
    ts = args.ts if args.ts else cfg.rate_ts
    if len(ts) < 4:
        raise ConfigError(f"rate needs at least 4 checkpoints, got {len(ts)}")
    scen = cfg.scenario
    if max(ts) > scen.schedule.total:
        raise ConfigError(f"ladder reaches t={max(ts)} but the schedule has {scen.schedule.total} draws")
    try:
        est = experiment.rate_fit(replace(scen, checkpoints=(max(ts),)), ts,
                                  scen.replicates, threads=_threads(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(cfg.output_dir)
    io.write_csv(out / "rate.csv", ["t", "mean_error", "std_error"],
                 zip(est.ts, est.mean_errors, est.std_errors))
    io.write_json(out / "rate.json", {
        "slope": est.slope, "intercept": est.intercept, "r2": est.r2,
        "theoretical": est.theoretical, "alpha": scen.gamma.alpha, "r": scen.r,
        "ts": list(est.ts), "replicates": scen.replicates, "version": __version__,
    })
    print(f"slope {est.slope:.4f}  r2 {est.r2:.3f}  theoretical rate {est.theoretical:.4f}")
    return EXIT_OK


def cmd_diagnose(args):
    cfg = _load(args)
    scen = cfg.scenario
    out = Path(cfg.output_dir)
    if args.mode == "smoothness":
        trace = experiment.smoothness_trace(scen, cfg.trace_ts())
        io.write_csv(out / "smoothness.csv", ["t", "value"], trace)
        for t, v in trace[:: max(1, len(trace) // 10)]:
            print(f"{t:>6} {v:.6g}")
        return EXIT_OK
    sampler = args.sampler or scen.sampler
    rows = experiment.covariance_diagnostic(
        scen.schedule, sampler, cfg.functions, cfg.max_lag,
        args.replicates or cfg.cov_replicates, scen.master_seed, step_scale=scen.step_scale)
    io.write_csv(out / "covariance.csv",
                 ["function", "position", "lag", "estimate", "stderr", "partial_sum",
                  "partial_stderr"],
                 [[r.function, r.position, r.lag, r.estimate, r.stderr, r.partial_sum,
                   r.partial_stderr] for r in rows])
    lag1 = [r for r in rows if r.lag == 1]
    for r in lag1:
        print(f"{r.function:>5} i={r.position:<5} lag1 cov {r.estimate:+.4e} (se {r.stderr:.1e})")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "rate": cmd_rate, "diagnose": cmd_diagnose}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
