"""Command-line entry point: ``cogamp run|sweep|optimize|report``."""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, _kernels
from .agents import ConfigError
from .config import ResolvedConfig, parse_config, with_seed
from .engine import RunResult, run, write_samples_csv
from .environment import EnvError
from .lab import (
    CellSummary,
    LabError,
    OptResult,
    group_by_delta,
    optimize_configs,
    optimize_labels,
    run_many,
    run_sweep_results,
    select_best,
    summarize_optimize,
    summarize_sweep,
)
from .metrics import MetricError
from .report import render_report, run_report

log = logging.getLogger("cogamp")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
LOG_ENV = "COGAMP_LOG_LEVEL"
_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

EPILOG = f"""\
exit status:
  0  success
  1  simulation or I/O failure
  2  invalid command line or configuration (bad key, bad value, violated invariant)

environment:
  {LOG_ENV}         error | info | debug (default: info); progress goes to stderr
  COGAMP_DISABLE_NUMBA     set to 1 to use the pure-numpy kernels
"""


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_common(out: Path, resolved: ResolvedConfig, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(resolved.dump())
    _dump_json(
        {
            "command": command,
            "version": __version__,
            "backend": _kernels.get_backend(),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
        out / "metadata.json",
    )


def write_run_reports(out: Path, result: RunResult) -> None:
    (out / "report.txt").write_text(run_report(result))


def write_table_reports(out: Path, obj) -> None:
    rep = render_report(obj)
    (out / "report.csv").write_text(rep.csv)
    (out / "report.txt").write_text(rep.table)
    for name, text in rep.plots.items():
        (out / f"plot_{name}.csv").write_text(text)


def cmd_run(resolved: ResolvedConfig, out: Path, workers: int) -> None:
    result = run(resolved.sim)
    _write_common(out, resolved, "run")
    write_samples_csv(result.samples, out / "samples.csv")
    _dump_json(result.to_dict(), out / "summary.json")
    write_run_reports(out, result)


def _runs_dir(out: Path) -> Path:
    d = out / "runs"
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_sweep(resolved: ResolvedConfig, out: Path, workers: int) -> None:
    spec = resolved.sweep
    results = run_sweep_results(spec, workers)
    cells = summarize_sweep(spec, results)
    _write_common(out, resolved, "sweep")
    runs = _runs_dir(out)
    for (ri, ci, seed), res in results:
        name = f"{spec.regimes[ri].name.value}_{spec.configs[ci].label}_seed{seed}.csv"
        write_samples_csv(res.samples, runs / name)
    _dump_json({"cells": [c.to_dict() for c in cells]}, out / "sweep.json")
    write_table_reports(out, cells)


def cmd_optimize(resolved: ResolvedConfig, out: Path, workers: int) -> None:
    spec = resolved.optimize
    results = run_many(optimize_configs(spec), workers, optimize_labels(spec))
    _write_common(out, resolved, "optimize")
    runs = _runs_dir(out)
    for delta, chunk in group_by_delta(spec, results):
        for seed, res in zip(spec.seeds, chunk):
            write_samples_csv(res.samples, runs / f"delta{delta:.4f}_seed{seed}.csv")
    result = select_best(summarize_optimize(spec, results))
    _dump_json(result.to_dict(), out / "optimize.json")
    write_table_reports(out, result)


def cmd_report(bundle: Path) -> str:
    """Re-render report files from a bundle's stored JSON."""
    if (bundle / "optimize.json").exists():
        data = json.loads((bundle / "optimize.json").read_text())
        write_table_reports(bundle, OptResult.from_dict(data))
        return "optimize"
    if (bundle / "sweep.json").exists():
        data = json.loads((bundle / "sweep.json").read_text())
        write_table_reports(bundle, [CellSummary.from_dict(c) for c in data["cells"]])
        return "sweep"
    if (bundle / "summary.json").exists():
        data = json.loads((bundle / "summary.json").read_text())
        write_run_reports(bundle, RunResult.from_dict(data))
        return "run"
    raise LabError(f"{bundle} holds no summary.json, sweep.json or optimize.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogamp",
        description="Agent-based lab for cognitive amplification versus delegation.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sectioned key=value config file")
    common.add_argument("--seed", type=int, help="run seed (run) or root seed (sweep/optimize)")
    common.add_argument("--out", type=Path, help="output directory (default: ./cogamp-<command>)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument(
        "--fast", action="store_true", help="half-length phases and at most 5 seeds"
    )
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )
    for name, text in (
        ("run", "one (config, seed) simulation"),
        ("sweep", "regimes x parameter configs x seeds"),
        ("optimize", "constrained search over the atrophy rate"),
    ):
        sub.add_parser(name, parents=[common], help=text, description=text, epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    rep = sub.add_parser("report", help="re-render reports of an existing bundle", epilog=EPILOG,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    rep.add_argument("bundle", type=Path, nargs="?", help="bundle directory")
    rep.add_argument("--out", type=Path, help="bundle directory (alternative to positional)")
    return parser


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "info").strip().lower()
    logging.basicConfig(
        level=_LEVELS.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            bundle = args.bundle or args.out
            if bundle is None:
                parser.error("report needs a bundle directory")
            kind = cmd_report(bundle)
            log.info("re-rendered %s reports in %s", kind, bundle)
            return EXIT_OK
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        resolved = parse_config(args.config, args.overrides, fast=args.fast)
        if args.seed is not None:
            resolved = with_seed(resolved, args.seed, args.command)
        out = args.out or Path(f"cogamp-{args.command}")
        {"run": cmd_run, "sweep": cmd_sweep, "optimize": cmd_optimize}[args.command](
            resolved, out, args.workers
        )
        log.info("wrote %s bundle to %s", args.command, out)
        return EXIT_OK
    except (ConfigError, EnvError) as exc:
        print(f"cogamp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LabError, MetricError, OSError) as exc:
        print(f"cogamp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
