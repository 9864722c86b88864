"""Command-line entry point: ``qta solve``, ``qta bench`` and ``qta report``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .driver import BASELINE_LABEL, InsufficientBudgetError, QtaConfig, run_baseline, run_qta
from .initializer import InitConfig
from .instances import DistanceMode, InstanceError, load_instance
from .oracle import InfeasibleSampleError, NotConfiguredError
from .report import RunRecord, read_summary, render_table, tour_svg, write_summary

log = logging.getLogger("qta")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSTANCE = 3
EXIT_BUDGET = 4
EXIT_SOLVER = 5

# flag name -> (type, default); the config file accepts the same keys
OPTIONS = {
    "mode": (str, None),
    "sampler": (str, "anneal"),
    "budget": (int, 40),
    "max-cluster-size": (int, 10),
    "runs": (int, 20),
    "seed": (int, 0),
    "init": (str, "covns"),
    "reads": (int, 50),
    "sweeps": (int, 1000),
    "generations": (int, 50),
    "population-size": (int, 10),
    "migration-period": (int, 10),
    "baseline": (bool, False),
    "workers": (int, 1),
}
# keys that never change results and stay out of the config hash
_NON_RESULT_KEYS = {"workers"}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        kind = OPTIONS[key][0]
        try:
            if kind is bool:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                out[key] = kind(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--instance", action="append", default=[],
                   help="instance file or bundled benchmark name (repeatable for bench)")
    p.add_argument("--mode", choices=[m.value for m in DistanceMode])
    p.add_argument("--sampler", choices=["exact", "anneal", "remote"])
    p.add_argument("--budget", type=int)
    p.add_argument("--max-cluster-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--init", choices=["random", "covns"])
    p.add_argument("--reads", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population-size", type=int)
    p.add_argument("--migration-period", type=int)
    p.add_argument("--baseline", action="store_true", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qta", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run the solver once on one instance")
    _add_common(solve)
    solve.add_argument("--svg-out", help="tour plot path (default: <instance>_tour.svg)")
    bench = sub.add_parser("bench", help="repeated seeded runs over several instances")
    _add_common(bench)
    bench.add_argument("--runs", type=int)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--report-out", help="write the results table here (default: stdout)")
    bench.add_argument("--summary-out", help="write the machine-readable summary here")
    report = sub.add_parser("report", help="render a table from a summary file")
    report.add_argument("summary")
    return parser


def resolve(args) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    settings = {k: v[1] for k, v in OPTIONS.items()}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in OPTIONS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            settings[key] = value
    if settings["mode"] is not None:
        settings["mode"] = DistanceMode(settings["mode"]).value
    if settings["budget"] < 0 or settings["max-cluster-size"] < 3:
        raise UsageError("budget must be >= 0 and max-cluster-size >= 3")
    return settings


def qta_config(settings: dict) -> QtaConfig:
    return QtaConfig(
        budget=settings["budget"],
        max_cluster_size=settings["max-cluster-size"],
        sampler=settings["sampler"],
        reads=settings["reads"],
        sweeps=settings["sweeps"],
        init=settings["init"],
        init_config=InitConfig(settings["population-size"], settings["generations"],
                               settings["migration-period"], settings["max-cluster-size"]),
    )


def _mode(settings):
    return DistanceMode(settings["mode"]) if settings["mode"] else None


def cmd_solve(args) -> int:
    settings = resolve(args)
    if len(args.instance) != 1:
        raise UsageError("solve takes exactly one --instance")
    inst = load_instance(args.instance[0], _mode(settings))
    t0 = time.perf_counter()
    res = run_qta(inst, qta_config(settings), settings["seed"])
    wall = time.perf_counter() - t0
    print(f"instance   {inst.name} (N={inst.n_cities}, {inst.distance_mode.value})")
    print(f"cost       {res.cost:.1f}")
    print(f"accesses   {res.accesses}/{settings['budget']}")
    print(f"hit rate   {res.ledger.hit_rate():.3f} ({res.ledger.hit_count} hits, "
          f"{res.ledger.miss_count} misses)")
    print(f"iterations {len(res.history)} (stop: {res.stop_reason})")
    print(f"tour       {' '.join(str(c + 1) for c in res.tour)}")
    if settings["baseline"]:
        b = run_baseline(inst, rng_seed=settings["seed"])
        print(f"baseline   {b.cost:.1f} ({b.label}, access-equivalent {b.access_equivalent})")
    svg_path = Path(args.svg_out or f"{inst.name}_tour.svg")
    svg_path.write_text(tour_svg(inst, res.tour, res.labels))
    print(f"svg        {svg_path}")
    log.info("wall time %.2fs", wall)
    return EXIT_OK


def _bench_task(task):
    source, mode, config, seed, solver = task
    name = Path(source).stem if source.endswith((".tsp", ".vrp")) else source
    try:
        inst = load_instance(source, DistanceMode(mode) if mode else None)
        name = inst.name
        if solver == "qta":
            r = run_qta(inst, config, seed)
            return RunRecord(name, seed, r.cost, r.accesses, r.ledger.hit_count, "qta")
        b = run_baseline(inst, rng_seed=seed)
        return RunRecord(name, seed, b.cost, b.access_equivalent, 0, BASELINE_LABEL)
    except Exception as exc:  # a failing row must not sink the rest of the table
        return RunRecord(name, seed, float("nan"), 0, 0, solver, type(exc).__name__)


def bench_records(instances, settings: dict) -> list:
    config = qta_config(settings)
    solvers = ["qta"] + (["baseline"] if settings["baseline"] else [])
    tasks = [(source, settings["mode"], config, settings["seed"] + k, solver)
             for source in instances for solver in solvers for k in range(settings["runs"])]
    if settings["workers"] > 1:
        with ProcessPoolExecutor(settings["workers"]) as pool:
            return list(pool.map(_bench_task, tasks))
    return [_bench_task(t) for t in tasks]


def result_settings(settings: dict, instances) -> dict:
    out = {k: v for k, v in settings.items() if k not in _NON_RESULT_KEYS}
    out["instances"] = ",".join(instances)
    return out


def cmd_bench(args) -> int:
    settings = resolve(args)
    if not args.instance:
        raise UsageError("bench needs at least one --instance")
    t0 = time.perf_counter()
    records = bench_records(args.instance, settings)
    log.info("bench wall time %.1fs", time.perf_counter() - t0)
    summary = write_summary(records, result_settings(settings, args.instance))
    table = render_table(records)
    if args.summary_out:
        Path(args.summary_out).write_text(summary)
    if args.report_out:
        Path(args.report_out).write_text(table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def cmd_report(args) -> int:
    sys.stdout.write(render_table(read_summary(Path(args.summary).read_text())))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"solve": cmd_solve, "bench": cmd_bench, "report": cmd_report}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, FileNotFoundError) as exc:
        print(f"qta: instance error: {exc}", file=sys.stderr)
        return EXIT_INSTANCE
    except InsufficientBudgetError as exc:
        print(f"qta: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InfeasibleSampleError, NotConfiguredError) as exc:
        print(f"qta: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
