"""Command-line interface.

Subcommands:

    topology   build and validate an overlay, print its counts
    run        execute one experiment, write messages.csv/links.csv/summary.txt
    sweep      expand a scenario grid and run every point
    fixtures   list or emit the built-in example configurations
    report     render figures from a finished run directory

Exit codes: 0 success, 2 configuration or usage error, 3 simulation timeout.
The default output directory comes from $CLUSTERCAST_OUT (falling back to
./runs) when --out is omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import fixtures as fixtures_mod
from .config import ConfigError, ExperimentConfig, execute, expand_scenario, load_config
from .simulator import RoutingMode, SimulationTimeout, summary_lines, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TIMEOUT = 3


def _out_root(explicit: str | None) -> str:
    if explicit:
        return explicit
    return os.environ.get("CLUSTERCAST_OUT", "runs")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clustercast",
        description="content-based publish/subscribe routing on clustered overlays")
    sub = parser.add_subparsers(dest="command", required=True)

    p_topo = sub.add_parser("topology", help="build and validate an overlay")
    p_topo.add_argument("--config", required=True, help="experiment config (JSON)")
    p_topo.add_argument("--full", action="store_true",
                        help="dump brokers and links, not just the counts")

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--mode", choices=[m.value for m in RoutingMode],
                       help="override the configured routing mode")
    p_run.add_argument("--seed", type=int, help="override the configured seed")
    p_run.add_argument("--out", help="output directory (default $CLUSTERCAST_OUT/<name>)")
    p_run.add_argument("--trace", action="store_true",
                       help="write one line per routing decision to trace.txt")
    p_run.add_argument("--plot", action="store_true",
                       help="render figures from the delimited outputs")

    p_sweep = sub.add_parser("sweep", help="run every point of a scenario grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", help="directory that receives one subdirectory per point")
    p_sweep.add_argument("--parallel", type=int, default=1,
                         help="number of grid points to run concurrently")
    p_sweep.add_argument("--plot", action="store_true")

    p_fix = sub.add_parser("fixtures", help="emit built-in example configurations")
    p_fix.add_argument("--name", help="fixture to emit (see --list)")
    p_fix.add_argument("--list", action="store_true", help="list fixture names")
    p_fix.add_argument("--out", help="write <name>.json here instead of stdout")

    p_rep = sub.add_parser("report", help="render figures for a finished run")
    p_rep.add_argument("run_dir")
    p_rep.add_argument("--out", help="directory for the figures (default: the run dir)")
    return parser


def _load(path: str) -> ExperimentConfig:
    return load_config(path)


def _run_name(config_path: str, mode: str, seed: int) -> str:
    stem = os.path.splitext(os.path.basename(config_path))[0] or "run"
    return f"{stem}-{mode}-s{seed}"


def _cmd_topology(args) -> int:
    config = _load(args.config)
    overlay = config.build_overlay()
    if args.full:
        sys.stdout.write(overlay.describe())
    else:
        print(overlay.stats_line())
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _load(args.config)
    mode = RoutingMode(args.mode) if args.mode else None
    result = execute(config, mode=mode, seed=args.seed, trace=args.trace)
    out_dir = args.out or os.path.join(
        _out_root(None), _run_name(args.config, result.mode.value, result.seed))
    write_outputs(result, out_dir, trace=args.trace)
    if args.plot:
        from .report import render_report
        render_report(out_dir)
    for line in summary_lines(result):
        print(line)
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def _sweep_point(item) -> tuple[str, list[str]]:
    name, config, out_dir, plot = item
    result = execute(config)
    write_outputs(result, out_dir)
    if plot:
        from .report import render_report
        render_report(out_dir)
    return name, summary_lines(result)


def _cmd_sweep(args) -> int:
    config = _load(args.config)
    points = expand_scenario(config)
    root = args.out or os.path.join(_out_root(None), _run_name(args.config, "sweep", config.seed))
    os.makedirs(root, exist_ok=True)
    jobs = []
    for name, point in points:
        out_dir = os.path.join(root, name)
        if os.path.exists(out_dir):
            raise ConfigError(f"refusing to overwrite existing grid point {out_dir}")
        jobs.append((name, point, out_dir, args.plot))

    results: list[tuple[str, list[str]]] = []
    if args.parallel > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]

    summary_path = os.path.join(root, "sweep_summary.csv")
    keys: list[str] = []
    rows = []
    for name, lines in results:
        row = {"point": name}
        for line in lines:
            key, _, value = line.partition("=")
            row[key] = value
            if key not in keys:
                keys.append(key)
        rows.append(row)
    import csv as _csv
    with open(summary_path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=["point"] + keys, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"{len(rows)} grid points written under {root}")
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    if args.list or not args.name:
        for name in fixtures_mod.fixture_names():
            print(name)
        return EXIT_OK
    try:
        data = fixtures_mod.fixture_dict(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.name}.json")
        with open(path, "w") as fh:
            fh.write(text)
        print(path)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_report
    written = render_report(args.run_dir, args.out)
    for path in written:
        print(path)
    if not written:
        print("nothing to render (no links.csv or messages.csv rows)", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "topology": _cmd_topology,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "fixtures": _cmd_fixtures,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        for link, depth in exc.snapshot:
            print(f"  queued {depth:>6}  {link}", file=sys.stderr)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
