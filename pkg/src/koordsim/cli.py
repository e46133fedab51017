"""Command-line interface: compile, simulate, scaling, trace.

Exit codes: 0 success, 1 compile diagnostics / agent faults, 2 config or
usage errors, 3 monitor violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from koordsim import harness, monitors, report
from koordsim.config import ConfigError, load_config, shipped_config_path
from koordsim.lang import LexError, ParseError, check, parse
from koordsim.trace import TraceError, read_trace

EXIT_OK = 0
EXIT_COMPILE = 1
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="koordsim",
        description="Compile and simulate event-driven robot coordination programs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="type-check a program and print diagnostics")
    p.add_argument("source", help="program source file")
    p.add_argument("--num-agents", type=int, default=4, help="fleet size to check against")

    p = sub.add_parser("simulate", help="run a simulation from a config file")
    p.add_argument("config", help="config file, or the name of a shipped config")
    p.add_argument("--trace", help="write the execution trace to this file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--duration", type=float, help="override the simulated duration (s)")
    p.add_argument("--net", choices=["in_process", "udp"], help="override the transport mode")
    p.add_argument(
        "--halt-on-violation",
        dest="halt",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="stop the run at the first separation violation",
    )
    p.add_argument("--report", help="directory for CSV tables and rendered figures")

    p = sub.add_parser("scaling", help="measure message rate vs fleet size")
    p.add_argument("app", help="application name (lineform or shapeform)")
    p.add_argument("--counts", default="2,4,8,16", help="comma-separated fleet sizes")
    p.add_argument("--duration", type=float, default=10.0, help="simulated seconds per run")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the CSV report here (default: stdout)")
    p.add_argument("--report", help="directory for the CSV plus a rendered figure")

    p = sub.add_parser("trace", help="extract CSV views from a trace file")
    p.add_argument("path", help="trace file")
    p.add_argument("view", choices=["distances", "visits", "positions"])
    return ap


def cmd_compile(args) -> int:
    src_path = Path(args.source)
    if not src_path.exists():
        print(f"error: source file not found: {src_path}", file=sys.stderr)
        return EXIT_CONFIG
    if args.num_agents < 1:
        print("error: --num-agents must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        program = parse(src_path.read_text(encoding="utf-8"))
    except (LexError, ParseError) as exc:
        print(f"{src_path}:{exc}", file=sys.stderr)
        return EXIT_COMPILE
    if not program.events:
        print(f"{src_path}: error: no events declared", file=sys.stderr)
        return EXIT_COMPILE
    checked, diags = check(program, args.num_agents)
    for d in diags:
        print(d.render(str(src_path)), file=sys.stderr)
    if checked is None:
        return EXIT_COMPILE
    shared = ", ".join(v.name for v in checked.shared_vars) or "(none)"
    print(f"ok: {len(program.events)} events, shared vars: {shared}")
    return EXIT_OK


def _resolve_config(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    try:
        shipped = shipped_config_path(p.stem)
        if shipped.exists():
            return shipped
    except Exception:
        pass
    raise ConfigError(f"config file not found: {name}")


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(_resolve_config(args.config))
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.net.seed = args.seed
        if args.duration is not None:
            cfg.duration = args.duration
        if args.net is not None:
            cfg.net.mode = args.net
            cfg.net.validate()
            if args.net == "udp" and len(cfg.net.ports) != cfg.num_robots:
                raise ConfigError("udp mode needs a port on every robot's device")
        if args.halt is not None:
            cfg.halt_on_violation = args.halt
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = harness.run(cfg, trace_path=args.trace)
    except ValueError as exc:
        print(f"compile error: {exc}", file=sys.stderr)
        return EXIT_COMPILE

    sys.stdout.write(report.metrics_text(result))
    if args.report:
        for path in report.write_run_report(result, args.report):
            print(f"wrote {path}")
    if result.metrics.faults:
        for pid, msg in sorted(result.metrics.faults.items()):
            print(f"agent fault: pid {pid}: {msg}", file=sys.stderr)
        return EXIT_COMPILE
    if not result.verdict:
        if result.safety is not None and not result.safety.verdict:
            t, a, b = result.safety.first_violation
            print(
                f"monitor violation: robots {a} and {b} closer than d_s at t={t:g}",
                file=sys.stderr,
            )
        if result.visits is not None and not result.visits.verdict:
            for p in result.visits.problems:
                print(f"monitor violation: {p}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_scaling(args) -> int:
    if args.app not in ("lineform", "shapeform"):
        print(f"error: unknown app {args.app!r} (use lineform or shapeform)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        counts = [int(c) for c in args.counts.split(",") if c.strip()]
    except ValueError:
        print(f"error: bad --counts value {args.counts!r}", file=sys.stderr)
        return EXIT_CONFIG
    if not counts or any(c < 1 for c in counts):
        print("error: --counts must be positive integers", file=sys.stderr)
        return EXIT_CONFIG
    rep = harness.scaling_experiment(args.app, counts, duration=args.duration, seed=args.seed)
    text = rep.csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    if args.report:
        for path in report.write_scaling_report(rep, args.report):
            print(f"wrote {path}")
    return EXIT_OK


def cmd_trace(args) -> int:
    path = Path(args.path)
    if not path.exists():
        print(f"error: trace file not found: {path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        header, records = read_trace(path)
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.view == "positions":
        sys.stdout.write(report.positions_csv(records))
        return EXIT_OK
    if args.view == "distances":
        d_s = float(header.get("d_s", 0.5))
        safety = monitors.monitor_safety(records, d_s)
        sys.stdout.write(report.distances_csv(safety))
        return EXIT_OK
    # visits: reconstruct the task list and tolerances from the header echo
    tasks = []
    i = 0
    while f"task.{i}" in header:
        tasks.append(tuple(float(c) for c in header[f"task.{i}"].split()))
        i += 1
    eps_v = float(header.get("eps_v", 0.2))
    delta_v = float(header.get("delta_v", 1.0))
    visits = monitors.monitor_visits(records, tasks, eps_v, delta_v)
    sys.stdout.write(report.visits_csv(visits))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "compile": cmd_compile,
        "simulate": cmd_simulate,
        "scaling": cmd_scaling,
        "trace": cmd_trace,
    }[args.command]
    try:
        return handler(args)
    except BrokenPipeError:
        # downstream pager/head closed the pipe; not an error
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
