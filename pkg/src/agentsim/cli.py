"""Command line: run, validate, replay, render, scenario, agent."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import socket
import sys
from pathlib import Path

from . import scenarios
from .server import ConfigDiagnostics, ReplayRefused, dump_config, load_config, replay, run
from .server.render import render_trace
from .server.wire import AgentClient, ProtocolError, accept_agents

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


def _load(path: str):
    try:
        return load_config(path)
    except ConfigDiagnostics as exc:
        for d in exc.diagnostics:
            print(f"{path}:{d}", file=sys.stderr)
        return None


def _value(raw: str):
    """CLI parameter text to a Python value: int, float, bool, comma tuple, or str."""
    if "," in raw:
        return tuple(_value(x) for x in raw.split(","))
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    for kind in (int, float):
        try:
            return kind(raw)
        except ValueError:
            pass
    return raw


def _overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        out[key] = _value(raw)
    return out


def _trace(args, log_path) -> None:
    if not args.trace:
        return
    if log_path is None:
        raise SystemExit("--trace needs --log")
    text = Path(log_path).read_text(encoding="utf-8")
    paths = render_trace(text, args.trace, every=None if args.overview else args.every)
    print(f"wrote {len(paths)} SVG file(s) to {args.trace}")


def _summary(report) -> None:
    print(f"{report.reason} after {report.ticks} ticks, checksum {report.checksum:016x}")
    if report.metrics:
        print(json.dumps(report.metrics, sort_keys=True, default=str))


def cmd_run(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_FAIL
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.ticks is not None:
        changes["max_ticks"] = args.ticks
    if changes:
        config = dataclasses.replace(config, **changes)
    remote = None
    if args.remote:
        with socket.create_server((args.host, args.port)) as listener:
            print(f"waiting for {', '.join(args.remote)} on {args.host}:{listener.getsockname()[1]}", flush=True)
            remote = accept_agents(listener, config, args.remote, timeout=args.wait)
    report = run(config, args.log, remote=remote)
    _summary(report)
    _trace(args, args.log)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_FAIL
    print(f"{args.config}: ok ({len(config.agents)} agents, scenario {config.scenario.name})")
    return EXIT_OK


def cmd_replay(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_FAIL
    text = Path(args.log).read_text(encoding="utf-8")
    try:
        verdict = replay(text, config)
    except ReplayRefused as exc:
        print(f"replay refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    line = f"{verdict.status}: last verified tick {verdict.last_verified}"
    if verdict.first_divergence is not None:
        line += f", first divergence at tick {verdict.first_divergence}"
    if verdict.detail:
        line += f" ({verdict.detail})"
    print(line)
    return {"PASS": EXIT_OK, "PARTIAL": EXIT_PARTIAL}.get(verdict.status, EXIT_FAIL)


def cmd_render(args) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    paths = render_trace(text, args.out, every=None if args.overview else args.every)
    print(f"wrote {len(paths)} SVG file(s) to {args.out}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    try:
        defn = scenarios.get(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_USAGE
    try:
        config = defn.build(args.seed, **_overrides(args.set))
    except (TypeError, ValueError) as exc:
        print(f"{args.name}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        Path(args.output).write_text(dump_config(config), encoding="utf-8")
        print(f"wrote {args.output}")
        return EXIT_OK
    report = run(config, args.log)
    _summary(report)
    _trace(args, args.log)
    return EXIT_OK


def cmd_agent(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_FAIL
    client = AgentClient(config, args.name)
    try:
        client.connect(args.host, args.port)
    except (OSError, ProtocolError) as exc:
        print(f"cannot attach {args.name}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    served = client.serve()
    print(f"{args.name}: served {served} ticks")
    return EXIT_OK


def _trace_options(p) -> None:
    p.add_argument("--trace", metavar="DIR", help="write SVG traces here (needs --log)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--every", type=int, default=None, metavar="N", help="one frame every N ticks")
    g.add_argument("--overview", action="store_true", help="one document for the whole run (default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentsim", description="Tick-based multi-agent environment simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a run configuration")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int, help="override max_ticks")
    p.add_argument("--log", help="write the run log here")
    p.add_argument("--remote", nargs="+", metavar="NAME", help="agents that attach over the network")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--wait", type=float, default=60.0, help="seconds to wait for remote agents")
    _trace_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a configuration and report every problem")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-run a log against its configuration")
    p.add_argument("log")
    p.add_argument("config")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("render", help="draw SVG traces from a log")
    p.add_argument("log")
    p.add_argument("--out", default="trace", metavar="DIR")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--every", type=int, default=None, metavar="N")
    g.add_argument("--overview", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("scenario", help="build (and run) a bundled experiment")
    p.add_argument("name", help="chase, maze, mushrooms, circle or chain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="scenario parameter")
    p.add_argument("-o", "--output", help="write the configuration XML instead of running")
    p.add_argument("--log")
    _trace_options(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("agent", help="run one agent of a configuration against a remote server")
    p.add_argument("config")
    p.add_argument("--name", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.set_defaults(func=cmd_agent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "every", None) is not None and args.every < 1:
        print("--every must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
