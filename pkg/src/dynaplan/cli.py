"""Command-line interface.

Subcommands:

- ``run``: batch-evaluate a scenario corpus with seeded trials.
- ``serve``: start the episode gateway for consoles and scripts.
- ``scenario validate <file>``: check a scenario file against the schema.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .executor import ExecutorConfig
from .gateway import GatewayConfig, GatewayServer
from .harness import CorpusError, emit_report, load_corpus, run_batch
from .planner import OraclePlanner, RemoteEndpointConfig, RemotePlanner
from .scenarios import ScenarioError, builtin_corpus, parse_scenario


def _add_remote_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--remote-url", help="base URL of a chat-completions endpoint")
    parser.add_argument("--model", default="vlp-policy-model", help="remote model name")
    parser.add_argument("--timeout", type=float, default=30.0, help="per-request timeout (s)")
    parser.add_argument("--max-retries", type=int, default=2, help="retries after the first attempt")
    parser.add_argument("--temperature", type=float, default=0.0)


def _remote_config(args: argparse.Namespace) -> RemoteEndpointConfig | None:
    if not args.remote_url:
        return None
    return RemoteEndpointConfig(
        base_url=args.remote_url,
        model_name=args.model,
        timeout=args.timeout,
        max_retries=args.max_retries,
        temperature=args.temperature,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynaplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a seeded evaluation batch")
    run_p.add_argument("--corpus", help="directory of scenario JSON files (default: built-in corpus)")
    run_p.add_argument("--planner", choices=["oracle", "remote"], default="oracle")
    run_p.add_argument("--trials", type=int, default=20, help="trials per scenario")
    run_p.add_argument("--seed", type=int, default=0, help="base seed; trials use seed..seed+N-1")
    run_p.add_argument("--format", choices=["json", "csv", "table"], default="table")
    run_p.add_argument("--out", help="write the report to this path instead of stdout")
    run_p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    _add_remote_flags(run_p)

    serve_p = sub.add_parser("serve", help="start the episode gateway")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8089)
    serve_p.add_argument("--scenarios", help="directory of extra scenario JSON files")
    serve_p.add_argument("--episode-limit", type=int, default=4)
    serve_p.add_argument("--embodiment", default="quadruped_manipulator", help="default catalog embodiment")
    serve_p.add_argument(
        "--step-delay",
        type=float,
        default=0.4,
        help="pause between steps so live episodes are watchable (s)",
    )
    _add_remote_flags(serve_p)

    scenario_p = sub.add_parser("scenario", help="scenario file tools")
    scenario_sub = scenario_p.add_subparsers(dest="scenario_command", required=True)
    validate_p = scenario_sub.add_parser("validate", help="validate a scenario file")
    validate_p.add_argument("file", help="scenario JSON file")

    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus) if args.corpus else builtin_corpus()
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return 2
    if args.planner == "remote":
        remote = _remote_config(args)
        if remote is None:
            print("--remote-url is required with --planner remote", file=sys.stderr)
            return 2
        planner = RemotePlanner(remote)
    else:
        planner = OraclePlanner()
    try:
        report = run_batch(
            corpus,
            planner,
            trials_per_scenario=args.trials,
            base_seed=args.seed,
            workers=max(1, args.workers),
        )
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return 2
    rendered = emit_report(report, format=args.format)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"wrote {args.format} report to {args.out}")
    else:
        sys.stdout.write(rendered)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    extra = ()
    if args.scenarios:
        try:
            extra = load_corpus(args.scenarios)
        except CorpusError as exc:
            print(f"corpus error: {exc}", file=sys.stderr)
            return 2
    config = GatewayConfig(
        host=args.host,
        port=args.port,
        episode_limit=args.episode_limit,
        default_embodiment=args.embodiment,
        remote=_remote_config(args),
        executor=ExecutorConfig(step_delay=max(0.0, args.step_delay)),
        extra_scenarios=tuple(extra),
    )
    server = GatewayServer(config)
    host, port = server.address
    print(f"dynaplan gateway listening on http://{host}:{port}")
    print(f"scenarios: {len(server.manager.scenarios)}; episode limit: {config.episode_limit}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("\nshutting down")
    return 0


def _cmd_scenario_validate(args: argparse.Namespace) -> int:
    path = Path(args.file)
    if not path.is_file():
        print(f"no such file: {path}", file=sys.stderr)
        return 2
    try:
        scenario = parse_scenario(path.read_text(encoding="utf-8"))
    except ScenarioError as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print(
        f"OK: scenario {scenario.id!r} ({scenario.family}), embodiment {scenario.embodiment}, "
        f"{len(scenario.objects)} objects, {len(scenario.scripted_events)} scripted events"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "scenario":
        return _cmd_scenario_validate(args)
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
