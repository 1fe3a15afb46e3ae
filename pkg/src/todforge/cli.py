"""``todforge`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend failure.

A ``--config`` file (TOML or JSON) supplies flag values by destination name,
e.g. ``max_len = 2048``. Top-level keys apply to every subcommand; a table
named after a subcommand (``[run]``) applies to that one only. Flags given on
the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .backend import ENDPOINT_ENV, GoldEchoBackend, HttpBackend, ScriptedBackend
from .core import get_tokenizer
from .corpus import corpus_stats, read_corpus, serialize_session, write_corpus
from .corpus.instructions import render_instructions
from .corpus.serialize import SchemaBlocks
from .errors import BackendError, DataError
from .evaluator import average_reports, evaluate
from .ingest import FIXTURE_DOMAINS, read_bundle, synth_fixtures, write_bundle
from .orchestrator import GENERATED, GOLD, OracleMode, RunConfig, outputs_from_trace, read_trace, run_sessions, run_turn, write_trace
from .orchestrator.context import assemble, history_to_keep

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _window(text: str) -> int | None:
    if text.lower() in ("inf", "none", "unbounded"):
        return None
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("schema window must be >= 0 or 'inf'")
    return value


def _oracle_choice(text: str) -> str:
    mapping = {"gold": GOLD, "gen": GENERATED, "generated": GENERATED}
    if text not in mapping:
        raise argparse.ArgumentTypeError("expected gold or gen")
    return mapping[text]


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="TOML or JSON file with flag values")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    return p


def _corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-len", type=int, default=4096)
    p.add_argument("--schema-window", type=_window, default=15, help="integer or 'inf'")
    p.add_argument("--no-schema", action="store_true", help="omit schema lines entirely")
    p.add_argument("--no-instructions", action="store_true", help="omit the instruction block")
    p.add_argument("--entry-limit", type=int, default=1, help="DB records shown per domain")
    p.add_argument("--tokenizer", default="bytes4", choices=["bytes4", "words"])


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="todforge", parents=[common], description="Task-oriented dialogue corpus and evaluation tool")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fixtures", parents=[common], help="write a synthetic bundle")
    p.add_argument("--n", type=int, default=25, help="number of sessions")
    p.add_argument("--out", required=True)
    p.add_argument("--min-turns", type=int, default=2)
    p.add_argument("--max-turns", type=int, default=6)
    p.add_argument("--domains", nargs="+", default=list(FIXTURE_DOMAINS), choices=list(FIXTURE_DOMAINS))
    p.add_argument("--entry-limit", type=int, default=1)

    p = sub.add_parser("build-corpus", parents=[common], help="bundle -> training corpus JSONL")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _corpus_flags(p)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics")
    p.add_argument("corpus")
    p.add_argument("--tokenizer", default="bytes4", choices=["bytes4", "words"])

    for name, help_text in (("run", "end-to-end inference over a bundle"), ("chat", "interactive task-flow REPL")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("bundle")
        _corpus_flags(p)
        p.add_argument("--backend", choices=["http", "gold", "scripted"], default="http" if name == "chat" else "gold")
        p.add_argument("--endpoint", default=None, help=f"server base URL (env {ENDPOINT_ENV} wins)")
        p.add_argument("--model", default="todforge")
        p.add_argument("--api-key", default=None)
        p.add_argument("--timeout-ms", type=int, default=60_000)
        p.add_argument("--max-in-flight", type=int, default=8)
        p.add_argument("--retries", type=int, default=3)
        p.add_argument("--script", default=None, help="JSON array of completions for the scripted backend")
        p.add_argument("--history-ratio", type=float, default=0.75)
        p.add_argument("--max-history-turns", type=int, default=None)
        p.add_argument("--context-belief", type=_oracle_choice, default=GENERATED, help="gold or gen")
        p.add_argument("--current-belief", type=_oracle_choice, default=GENERATED, help="gold or gen")
        p.add_argument("--context-responses", type=_oracle_choice, default=GENERATED, help="gold or gen")
        if name == "run":
            p.add_argument("--trace", default="trace.jsonl")
            p.add_argument("--runs", type=int, default=1)
            p.add_argument("--parallel", type=int, default=1)
            p.add_argument("--limit", type=int, default=None, help="only the first N sessions")
        else:
            p.add_argument("--session", default=None, help="session id for the gold backend")

    p = sub.add_parser("eval", parents=[common], help="score traces against a bundle")
    p.add_argument("bundle")
    p.add_argument("--trace", nargs="+", default=["trace.jsonl"])
    p.add_argument("--sentence-bleu", action="store_true", help="mean smoothed sentence BLEU (debugging)")
    return parser


def _load_config(path: str) -> dict:
    file = Path(path)
    if not file.is_file():
        raise DataError(f"missing config file: {file}")
    text = file.read_text(encoding="utf-8")
    try:
        if file.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise DataError(f"{file}: {exc}") from None
    if not isinstance(data, dict):
        raise DataError(f"{file}: config must be a table/object")
    return data


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = getattr(args, "config", None)
    if config_path is None:
        return args
    data = _load_config(config_path)
    subs = parser._subparsers._group_actions[0].choices
    sub = subs[args.command]
    known = {a.dest for a in sub._actions}
    anywhere = {a.dest for p in subs.values() for a in p._actions}
    shared = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    table = data.get(args.command, {})
    if not isinstance(table, dict):
        raise DataError(f"{config_path}: [{args.command}] must be a table")
    scoped = {k.replace("-", "_"): v for k, v in table.items()}
    # top-level keys may target other subcommands; only names no subcommand knows are errors
    unknown = sorted((set(shared) - anywhere) | (set(scoped) - known))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    values = {k: v for k, v in shared.items() if k in known}
    values.update(scoped)
    values.pop("config", None)
    for action in sub._actions:
        if action.dest in values and action.type is not None and isinstance(values[action.dest], str):
            values[action.dest] = action.type(values[action.dest])
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _emit(args, payload, table: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=False))
    else:
        print(table)


# ---------------------------------------------------------------------------
# commands


def cmd_fixtures(args) -> int:
    bundle = synth_fixtures(
        args.n,
        getattr(args, "seed", 0),
        min_turns=args.min_turns,
        max_turns=args.max_turns,
        domains=args.domains,
        entry_limit=args.entry_limit,
    )
    write_bundle(bundle, args.out)
    turns = sum(len(s.turns) for s in bundle.sessions)
    _emit(args, {"sessions": len(bundle.sessions), "turns": turns, "out": args.out},
          f"wrote {len(bundle.sessions)} sessions ({turns} turns) to {args.out}")
    return EXIT_OK


def cmd_build_corpus(args) -> int:
    bundle = read_bundle(args.bundle)
    tok = get_tokenizer(args.tokenizer)
    samples = []
    for session in bundle.sessions:
        samples += serialize_session(
            session,
            bundle.flow,
            bundle.schemas,
            bundle.intent_schemas,
            args.schema_window,
            tok,
            args.max_len,
            entry_limit=args.entry_limit,
            include_schemas=not args.no_schema,
            include_instructions=not args.no_instructions,
        )
    write_corpus(samples, args.out)
    stats = corpus_stats(samples, tok)
    _emit(args, stats.to_json(), f"wrote {len(samples)} samples to {args.out}\n{stats.render_table()}")
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = corpus_stats(read_corpus(args.corpus), get_tokenizer(args.tokenizer))
    _emit(args, stats.to_json(), stats.render_table())
    return EXIT_OK


def _run_config(args) -> RunConfig:
    return RunConfig(
        max_len=args.max_len,
        history_budget_ratio=args.history_ratio,
        max_history_turns=args.max_history_turns,
        schema_window=args.schema_window,
        entry_limit=args.entry_limit,
        oracle=OracleMode(args.context_belief, args.current_belief, args.context_responses),
        include_schemas=not args.no_schema,
        include_instructions=not args.no_instructions,
        tokenizer=get_tokenizer(args.tokenizer),
    )


def _script(args) -> list[str]:
    if not args.script:
        raise UsageError("--backend scripted needs --script FILE")
    path = Path(args.script)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise DataError(f"{path}: script must be a JSON array of strings")
    return data


def _http(args) -> HttpBackend:
    try:
        return HttpBackend.from_env(
            args.model,
            args.endpoint,
            timeout_ms=args.timeout_ms,
            max_in_flight=args.max_in_flight,
            retries=args.retries,
            api_key=args.api_key,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _trace_paths(base: str, runs: int) -> list[Path]:
    path = Path(base)
    if runs == 1:
        return [path]
    return [path.with_name(f"{path.stem}.{i}{path.suffix}") for i in range(1, runs + 1)]


def cmd_run(args) -> int:
    if args.runs < 1 or args.parallel < 1:
        raise UsageError("--runs and --parallel must be >= 1")
    bundle = read_bundle(args.bundle)
    config = _run_config(args)
    sessions = bundle.sessions[: args.limit] if args.limit is not None else bundle.sessions
    if args.backend == "scripted" and args.parallel > 1:
        raise UsageError("the scripted backend replays one queue and cannot run in parallel")

    failed = []
    summary = []
    for path in _trace_paths(args.trace, args.runs):
        if args.backend == "gold":
            backend_for = GoldEchoBackend
        elif args.backend == "scripted":
            shared = ScriptedBackend(_script(args))
            backend_for = lambda _s, b=shared: b  # noqa: E731
        else:
            http = _http(args)
            backend_for = lambda _s, b=http: b  # noqa: E731
        runs = run_sessions(sessions, bundle, backend_for, config, args.parallel)
        write_trace((rec for r in runs for rec in r.trace), path)
        failed += [r for r in runs if r.error is not None]
        summary.append(
            {
                "trace": str(path),
                "sessions": len(runs),
                "turns": sum(len(r.outputs) for r in runs),
                "requests": sum(len(r.trace) for r in runs),
                "aborted": sum(r.error is not None for r in runs),
            }
        )
    lines = [f"{s['trace']}: {s['sessions']} sessions, {s['turns']} turns, {s['requests']} requests" for s in summary]
    _emit(args, summary if len(summary) > 1 else summary[0], "\n".join(lines))
    for r in failed:
        print(f"todforge: {r.error}", file=sys.stderr)
    return EXIT_BACKEND if failed else EXIT_OK


def cmd_eval(args) -> int:
    bundle = read_bundle(args.bundle)
    reports = [evaluate(bundle, outputs_from_trace(read_trace(t), bundle), sentence_bleu=args.sentence_bleu) for t in args.trace]
    report = reports[0] if len(reports) == 1 else average_reports(reports)
    _emit(args, report.to_json(), report.render_table())
    return EXIT_OK


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    bundle = read_bundle(args.bundle)
    config = _run_config(args)
    if args.backend == "gold":
        if not args.session:
            raise UsageError("--backend gold needs --session ID")
        try:
            backend = GoldEchoBackend(bundle.session(args.session))
        except KeyError:
            raise DataError(f"no session {args.session!r} in bundle") from None
    elif args.backend == "scripted":
        backend = ScriptedBackend(_script(args))
    else:
        backend = _http(args)

    flow = bundle.flow
    instructions = render_instructions(flow, sorted(bundle.schemas)).render() if config.include_instructions else ""
    blocks = SchemaBlocks(bundle.schemas, bundle.intent_schemas, config.schema_window, config.include_schemas)
    renderings: list[str] = []
    print("type a user message; an empty line or EOF quits", file=stdout)
    for raw in stdin:
        utterance = raw.strip()
        if not utterance:
            break
        keep = history_to_keep(
            renderings, instructions, config.tokenizer, config.max_len, config.history_budget_ratio, config.max_history_turns
        )
        out = run_turn(assemble(renderings, instructions, keep), utterance, flow, backend, bundle, config, blocks=blocks)
        for tag, text in out.lines[1:]:
            print(f"{tag}: {text}", file=stdout)
        renderings.append("".join(f"{tag}: {text}\n" for tag, text in out.lines))
    return EXIT_OK


COMMANDS = {
    "fixtures": cmd_fixtures,
    "build-corpus": cmd_build_corpus,
    "stats": cmd_stats,
    "run": cmd_run,
    "eval": cmd_eval,
    "chat": cmd_chat,
}


def run_command(argv: Sequence[str]) -> int:
    try:
        args = parse_args(list(argv))
        return COMMANDS[args.command](args)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"todforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"todforge: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"todforge: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ValueError as exc:
        print(f"todforge: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
