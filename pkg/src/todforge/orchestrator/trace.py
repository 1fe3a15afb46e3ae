"""Per-request trace records (JSONL) and rebuilding turn outputs from them."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from ..corpus import grammar as g
from ..errors import FormatError, IoError, MissingFile
from ..ingest.bundle import CorpusBundle
from .parsing import parse_tagged
from .runner import TurnOutputs

TRACE_KEYS = ("session", "turn", "tag", "prompt_tokens", "raw", "parsed_ok")
_FIELD = {g.DOMAINS: "domains", g.INTENTS: "intents", g.STATE: "state", g.ACTS: "acts", g.DELEX: "delex", g.RESPONSE: "response"}


def trace_line(record: dict) -> str:
    return json.dumps({k: record[k] for k in TRACE_KEYS}, ensure_ascii=False) + "\n"


def write_trace(records: Iterable[dict], path) -> None:
    try:
        with Path(path).open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(trace_line(rec))
    except OSError as exc:
        raise IoError(f"cannot write trace {path}: {exc}") from exc


def read_trace(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", lineno, path) from None
            if not isinstance(rec, dict) or set(rec) != set(TRACE_KEYS):
                raise FormatError(f"trace record must have exactly the keys {list(TRACE_KEYS)}", lineno, path)
            if rec["tag"] not in _FIELD:
                raise FormatError(f"unknown trace tag {rec['tag']!r}", lineno, path)
            records.append(rec)
    return records


def outputs_from_trace(records: Iterable[dict], bundle: CorpusBundle) -> dict[str, list[TurnOutputs]]:
    """Re-parse the recorded raw completions into per-session turn outputs.

    Turns a session never reached are absent; DB results are not recorded and
    stay None.
    """
    by_turn: dict[str, dict[int, dict[str, tuple[str, bool]]]] = {}
    for rec in records:
        by_turn.setdefault(rec["session"], {}).setdefault(int(rec["turn"]), {})[rec["tag"]] = (
            rec["raw"],
            bool(rec["parsed_ok"]),
        )
    domains = set(bundle.schemas)
    out: dict[str, list[TurnOutputs]] = {}
    for sid, turns in by_turn.items():
        outputs = []
        for t in range(1, max(turns) + 1):
            tags = turns.get(t, {})
            fields = {}
            for tag, (text, _) in tags.items():
                fields[_FIELD[tag]] = parse_tagged(tag, text, bundle.flow.dst_format, domains)[0]
            outputs.append(
                TurnOutputs(
                    **fields,
                    raw={tag: text for tag, (text, _) in tags.items()},
                    parsed_ok={tag: good for tag, (_, good) in tags.items()},
                )
            )
        out[sid] = outputs
    return out
