"""Canonical on-disk bundle: a directory of UTF-8 JSON files.

Layout::

    sessions.jsonl    one session object per line
    schemas.json      {"<domain>": {"slots": {...}, "intents": [...]}}
    intents.json      {"<intent>": {"domain", "required_slots", "optional_slots", "result_slots"}}
    db/<domain>.json  array of flat string-valued records
    flow.json         {"tasks": [...], "dst_format": "plain" | "relational"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

from ..core import (
    MULTIWOZ_FLOW,
    ActSet,
    BeliefState,
    DbResult,
    DialogueSession,
    DomainGoal,
    DomainSchema,
    Goal,
    IntentSchema,
    SlotSpec,
    TaskFlowSpec,
    Turn,
)
from ..dbengine import DbTable
from ..errors import FormatError, IoError, MissingFile, SchemaViolation


@dataclass(frozen=True)
class CorpusBundle:
    sessions: tuple[DialogueSession, ...] = ()
    schemas: Mapping[str, DomainSchema] = field(default_factory=dict)
    intent_schemas: Mapping[str, IntentSchema] = field(default_factory=dict)
    databases: Mapping[str, tuple[Mapping[str, str], ...]] = field(default_factory=dict)
    flow: TaskFlowSpec = MULTIWOZ_FLOW

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        object.__setattr__(self, "schemas", dict(self.schemas))
        object.__setattr__(self, "intent_schemas", dict(self.intent_schemas))
        object.__setattr__(
            self, "databases", {d: tuple(dict(r) for r in rows) for d, rows in self.databases.items()}
        )

    @cached_property
    def tables(self) -> dict[str, DbTable]:
        return {d: DbTable(d, rows) for d, rows in self.databases.items()}

    def session(self, session_id: str) -> DialogueSession:
        for s in self.sessions:
            if s.id == session_id:
                return s
        raise KeyError(session_id)


# ---------------------------------------------------------------------------
# JSON <-> objects


def acts_from_text(text: str, domains=None) -> ActSet:
    from ..orchestrator.parsing import parse_acts_strict

    return parse_acts_strict(text, domains)


def turn_to_json(turn: Turn) -> dict:
    from ..corpus.grammar import serialize_acts

    obj: dict = {"user": turn.user}
    if turn.domains is not None:
        obj["domains"] = list(turn.domains)
    if turn.intents is not None:
        obj["intents"] = {d: list(v) for d, v in turn.intents.items()}
    if turn.state is not None:
        obj["state"] = turn.state.to_json()
    if turn.db is not None:
        obj["db"] = turn.db.to_json()
    if turn.acts is not None:
        obj["acts"] = serialize_acts(turn.acts)
    if turn.delex is not None:
        obj["delex"] = turn.delex
    if turn.response is not None:
        obj["response"] = turn.response
    return obj


def turn_from_json(obj: Mapping, relational: bool, domains=None) -> Turn:
    return Turn(
        user=obj["user"],
        domains=obj.get("domains"),
        intents=obj.get("intents"),
        state=BeliefState.from_json(obj["state"], relational) if "state" in obj else None,
        db=DbResult.from_json(obj["db"]) if "db" in obj else None,
        acts=acts_from_text(obj["acts"], domains) if "acts" in obj else None,
        delex=obj.get("delex"),
        response=obj.get("response"),
    )


def goal_to_json(goal: Goal) -> dict:
    return {
        d: {"constraints": dict(g.constraints), "requestables": list(g.requestables), "requires_venue": g.requires_venue}
        for d, g in goal.domains.items()
    }


def goal_from_json(obj: Mapping) -> Goal:
    return Goal(
        {
            d: DomainGoal(g.get("constraints", {}), g.get("requestables", ()), bool(g.get("requires_venue", True)))
            for d, g in obj.items()
        }
    )


def session_to_json(session: DialogueSession) -> dict:
    obj = {"id": session.id, "dataset": session.dataset, "turns": [turn_to_json(t) for t in session.turns]}
    if session.goal is not None:
        obj["goal"] = goal_to_json(session.goal)
    return obj


def session_from_json(obj: Mapping, relational: bool = False, domains=None) -> DialogueSession:
    goal = goal_from_json(obj["goal"]) if obj.get("goal") is not None else None
    return DialogueSession(
        str(obj["id"]), str(obj.get("dataset", "")), tuple(turn_from_json(t, relational, domains) for t in obj["turns"]), goal
    )


def schema_to_json(schema: DomainSchema) -> dict:
    return {
        "slots": {
            n: {"values": list(s.values), "informable": s.informable, "requestable": s.requestable}
            for n, s in schema.slots.items()
        },
        "intents": list(schema.intents),
    }


def schema_from_json(domain: str, obj: Mapping) -> DomainSchema:
    slots = {
        n: SlotSpec(n, tuple(s.get("values", ())), bool(s.get("informable", True)), bool(s.get("requestable", False)))
        for n, s in obj.get("slots", {}).items()
    }
    return DomainSchema(domain, slots, tuple(obj.get("intents", ())))


def intent_to_json(schema: IntentSchema) -> dict:
    return {
        "intent": schema.intent,
        "domain": schema.domain,
        "required_slots": list(schema.required_slots),
        "optional_slots": list(schema.optional_slots),
        "result_slots": list(schema.result_slots),
    }


def intent_from_json(key: str, obj: Mapping) -> IntentSchema:
    return IntentSchema(
        obj.get("intent", key),
        obj["domain"],
        tuple(obj.get("required_slots", ())),
        tuple(obj.get("optional_slots", ())),
        tuple(obj.get("result_slots", ())),
    )


def flow_to_json(flow: TaskFlowSpec) -> dict:
    return {"tasks": list(flow.tasks), "dst_format": flow.dst_format}


def flow_from_json(obj: Mapping) -> TaskFlowSpec:
    return TaskFlowSpec(tuple(obj["tasks"]), obj.get("dst_format", "plain"))


# ---------------------------------------------------------------------------
# validation


def validate_bundle(bundle: CorpusBundle) -> None:
    """Raise :class:`SchemaViolation` on the first inconsistency found."""
    for key, intent in bundle.intent_schemas.items():
        owner = bundle.schemas.get(intent.domain)
        if owner is None:
            raise SchemaViolation(None, f"intent {key} belongs to unknown domain {intent.domain!r}")
        intent.check_against(owner)
        if intent.intent not in owner.intents:
            raise SchemaViolation(None, f"intent {intent.intent} missing from domain {intent.domain} intent list")
    for domain, rows in bundle.databases.items():
        if domain not in bundle.schemas:
            raise SchemaViolation(None, f"database for unknown domain {domain!r}")
        try:
            DbTable(domain, rows)
        except ValueError as exc:
            raise SchemaViolation(None, str(exc)) from None

    seen: set[str] = set()
    for session in bundle.sessions:
        if session.id in seen:
            raise SchemaViolation(session.id, "duplicate session id")
        seen.add(session.id)
        _validate_session(session, bundle.schemas)


def _validate_session(session: DialogueSession, schemas: Mapping[str, DomainSchema]) -> None:
    def known(domain: str, where: str) -> DomainSchema:
        if domain not in schemas:
            raise SchemaViolation(session.id, f"{where} references unknown domain {domain!r}")
        return schemas[domain]

    for i, turn in enumerate(session.turns, start=1):
        where = f"turn {i}"
        for d in turn.domains or ():
            known(d, where)
        for d, names in (turn.intents or {}).items():
            schema = known(d, where)
            for name in names:
                if name not in schema.intents:
                    raise SchemaViolation(session.id, f"{where}: intent {name!r} not declared for {d}")
        if turn.state is not None:
            for d in turn.state.domains:
                known(d, where)
        if turn.db is not None:
            for d in turn.db.groups:
                known(d, where)
        if turn.acts is not None:
            for act in turn.acts.acts:
                known(act.domain, where)
    if session.goal is not None:
        for d, goal in session.goal.domains.items():
            schema = known(d, "goal")
            for slot in goal.constraints:
                spec = schema.slots.get(slot)
                if spec is None or not spec.informable:
                    raise SchemaViolation(session.id, f"goal constraint {d}.{slot} is not an informable slot")


# ---------------------------------------------------------------------------
# disk


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def write_bundle(bundle: CorpusBundle, path) -> None:
    root = Path(path)
    sessions = sorted(bundle.sessions, key=lambda s: s.id)
    try:
        (root / "db").mkdir(parents=True, exist_ok=True)
        (root / "sessions.jsonl").write_text(
            "".join(json.dumps(session_to_json(s), ensure_ascii=False, sort_keys=True) + "\n" for s in sessions),
            encoding="utf-8",
        )
        (root / "schemas.json").write_text(
            _dump({d: schema_to_json(s) for d, s in bundle.schemas.items()}), encoding="utf-8"
        )
        (root / "intents.json").write_text(
            _dump({k: intent_to_json(s) for k, s in bundle.intent_schemas.items()}), encoding="utf-8"
        )
        (root / "flow.json").write_text(_dump(flow_to_json(bundle.flow)), encoding="utf-8")
        for domain, rows in bundle.databases.items():
            (root / "db" / f"{domain}.json").write_text(_dump([dict(r) for r in rows]), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write bundle to {root}: {exc}") from exc


def _load_json(path: Path):
    if not path.is_file():
        raise MissingFile(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, exc.lineno, path) from None


def read_bundle(path) -> CorpusBundle:
    root = Path(path)
    if not root.is_dir():
        raise MissingFile(root)
    flow_path = root / "flow.json"
    try:
        flow = flow_from_json(_load_json(flow_path)) if flow_path.exists() else MULTIWOZ_FLOW
        schemas = {d: schema_from_json(d, obj) for d, obj in _load_json(root / "schemas.json").items()}
        intents_path = root / "intents.json"
        intents_obj = _load_json(intents_path) if intents_path.exists() else {}
        intent_schemas = {k: intent_from_json(k, obj) for k, obj in intents_obj.items()}
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"bad schema/flow file: {exc}", path=root) from None

    databases = {}
    db_dir = root / "db"
    if db_dir.is_dir():
        for f in sorted(db_dir.glob("*.json")):
            rows = _load_json(f)
            if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
                raise FormatError("database must be a JSON array of objects", path=f)
            databases[f.stem] = tuple({str(k): str(v) for k, v in r.items()} for r in rows)

    sessions_path = root / "sessions.jsonl"
    if not sessions_path.is_file():
        raise MissingFile(sessions_path)
    sessions = []
    with sessions_path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                sessions.append(session_from_json(json.loads(raw), flow.relational, set(schemas)))
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", lineno, sessions_path) from None
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise FormatError(f"bad session record: {exc!r}", lineno, sessions_path) from None

    bundle = CorpusBundle(tuple(sessions), schemas, intent_schemas, databases, flow)
    validate_bundle(bundle)
    return bundle
