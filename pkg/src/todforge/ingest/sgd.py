"""Adapter for Schema-Guided-Dialogue style raw files.

Expected layout (a subset of the public SGD release):

dialogue file
    JSON array of ``{"dialogue_id", "services", "turns": [...]}``. Turns
    alternate ``speaker`` USER / SYSTEM. Each turn has ``utterance`` and
    ``frames``: ``{"service", "slots": [{"slot", "start", "exclusive_end"}],
    "actions": [{"act", "slot", "values"}], "state": {"active_intent",
    "slot_values": {slot: [values]}}}`` (state on user frames only), and on
    system frames optionally ``service_results``: list of flat records.

schema file
    JSON array of ``{"service_name", "slots": [{"name", "is_categorical",
    "possible_values"}], "intents": [{"name", "required_slots",
    "optional_slots": {slot: default}, "result_slots"}]}``.

Each USER turn and the SYSTEM turn after it become one canonical turn. The
service name is the domain. Gold DB results come from ``service_results``;
the bundle's tables are the union of all results seen per service, with
missing attributes filled by ``""``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from ..core import (
    SGD_FLOW,
    Act,
    ActSet,
    BeliefState,
    DialogueSession,
    DomainSchema,
    IntentSchema,
    SlotSpec,
    Turn,
    normalize_value,
    placeholder,
)
from ..dbengine import DEFAULT_ENTRY_LIMIT, db_result
from ..errors import FormatError, MissingFile, SchemaViolation
from .bundle import CorpusBundle, validate_bundle


def _load(path) -> object:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, exc.lineno, path) from None


def _schemas(raw) -> tuple[dict[str, DomainSchema], dict[str, IntentSchema]]:
    if not isinstance(raw, list):
        raise FormatError("schema file must hold a JSON array of services")
    schemas: dict[str, DomainSchema] = {}
    intents: dict[str, IntentSchema] = {}
    for service in raw:
        try:
            name = service["service_name"]
            raw_intents = service.get("intents", [])
            informable = set()
            requestable = set()
            for it in raw_intents:
                informable.update(it.get("required_slots", []))
                informable.update(it.get("optional_slots", {}))
                requestable.update(it.get("result_slots", []))
            slots = {}
            for slot in service.get("slots", []):
                values = list(dict.fromkeys(normalize_value(v) for v in slot.get("possible_values", [])))
                slots[slot["name"]] = SlotSpec(
                    slot["name"],
                    tuple(v for v in values if v),
                    informable=slot["name"] in informable,
                    requestable=slot["name"] in requestable or slot["name"] not in informable,
                )
            schemas[name] = DomainSchema(name, slots, tuple(it["name"] for it in raw_intents))
            for it in raw_intents:
                schema = IntentSchema(
                    it["name"],
                    name,
                    tuple(it.get("required_slots", [])),
                    tuple(s for s in it.get("optional_slots", {}) if s not in it.get("required_slots", [])),
                    tuple(it.get("result_slots", [])),
                )
                schema.check_against(schemas[name])
                key = it["name"] if it["name"] not in intents else f"{name}.{it['name']}"
                intents[key] = schema
        except (KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"bad service entry: {exc!r}") from None
    return schemas, intents


def _check_slot(schemas, dialogue_id, service, slot, what):
    if service not in schemas:
        raise SchemaViolation(dialogue_id, f"{what} references undeclared service {service!r}")
    if slot and slot not in schemas[service].slots:
        raise SchemaViolation(dialogue_id, f"{what} references undeclared slot {service}.{slot}")


def _delexicalize(utterance: str, frames) -> str:
    spans = []
    for frame in frames:
        for s in frame.get("slots", []):
            if "start" in s and "exclusive_end" in s:
                spans.append((s["start"], s["exclusive_end"], s["slot"]))
    out = utterance
    for start, end, slot in sorted(spans, reverse=True):
        out = out[:start] + placeholder(slot) + out[end:]
    return out


def adapt_schema_guided(
    raw_dialogue_file, raw_schema_file, *, dataset: str = "sgd", entry_limit: int = DEFAULT_ENTRY_LIMIT
) -> CorpusBundle:
    schemas, intent_schemas = _schemas(_load(raw_schema_file))
    raw = _load(raw_dialogue_file)
    if not isinstance(raw, list):
        raise FormatError("dialogue file must hold a JSON array of dialogues")

    tables: dict[str, list[dict]] = {}
    sessions = []
    for dlg in raw:
        try:
            sessions.append(_dialogue(dlg, schemas, tables, dataset, entry_limit))
        except (KeyError, TypeError, AttributeError, IndexError) as exc:
            raise FormatError(f"bad dialogue {dlg.get('dialogue_id') if isinstance(dlg, dict) else '?'}: {exc!r}") from None

    databases = {}
    for service, rows in tables.items():
        keys = sorted({k for r in rows for k in r})
        unique = list(dict.fromkeys(json.dumps({k: r.get(k, "") for k in keys}, sort_keys=True) for r in rows))
        databases[service] = tuple(json.loads(u) for u in unique)
    bundle = CorpusBundle(tuple(sessions), schemas, intent_schemas, databases, SGD_FLOW)
    validate_bundle(bundle)
    return bundle


def _dialogue(dlg: Mapping, schemas, tables, dataset: str, entry_limit: int) -> DialogueSession:
    did = str(dlg["dialogue_id"])
    raw_turns = dlg["turns"]
    turns = []
    i = 0
    while i < len(raw_turns):
        user_turn = raw_turns[i]
        if user_turn["speaker"] != "USER":
            raise FormatError(f"dialogue {did}: turn {i} should be spoken by USER")
        system_turn = raw_turns[i + 1] if i + 1 < len(raw_turns) and raw_turns[i + 1]["speaker"] == "SYSTEM" else None
        i += 2 if system_turn is not None else 1

        domains, intents, state = [], {}, {}
        for frame in user_turn.get("frames", []):
            service = frame["service"]
            _check_slot(schemas, did, service, None, "user frame")
            domains.append(service)
            fstate = frame.get("state", {})
            active = fstate.get("active_intent", "NONE")
            if active and active != "NONE":
                intents.setdefault(service, []).append(active)
            for slot, values in fstate.get("slot_values", {}).items():
                _check_slot(schemas, did, service, slot, "user state")
                if values:
                    state.setdefault(service, {})[slot] = values[0]
            for s in frame.get("slots", []):
                _check_slot(schemas, did, service, s["slot"], "user span")

        acts, results = [], {}
        delex = response = None
        if system_turn is not None:
            for frame in system_turn.get("frames", []):
                service = frame["service"]
                grouped: dict[str, list[str]] = {}
                for action in frame.get("actions", []):
                    slot = action.get("slot", "")
                    _check_slot(schemas, did, service, slot, "system action")
                    grouped.setdefault(action["act"].lower(), [])
                    if slot and slot not in grouped[action["act"].lower()]:
                        grouped[action["act"].lower()].append(slot)
                acts += [Act(service, act, tuple(slots)) for act, slots in grouped.items()]
                for s in frame.get("slots", []):
                    _check_slot(schemas, did, service, s["slot"], "system span")
                if "service_results" in frame:
                    rows = [{k: str(v) for k, v in r.items()} for r in frame["service_results"]]
                    results[service] = rows
                    tables.setdefault(service, []).extend(rows)
            response = system_turn["utterance"]
            delex = _delexicalize(response, system_turn.get("frames", []))

        turns.append(
            Turn(
                user=user_turn["utterance"],
                domains=tuple(dict.fromkeys(domains)),
                intents=intents,
                state=BeliefState(state),
                db=db_result(results, entry_limit),
                acts=ActSet(tuple(acts)),
                delex=delex,
                response=response,
            )
        )
    return DialogueSession(did, dataset, tuple(turns))
