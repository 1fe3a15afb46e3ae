"""The line-oriented prompt grammar and the canonical serializers for each tag.

Every structure occupies exactly one line, ``TAG: payload\\n``. Parsers for the
same payloads live in :mod:`todforge.orchestrator.parsing`.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from ..core import (
    CONC_RG,
    DELEX_RG,
    DI,
    DST,
    ID,
    SAD,
    ActSet,
    BeliefState,
    DomainSchema,
    IntentSchema,
)

USER = "USER"
DOMAINS = "DOMAINS"
DOMAIN_SCHEMA = "DOMAIN_SCHEMA"
INTENTS = "INTENTS"
INTENT_SCHEMA = "INTENT_SCHEMA"
STATE = "STATE"
DB = "DB"
ACTS = "ACTS"
DELEX = "DELEX"
RESPONSE = "RESPONSE"
INSTRUCTIONS = "INSTRUCTIONS"

LINE_TAGS = (USER, DOMAINS, DOMAIN_SCHEMA, INTENTS, INTENT_SCHEMA, STATE, DB, ACTS, DELEX, RESPONSE)
ALL_TAGS = (INSTRUCTIONS, *LINE_TAGS)
SUPERVISED_TAGS = frozenset({DOMAINS, INTENTS, STATE, ACTS, DELEX, RESPONSE})

TASK_TAG = {DI: DOMAINS, ID: INTENTS, DST: STATE, SAD: ACTS, DELEX_RG: DELEX, CONC_RG: RESPONSE}
TAG_TASK = {v: k for k, v in TASK_TAG.items()}

# Header emitted when older turns were cut from an inference context, so that
# turn indices can still be recovered from the prompt.
OMITTED_PREFIX = "# omitted turns: "


def one_line(text: str) -> str:
    """Payloads never span lines; embedded newlines become spaces."""
    return " ".join(str(text).splitlines()) if ("\n" in text or "\r" in text) else text


def line(tag: str, payload: str) -> str:
    return f"{tag}: {one_line(payload)}\n"


def serialize_domains(domains: Sequence[str]) -> str:
    return json.dumps(list(domains), ensure_ascii=False)


def serialize_intents(intents: Mapping[str, Sequence[str]]) -> str:
    return json.dumps({d: list(v) for d, v in intents.items()}, ensure_ascii=False, sort_keys=True)


def serialize_state(state: BeliefState) -> str:
    return json.dumps(state.to_json(), ensure_ascii=False, sort_keys=True)


def serialize_acts(acts: ActSet) -> str:
    """``[hotel] [recommend] name [inform] type stars``; the domain is written when it changes."""
    parts: list[str] = []
    current = None
    for act in acts.acts:
        if act.domain != current:
            parts.append(f"[{act.domain}]")
            current = act.domain
        parts.append(f"[{act.act}]")
        parts.extend(act.slots)
    return " ".join(parts)


def _compact(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def serialize_domain_schema(schema: DomainSchema) -> str:
    return _compact(
        {
            "domain": schema.domain,
            "intents": list(schema.intents),
            "slots": {name: list(spec.values) for name, spec in schema.slots.items()},
        }
    )


def serialize_intent_schema(schema: IntentSchema) -> str:
    return _compact(
        {
            "domain": schema.domain,
            "intent": schema.intent,
            "optional_slots": list(schema.optional_slots),
            "required_slots": list(schema.required_slots),
            "result_slots": list(schema.result_slots),
        }
    )
