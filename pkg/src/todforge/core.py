"""Shared domain types, value normalization and the token-count contract.

Every type here is a frozen dataclass. Containers inside them are built once in
``__post_init__`` and never mutated afterwards, so instances can be shared
between threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Protocol

from .errors import SchemaViolation

# Task identifiers, in the only order a flow may list them.
DI = "DI"
ID = "ID"
DST = "DST"
SAD = "SAD"
DELEX_RG = "DelexRG"
CONC_RG = "ConcRG"
TASKS = (DI, ID, DST, SAD, DELEX_RG, CONC_RG)

PLAIN = "plain"
RELATIONAL = "relational"
DST_FORMATS = (PLAIN, RELATIONAL)

RELATIONS = ("plain", "equal_to", "at_least", "not", "one_of")

DONTCARE = "dontcare"

# Slot whose placeholder marks an offered entity in a delexicalized reply.
DEFAULT_VENUE_SLOT = "name"
VENUE_SLOTS = {"train": "trainid"}


def venue_slot(domain: str, overrides: "Mapping[str, str] | None" = None) -> str:
    table = VENUE_SLOTS if overrides is None else overrides
    return table.get(domain, DEFAULT_VENUE_SLOT)


def placeholder(slot: str) -> str:
    return f"[value_{slot}]"
_DONTCARE_SYNONYMS = {"dont care", "don't care", "do not care"}
_NULL_VALUES = {"", "none", "not mentioned"}
_WS = re.compile(r"\s+")


def normalize_value(raw: str) -> str:
    """Canonical form used for every slot-value comparison.

    >>> normalize_value("  Cheap ")
    'cheap'
    >>> normalize_value("don't care")
    'dontcare'
    >>> normalize_value("not mentioned")
    ''
    """
    text = _WS.sub(" ", str(raw).strip().lower())
    if text in _NULL_VALUES:
        return ""
    if text in _DONTCARE_SYNONYMS:
        return DONTCARE
    return text


# ---------------------------------------------------------------------------
# token counting


class TokenizerContract(Protocol):
    def count(self, text: str) -> int: ...


def default_token_count(text: str) -> int:
    return math.ceil(len(text.encode("utf-8")) / 4)


class DefaultTokenizer:
    """ceil(utf-8 bytes / 4): tokenizer-free and identical on every platform."""

    name = "bytes4"

    def count(self, text: str) -> int:
        return default_token_count(text)


class WhitespaceTokenizer:
    """One token per word or punctuation mark."""

    name = "words"
    _pattern = re.compile(r"\w+|[^\w\s]")

    def count(self, text: str) -> int:
        return len(self._pattern.findall(text))


TOKENIZERS = {DefaultTokenizer.name: DefaultTokenizer, WhitespaceTokenizer.name: WhitespaceTokenizer}


def get_tokenizer(name: str = "bytes4") -> TokenizerContract:
    try:
        return TOKENIZERS[name]()
    except KeyError:
        raise ValueError(f"unknown tokenizer {name!r}; choose from {sorted(TOKENIZERS)}") from None


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class SlotSpec:
    name: str
    values: tuple[str, ...] = ()
    informable: bool = True
    requestable: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("slot name must be nonempty")
        normed = [normalize_value(v) for v in self.values]
        if len(set(normed)) != len(normed):
            raise ValueError(f"slot {self.name}: duplicate values after normalization")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class DomainSchema:
    domain: str
    slots: Mapping[str, SlotSpec]
    intents: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.domain:
            raise ValueError("domain must be nonempty")
        for key, spec in self.slots.items():
            if key != spec.name:
                raise ValueError(f"domain {self.domain}: slot key {key!r} != spec name {spec.name!r}")
        object.__setattr__(self, "slots", dict(self.slots))
        object.__setattr__(self, "intents", tuple(self.intents))

    def informable(self) -> list[str]:
        return [s.name for s in self.slots.values() if s.informable]

    def requestable(self) -> list[str]:
        return [s.name for s in self.slots.values() if s.requestable]


@dataclass(frozen=True)
class IntentSchema:
    intent: str
    domain: str
    required_slots: tuple[str, ...] = ()
    optional_slots: tuple[str, ...] = ()
    result_slots: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("required_slots", "optional_slots", "result_slots"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        overlap = set(self.required_slots) & set(self.optional_slots)
        if overlap:
            raise ValueError(f"intent {self.intent}: slots both required and optional: {sorted(overlap)}")

    def check_against(self, schema: DomainSchema) -> None:
        if schema.domain != self.domain:
            raise SchemaViolation(None, f"intent {self.intent} owned by {self.domain}, checked against {schema.domain}")
        for slot in (*self.required_slots, *self.optional_slots, *self.result_slots):
            if slot not in schema.slots:
                raise SchemaViolation(None, f"intent {self.intent} names unknown slot {self.domain}.{slot}")


def find_intent_schema(
    intent_schemas: Mapping[str, IntentSchema], domain: str, intent: str
) -> IntentSchema | None:
    """Intent schemas are keyed by bare intent name, or ``domain.intent`` on a name clash."""
    for key in (intent, f"{domain}.{intent}"):
        found = intent_schemas.get(key)
        if found is not None and found.domain == domain and found.intent == intent:
            return found
    return None


# ---------------------------------------------------------------------------
# dialogue annotations

_RELATION_RE = re.compile(r"^(equal_to|at_least|not|one_of)\((.*)\)$", re.S)


@dataclass(frozen=True)
class ValueExpr:
    relation: str
    values: tuple[str, ...]

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        values = tuple(self.values)
        if self.relation == "one_of":
            if not values:
                raise ValueError("one_of needs at least one value")
        elif len(values) != 1:
            raise ValueError(f"{self.relation} carries exactly one value, got {len(values)}")
        object.__setattr__(self, "values", values)

    @classmethod
    def plain(cls, value: str) -> "ValueExpr":
        return cls("plain", (value,))

    @property
    def value(self) -> str:
        return self.values[0]

    def to_text(self) -> str:
        if self.relation == "plain":
            return self.values[0]
        return f"{self.relation}({', '.join(self.values)})"

    @classmethod
    def from_text(cls, text: str, relational: bool = False) -> "ValueExpr":
        if relational:
            m = _RELATION_RE.match(text.strip())
            if m:
                rel, inner = m.groups()
                parts = [p.strip() for p in inner.split(",")] if rel == "one_of" else [inner.strip()]
                if all(parts):
                    return cls(rel, tuple(parts))
        return cls.plain(text)

    def normalized(self) -> "ValueExpr | None":
        values = [normalize_value(v) for v in self.values]
        values = [v for v in values if v]
        if not values:
            return None
        if self.relation == "one_of":
            return ValueExpr("one_of", tuple(dict.fromkeys(values)))
        return ValueExpr(self.relation, (values[0],))


def _coerce_expr(value: Any) -> ValueExpr:
    if isinstance(value, ValueExpr):
        return value
    return ValueExpr.plain(str(value))


@dataclass(frozen=True)
class BeliefState:
    """domain -> slot -> ValueExpr, always stored normalized.

    Construction normalizes every value and drops empty slots and domains, so
    ``==`` is exact-match after normalization.
    """

    domains: Mapping[str, Mapping[str, ValueExpr]] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[str, dict[str, ValueExpr]] = {}
        for domain, slots in self.domains.items():
            inner = {}
            for slot, value in slots.items():
                expr = _coerce_expr(value).normalized()
                if expr is not None:
                    inner[slot] = expr
            if inner:
                clean[domain] = inner
        object.__setattr__(self, "domains", clean)

    @classmethod
    def from_json(cls, obj: Mapping[str, Mapping[str, str]], relational: bool = True) -> "BeliefState":
        return cls(
            {
                d: {s: ValueExpr.from_text(str(v), relational) for s, v in slots.items()}
                for d, slots in obj.items()
            }
        )

    def to_json(self) -> dict[str, dict[str, str]]:
        return {d: {s: e.to_text() for s, e in slots.items()} for d, slots in self.domains.items()}

    def constraints(self, domain: str) -> dict[str, ValueExpr]:
        return dict(self.domains.get(domain, {}))

    def is_empty(self) -> bool:
        return not self.domains

    def pairs(self) -> set[tuple[str, str, str]]:
        return {(d, s, e.to_text()) for d, slots in self.domains.items() for s, e in slots.items()}

    def __bool__(self) -> bool:
        return bool(self.domains)


class Act(NamedTuple):
    domain: str
    act: str
    slots: tuple[str, ...] = ()


@dataclass(frozen=True)
class ActSet:
    acts: tuple[Act, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "acts", tuple(Act(a[0], a[1], tuple(a[2])) for a in self.acts))

    def domains(self) -> list[str]:
        return list(dict.fromkeys(a.domain for a in self.acts))

    def __bool__(self) -> bool:
        return bool(self.acts)

    def __len__(self) -> int:
        return len(self.acts)


@dataclass(frozen=True)
class DbGroup:
    match_count: int
    entries: tuple[Mapping[str, str], ...] = ()

    def __post_init__(self):
        if self.match_count < 0:
            raise ValueError("match_count must be non-negative")
        entries = tuple(dict(e) for e in self.entries)
        if len(entries) > self.match_count:
            raise ValueError("more entries than matches")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class DbResult:
    groups: Mapping[str, DbGroup] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "groups", dict(self.groups))

    def to_json(self) -> dict:
        return {
            d: {"count": g.match_count, "entries": [dict(e) for e in g.entries]}
            for d, g in self.groups.items()
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "DbResult":
        return cls(
            {d: DbGroup(int(g["count"]), tuple(g.get("entries", ()))) for d, g in obj.items()}
        )


@dataclass(frozen=True)
class Turn:
    user: str
    domains: tuple[str, ...] | None = None
    intents: Mapping[str, tuple[str, ...]] | None = None
    state: BeliefState | None = None
    db: DbResult | None = None
    acts: ActSet | None = None
    delex: str | None = None
    response: str | None = None

    def __post_init__(self):
        if not self.user or not self.user.strip():
            raise ValueError("user utterance must be nonempty")
        if self.domains is not None:
            object.__setattr__(self, "domains", tuple(self.domains))
        if self.intents is not None:
            object.__setattr__(self, "intents", {d: tuple(v) for d, v in self.intents.items()})


@dataclass(frozen=True)
class DomainGoal:
    constraints: Mapping[str, str] = field(default_factory=dict)
    requestables: tuple[str, ...] = ()
    requires_venue: bool = True

    def __post_init__(self):
        object.__setattr__(self, "constraints", dict(self.constraints))
        object.__setattr__(self, "requestables", tuple(self.requestables))


@dataclass(frozen=True)
class Goal:
    domains: Mapping[str, DomainGoal] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "domains", dict(self.domains))


@dataclass(frozen=True)
class DialogueSession:
    id: str
    dataset: str
    turns: tuple[Turn, ...]
    goal: Goal | None = None

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.turns:
            raise ValueError(f"session {self.id} has no turns")


@dataclass(frozen=True)
class TaskFlowSpec:
    tasks: tuple[str, ...]
    dst_format: str = PLAIN

    def __post_init__(self):
        tasks = tuple(self.tasks)
        unknown = [t for t in tasks if t not in TASKS]
        if unknown:
            raise ValueError(f"unknown tasks {unknown}")
        if len(set(tasks)) != len(tasks):
            raise ValueError(f"duplicate tasks in flow {tasks}")
        if self.dst_format not in DST_FORMATS:
            raise ValueError(f"unknown dst_format {self.dst_format!r}")
        if self.dst_format == RELATIONAL and DST not in tasks:
            raise ValueError("relational dst_format requires DST in the flow")
        object.__setattr__(self, "tasks", tasks)

    def __contains__(self, task: str) -> bool:
        return task in self.tasks

    @property
    def relational(self) -> bool:
        return self.dst_format == RELATIONAL


MULTIWOZ_FLOW = TaskFlowSpec((DI, DST, SAD, DELEX_RG, CONC_RG))
SGD_FLOW = TaskFlowSpec((DI, ID, DST, SAD, DELEX_RG, CONC_RG))


def dedupe(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))
