"""Session -> tagged training samples with supervision flags and sliding windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from ..core import (
    CONC_RG,
    DELEX_RG,
    DI,
    DST,
    ID,
    SAD,
    DefaultTokenizer,
    DialogueSession,
    DomainSchema,
    IntentSchema,
    TaskFlowSpec,
    TokenizerContract,
    Turn,
    find_intent_schema,
)
from ..dbengine import DEFAULT_ENTRY_LIMIT, render_db_result
from ..errors import FormatError, MissingAnnotation, TurnTooLarge
from . import grammar as g
from .instructions import render_instructions
from .schema_mgmt import SchemaRegistry, schema_emissions

DEFAULT_MAX_LEN = 4096
DEFAULT_SCHEMA_WINDOW = 15
TRAIN_HISTORY_RATIO = 0.6


class Segment(NamedTuple):
    tag: str
    text: str
    supervised: bool = False


@dataclass(frozen=True)
class TrainingSample:
    id: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(Segment(*s) for s in self.segments)
        for s in segs:
            if s.tag not in g.ALL_TAGS:
                raise FormatError(f"sample {self.id}: unknown tag {s.tag!r}")
            if s.supervised and s.tag not in g.SUPERVISED_TAGS:
                raise FormatError(f"sample {self.id}: tag {s.tag} cannot be supervised")
        object.__setattr__(self, "segments", segs)

    def text(self) -> str:
        return render_segments(self.segments)

    def token_count(self, tokenizer: TokenizerContract) -> int:
        return tokenizer.count(self.text())

    @property
    def session_id(self) -> str:
        return self.id.rpartition("@")[0]

    def turns(self) -> list[tuple[int, bool]]:
        """(1-based session turn index, supervised?) for every turn in the sample."""
        first = int(self.id.rpartition("@")[2])
        out: list[tuple[int, bool]] = []
        for seg in self.segments:
            if seg.tag == g.USER:
                out.append([first + len(out), False])
            elif seg.supervised and out:
                out[-1][1] = True
        return [tuple(x) for x in out]

    def history_text(self) -> str:
        """Unsupervised prior turns (the instruction block excluded)."""
        parts = []
        turn_open = False
        supervised_turn = False
        current: list[Segment] = []
        for seg in self.segments:
            if seg.tag == g.INSTRUCTIONS:
                continue
            if seg.tag == g.USER:
                if turn_open and not supervised_turn:
                    parts.extend(current)
                current, turn_open, supervised_turn = [seg], True, False
            else:
                current.append(seg)
                supervised_turn = supervised_turn or seg.supervised
        if turn_open and not supervised_turn:
            parts.extend(current)
        return render_segments(parts)


def render_segments(segments: Iterable[Segment]) -> str:
    return "".join(s.text if s.tag == g.INSTRUCTIONS else g.line(s.tag, s.text) for s in segments)


def turn_plan(flow: TaskFlowSpec) -> list[str]:
    """Line tags of one turn, in emission order (schema lines excluded)."""
    plan = [g.USER]
    for task in flow.tasks:
        plan.append(g.TASK_TAG[task])
        if task == DST or (task == ID and DST not in flow):
            plan.append(g.DB)
    return plan


def intent_labels(intents: Mapping[str, Sequence[str]]) -> list[tuple[str, str]]:
    return [(d, i) for d, names in intents.items() for i in names]


class SchemaBlocks:
    """Per-session schema management for domains and intents (separate registries)."""

    def __init__(
        self,
        schemas: Mapping[str, DomainSchema],
        intent_schemas: Mapping[str, IntentSchema],
        window: int | None = DEFAULT_SCHEMA_WINDOW,
        enabled: bool = True,
    ):
        self.schemas = schemas
        self.intent_schemas = intent_schemas
        self.enabled = enabled
        self.domain_registry = SchemaRegistry(window)
        self.intent_registry = SchemaRegistry(window)

    def domain_lines(self, domains: Sequence[str]) -> list[str]:
        if not self.enabled:
            return []
        known = [d for d in domains if d in self.schemas]
        return [g.serialize_domain_schema(self.schemas[d]) for d in schema_emissions(self.domain_registry, known)]

    def intent_lines(self, intents: Mapping[str, Sequence[str]]) -> list[str]:
        if not self.enabled:
            return []
        found = {}
        for domain, intent in intent_labels(intents):
            schema = find_intent_schema(self.intent_schemas, domain, intent)
            if schema is not None:
                found.setdefault(f"{domain}/{intent}", schema)
        emitted = schema_emissions(self.intent_registry, list(found))
        return [g.serialize_intent_schema(found[label]) for label in emitted]


def gold_turn_lines(
    turn: Turn, index: int, flow: TaskFlowSpec, blocks: SchemaBlocks, entry_limit: int = DEFAULT_ENTRY_LIMIT
) -> list[tuple[str, str]]:
    """(tag, payload) lines of one gold turn. ``index`` is 1-based, for error messages."""

    def need(value, task):
        if value is None:
            raise MissingAnnotation(task, index)
        return value

    lines = [(g.USER, turn.user)]
    for tag in turn_plan(flow)[1:]:
        if tag == g.DOMAINS:
            domains = need(turn.domains, DI)
            lines.append((g.DOMAINS, g.serialize_domains(domains)))
            lines += [(g.DOMAIN_SCHEMA, s) for s in blocks.domain_lines(domains)]
        elif tag == g.INTENTS:
            intents = need(turn.intents, ID)
            lines.append((g.INTENTS, g.serialize_intents(intents)))
            lines += [(g.INTENT_SCHEMA, s) for s in blocks.intent_lines(intents)]
        elif tag == g.STATE:
            lines.append((g.STATE, g.serialize_state(need(turn.state, DST))))
        elif tag == g.DB:
            if turn.db is not None:
                lines.append((g.DB, render_db_result(turn.db, entry_limit)))
        elif tag == g.ACTS:
            lines.append((g.ACTS, g.serialize_acts(need(turn.acts, SAD))))
        elif tag == g.DELEX:
            lines.append((g.DELEX, need(turn.delex, DELEX_RG)))
        elif tag == g.RESPONSE:
            lines.append((g.RESPONSE, need(turn.response, CONC_RG)))
    return lines


def _segments(lines: Sequence[tuple[str, str]], supervised: bool) -> list[Segment]:
    return [Segment(tag, text, supervised and tag in g.SUPERVISED_TAGS) for tag, text in lines]


def serialize_session(
    session: DialogueSession,
    flow: TaskFlowSpec,
    schemas: Mapping[str, DomainSchema],
    intent_schemas: Mapping[str, IntentSchema] | None = None,
    schema_window: int | None = DEFAULT_SCHEMA_WINDOW,
    tokenizer: TokenizerContract | None = None,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    entry_limit: int = DEFAULT_ENTRY_LIMIT,
    include_schemas: bool = True,
    include_instructions: bool = True,
    history_ratio: float = TRAIN_HISTORY_RATIO,
) -> list[TrainingSample]:
    """Cut one session into training samples no longer than ``max_len`` tokens.

    Turns are packed greedily. When a sample is full the next one is seeded with
    the most recent whole turns fitting ``history_ratio * max_len`` tokens,
    marked unsupervised, so every turn is a supervised target exactly once.
    """
    tokenizer = tokenizer or DefaultTokenizer()
    blocks = SchemaBlocks(schemas, intent_schemas or {}, schema_window, enabled=include_schemas)
    rendered = [
        gold_turn_lines(turn, i, flow, blocks, entry_limit) for i, turn in enumerate(session.turns, start=1)
    ]
    texts = ["".join(g.line(tag, text) for tag, text in lines) for lines in rendered]
    instr = render_instructions(flow, sorted(schemas)).render() if include_instructions else ""
    head = [Segment(g.INSTRUCTIONS, instr)] if include_instructions else []
    hist_budget = int(max_len * history_ratio)

    def cost(hist: Sequence[int], sup: Sequence[int]) -> int:
        return tokenizer.count(instr + "".join(texts[i] for i in (*hist, *sup)))

    def reseed(upto: int) -> list[int]:
        hist: list[int] = []
        for j in range(upto - 1, -1, -1):
            if tokenizer.count("".join(texts[k] for k in (j, *hist))) > hist_budget:
                break
            hist.insert(0, j)
        return hist

    samples: list[TrainingSample] = []

    def emit(hist: list[int], sup: list[int]) -> None:
        segs = list(head)
        for i in hist:
            segs += _segments(rendered[i], supervised=False)
        for i in sup:
            segs += _segments(rendered[i], supervised=True)
        first = (hist or sup)[0] + 1
        samples.append(TrainingSample(f"{session.id}@{first}", tuple(segs)))

    hist: list[int] = []
    sup: list[int] = []
    i = 0
    while i < len(texts):
        if cost(hist, [*sup, i]) <= max_len:
            sup.append(i)
            i += 1
        elif sup:
            emit(hist, sup)
            hist, sup = reseed(i), []
        elif hist:
            hist = hist[1:]
        else:
            raise TurnTooLarge(i + 1, cost([], [i]), max_len)
    if sup:
        emit(hist, sup)
    return samples
