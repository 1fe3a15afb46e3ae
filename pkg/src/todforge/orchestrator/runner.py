"""Session-level inference: run the task flow turn by turn against a backend."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..backend import Backend, CompletionRequest
from ..core import (
    DI,
    DST,
    ID,
    ActSet,
    BeliefState,
    DbResult,
    DefaultTokenizer,
    DialogueSession,
    TaskFlowSpec,
    TokenizerContract,
    Turn,
)
from ..corpus import grammar as g
from ..corpus.instructions import render_instructions
from ..corpus.serialize import DEFAULT_MAX_LEN, DEFAULT_SCHEMA_WINDOW, SchemaBlocks, turn_plan
from ..dbengine import DEFAULT_ENTRY_LIMIT, db_result, query_lenient, render_db_result
from ..errors import BackendError, MissingAnnotation
from ..ingest.bundle import CorpusBundle
from .context import assemble, history_to_keep
from .dedup import dedup
from .parsing import parse_tagged

GOLD = "gold"
GENERATED = "generated"
ORACLE_CHOICES = (GOLD, GENERATED)


@dataclass(frozen=True)
class OracleMode:
    """Where gold annotations replace generated ones.

    ``context_belief``: STATE and DB lines of prior turns.
    ``current_belief``: the state embedded and queried in the current turn.
    ``context_responses``: DELEX and RESPONSE lines of prior turns.
    """

    context_belief: str = GENERATED
    current_belief: str = GENERATED
    context_responses: str = GENERATED

    def __post_init__(self):
        for name in ("context_belief", "current_belief", "context_responses"):
            if getattr(self, name) not in ORACLE_CHOICES:
                raise ValueError(f"{name} must be one of {ORACLE_CHOICES}")

    @classmethod
    def all_gold(cls) -> "OracleMode":
        return cls(GOLD, GOLD, GOLD)


@dataclass(frozen=True)
class RunConfig:
    max_len: int = DEFAULT_MAX_LEN
    history_budget_ratio: float = 0.75
    max_history_turns: int | None = None
    schema_window: int | None = DEFAULT_SCHEMA_WINDOW
    entry_limit: int = DEFAULT_ENTRY_LIMIT
    oracle: OracleMode = field(default_factory=OracleMode)
    include_schemas: bool = True
    include_instructions: bool = True
    tokenizer: TokenizerContract = field(default_factory=DefaultTokenizer)

    def __post_init__(self):
        if not 0 < self.history_budget_ratio <= 1:
            raise ValueError("history_budget_ratio must be in (0, 1]")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.max_history_turns is not None and self.max_history_turns < 0:
            raise ValueError("max_history_turns must be >= 0")


@dataclass(frozen=True)
class TurnOutputs:
    """Parsed outputs of one turn. Fields of tasks outside the flow stay None."""

    domains: list[str] | None = None
    intents: dict[str, list[str]] | None = None
    state: BeliefState | None = None
    db: DbResult | None = None
    acts: ActSet | None = None
    delex: str | None = None
    response: str | None = None
    raw: Mapping[str, str] = field(default_factory=dict)
    parsed_ok: Mapping[str, bool] = field(default_factory=dict)
    lines: tuple[tuple[str, str], ...] = ()

    @property
    def domains_raw(self) -> str | None:
        return self.raw.get(g.DOMAINS)

    @property
    def intents_raw(self) -> str | None:
        return self.raw.get(g.INTENTS)

    @property
    def state_raw(self) -> str | None:
        return self.raw.get(g.STATE)

    @property
    def acts_raw(self) -> str | None:
        return self.raw.get(g.ACTS)


class SessionAborted(BackendError):
    """A backend failure stopped the session; ``outputs`` holds the finished turns."""

    def __init__(self, session_id: str, outputs: list[TurnOutputs], cause: BaseException):
        super().__init__(f"session {session_id} aborted after {len(outputs)} turns: {cause}")
        self.session_id = session_id
        self.outputs = outputs
        self.cause = cause


TraceSink = Callable[[dict], None]

_FIELD = {g.DOMAINS: "domains", g.INTENTS: "intents", g.STATE: "state", g.ACTS: "acts", g.DELEX: "delex", g.RESPONSE: "response"}


def _render(lines: Sequence[tuple[str, str]]) -> str:
    return "".join(g.line(tag, text) for tag, text in lines)


def active_db_domains(
    flow: TaskFlowSpec, domains: Sequence[str] | None, intents: Mapping | None, state: BeliefState | None, tables
) -> list[str]:
    if DI in flow:
        candidates = list(domains or ())
    else:
        candidates = [*(intents or {}), *(state.domains if state else {})]
    return sorted({d for d in candidates if d in tables})


def _db_for(domains: Sequence[str], state: BeliefState | None, tables, entry_limit: int) -> DbResult:
    results = {d: query_lenient(tables[d], state.constraints(d) if state else {}) for d in domains}
    return db_result(results, entry_limit)


def run_turn(
    context: str,
    user_utt: str,
    flow: TaskFlowSpec,
    backend: Backend,
    bundle: CorpusBundle,
    config: RunConfig,
    *,
    blocks: SchemaBlocks | None = None,
    gold: Turn | None = None,
    refit: Callable[[str], str] | None = None,
    on_request: Callable[[str, str, str, bool], None] | None = None,
    turn_index: int = 0,
) -> TurnOutputs:
    """Run every task of ``flow`` for one user utterance.

    ``context`` is everything before this turn's USER line. ``refit`` may
    rebuild a shorter context when a prompt would exceed ``config.max_len``.
    ``gold`` is needed only when ``config.oracle.current_belief`` is gold.
    """
    if blocks is None:
        blocks = SchemaBlocks(bundle.schemas, bundle.intent_schemas, config.schema_window, config.include_schemas)
    tables = bundle.tables
    run_db = bool(tables) and (DST in flow or ID in flow)
    lines: list[tuple[str, str]] = [(g.USER, user_utt)]
    values: dict[str, object] = {}
    raw: dict[str, str] = {}
    ok: dict[str, bool] = {}
    domain_names = set(bundle.schemas)

    for tag in turn_plan(flow)[1:]:
        if tag == g.DB:
            if not run_db:
                continue
            state = values.get("state_used")
            active = active_db_domains(flow, values.get("domains"), values.get("intents"), state, tables)
            result = _db_for(active, state, tables, config.entry_limit)
            values["db"] = result
            lines.append((g.DB, render_db_result(result, config.entry_limit)))
            continue

        prompt = context + _render(lines) + f"{tag}: "
        if refit is not None and config.tokenizer.count(prompt) > config.max_len:
            context = refit(_render(lines) + f"{tag}: ")
            prompt = context + _render(lines) + f"{tag}: "
        text = backend.complete(CompletionRequest.for_tag(prompt, tag))
        text = g.one_line(dedup(text))
        parsed, good = parse_tagged(tag, text, flow.dst_format, domain_names)
        raw[tag] = text
        ok[tag] = good
        values[_FIELD[tag]] = parsed
        if on_request is not None:
            on_request(tag, prompt, text, good)

        if tag == g.STATE and config.oracle.current_belief == GOLD:
            if gold is None or gold.state is None:
                raise MissingAnnotation(DST, turn_index)
            values["state_used"] = gold.state
            lines.append((g.STATE, g.serialize_state(gold.state)))
            continue
        if tag == g.STATE:
            values["state_used"] = parsed
        lines.append((tag, text))
        if tag == g.DOMAINS:
            lines += [(g.DOMAIN_SCHEMA, s) for s in blocks.domain_lines(parsed)]
        elif tag == g.INTENTS:
            lines += [(g.INTENT_SCHEMA, s) for s in blocks.intent_lines(parsed)]

    return TurnOutputs(
        domains=values.get("domains"),
        intents=values.get("intents"),
        state=values.get("state"),
        db=values.get("db"),
        acts=values.get("acts"),
        delex=values.get("delex"),
        response=values.get("response"),
        raw=raw,
        parsed_ok=ok,
        lines=tuple(lines),
    )


def _gold_db(turn: Turn, flow: TaskFlowSpec, bundle: CorpusBundle, entry_limit: int) -> DbResult:
    if turn.db is not None:
        return turn.db
    active = active_db_domains(flow, turn.domains, turn.intents, turn.state, bundle.tables)
    return _db_for(active, turn.state, bundle.tables, entry_limit)


def context_rendering(
    outputs: TurnOutputs, gold: Turn, index: int, flow: TaskFlowSpec, bundle: CorpusBundle, config: RunConfig
) -> str:
    """Text of a finished turn as later turns see it, with oracle substitutions."""
    mode = config.oracle
    # a gold state used for the current turn's DB step does not leak into a generated context
    own_belief = mode.context_belief == GENERATED and mode.current_belief == GOLD
    out = []
    for tag, text in outputs.lines:
        if tag in (g.STATE, g.DB) and own_belief:
            if tag == g.STATE:
                text = outputs.state_raw or ""
            else:
                active = active_db_domains(flow, outputs.domains, outputs.intents, outputs.state, bundle.tables)
                result = _db_for(active, outputs.state, bundle.tables, config.entry_limit)
                text = render_db_result(result, config.entry_limit)
        elif tag in (g.STATE, g.DB) and mode.context_belief == GOLD:
            if gold.state is None:
                raise MissingAnnotation(DST, index)
            if tag == g.STATE:
                text = g.serialize_state(gold.state)
            else:
                text = render_db_result(_gold_db(gold, flow, bundle, config.entry_limit), config.entry_limit)
        elif tag in (g.DELEX, g.RESPONSE) and mode.context_responses == GOLD:
            text = gold.delex if tag == g.DELEX else gold.response
            if text is None:
                raise MissingAnnotation("DelexRG" if tag == g.DELEX else "ConcRG", index)
        out.append((tag, text))
    return _render(out)


def run_session(
    session: DialogueSession,
    flow: TaskFlowSpec,
    backend: Backend,
    bundle: CorpusBundle,
    config: RunConfig | None = None,
    trace: TraceSink | None = None,
) -> list[TurnOutputs]:
    """Outputs for every turn. Raises :class:`SessionAborted` on backend failure."""
    config = config or RunConfig()
    tok = config.tokenizer
    instructions = (
        render_instructions(flow, sorted(bundle.schemas)).render() if config.include_instructions else ""
    )
    blocks = SchemaBlocks(bundle.schemas, bundle.intent_schemas, config.schema_window, config.include_schemas)
    renderings: list[str] = []
    outputs: list[TurnOutputs] = []

    for index, turn in enumerate(session.turns, start=1):
        keep = history_to_keep(
            renderings, instructions, tok, config.max_len, config.history_budget_ratio, config.max_history_turns
        )
        kept = {"keep": keep}

        def refit(tail: str, kept=kept) -> str:
            k = kept["keep"]
            while k > 0 and tok.count(assemble(renderings, instructions, k) + tail) > config.max_len:
                k -= 1
            kept["keep"] = k
            return assemble(renderings, instructions, k)

        def on_request(tag, prompt, text, good, _index=index):
            if trace is not None:
                trace(
                    {
                        "session": session.id,
                        "turn": _index,
                        "tag": tag,
                        "prompt_tokens": tok.count(prompt),
                        "raw": text,
                        "parsed_ok": good,
                    }
                )

        try:
            result = run_turn(
                assemble(renderings, instructions, keep),
                turn.user,
                flow,
                backend,
                bundle,
                config,
                blocks=blocks,
                gold=turn,
                refit=refit,
                on_request=on_request,
                turn_index=index,
            )
        except BackendError as exc:
            raise SessionAborted(session.id, outputs, exc) from exc
        outputs.append(result)
        renderings.append(context_rendering(result, turn, index, flow, bundle, config))
    return outputs


@dataclass
class SessionRun:
    session_id: str
    outputs: list[TurnOutputs]
    trace: list[dict]
    error: BaseException | None = None


def run_sessions(
    sessions: Sequence[DialogueSession],
    bundle: CorpusBundle,
    backend_for: Callable[[DialogueSession], Backend],
    config: RunConfig | None = None,
    parallel: int = 1,
) -> list[SessionRun]:
    """Run many sessions, ``parallel`` at a time; results keep the input order.

    Each session collects its own trace, so concatenating the traces in order
    gives the same bytes whatever the parallelism.
    """
    config = config or RunConfig()

    def one(session: DialogueSession) -> SessionRun:
        records: list[dict] = []
        try:
            outputs = run_session(session, bundle.flow, backend_for(session), bundle, config, records.append)
            return SessionRun(session.id, outputs, records)
        except SessionAborted as exc:
            return SessionRun(session.id, exc.outputs, records, exc)

    if parallel <= 1:
        return [one(s) for s in sessions]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(one, sessions))
