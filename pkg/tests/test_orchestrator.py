import pytest
from hypothesis import given
from hypothesis import strategies as st

from todforge.backend import GoldEchoBackend, ScriptedBackend
from todforge.core import ID, BeliefState, DefaultTokenizer, DialogueSession, DomainSchema, IntentSchema, SlotSpec, TaskFlowSpec, Turn
from todforge.corpus import grammar as g
from todforge.corpus.instructions import render_instructions
from todforge.errors import BackendUnavailable, InstructionsTooLarge, MissingAnnotation
from todforge.ingest import CorpusBundle, synth_fixtures
from todforge.orchestrator import (
    GOLD,
    OracleMode,
    RunConfig,
    SessionAborted,
    dedup,
    outputs_from_trace,
    read_trace,
    run_session,
    run_sessions,
    run_turn,
    truncate_context,
    write_trace,
)
from todforge.orchestrator.dedup import MIN_REPEATS, MIN_UNIT

TOK = DefaultTokenizer()
ALL_GOLD = RunConfig(oracle=OracleMode.all_gold())


def matches_gold(out, turn):
    return (
        out.domains == list(turn.domains)
        and out.state == turn.state
        and out.db == turn.db
        and out.acts == turn.acts
        and out.delex == turn.delex
        and out.response == turn.response
    )


# dedup -------------------------------------------------------------------


def test_dedup_examples():
    assert dedup("cheap cheap cheap cheap ") == "cheap "
    assert dedup("no repetition here") == "no repetition here"
    assert dedup("abab") == "abab"
    assert dedup("ababab") == "ababab"  # unit "ab" is shorter than 4
    assert dedup("i want the hotel hotel hotel ") == "i want the hotel "
    assert dedup("the hotel hotel please") == "the hotel hotel please"


def test_dedup_collapses_prefix_kept():
    assert dedup("please book it. book it. book it. book it.") == "please book it."


def test_dedup_prefers_longest_unit():
    unit = "abcdabce"
    assert dedup("x" + unit * 3) == "x" + unit


@given(st.text(alphabet="ab c", max_size=60))
def test_dedup_idempotent_and_shrinking(text):
    once = dedup(text)
    assert dedup(once) == once
    assert len(once) <= len(text)


@given(st.text(alphabet="xyz ", max_size=20), st.text(alphabet="abc", min_size=MIN_UNIT, max_size=6), st.integers(MIN_REPEATS, 6))
def test_dedup_removes_trailing_runs(prefix, unit, k):
    out = dedup(prefix + unit * k)
    n = len(out)
    assert not any(out.endswith(out[n - s :] * MIN_REPEATS) for s in range(MIN_UNIT, n // MIN_REPEATS + 1))


# truncation ----------------------------------------------------------------


def test_truncate_keeps_everything_with_room():
    turns = [f"USER: t{i}\n" for i in range(10)]
    assert truncate_context(turns, "INSTR\n", TOK, 10_000) == "INSTR\n" + "".join(turns)


def test_truncate_by_tokens():
    turns = [("%03d" % i) * 133 + "x" for i in range(10)]  # 400 bytes = 100 tokens each
    assert all(TOK.count(t) == 100 for t in turns)
    out = truncate_context(turns, "", TOK, max_len=467, ratio=0.75)  # budget 350.25 tokens
    assert out == "# omitted turns: 7\n" + "".join(turns[7:])


def test_truncate_by_turn_count():
    turns = [f"USER: t{i}\n" for i in range(10)]
    out = truncate_context(turns, "I\n", TOK, 10_000, max_history_turns=4)
    assert out == "I\n# omitted turns: 6\n" + "".join(turns[6:])
    assert truncate_context(turns, "I\n", TOK, 10_000, max_history_turns=0) == "I\n# omitted turns: 10\n"


def test_truncate_instructions_too_large():
    with pytest.raises(InstructionsTooLarge):
        truncate_context([], "x" * 400, TOK, 100)
    with pytest.raises(ValueError):
        truncate_context([], "", TOK, 100, ratio=0)


# run_turn -------------------------------------------------------------------


def _context(bundle):
    return render_instructions(bundle.flow, sorted(bundle.schemas)).render()


def test_run_turn_gold_echo(bundle):
    session = bundle.sessions[0]
    out = run_turn(_context(bundle), session.turns[0].user, bundle.flow, GoldEchoBackend(session), bundle, RunConfig())
    assert matches_gold(out, session.turns[0])
    assert all(out.parsed_ok.values())
    assert [t for t, _ in out.lines] == ["USER", "DOMAINS", "DOMAIN_SCHEMA", "STATE", "DB", "ACTS", "DELEX", "RESPONSE"]


def test_run_turn_bad_state_falls_back(bundle):
    def script(req):
        return {"DOMAINS": '["hotel"]', "STATE": "{not json"}.get(req.prompt.rsplit("\n", 1)[-1][:-2], "ok")

    out = run_turn(_context(bundle), "hello", bundle.flow, ScriptedBackend(script), bundle, RunConfig(entry_limit=0))
    assert out.state == BeliefState() and out.state_raw == "{not json"
    assert out.parsed_ok[g.STATE] is False
    assert dict(out.lines)[g.DB] == "hotel: 10"
    assert out.db.groups["hotel"].match_count == len(bundle.databases["hotel"])


def test_run_turn_intent_only_flow():
    schemas = {"banking": DomainSchema("banking", {"amount": SlotSpec("amount")}, ("transfer",))}
    bundle = CorpusBundle((), schemas, {"transfer": IntentSchema("transfer", "banking")}, {}, TaskFlowSpec((ID,)))
    backend = ScriptedBackend(['{"banking": ["transfer"]}'])
    out = run_turn("", "send 5 pounds", bundle.flow, backend, bundle, RunConfig())
    assert [t for t, _ in out.lines] == ["USER", "INTENTS", "INTENT_SCHEMA"]
    assert out.intents == {"banking": ["transfer"]} and out.db is None and out.acts is None


def test_run_turn_dedups_before_parsing(bundle):
    backend = ScriptedBackend(lambda req: "fine fine fine fine " if req.prompt.endswith("DELEX: ") else '["hotel"]')
    out = run_turn("", "hi", bundle.flow, backend, bundle, RunConfig())
    assert out.delex == "fine "


# run_session -----------------------------------------------------------------


def test_all_gold_oracle_identity(bundle):
    for session in bundle.sessions:
        outs = run_session(session, bundle.flow, GoldEchoBackend(session), bundle, ALL_GOLD)
        assert len(outs) == len(session.turns)
        assert all(matches_gold(o, t) for o, t in zip(outs, session.turns))


def test_zero_history_sees_only_current_turn(bundle):
    session = max(bundle.sessions, key=lambda s: len(s.turns))
    backend = ScriptedBackend(GoldEchoBackend(session).complete)
    run_session(session, bundle.flow, backend, bundle, RunConfig(max_history_turns=0))
    instructions = _context(bundle)
    for req in backend.requests:
        assert req.prompt.startswith(instructions)
        assert req.prompt.count("USER: ") == 1


def test_history_cap_and_budget(bundle):
    session = max(bundle.sessions, key=lambda s: len(s.turns))
    backend = ScriptedBackend(GoldEchoBackend(session).complete)
    outs = run_session(session, bundle.flow, backend, bundle, RunConfig(max_len=2048, max_history_turns=2))
    assert all(matches_gold(o, t) for o, t in zip(outs, session.turns))
    for req in backend.requests:
        assert req.prompt.count("USER: ") <= 3
        assert TOK.count(req.prompt) <= 2048


def test_tight_budget_refits_prompts():
    bundle = synth_fixtures(3, 9, min_turns=6, max_turns=6)
    session = bundle.sessions[0]
    backend = ScriptedBackend(GoldEchoBackend(session).complete)
    outs = run_session(session, bundle.flow, backend, bundle, RunConfig(max_len=900))
    assert all(matches_gold(o, t) for o, t in zip(outs, session.turns))
    assert max(TOK.count(r.prompt) for r in backend.requests) <= 900


def test_unbounded_window_schema_once_per_context(bundle):
    for session in bundle.sessions[:10]:
        backend = ScriptedBackend(GoldEchoBackend(session).complete)
        run_session(session, bundle.flow, backend, bundle, RunConfig(schema_window=None))
        for req in backend.requests:
            for domain in bundle.schemas:
                assert req.prompt.count(f'DOMAIN_SCHEMA: {{"domain":"{domain}"') <= 1


def test_backend_failure_returns_partial_outputs(bundle):
    session = next(s for s in bundle.sessions if len(s.turns) >= 3)
    gold = GoldEchoBackend(session)
    calls = {"n": 0}

    def flaky(req):
        calls["n"] += 1
        if calls["n"] > 5:
            raise BackendUnavailable("gone")
        return gold.complete(req)

    with pytest.raises(SessionAborted) as info:
        run_session(session, bundle.flow, ScriptedBackend(flaky), bundle, ALL_GOLD)
    assert len(info.value.outputs) == 1 and matches_gold(info.value.outputs[0], session.turns[0])
    assert isinstance(info.value.cause, BackendUnavailable)


def _noisy_state_backend(session):
    """Gold everywhere except STATE, which is always garbage."""
    gold = GoldEchoBackend(session)
    return ScriptedBackend(lambda req: "{broken" if req.prompt.endswith("STATE: ") else gold.complete(req))


def test_context_belief_gold_substitutes_prior_states(bundle):
    session = next(s for s in bundle.sessions if len(s.turns) >= 3)
    backend = _noisy_state_backend(session)
    cfg = RunConfig(oracle=OracleMode(context_belief=GOLD))
    outs = run_session(session, bundle.flow, backend, bundle, cfg)
    last = [r for r in backend.requests if r.prompt.endswith("STATE: ")][-1].prompt
    for turn in session.turns[:-1]:
        assert f"STATE: {g.serialize_state(turn.state)}\n" in last
    assert "{broken" not in last
    assert all(o.state == BeliefState() for o in outs)


def test_current_belief_gold_drives_db(bundle):
    session = bundle.sessions[0]
    cfg = RunConfig(oracle=OracleMode(current_belief=GOLD))
    outs = run_session(session, bundle.flow, _noisy_state_backend(session), bundle, cfg)
    for out, turn in zip(outs, session.turns):
        assert out.db == turn.db
        assert out.state == BeliefState() and out.state_raw == "{broken"


def test_generated_context_keeps_generated_lines(bundle):
    session = next(s for s in bundle.sessions if len(s.turns) >= 3)
    backend = _noisy_state_backend(session)
    run_session(session, bundle.flow, backend, bundle, RunConfig())
    last = backend.requests[-1].prompt
    assert last.count("STATE: {broken\n") == len(session.turns)


def test_gold_modes_need_gold():
    schemas = {"hotel": DomainSchema("hotel", {"area": SlotSpec("area")})}
    bundle = CorpusBundle((), schemas, {}, {"hotel": ({"area": "north"},)})
    session = DialogueSession("s", "d", (Turn("hi"), Turn("again")))
    backend = ScriptedBackend(lambda req: "[]")
    with pytest.raises(MissingAnnotation):
        run_session(session, bundle.flow, backend, bundle, RunConfig(oracle=OracleMode(current_belief=GOLD)))
    with pytest.raises(MissingAnnotation):
        run_session(session, bundle.flow, backend, bundle, RunConfig(oracle=OracleMode(context_responses=GOLD)))


def test_oracle_mode_validation():
    with pytest.raises(ValueError):
        OracleMode(context_belief="maybe")
    with pytest.raises(ValueError):
        RunConfig(history_budget_ratio=1.5)
    with pytest.raises(ValueError):
        RunConfig(max_history_turns=-1)


# traces ----------------------------------------------------------------------


def test_trace_records_and_round_trip(tmp_path, bundle):
    runs = run_sessions(bundle.sessions[:6], bundle, GoldEchoBackend, ALL_GOLD)
    records = [r for run in runs for r in run.trace]
    assert all(set(r) == {"session", "turn", "tag", "prompt_tokens", "raw", "parsed_ok"} for r in records)
    path = tmp_path / "t.jsonl"
    write_trace(records, path)
    again = outputs_from_trace(read_trace(path), bundle)
    for run in runs:
        session = bundle.session(run.session_id)
        assert all(
            o.domains == list(t.domains) and o.state == t.state and o.acts == t.acts and o.delex == t.delex
            for o, t in zip(again[run.session_id], session.turns)
        )


def test_parallel_runs_give_identical_traces(tmp_path, bundle):
    serial = run_sessions(bundle.sessions, bundle, GoldEchoBackend, ALL_GOLD, parallel=1)
    parallel = run_sessions(bundle.sessions, bundle, GoldEchoBackend, ALL_GOLD, parallel=4)
    write_trace([r for run in serial for r in run.trace], tmp_path / "a")
    write_trace([r for run in parallel for r in run.trace], tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_read_trace_rejects_bad_records(tmp_path):
    from todforge.errors import FormatError

    path = tmp_path / "t.jsonl"
    path.write_text('{"session": "s"}\n')
    with pytest.raises(FormatError):
        read_trace(path)


def test_generated_context_hides_gold_current_state(bundle):
    session = next(s for s in bundle.sessions if len(s.turns) >= 3)
    backend = _noisy_state_backend(session)
    cfg = RunConfig(oracle=OracleMode(context_belief="generated", current_belief=GOLD))
    run_session(session, bundle.flow, backend, bundle, cfg)
    last = backend.requests[-1].prompt
    history = last[: last.rindex("USER: ")]
    assert history.count("STATE: {broken\n") == len(session.turns) - 1
    current = last[last.rindex("USER: "):]
    assert f"STATE: {g.serialize_state(session.turns[-1].state)}\n" in current
