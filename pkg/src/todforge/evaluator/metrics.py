"""Dialogue-level and turn-level metrics over gold sessions and predictions."""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from ..core import BeliefState, DialogueSession, DomainSchema, placeholder, venue_slot
from ..dbengine import DbTable, query_lenient
from ..errors import LengthMismatch, MissingGoal
from ..orchestrator.runner import TurnOutputs

SessionPreds = tuple[DialogueSession, Sequence[TurnOutputs]]


def _pct(num: int | float, den: int | float, empty: float = 100.0) -> float:
    return 100.0 * num / den if den else empty


def _f1(tp: int, n_pred: int, n_gold: int) -> float:
    if n_pred == 0 and n_gold == 0:
        return 100.0
    return 100.0 * 2 * tp / (n_pred + n_gold)


def jga(pred_states: Sequence[BeliefState | None], gold_states: Sequence[BeliefState | None]) -> float:
    if len(pred_states) != len(gold_states):
        raise LengthMismatch(f"{len(pred_states)} predicted vs {len(gold_states)} gold states")
    hits = sum((p or BeliefState()) == (g or BeliefState()) for p, g in zip(pred_states, gold_states))
    return _pct(hits, len(gold_states))


def combined(bleu: float, inform: float, success: float) -> float:
    return round(bleu + 0.5 * (inform + success), 2)


def padded(session: DialogueSession, outputs: Sequence[TurnOutputs]) -> list[TurnOutputs]:
    """Predictions aligned with the session's turns; unreached turns are empty."""
    outs = list(outputs[: len(session.turns)])
    return outs + [TurnOutputs()] * (len(session.turns) - len(outs))


def _key(record: Mapping[str, str]) -> str:
    return json.dumps(dict(record), sort_keys=True)


def _hits(table: DbTable, constraints) -> set[str]:
    return {_key(r) for r in query_lenient(table, constraints)}


def _turn_domains(out: TurnOutputs) -> set[str]:
    found = set(out.domains or ())
    found.update(out.intents or {})
    if out.acts is not None:
        found.update(out.acts.domains())
    return found


def _goal(session: DialogueSession):
    if session.goal is None:
        raise MissingGoal(f"session {session.id} has no goal")
    return session.goal


def _dialogue_inform(session, outputs, tables, venue_slots) -> tuple[bool, bool]:
    goal = _goal(session)
    outs = padded(session, outputs)
    informed = True
    for domain, dgoal in goal.domains.items():
        if not dgoal.requires_venue:
            continue
        mark = placeholder(venue_slot(domain, venue_slots))
        venue_turn = None
        for out in outs:
            if out.delex and mark in out.delex and domain in _turn_domains(out):
                venue_turn = out
        if venue_turn is None:
            informed = False
            continue
        table = tables.get(domain)
        if table is None:
            continue
        state = venue_turn.state or BeliefState()
        gold_constraints = {s: v for s, v in dgoal.constraints.items()}
        if not _hits(table, state.constraints(domain)) & _hits(table, gold_constraints):
            informed = False
    emitted = " ".join(out.delex or "" for out in outs)
    answered = all(placeholder(s) in emitted for d in goal.domains.values() for s in d.requestables)
    return informed, informed and answered


def inform_success(
    sessions_with_preds: Sequence[SessionPreds],
    tables: Mapping[str, DbTable],
    venue_slots: Mapping[str, str] | None = None,
) -> tuple[float, float]:
    """(inform %, success %) over dialogues."""
    informs = successes = 0
    for session, outputs in sessions_with_preds:
        inf, suc = _dialogue_inform(session, outputs, tables, venue_slots)
        informs += inf
        successes += suc
    n = len(sessions_with_preds)
    return _pct(informs, n, 0.0), _pct(successes, n, 0.0)


def succ_candidates(schemas: Mapping[str, DomainSchema], domains, venue_slots=None) -> set[str]:
    """Slots whose placeholders count as answers to a request."""
    out = set()
    for d in domains:
        schema = schemas.get(d)
        if schema is None:
            continue
        venue = venue_slot(d, venue_slots)
        out.update(s.name for s in schema.slots.values() if s.requestable and not s.informable and s.name != venue)
    return out


def match_succf1(
    sessions_with_preds: Sequence[SessionPreds],
    tables: Mapping[str, DbTable],
    schemas: Mapping[str, DomainSchema],
    venue_slots: Mapping[str, str] | None = None,
) -> tuple[float, float]:
    matches = tp = n_pred = n_gold = 0
    for session, outputs in sessions_with_preds:
        goal = _goal(session)
        outs = padded(session, outputs)
        final = next((o.state for o in reversed(outs) if o.state is not None), None) or BeliefState()
        ok = all(
            d not in tables or _hits(tables[d], final.constraints(d)) & _hits(tables[d], g.constraints)
            for d, g in goal.domains.items()
        )
        matches += ok
        emitted = " ".join(o.delex or "" for o in outs)
        cands = succ_candidates(schemas, goal.domains, venue_slots)
        pred = {s for s in cands if placeholder(s) in emitted}
        gold = {s for g in goal.domains.values() for s in g.requestables}
        tp += len(pred & gold)
        n_pred += len(pred)
        n_gold += len(gold)
    return _pct(matches, len(sessions_with_preds), 0.0), _f1(tp, n_pred, n_gold)


def _intent_set(intents) -> set[tuple[str, str]]:
    return {(d, i) for d, names in (intents or {}).items() for i in names}


def slu_metrics(pred_turns: Sequence[TurnOutputs], gold_turns) -> tuple[float, float, float]:
    """(intent accuracy, slot F1, overall accuracy), all percentages."""
    if len(pred_turns) != len(gold_turns):
        raise LengthMismatch(f"{len(pred_turns)} predicted vs {len(gold_turns)} gold turns")
    intent_hits = overall = tp = n_pred = n_gold = 0
    for pred, gold in zip(pred_turns, gold_turns):
        p_slots = (pred.state or BeliefState()).pairs()
        g_slots = (gold.state or BeliefState()).pairs()
        intent_ok = _intent_set(pred.intents) == _intent_set(gold.intents)
        intent_hits += intent_ok
        overall += intent_ok and p_slots == g_slots
        tp += len(p_slots & g_slots)
        n_pred += len(p_slots)
        n_gold += len(g_slots)
    n = len(gold_turns)
    return _pct(intent_hits, n), _f1(tp, n_pred, n_gold), _pct(overall, n)
