import dataclasses
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import as_outputs, brute_bleu, gold_predictions
from todforge.core import (
    ID,
    BeliefState,
    DialogueSession,
    DomainGoal,
    DomainSchema,
    Goal,
    SlotSpec,
    TaskFlowSpec,
    Turn,
)
from todforge.errors import LengthMismatch, MissingGoal
from todforge.evaluator import (
    REPORT_KEYS,
    EvalReport,
    average_reports,
    bleu_tokens,
    combined,
    corpus_bleu,
    evaluate,
    inform_success,
    jga,
    match_succf1,
    slu_metrics,
)
from todforge.ingest import CorpusBundle
from todforge.orchestrator import TurnOutputs


def hotel(**slots):
    return BeliefState({"hotel": slots})


# jga -------------------------------------------------------------------------


def test_jga_counts_exact_turns():
    gold = [hotel(area="north"), hotel(area="north", stars="4"), BeliefState(), hotel(type="guesthouse")]
    pred = list(gold)
    pred[1] = hotel(area="north", stars="3")
    assert jga(pred, gold) == 75.0
    assert jga(gold, gold) == 100.0
    assert jga([BeliefState()] * 3, [None] * 3) == 100.0


def test_jga_drops_empty_values():
    assert jga([hotel(area="north", parking="")], [hotel(area="north")]) == 100.0


def test_jga_length_mismatch():
    with pytest.raises(LengthMismatch):
        jga([BeliefState()], [])


# bleu ------------------------------------------------------------------------


def test_bleu_tokenization():
    assert bleu_tokens("The Hotel, [value_name]!") == ["the", "hotel", ",", "[", "value_name", "]", "!"]


def test_bleu_identity_and_shuffle():
    refs = ["i recommend [value_name] .", "what area would you like ?", "the phone is [value_phone] ."]
    assert corpus_bleu(refs, refs) == 100.0
    same = ["a b c d e"] * 3
    assert corpus_bleu(same, list(reversed(same))) == 100.0


def test_bleu_repeated_word():
    cand, ref = "the the the the", "the cat"
    expected = brute_bleu([bleu_tokens(cand)], [bleu_tokens(ref)])
    assert corpus_bleu([cand], [ref]) == pytest.approx(expected, abs=1e-9)
    # clipped unigram precision 1/4 but no bigram matches at all
    assert expected == 0.0


def test_bleu_brevity_penalty():
    ref = "one two three four five six seven eight"
    cand = "one two three four five six"
    assert corpus_bleu([cand], [ref]) == pytest.approx(brute_bleu([cand.split()], [ref.split()]), abs=1e-9)
    assert 0 < corpus_bleu([cand], [ref]) < 100


def test_bleu_length_mismatch():
    with pytest.raises(LengthMismatch):
        corpus_bleu(["a"], [])


sentences = st.lists(st.sampled_from("a b c d the cat .".split()), max_size=12).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(sentences, sentences), min_size=1, max_size=20))
def test_bleu_agrees_with_oracle(pairs):
    cands, refs = [c for c, _ in pairs], [r for _, r in pairs]
    expected = brute_bleu([bleu_tokens(c) for c in cands], [bleu_tokens(r) for r in refs])
    assert corpus_bleu(cands, refs) == pytest.approx(expected, abs=1e-9)


# inform / success / match / succ_f1 -------------------------------------------

SCHEMA = DomainSchema(
    "hotel",
    {
        "name": SlotSpec("name", informable=True, requestable=True),
        "area": SlotSpec("area", ("north", "south"), informable=True, requestable=True),
        "phone": SlotSpec("phone", informable=False, requestable=True),
        "postcode": SlotSpec("postcode", informable=False, requestable=True),
        "address": SlotSpec("address", informable=False, requestable=True),
        "reference": SlotSpec("reference", informable=False, requestable=True),
        "email": SlotSpec("email", informable=False, requestable=True),
    },
)
TABLE = (
    {"name": "acorn", "area": "north", "phone": "1", "postcode": "cb1", "address": "a", "reference": "r", "email": "e"},
    {"name": "bell", "area": "south", "phone": "2", "postcode": "cb2", "address": "b", "reference": "s", "email": "f"},
)


def tiny_bundle(requestables=("phone",)):
    goal = Goal({"hotel": DomainGoal({"area": "north"}, requestables)})
    turns = (
        Turn("a hotel in the north", ("hotel",), state=hotel(area="north"), delex="try [value_name] .", response="try acorn ."),
        Turn("its phone?", ("hotel",), state=hotel(area="north"), delex="it is [value_phone] .", response="it is 1 ."),
    )
    session = DialogueSession("s1", "tiny", turns, goal)
    return CorpusBundle((session,), {"hotel": SCHEMA}, {}, {"hotel": TABLE})


def preds_with(bundle, **changes):
    session = bundle.sessions[0]
    outs = [as_outputs(t) for t in session.turns]
    for key, value in changes.items():
        field_name, index = key.rsplit("_", 1)
        outs[int(index)] = dataclasses.replace(outs[int(index)], **{field_name: value})
    return [(session, outs)]


def test_inform_success_gold():
    b = tiny_bundle()
    assert inform_success(preds_with(b), b.tables) == (100.0, 100.0)
    assert match_succf1(preds_with(b), b.tables, b.schemas) == (100.0, 100.0)


def test_no_venue_placeholder_not_informed():
    b = tiny_bundle()
    assert inform_success(preds_with(b, delex_0="try somewhere ."), b.tables) == (0.0, 0.0)


def test_wrong_state_at_venue_turn_not_informed():
    b = tiny_bundle()
    assert inform_success(preds_with(b, state_0=hotel(area="south")), b.tables)[0] == 0.0


def test_venue_needs_the_domain_predicted():
    b = tiny_bundle()
    assert inform_success(preds_with(b, domains_0=[]), b.tables)[0] == 0.0


def test_missing_requestable_costs_success_only():
    b = tiny_bundle()
    assert inform_success(preds_with(b, delex_1="it is 1 ."), b.tables) == (100.0, 0.0)


def test_last_venue_turn_decides():
    b = tiny_bundle()
    preds = preds_with(b, delex_1="or [value_name] , [value_phone] .", state_1=hotel(area="south"))
    assert inform_success(preds, b.tables)[0] == 0.0


def test_match_with_empty_states():
    b = tiny_bundle()
    preds = preds_with(b, state_0=BeliefState(), state_1=BeliefState())
    assert match_succf1(preds, b.tables, b.schemas)[0] == 100.0
    preds = preds_with(b, state_1=hotel(area="south"))
    assert match_succf1(preds, b.tables, b.schemas)[0] == 0.0


def test_succ_f1_partial():
    b = tiny_bundle(requestables=("phone", "postcode", "address", "reference"))
    preds = preds_with(b, delex_1="[value_phone] [value_postcode] [value_email] [value_name] [value_area]")
    assert match_succf1(preds, b.tables, b.schemas)[1] == pytest.approx(57.142857, abs=1e-4)


def test_missing_goal():
    b = tiny_bundle()
    bare = dataclasses.replace(b.sessions[0], goal=None)
    with pytest.raises(MissingGoal):
        inform_success([(bare, [])], b.tables)
    with pytest.raises(MissingGoal):
        match_succf1([(bare, [])], b.tables, b.schemas)


# combined ----------------------------------------------------------------------


def test_combined():
    assert combined(21.41, 94.40, 87.50) == pytest.approx(112.36, abs=0.01)
    assert combined(0, 0, 0) == 0.0
    assert combined(100, 100, 100) == 200.0


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100), st.floats(0, 50))
def test_combined_linear_in_bleu(bleu, inform, success, delta):
    assert combined(bleu + delta, inform, success) == pytest.approx(combined(bleu, inform, success) + delta, abs=0.011)


# slu ---------------------------------------------------------------------------


def slu_turn(intents, **slots):
    return TurnOutputs(intents=intents, state=BeliefState({"bank": slots}) if slots else BeliefState())


def test_slu_metrics():
    gold = [slu_turn({"bank": ["transfer"]}, amount="5"), slu_turn({"bank": ["balance"]}, account="savings", owner="me")]
    pred = [gold[0], slu_turn({"bank": ["balance"]}, account="checking", owner="me")]
    intent_acc, slot_f1, overall = slu_metrics(pred, gold)
    assert (intent_acc, overall) == (100.0, 50.0)
    assert slot_f1 == pytest.approx(200 / 3)
    assert slu_metrics(gold, gold) == (100.0, 100.0, 100.0)


def test_slu_empty_slots():
    turns = [slu_turn({"bank": ["hello"]})]
    assert slu_metrics(turns, turns)[1] == 100.0
    with pytest.raises(LengthMismatch):
        slu_metrics(turns, [])


def test_slu_overall_bounded():
    rng = random.Random(0)
    for _ in range(50):
        gold = [slu_turn({"bank": [rng.choice("ab")]}, x=rng.choice("12")) for _ in range(5)]
        pred = [slu_turn({"bank": [rng.choice("ab")]}, x=rng.choice("12")) for _ in range(5)]
        intent_acc, _, overall = slu_metrics(pred, gold)
        exact_slots = 100 * sum(p.state == g.state for p, g in zip(pred, gold)) / 5
        assert overall <= min(intent_acc, exact_slots)


# whole-run report -----------------------------------------------------------------


def test_gold_identity_report(bundle):
    report = evaluate(bundle, gold_predictions(bundle))
    assert (report.jga, report.inform, report.success, report.bleu) == (100.0, 100.0, 100.0, 100.0)
    assert (report.combined, report.match, report.succ_f1) == (200.0, 100.0, 100.0)
    assert report.intent_acc is None


def test_missing_predictions_score_low(bundle):
    report = evaluate(bundle, {})
    assert report.inform == 0.0 and report.bleu == 0.0
    assert 0 <= report.jga < 100


def test_report_ranges(bundle):
    rng = random.Random(5)
    preds = gold_predictions(bundle)
    for outs in preds.values():
        for i, o in enumerate(outs):
            if rng.random() < 0.3:
                outs[i] = dataclasses.replace(o, state=BeliefState(), delex="sorry .")
    report = evaluate(bundle, preds)
    for key in ("jga", "inform", "success", "match", "succ_f1"):
        assert 0 <= getattr(report, key) <= 100
    assert report.success <= report.inform


def test_sgd_style_report_has_slu():
    flow = TaskFlowSpec((ID,))
    schema = DomainSchema("bank", {"amount": SlotSpec("amount")}, ("transfer",))
    session = DialogueSession("q1", "slu", (Turn("send five", intents={"bank": ("transfer",)}, state=BeliefState()),))
    bundle = CorpusBundle((session,), {"bank": schema}, {}, {}, flow)
    report = evaluate(bundle, gold_predictions(bundle))
    assert (report.intent_acc, report.slot_f1, report.overall_acc) == (100.0, 100.0, 100.0)
    assert report.jga is None and report.bleu is None


def test_report_json_keys_stable():
    report = EvalReport(jga=12.345, bleu=1.0)
    data = json.loads(report.dumps())
    assert tuple(data) == REPORT_KEYS
    assert data["jga"] == 12.35 and data["inform"] is None
    assert report.render_table().splitlines()[0].split() == ["metric", "value"]


def test_average_reports():
    a = EvalReport(bleu=20.0, inform=90.0, success=80.0, combined=105.0)
    b = EvalReport(bleu=30.0, inform=100.0, success=90.0, combined=125.0)
    avg = average_reports([a, b])
    assert (avg.bleu, avg.inform, avg.success, avg.combined) == (25.0, 95.0, 85.0, 115.0)
    assert avg.jga is None
    with pytest.raises(ValueError):
        average_reports([])
