import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import act_sets, belief_states, domain_lists, intent_maps
from todforge.core import Act, ActSet, BeliefState, ValueExpr
from todforge.corpus import grammar as g
from todforge.orchestrator.parsing import (
    parse_acts,
    parse_acts_strict,
    parse_domains,
    parse_intents,
    parse_state,
    parse_tagged,
)

KNOWN = {"hotel", "train", "restaurant", "taxi"}


def test_domain_examples():
    assert parse_domains('["hotel", "train"]') == ["hotel", "train"]
    assert g.serialize_domains(["hotel", "train"]) == '["hotel", "train"]'
    assert parse_domains("[]") == []


def test_state_example():
    state = parse_state('{"hotel": {"pricerange": "cheap", "area": "west"}}')
    assert state.constraints("hotel") == {"pricerange": ValueExpr.plain("cheap"), "area": ValueExpr.plain("west")}
    assert g.serialize_state(state) == '{"hotel": {"area": "west", "pricerange": "cheap"}}'


def test_relational_state():
    state = parse_state('{"restaurant": {"rating": "at_least(4)", "cuisine": "one_of(thai, greek)"}}', "relational")
    assert state.constraints("restaurant")["rating"] == ValueExpr("at_least", ("4",))
    assert state.constraints("restaurant")["cuisine"] == ValueExpr("one_of", ("thai", "greek"))
    plain = parse_state('{"restaurant": {"rating": "at_least(4)"}}', "plain")
    assert plain.constraints("restaurant")["rating"] == ValueExpr.plain("at_least(4)")


def test_state_numbers_accepted_but_not_bools():
    assert parse_state('{"hotel": {"stars": 4}}').to_json() == {"hotel": {"stars": "4"}}
    assert parse_state('{"hotel": {"stars": true}}') == BeliefState()


def test_acts_example():
    acts = parse_acts("[hotel] [recommend] name [inform] type stars")
    assert acts.acts == (Act("hotel", "recommend", ("name",)), Act("hotel", "inform", ("type", "stars")))
    assert g.serialize_acts(acts) == "[hotel] [recommend] name [inform] type stars"
    multi = parse_acts("[hotel] [inform] area [train] [request] day")
    assert multi.domains() == ["hotel", "train"]


def test_acts_with_known_domains_allow_slotless_acts():
    text = "[hotel] [greet] [inform] area [train] [bye]"
    acts = parse_acts_strict(text, KNOWN)
    assert acts.acts == (Act("hotel", "greet"), Act("hotel", "inform", ("area",)), Act("train", "bye"))


@pytest.mark.parametrize("text", ["garbage{{", "", "[", "{not json", "null", '"hotel"', "[1, 2]", '{"a": 1}x'])
def test_malformed_domains_and_states(text):
    assert parse_domains(text) == []
    assert parse_state(text) == BeliefState()
    assert parse_intents(text) == {}


@pytest.mark.parametrize("text", ["area [hotel]", "[hotel]", "[hotel] [inform] {x}", "[hotel] [train]"])
def test_malformed_acts(text):
    assert parse_acts(text, KNOWN) == ActSet()


def test_parse_tagged_reports_failures_and_passes_text():
    assert parse_tagged(g.STATE, "{oops") == (BeliefState(), False)
    assert parse_tagged(g.DOMAINS, '["hotel"]') == (["hotel"], True)
    assert parse_tagged(g.DELEX, "anything at all") == ("anything at all", True)
    assert parse_tagged(g.INTENTS, '{"hotel": ["find"]}') == ({"hotel": ["find"]}, True)
    assert parse_tagged(g.INTENTS, '{"hotel": "find"}') == ({}, False)


@settings(max_examples=200, deadline=None)
@given(belief_states())
def test_state_round_trip_plain(state):
    assert parse_state(g.serialize_state(state)) == state


@settings(max_examples=200, deadline=None)
@given(belief_states(relational=True))
def test_state_round_trip_relational(state):
    assert parse_state(g.serialize_state(state), "relational") == state


@settings(max_examples=200, deadline=None)
@given(act_sets())
def test_acts_round_trip(acts):
    assert parse_acts(g.serialize_acts(acts), KNOWN) == acts


@given(act_sets().filter(lambda a: all(x.slots for x in a.acts)))
def test_acts_round_trip_without_domain_set(acts):
    # Without a domain inventory, an act needs slots to be told apart from a domain.
    assert parse_acts(g.serialize_acts(acts)) == acts


@given(domain_lists(), intent_maps())
def test_domains_and_intents_round_trip(domains, intents):
    assert parse_domains(g.serialize_domains(domains)) == domains
    assert parse_intents(g.serialize_intents(intents)) == intents


@given(st.text())
def test_parsers_are_total(text):
    for fn in (parse_domains, parse_intents, parse_state, parse_acts):
        fn(text)
    parse_state(text, "relational")
    for tag in g.SUPERVISED_TAGS:
        structure, ok = parse_tagged(tag, text)
        assert isinstance(ok, bool)


def corrupt(text: str, k: int) -> str:
    """Mutations that always break the payload's syntax."""
    if k % 4 == 0:
        return text[: max(len(text) // 2, 1) - 1] + "{"
    if k % 4 == 1:
        return "}" + text
    if k % 4 == 2:
        return text + ' "dangling'
    return text.replace("{", "[").replace("}", "") + "{"


@settings(max_examples=100, deadline=None)
@given(belief_states(), st.integers(0, 3))
def test_corrupted_states_give_empty(state, k):
    bad = corrupt(g.serialize_state(state), k)
    parsed, ok = parse_tagged(g.STATE, bad)
    assert parsed == BeliefState() and not ok
    with pytest.raises(ValueError):
        json.loads(bad)
