"""Total parsers for generated task outputs.

Each ``parse_*`` never raises: malformed text yields the empty structure of
the right shape. The ``*_strict`` variants raise ``ValueError`` instead and
back both the lenient parsers and bundle loading.
"""

from __future__ import annotations

import json
import re
from typing import Collection

from ..core import RELATIONAL, Act, ActSet, BeliefState, ValueExpr
from ..corpus import grammar as g

_BRACKET = re.compile(r'^\[([^\[\]\s{}"]+)\]$')
_SLOT = re.compile(r'^[^\[\]\s{}"]+$')


def parse_domains_strict(text: str) -> list[str]:
    obj = json.loads(text)
    if not isinstance(obj, list) or not all(isinstance(d, str) for d in obj):
        raise ValueError("domains must be a JSON array of strings")
    return obj


def parse_intents_strict(text: str) -> dict[str, list[str]]:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("intents must be a JSON object")
    for names in obj.values():
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ValueError("intent lists must be arrays of strings")
    return obj


def _scalar(value) -> str:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ValueError(f"slot value must be a string, got {type(value).__name__}")
    return str(value)


def parse_state_strict(text: str, dst_format: str = "plain") -> BeliefState:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("state must be a JSON object")
    relational = dst_format == RELATIONAL
    domains = {}
    for domain, slots in obj.items():
        if not isinstance(slots, dict):
            raise ValueError(f"state of {domain!r} must be an object")
        domains[domain] = {s: ValueExpr.from_text(_scalar(v), relational) for s, v in slots.items()}
    return BeliefState(domains)


def parse_acts_strict(text: str, domains: Collection[str] | None = None) -> ActSet:
    """Parse ``[domain] [act] slot ... [act] slot ... [domain] ...``.

    With ``domains`` given, a bracket token is a domain iff it names one.
    Without it, a bracket token is a domain when it opens the text or is
    directly followed by another bracket token; acts without slots are then
    only unambiguous in last position.
    """
    tokens = text.split()
    kinds = []
    for tok in tokens:
        m = _BRACKET.match(tok)
        if m:
            kinds.append(("bracket", m.group(1)))
        elif _SLOT.match(tok):
            kinds.append(("slot", tok))
        else:
            raise ValueError(f"bad act token {tok!r}")

    acts: list[Act] = []
    domain = None
    act = None
    slots: list[str] = []

    def flush():
        if act is not None:
            acts.append(Act(domain, act, tuple(slots)))

    for i, (kind, name) in enumerate(kinds):
        nxt = kinds[i + 1][0] if i + 1 < len(kinds) else None
        if kind == "slot":
            if act is None:
                raise ValueError(f"slot {name!r} before any act")
            slots.append(name)
            continue
        if domains is not None:
            is_domain = name in domains
        else:
            is_domain = domain is None or nxt == "bracket"
        if is_domain:
            if nxt != "bracket" or (domains is not None and kinds[i + 1][1] in domains):
                raise ValueError(f"domain [{name}] must be followed by an act")
            flush()
            domain, act, slots = name, None, []
        else:
            if domain is None:
                raise ValueError(f"act [{name}] before any domain")
            flush()
            act, slots = name, []
    flush()
    return ActSet(tuple(acts))


def parse_domains(text: str) -> list[str]:
    return _lenient(parse_domains_strict, list, text)[0]


def parse_intents(text: str) -> dict[str, list[str]]:
    return _lenient(parse_intents_strict, dict, text)[0]


def parse_state(text: str, dst_format: str = "plain") -> BeliefState:
    return _lenient(lambda t: parse_state_strict(t, dst_format), BeliefState, text)[0]


def parse_acts(text: str, domains: Collection[str] | None = None) -> ActSet:
    return _lenient(lambda t: parse_acts_strict(t, domains), ActSet, text)[0]


def _lenient(fn, empty, text):
    try:
        return fn(text), True
    except Exception:  # totality: no generated text may crash the dialogue
        return empty(), False


def parse_tagged(tag: str, text: str, dst_format: str = "plain", domains: Collection[str] | None = None):
    """(structure, parsed_ok) for one generated line payload."""
    if tag == g.DOMAINS:
        return _lenient(parse_domains_strict, list, text)
    if tag == g.INTENTS:
        return _lenient(parse_intents_strict, dict, text)
    if tag == g.STATE:
        return _lenient(lambda t: parse_state_strict(t, dst_format), BeliefState, text)
    if tag == g.ACTS:
        return _lenient(lambda t: parse_acts_strict(t, domains), ActSet, text)
    return text, True
