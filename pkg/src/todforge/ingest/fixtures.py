"""Deterministic synthetic hotel/train bundles with complete gold annotations.

Gold DB results are always computed by querying the bundle's own tables with
the gold state, so fixtures satisfy ``query(gold state) == gold db`` by
construction.
"""

from __future__ import annotations

import random
from typing import Sequence

from ..core import (
    DONTCARE,
    MULTIWOZ_FLOW,
    Act,
    ActSet,
    BeliefState,
    DialogueSession,
    DomainGoal,
    DomainSchema,
    Goal,
    IntentSchema,
    SlotSpec,
    Turn,
    placeholder,
    venue_slot,
)
from ..dbengine import DEFAULT_ENTRY_LIMIT, DbTable, db_result, query
from .bundle import CorpusBundle

FIXTURE_DOMAINS = ("hotel", "train")

_HOTEL_NAMES = [
    "acorn guest house", "alexander bed and breakfast", "allenbell", "arbury lodge",
    "ashley hotel", "autumn house", "avalon", "bridge guest house", "cambridge belfry",
    "carolina bed and breakfast", "cityroomz", "el shaddai", "finches bed and breakfast",
    "gonville hotel", "hamilton lodge", "hobsons house", "huntingdon marriott hotel",
    "kirkwood house", "leverton house", "lovell lodge",
]
_STREETS = ["mill", "chesterton", "hills", "milton", "regent", "trumpington", "newmarket", "histon"]
_PLACES = ["cambridge", "london", "ely", "norwich", "stevenage", "peterborough"]
_DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
_TIMES = ["05:00", "07:15", "09:30", "11:45", "14:00", "16:15", "18:30"]

_CLOSED = {
    "hotel": {
        "area": ["centre", "north", "south", "east", "west"],
        "pricerange": ["cheap", "moderate", "expensive"],
        "type": ["hotel", "guesthouse"],
        "stars": ["1", "2", "3", "4", "5"],
        "parking": ["yes", "no"],
        "internet": ["yes", "no"],
    },
    "train": {
        "departure": _PLACES,
        "destination": _PLACES,
        "day": _DAYS,
        "leaveat": _TIMES,
    },
}
_OPEN = {"hotel": ["phone", "postcode", "address"], "train": ["arriveby", "price", "duration"]}
_NOUN = {"hotel": "a place to stay", "train": "a train"}


def _hotel_rows(rng: random.Random, n: int) -> list[dict[str, str]]:
    rows = []
    for name in rng.sample(_HOTEL_NAMES, n):
        row = {"name": name}
        for slot, values in _CLOSED["hotel"].items():
            row[slot] = rng.choice(values)
        row["phone"] = "01223" + "".join(rng.choice("0123456789") for _ in range(6))
        row["postcode"] = f"cb{rng.randint(1, 5)} {rng.randint(1, 9)}{rng.choice('abdeh')}{rng.choice('jlnpq')}"
        row["address"] = f"{rng.randint(1, 150)} {rng.choice(_STREETS)} road"
        rows.append(row)
    return rows


def _train_rows(rng: random.Random, n: int) -> list[dict[str, str]]:
    rows = []
    ids = rng.sample(range(1000, 10000), n)
    for tid in ids:
        dep, dest = rng.sample(_PLACES, 2)
        leave = rng.choice(_TIMES)
        minutes = rng.choice([17, 38, 50, 79, 105])
        h, m = map(int, leave.split(":"))
        total = h * 60 + m + minutes
        rows.append(
            {
                "trainid": f"tr{tid}",
                "departure": dep,
                "destination": dest,
                "day": rng.choice(_DAYS),
                "leaveat": leave,
                "arriveby": f"{total // 60 % 24:02d}:{total % 60:02d}",
                "price": f"{rng.randint(4, 40)}.{rng.choice(['00', '10', '60', '80'])} pounds",
                "duration": f"{minutes} minutes",
            }
        )
    return rows


def fixture_schemas(databases) -> tuple[dict[str, DomainSchema], dict[str, IntentSchema]]:
    schemas: dict[str, DomainSchema] = {}
    intents: dict[str, IntentSchema] = {}
    for domain in databases:
        venue = venue_slot(domain)
        slots = {
            venue: SlotSpec(
                venue, tuple(r[venue] for r in databases[domain]), informable=(domain == "hotel"), requestable=True
            )
        }
        for slot, values in _CLOSED[domain].items():
            slots[slot] = SlotSpec(slot, tuple(values), informable=True, requestable=True)
        for slot in _OPEN[domain]:
            slots[slot] = SlotSpec(slot, (), informable=False, requestable=True)
        find, book = f"find_{domain}", f"book_{domain}"
        schemas[domain] = DomainSchema(domain, slots, (find, book))
        intents[find] = IntentSchema(find, domain, (), tuple(_CLOSED[domain]), (venue, *_OPEN[domain]))
        intents[book] = IntentSchema(book, domain, (venue,), (), ())
    return schemas, intents


def _split(rng: random.Random, total: int, parts: int) -> list[int]:
    if parts == 1:
        return [total]
    first = rng.randint(1, total - 1)
    return [first, total - first]


class _SessionBuilder:
    def __init__(self, rng, tables, schemas, entry_limit):
        self.rng = rng
        self.tables = tables
        self.schemas = schemas
        self.entry_limit = entry_limit
        self.state: dict[str, dict[str, str]] = {}
        self.turns: list[Turn] = []

    def _turn(self, domain, user, acts, delex, response):
        state = BeliefState({d: dict(s) for d, s in self.state.items()})
        rows = query(self.tables[domain], state.constraints(domain))
        self.turns.append(
            Turn(
                user=user,
                domains=(domain,),
                intents={domain: (f"find_{domain}",)},
                state=state,
                db=db_result({domain: rows}, self.entry_limit),
                acts=ActSet(tuple(acts)),
                delex=delex,
                response=response,
            )
        )
        return rows

    def domain_segment(self, domain: str, m: int) -> DomainGoal:
        rng = self.rng
        venue = venue_slot(domain)
        avail = list(_CLOSED[domain])
        reqs = list(_OPEN[domain])
        q = 0 if m == 1 else rng.randint(1, min(2, m - 1))
        q = max(q, m - len(avail))
        reveal_turns = m - q
        n_items = min(len(avail), max(reveal_turns, rng.randint(1, 3)))
        n_dc = 1 if n_items >= 3 and rng.random() < 0.3 else 0
        target = rng.choice(self.tables[domain].records)
        slots = rng.sample(avail, n_items)
        items = [(s, target[s]) for s in slots[: n_items - n_dc]] + [(s, DONTCARE) for s in slots[n_items - n_dc :]]
        constraints = {s: v for s, v in items if v != DONTCARE}

        groups = [[items[i]] for i in range(reveal_turns - 1)] + [items[reveal_turns - 1 :]]
        self.state.setdefault(domain, {})
        for k, group in enumerate(groups):
            for s, v in group:
                self.state[domain][s] = v
            phrases = [
                f"i do not mind about the {s}" if v == DONTCARE else f"the {s} should be {v}" for s, v in group
            ]
            user = " and ".join(phrases) + " ."
            if k == 0:
                user = f"i am looking for {_NOUN[domain]} , " + user
            if k + 1 < len(groups):
                ask = groups[k + 1][0][0]
                text = f"what {ask} would you like ?"
                self._turn(domain, user, [Act(domain, "request", (ask,))], text, text)
                continue
            rows = self._turn(domain, user, [], "", "")  # placeholder, replaced below
            offered = rows[0]
            shown = next(iter(constraints))
            delex = f"i recommend {placeholder(venue)} , which has {shown} {placeholder(shown)} ."
            concrete = f"i recommend {offered[venue]} , which has {shown} {offered[shown]} ."
            acts = [Act(domain, "recommend", (venue,)), Act(domain, "inform", (shown,))]
            last = self.turns.pop()
            self.turns.append(
                Turn(last.user, last.domains, last.intents, last.state, last.db, ActSet(tuple(acts)), delex, concrete)
            )

        chosen = rng.sample(reqs, min(q, len(reqs)))
        for k in range(q):
            slot = chosen[k % len(chosen)]
            user = f"could you give me the {slot} ?"
            delex = f"the {slot} is {placeholder(slot)} ."
            concrete = f"the {slot} is {offered[slot]} ."
            self._turn(domain, user, [Act(domain, "inform", (slot,))], delex, concrete)
        return DomainGoal(constraints, tuple(chosen), requires_venue=True)


def synth_fixtures(
    num_sessions: int,
    seed: int,
    *,
    min_turns: int = 2,
    max_turns: int = 6,
    domains: Sequence[str] = FIXTURE_DOMAINS,
    entry_limit: int = DEFAULT_ENTRY_LIMIT,
    db_size: int = 10,
) -> CorpusBundle:
    """Build ``num_sessions`` synthetic sessions; identical output for identical arguments."""
    if num_sessions < 1:
        raise ValueError("num_sessions must be >= 1")
    if not 1 <= min_turns <= max_turns:
        raise ValueError("need 1 <= min_turns <= max_turns")
    unknown = set(domains) - set(FIXTURE_DOMAINS)
    if unknown or not domains:
        raise ValueError(f"fixture domains must be a nonempty subset of {FIXTURE_DOMAINS}")
    domains = [d for d in FIXTURE_DOMAINS if d in domains]

    db_rng = random.Random(seed)
    builders = {"hotel": _hotel_rows, "train": _train_rows}
    databases = {d: builders[d](db_rng, db_size) for d in domains}
    schemas, intents = fixture_schemas(databases)
    tables = {d: DbTable(d, rows) for d, rows in databases.items()}

    sessions = []
    for i in range(num_sessions):
        rng = random.Random(f"{seed}/{i}")
        n_turns = rng.randint(min_turns, max_turns)
        two = len(domains) > 1 and n_turns >= 2 and rng.random() < 0.4
        picked = rng.sample(domains, 2) if two else [rng.choice(domains)]
        builder = _SessionBuilder(rng, tables, schemas, entry_limit)
        goal = {}
        for domain, m in zip(picked, _split(rng, n_turns, len(picked))):
            goal[domain] = builder.domain_segment(domain, m)
        sessions.append(DialogueSession(f"synth-{seed}-{i:05d}", "synthetic", tuple(builder.turns), Goal(goal)))

    return CorpusBundle(tuple(sessions), schemas, intents, databases, MULTIWOZ_FLOW)
