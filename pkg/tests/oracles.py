"""Independent reference implementations used to cross-check the package."""

from __future__ import annotations

import math
from collections import Counter


def norm(v: str) -> str:
    v = " ".join(str(v).split()).lower()
    if v in ("", "none", "not mentioned"):
        return ""
    if v in ("dont care", "don't care", "do not care"):
        return "dontcare"
    return v


def leading_int(text: str):
    digits = ""
    s = text.lstrip()
    if s.startswith("-"):
        digits, s = "-", s[1:]
    for ch in s:
        if not ch.isdigit():
            break
        digits += ch
    if digits in ("", "-"):
        raise TypeError(text)
    return int(digits)


def check_numeric(records: list[dict], constraints) -> None:
    """Raise TypeError when an at_least constraint meets any non-numeric value."""
    for slot, (rel, values) in constraints.items():
        if rel != "at_least" or "dontcare" in [norm(v) for v in values]:
            continue
        if not any(slot in r for r in records):
            continue  # slots the table lacks are ignored
        leading_int(norm(values[0]))
        for r in records:
            if slot in r:
                leading_int(norm(r[slot]))


def record_matches(record: dict, constraints: dict[str, tuple[str, tuple[str, ...]]]) -> bool:
    """constraints: slot -> (relation, values). Raises TypeError for non-numeric at_least."""
    for slot, (rel, values) in constraints.items():
        if slot not in record:
            continue
        vals = [norm(v) for v in values]
        if "dontcare" in vals:
            continue
        have = norm(record[slot])
        if rel in ("plain", "equal_to"):
            ok = have == vals[0]
        elif rel == "not":
            ok = have != vals[0]
        elif rel == "one_of":
            ok = have in vals
        else:
            ok = leading_int(have) >= leading_int(vals[0])
        if not ok:
            return False
    return True


def brute_emissions(turns: list[list[str]], window):
    """Windowed re-emission restated with 'turn of last emission' bookkeeping."""
    last: dict[str, int] = {}
    out = []
    for t, labels in enumerate(turns):
        emitted = []
        for y in labels:
            if y in emitted:
                continue
            since = t - last[y] if y in last else None
            if since is None or (window is not None and since > window):
                emitted.append(y)
                last[y] = t
        out.append(emitted)
    return out


def brute_bleu(cands: list[list[str]], refs: list[list[str]]) -> float:
    """Corpus BLEU-4 by explicit enumeration of every n-gram occurrence."""
    num = [0] * 4
    den = [0] * 4
    c_len = sum(len(c) for c in cands)
    r_len = sum(len(r) for r in refs)
    for c, r in zip(cands, refs):
        for n in range(1, 5):
            c_grams = [tuple(c[i : i + n]) for i in range(len(c) - n + 1)]
            r_grams = [tuple(r[i : i + n]) for i in range(len(r) - n + 1)]
            used = Counter()
            for gram in c_grams:
                den[n - 1] += 1
                if used[gram] < r_grams.count(gram):
                    used[gram] += 1
                    num[n - 1] += 1
    if c_len == 0 or 0 in num:
        return 0.0
    precisions = [num[i] / den[i] for i in range(4)]
    geo = math.exp(sum(math.log(p) for p in precisions) / 4)
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return 100 * bp * geo


def as_outputs(turn):
    """A gold turn dressed up as a prediction."""
    from todforge.orchestrator import TurnOutputs

    return TurnOutputs(
        domains=list(turn.domains) if turn.domains is not None else None,
        intents={d: list(v) for d, v in turn.intents.items()} if turn.intents is not None else None,
        state=turn.state,
        db=turn.db,
        acts=turn.acts,
        delex=turn.delex,
        response=turn.response,
    )


def gold_predictions(bundle):
    return {s.id: [as_outputs(t) for t in s.turns] for s in bundle.sessions}
