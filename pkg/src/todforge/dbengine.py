"""Belief-state constrained lookups over per-domain entity tables."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import DONTCARE, DbGroup, DbResult, ValueExpr, normalize_value
from .errors import TypeMismatch

log = logging.getLogger(__name__)

DEFAULT_ENTRY_LIMIT = 1

_LEADING_INT = re.compile(r"^\s*(-?\d+)")


@dataclass(frozen=True)
class DbTable:
    domain: str
    records: tuple[Mapping[str, str], ...]

    def __post_init__(self):
        records = tuple({k: normalize_value(v) for k, v in r.items()} for r in self.records)
        if records:
            keys = set(records[0])
            for i, r in enumerate(records):
                if set(r) != keys:
                    raise ValueError(f"{self.domain} record {i} has keys {sorted(r)}, expected {sorted(keys)}")
        object.__setattr__(self, "records", records)

    @property
    def attributes(self) -> frozenset[str]:
        return frozenset(self.records[0]) if self.records else frozenset()

    def __len__(self) -> int:
        return len(self.records)


def _leading_int(text: str, what: str) -> int:
    m = _LEADING_INT.match(text)
    if m is None:
        raise TypeMismatch(f"at_least needs an integer, {what} is {text!r}")
    return int(m.group(1))


def _vacuous(expr: ValueExpr) -> bool:
    return any(normalize_value(v) == DONTCARE for v in expr.values)


def holds(expr: ValueExpr, field_value: str) -> bool:
    """Whether a single record value satisfies one constraint."""
    wanted = [normalize_value(v) for v in expr.values]
    if DONTCARE in wanted:
        return True
    have = normalize_value(field_value)
    if expr.relation in ("plain", "equal_to"):
        return have == wanted[0]
    if expr.relation == "not":
        return have != wanted[0]
    if expr.relation == "one_of":
        return have in wanted
    # at_least
    return _leading_int(have, "record value") >= _leading_int(wanted[0], "constraint")


def _as_expr(value) -> ValueExpr:
    return value if isinstance(value, ValueExpr) else ValueExpr.plain(str(value))


def query(table: DbTable, constraints: Mapping[str, ValueExpr | str]) -> list[dict[str, str]]:
    """Records satisfying every constraint, in table order.

    Constraint slots the table does not have are ignored. ``TypeMismatch`` is
    raised when an ``at_least`` constraint or any value of its column is not
    numeric, independently of the other constraints.
    """
    attrs = table.attributes
    active = [(slot, _as_expr(v)) for slot, v in constraints.items() if slot in attrs]
    for slot, expr in active:
        if expr.relation == "at_least" and not _vacuous(expr):
            _leading_int(normalize_value(expr.values[0]), "constraint")
            for r in table.records:
                _leading_int(r[slot], f"{table.domain}.{slot}")
    return [dict(r) for r in table.records if all(holds(e, r[slot]) for slot, e in active)]


def query_lenient(table: DbTable, constraints: Mapping[str, ValueExpr | str]) -> list[dict[str, str]]:
    """Like :func:`query`, but drops constraints that raise ``TypeMismatch`` and retries."""
    kept = dict(constraints)
    while True:
        try:
            return query(table, kept)
        except TypeMismatch as exc:
            bad = _first_mismatch(table, kept)
            log.warning("dropping constraint %s on %s: %s", bad, table.domain, exc)
            kept.pop(bad)


def _first_mismatch(table: DbTable, constraints: Mapping[str, ValueExpr | str]) -> str:
    for slot, value in constraints.items():
        try:
            query(table, {slot: value})
        except TypeMismatch:
            return slot
    raise AssertionError("no constraint raised TypeMismatch")  # pragma: no cover


def db_result(
    results: Mapping[str, Sequence[Mapping[str, str]]], entry_limit: int = DEFAULT_ENTRY_LIMIT
) -> DbResult:
    return DbResult(
        {d: DbGroup(len(rows), tuple(rows[: max(entry_limit, 0)])) for d, rows in results.items()}
    )


def _entries_json(entries) -> str:
    return json.dumps([dict(e) for e in entries], ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def render_db_result(result: DbResult, entry_limit: int = DEFAULT_ENTRY_LIMIT) -> str:
    parts = []
    for domain in sorted(result.groups):
        group = result.groups[domain]
        part = f"{domain}: {group.match_count}"
        if entry_limit > 0:
            part += " " + _entries_json(group.entries[:entry_limit])
        parts.append(part)
    return "; ".join(parts)


def render_db_line(
    results: Mapping[str, Sequence[Mapping[str, str]]], entry_limit: int = DEFAULT_ENTRY_LIMIT
) -> str:
    """``hotel: 10`` per domain (sorted), plus up to ``entry_limit`` records as JSON.

    >>> render_db_line({"hotel": [{"name": "a"}] * 10}, 0)
    'hotel: 10'
    """
    if entry_limit < 0:
        raise ValueError("entry_limit must be >= 0")
    return render_db_result(db_result(results, entry_limit), entry_limit)
