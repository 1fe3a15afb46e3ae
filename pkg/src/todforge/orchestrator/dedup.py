"""Collapse runaway repetition at the end of generated text."""

from __future__ import annotations

MIN_UNIT = 4
MIN_REPEATS = 3


def _collapse_once(text: str) -> str:
    n = len(text)
    for size in range(n // MIN_REPEATS, MIN_UNIT - 1, -1):
        unit = text[n - size :]
        if not text.endswith(unit * MIN_REPEATS):
            continue
        end = n - size * MIN_REPEATS
        while end >= size and text[end - size : end] == unit:
            end -= size
        return text[:end] + unit
    return text


def dedup(text: str) -> str:
    """Replace a trailing run of >= 3 copies of a unit (>= 4 chars) by one copy.

    The longest qualifying unit wins, and collapsing repeats until nothing
    changes, so ``dedup(dedup(x)) == dedup(x)``.

    >>> dedup("cheap cheap cheap cheap ")
    'cheap '
    >>> dedup("abab")
    'abab'
    """
    while True:
        out = _collapse_once(text)
        if out == text:
            return out
        text = out
