"""Corpus-level BLEU-4 with clipped n-gram precision and brevity penalty."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Sequence

from ..errors import LengthMismatch

MAX_N = 4
_TOKEN = re.compile(r"\w+|[^\w\s]")


def bleu_tokens(text: str) -> list[str]:
    """Lowercase; words and single punctuation marks are separate tokens."""
    return _TOKEN.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _check(candidates, references):
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")


def corpus_bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    """BLEU-4 x 100, no smoothing: any zero n-gram precision gives 0."""
    _check(candidates, references)
    matched = [0] * MAX_N
    total = [0] * MAX_N
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        c, r = bleu_tokens(cand), bleu_tokens(ref)
        cand_len += len(c)
        ref_len += len(r)
        for n in range(1, MAX_N + 1):
            cn, rn = _ngrams(c, n), _ngrams(r, n)
            matched[n - 1] += sum(min(k, rn[g]) for g, k in cn.items())
            total[n - 1] += max(len(c) - n + 1, 0)
    if cand_len == 0 or any(m == 0 for m in matched):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matched, total)) / MAX_N
    bp = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_p)


def sentence_bleu_smoothed(candidate: str, reference: str) -> float:
    """Single-pair BLEU-4 with add-one smoothing on every n-gram order (debug aid)."""
    c, r = bleu_tokens(candidate), bleu_tokens(reference)
    if not c:
        return 0.0
    log_p = 0.0
    for n in range(1, MAX_N + 1):
        cn, rn = _ngrams(c, n), _ngrams(r, n)
        m = sum(min(k, rn[g]) for g, k in cn.items())
        t = max(len(c) - n + 1, 0)
        log_p += math.log((m + 1) / (t + 1))
    bp = 1.0 if len(c) > len(r) else math.exp(1 - len(r) / len(c))
    return 100.0 * bp * math.exp(log_p / MAX_N)


def mean_sentence_bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    _check(candidates, references)
    if not candidates:
        return 0.0
    return sum(sentence_bleu_smoothed(c, r) for c, r in zip(candidates, references)) / len(candidates)
