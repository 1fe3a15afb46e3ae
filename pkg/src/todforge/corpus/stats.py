from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..core import DefaultTokenizer, TokenizerContract
from .serialize import TrainingSample

STATS_KEYS = ("num_samples", "avg_turns_per_sample", "avg_tokens_per_turn", "total_tokens")


@dataclass(frozen=True)
class CorpusStats:
    num_samples: int
    num_turns: int
    total_tokens: int

    @property
    def avg_turns_per_sample(self) -> Fraction:
        return Fraction(self.num_turns, self.num_samples) if self.num_samples else Fraction(0)

    @property
    def avg_tokens_per_turn(self) -> Fraction:
        return Fraction(self.total_tokens, self.num_turns) if self.num_turns else Fraction(0)

    def to_json(self) -> dict:
        return {
            "num_samples": self.num_samples,
            "avg_turns_per_sample": round(float(self.avg_turns_per_sample), 2),
            "avg_tokens_per_turn": round(float(self.avg_tokens_per_turn), 2),
            "total_tokens": self.total_tokens,
        }

    def render_table(self) -> str:
        values = {
            "num_samples": str(self.num_samples),
            "avg_turns_per_sample": f"{float(self.avg_turns_per_sample):.2f}",
            "avg_tokens_per_turn": f"{float(self.avg_tokens_per_turn):.2f}",
            "total_tokens": str(self.total_tokens),
        }
        width = max(map(len, STATS_KEYS))
        return "\n".join(f"{k:<{width}}  {values[k]:>12}" for k in STATS_KEYS)


def corpus_stats(samples: Sequence[TrainingSample], tokenizer: TokenizerContract | None = None) -> CorpusStats:
    tokenizer = tokenizer or DefaultTokenizer()
    turns = sum(len(s.turns()) for s in samples)
    tokens = sum(s.token_count(tokenizer) for s in samples)
    return CorpusStats(len(samples), turns, tokens)
