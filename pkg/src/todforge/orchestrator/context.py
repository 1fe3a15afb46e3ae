"""Inference-time context assembly under a token budget."""

from __future__ import annotations

import math
from typing import Sequence

from ..core import TokenizerContract
from ..corpus import grammar as g
from ..errors import InstructionsTooLarge


def omitted_header(omitted: int) -> str:
    return f"{g.OMITTED_PREFIX}{omitted}\n" if omitted else ""


def assemble(turn_renderings: Sequence[str], instructions: str, keep: int) -> str:
    """Instructions, an omitted-turns header if needed, then the newest ``keep`` turns."""
    dropped = len(turn_renderings) - keep
    kept = turn_renderings[dropped:] if keep else []
    return instructions + omitted_header(dropped) + "".join(kept)


def history_to_keep(
    turn_renderings: Sequence[str],
    instructions: str,
    tokenizer: TokenizerContract,
    max_len: int,
    ratio: float = 0.75,
    max_history_turns: int | None = None,
) -> int:
    """Number of newest whole turns that fit both limits."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must be in (0, 1]")
    budget = max_len * ratio
    if tokenizer.count(instructions) > budget:
        raise InstructionsTooLarge(
            f"instruction block needs {tokenizer.count(instructions)} tokens; budget is {math.floor(budget)}"
        )
    keep = len(turn_renderings)
    if max_history_turns is not None:
        keep = min(keep, max(max_history_turns, 0))
    while keep > 0 and tokenizer.count(assemble(turn_renderings, instructions, keep)) > budget:
        keep -= 1
    return keep


def truncate_context(
    turn_renderings: Sequence[str],
    instructions: str,
    tokenizer: TokenizerContract,
    max_len: int,
    ratio: float = 0.75,
    max_history_turns: int | None = None,
) -> str:
    keep = history_to_keep(turn_renderings, instructions, tokenizer, max_len, ratio, max_history_turns)
    return assemble(turn_renderings, instructions, keep)
