"""Instruction block prepended to every sample and inference context."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..core import CONC_RG, DELEX_RG, DI, DST, ID, RELATIONAL, SAD, TaskFlowSpec

SYSTEM_INSTRUCTION = (
    "Please act as an AI assistant to interact with the user in a task-oriented dialogue scenario "
    "to meet his/her needs.\n"
    "For each message from the user, follow the instructions below to generate intermediate results "
    "until the assistant replies:"
)

PLAIN_DST_FORMAT = (
    '{"format": {"{slot_name}": "{slot_value}"}, "examples": {"slot1": "val1", "slot2": "val2"}}'
)
RELATIONAL_DST_FORMAT = (
    '{"relations": ["equal_to", "at_least", "not", "one_of"], '
    '"examples": {"slot1": "one_of(val1, val2)", "slot2": "equal_to(val3)"}}'
)

TASK_TEMPLATES = {
    DI: "Please identify the domains involved in the user message from: {domain_list}.",
    ID: "Select the correct intent(s) expressed in the user text among the provided intents.",
    DST: (
        "Please maintain the user's needs from the beginning of the dialogue to the present "
        "in the following format of slot-value pairs: {dst_format}."
    ),
    SAD: "Before generating the assistant's reply, summarize the system action decisions.",
    DELEX_RG: "Generate delexicalized assistant reply.",
    CONC_RG: "Generate concrete assistant reply.",
}


@dataclass(frozen=True)
class InstructionBlock:
    system_text: str
    task_lines: tuple[tuple[str, str], ...]

    def render(self) -> str:
        numbered = [f"{i}. {text}" for i, (_, text) in enumerate(self.task_lines, start=1)]
        return "\n".join([self.system_text, *numbered]) + "\n"


def render_instructions(
    flow: TaskFlowSpec, domain_list: Sequence[str], dst_format: str | None = None
) -> InstructionBlock:
    fmt = dst_format or flow.dst_format
    fmt_text = RELATIONAL_DST_FORMAT if fmt == RELATIONAL else PLAIN_DST_FORMAT
    domains = json.dumps(list(domain_list), ensure_ascii=False)
    lines = []
    for task in flow.tasks:
        # str.replace, not format: the DST block itself contains braces.
        text = TASK_TEMPLATES[task].replace("{domain_list}", domains).replace("{dst_format}", fmt_text)
        lines.append((task, text))
    return InstructionBlock(SYSTEM_INSTRUCTION, tuple(lines))
