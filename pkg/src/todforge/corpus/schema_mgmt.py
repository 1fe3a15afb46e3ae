"""Windowed schema re-emission.

A label's schema is written into the context the first time the label shows
up, and again only once more than ``window`` turns have passed since it was
last written. ``window=None`` means a schema is written once per session;
``window=0`` re-emits on every turn (management effectively off).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


@dataclass
class SchemaRegistry:
    window: int | None = None
    ages: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ValueError("window must be >= 0 or None")

    def _due(self, label: str) -> bool:
        if label not in self.ages:
            return True
        return self.window is not None and self.ages[label] > self.window


def schema_emissions(registry: SchemaRegistry, turn_labels: Iterable[str]) -> list[str]:
    """Process one turn's labels; return those whose schema must be emitted now."""
    emitted: list[str] = []
    for label in turn_labels:
        if label in emitted:
            continue
        if registry._due(label):
            emitted.append(label)
            registry.ages[label] = 0
    for label in registry.ages:
        registry.ages[label] += 1
    return emitted
