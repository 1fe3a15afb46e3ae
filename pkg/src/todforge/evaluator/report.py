"""Whole-run evaluation and its table/JSON rendering."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Sequence

from ..core import CONC_RG, DELEX_RG, DST, ID
from ..ingest.bundle import CorpusBundle
from ..orchestrator.runner import TurnOutputs
from .bleu import corpus_bleu, mean_sentence_bleu
from .metrics import combined, inform_success, jga, match_succf1, padded, slu_metrics

REPORT_KEYS = (
    "jga",
    "inform",
    "success",
    "bleu",
    "combined",
    "match",
    "succ_f1",
    "intent_acc",
    "slot_f1",
    "overall_acc",
)


@dataclass(frozen=True)
class EvalReport:
    """Metric values; None where the flow or data does not support a metric."""

    jga: float | None = None
    inform: float | None = None
    success: float | None = None
    bleu: float | None = None
    combined: float | None = None
    match: float | None = None
    succ_f1: float | None = None
    intent_acc: float | None = None
    slot_f1: float | None = None
    overall_acc: float | None = None

    def to_json(self) -> dict[str, float | None]:
        return {k: (None if v is None else round(v, 2)) for k, v in asdict(self).items()}

    def render_table(self) -> str:
        width = max(len(k) for k in REPORT_KEYS)
        rows = [f"{'metric':<{width}}  value"]
        for key in REPORT_KEYS:
            value = getattr(self, key)
            rows.append(f"{key:<{width}}  {'-' if value is None else f'{value:.2f}'}")
        return "\n".join(rows)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)


def evaluate(
    bundle: CorpusBundle,
    predictions: Mapping[str, Sequence[TurnOutputs]],
    *,
    sentence_bleu: bool = False,
) -> EvalReport:
    """Score predictions (keyed by session id) against every session in ``bundle``."""
    flow = bundle.flow
    pairs = [(s, padded(s, predictions.get(s.id, ()))) for s in bundle.sessions]
    turns = [(gold, pred) for s, outs in pairs for gold, pred in zip(s.turns, outs)]
    values: dict[str, float] = {}

    if DST in flow:
        values["jga"] = jga([p.state for _, p in turns], [g.state for g, _ in turns])

    text_field = "response" if CONC_RG in flow else "delex" if DELEX_RG in flow else None
    if text_field is not None:
        scored = [(getattr(p, text_field) or "", getattr(g, text_field)) for g, p in turns]
        scored = [(c, r) for c, r in scored if r is not None]
        cands, refs = [c for c, _ in scored], [r for _, r in scored]
        values["bleu"] = mean_sentence_bleu(cands, refs) if sentence_bleu else corpus_bleu(cands, refs)

    with_goals = [(s, o) for s, o in pairs if s.goal is not None]
    if DELEX_RG in flow and with_goals:
        values["inform"], values["success"] = inform_success(with_goals, bundle.tables)
        values["match"], values["succ_f1"] = match_succf1(with_goals, bundle.tables, bundle.schemas)
        if "bleu" in values:
            values["combined"] = combined(values["bleu"], values["inform"], values["success"])

    if ID in flow:
        values["intent_acc"], values["slot_f1"], values["overall_acc"] = slu_metrics(
            [p for _, p in turns], [g for g, _ in turns]
        )
    return EvalReport(**values)


def average_reports(reports: Sequence[EvalReport]) -> EvalReport:
    if not reports:
        raise ValueError("no reports to average")
    out = {}
    for f in fields(EvalReport):
        vals = [getattr(r, f.name) for r in reports]
        out[f.name] = None if any(v is None for v in vals) else sum(vals) / len(vals)
    if out["bleu"] is not None and out["inform"] is not None and out["success"] is not None:
        out["combined"] = combined(out["bleu"], out["inform"], out["success"])
    return EvalReport(**out)
