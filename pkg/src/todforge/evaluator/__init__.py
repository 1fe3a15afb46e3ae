from .bleu import bleu_tokens, corpus_bleu, sentence_bleu_smoothed
from .metrics import combined, inform_success, jga, match_succf1, slu_metrics
from .report import REPORT_KEYS, EvalReport, average_reports, evaluate

__all__ = [
    "bleu_tokens",
    "corpus_bleu",
    "sentence_bleu_smoothed",
    "combined",
    "inform_success",
    "jga",
    "match_succf1",
    "slu_metrics",
    "REPORT_KEYS",
    "EvalReport",
    "average_reports",
    "evaluate",
]
