"""Schema-aware instruction-tuning corpora and session-level evaluation for task-oriented dialogue."""

from .core import (
    MULTIWOZ_FLOW,
    SGD_FLOW,
    Act,
    ActSet,
    BeliefState,
    DialogueSession,
    DomainSchema,
    IntentSchema,
    SlotSpec,
    TaskFlowSpec,
    Turn,
    ValueExpr,
    normalize_value,
)
from .errors import BackendError, DataError, TodForgeError

__version__ = "0.1.0"

__all__ = [
    "MULTIWOZ_FLOW",
    "SGD_FLOW",
    "Act",
    "ActSet",
    "BeliefState",
    "DialogueSession",
    "DomainSchema",
    "IntentSchema",
    "SlotSpec",
    "TaskFlowSpec",
    "Turn",
    "ValueExpr",
    "normalize_value",
    "BackendError",
    "DataError",
    "TodForgeError",
]
