from .context import truncate_context
from .dedup import dedup
from .parsing import parse_acts, parse_domains, parse_intents, parse_state, parse_tagged
from .runner import (
    GENERATED,
    GOLD,
    OracleMode,
    RunConfig,
    SessionAborted,
    SessionRun,
    TurnOutputs,
    run_session,
    run_sessions,
    run_turn,
)
from .trace import outputs_from_trace, read_trace, write_trace

__all__ = [
    "truncate_context",
    "dedup",
    "parse_acts",
    "parse_domains",
    "parse_intents",
    "parse_state",
    "parse_tagged",
    "GENERATED",
    "GOLD",
    "OracleMode",
    "RunConfig",
    "SessionAborted",
    "SessionRun",
    "TurnOutputs",
    "run_session",
    "run_sessions",
    "run_turn",
    "outputs_from_trace",
    "read_trace",
    "write_trace",
]
