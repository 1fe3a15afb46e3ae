"""Exception hierarchy shared by every todforge module."""

from __future__ import annotations


class TodForgeError(Exception):
    """Base class for all todforge errors."""


class DataError(TodForgeError):
    """Input data is missing, malformed or inconsistent."""


class MissingFile(DataError):
    def __init__(self, path):
        super().__init__(f"missing file: {path}")
        self.path = path


class FormatError(DataError):
    def __init__(self, detail: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where + ': ' if where else ''}{detail}")
        self.detail = detail
        self.line = line
        self.path = path


class SchemaViolation(DataError):
    def __init__(self, session_id: str | None, detail: str):
        prefix = f"session {session_id}: " if session_id else ""
        super().__init__(prefix + detail)
        self.session_id = session_id
        self.detail = detail


class IoError(DataError, OSError):
    """A bundle or corpus could not be written."""


class MissingAnnotation(DataError):
    def __init__(self, task: str, turn: int):
        super().__init__(f"turn {turn} has no gold annotation for {task}")
        self.task = task
        self.turn = turn


class TurnTooLarge(DataError):
    def __init__(self, turn: int, tokens: int, max_len: int):
        super().__init__(f"turn {turn} needs {tokens} tokens with instructions; max_len is {max_len}")
        self.turn = turn
        self.tokens = tokens
        self.max_len = max_len


class InstructionsTooLarge(DataError):
    pass


class TypeMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MissingGoal(DataError):
    pass


class BackendError(TodForgeError):
    pass


class BackendUnavailable(BackendError):
    """Network failure, timeout, or an exhausted script."""


class BackendRefused(BackendError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend answered {status}: {body[:200]}")
        self.status = status
        self.body = body
