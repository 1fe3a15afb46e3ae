"""Text-completion backends: OpenAI-compatible HTTP, gold echo, scripted replay.

Every backend exposes ``complete(request) -> str`` and is safe to call from
several threads.
"""

from __future__ import annotations

import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import httpx

from .core import CONC_RG, DELEX_RG, DI, DST, ID, SAD, DialogueSession
from .corpus import grammar as g
from .errors import BackendRefused, BackendUnavailable, MissingAnnotation

STOP = ("\n",)
DEFAULT_MAX_TOKENS = {
    g.DOMAINS: 64,
    g.INTENTS: 128,
    g.STATE: 512,
    g.ACTS: 128,
    g.DELEX: 256,
    g.RESPONSE: 256,
}
ENDPOINT_ENV = "TODFORGE_ENDPOINT"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int
    stop: tuple[str, ...] = STOP
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature != 0:
            raise ValueError("only greedy decoding (temperature 0) is supported")
        object.__setattr__(self, "stop", tuple(self.stop))

    @classmethod
    def for_tag(cls, prompt: str, tag: str) -> "CompletionRequest":
        return cls(prompt, DEFAULT_MAX_TOKENS.get(tag, 256))


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def cut_at_stop(text: str, stop: Iterable[str]) -> str:
    """Truncate at the earliest occurrence of any stop sequence."""
    cut = len(text)
    for s in stop:
        if s:
            i = text.find(s)
            if i != -1:
                cut = min(cut, i)
    return text[:cut]


# ---------------------------------------------------------------------------
# HTTP


@dataclass
class HttpBackend:
    """Client for ``POST {endpoint}/v1/completions``.

    Connection failures and timeouts are retried with exponential backoff;
    a non-2xx answer is final and raises :class:`BackendRefused`.
    """

    endpoint: str
    model: str
    timeout_ms: int = 60_000
    max_in_flight: int = 8
    retries: int = 3
    backoff_s: float = 0.5
    api_key: str | None = None
    _client: httpx.Client = field(init=False, repr=False)
    _slots: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self):
        if self.retries < 1:
            raise ValueError("retries counts attempts and must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        limits = httpx.Limits(max_connections=self.max_in_flight, max_keepalive_connections=self.max_in_flight)
        self._client = httpx.Client(timeout=self.timeout_ms / 1000, limits=limits, headers=headers)
        self._slots = threading.BoundedSemaphore(self.max_in_flight)

    @classmethod
    def from_env(cls, model: str, endpoint: str | None = None, **kwargs) -> "HttpBackend":
        endpoint = os.environ.get(ENDPOINT_ENV) or endpoint
        if not endpoint:
            raise ValueError(f"no endpoint given and {ENDPOINT_ENV} is unset")
        return cls(endpoint, model, **kwargs)

    @property
    def url(self) -> str:
        return self.endpoint.rstrip("/") + "/v1/completions"

    def payload(self, request: CompletionRequest) -> dict:
        return {
            "model": self.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": 0,
            "stop": list(request.stop),
        }

    def complete(self, request: CompletionRequest) -> str:
        body = self.payload(request)
        last: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last = exc
                continue
            if not resp.is_success:
                raise BackendRefused(resp.status_code, resp.text)
            try:
                text = resp.json()["choices"][0]["text"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise BackendRefused(resp.status_code, f"unexpected completion body: {resp.text}") from None
            return cut_at_stop(str(text), request.stop)
        raise BackendUnavailable(f"{self.url} unreachable after {self.retries} attempts: {last}")

    def close(self) -> None:
        self._client.close()


def http_complete(endpoint: str, model_name: str, request: CompletionRequest, **kwargs) -> str:
    backend = HttpBackend(endpoint, model_name, **kwargs)
    try:
        return backend.complete(request)
    finally:
        backend.close()


# ---------------------------------------------------------------------------
# gold echo


def prompt_position(prompt: str) -> tuple[int, str]:
    """(1-based turn index, open tag) for a prompt ending in ``TAG: ``."""
    lines = prompt.split("\n")
    last = lines[-1]
    if not last.endswith(": "):
        raise ValueError("prompt does not end with an open tag")
    tag = last[:-2]
    offset = 0
    users = 0
    for ln in lines[:-1]:
        if ln.startswith(g.OMITTED_PREFIX):
            offset = int(ln[len(g.OMITTED_PREFIX):])
        elif ln.startswith(f"{g.USER}: "):
            users += 1
    return offset + users, tag


class GoldEchoBackend:
    """Answers every task with the session's own gold annotation."""

    def __init__(self, session: DialogueSession):
        self.session = session
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls += 1
        index, tag = prompt_position(request.prompt)
        if not 1 <= index <= len(self.session.turns):
            raise ValueError(f"prompt refers to turn {index}; session has {len(self.session.turns)}")
        turn = self.session.turns[index - 1]
        task = g.TAG_TASK.get(tag)
        if task is None:
            raise ValueError(f"no gold answer for tag {tag!r}")
        value = {
            DI: turn.domains,
            ID: turn.intents,
            DST: turn.state,
            SAD: turn.acts,
            DELEX_RG: turn.delex,
            CONC_RG: turn.response,
        }[task]
        if value is None:
            raise MissingAnnotation(task, index)
        if task == DI:
            return g.serialize_domains(value)
        if task == ID:
            return g.serialize_intents(value)
        if task == DST:
            return g.serialize_state(value)
        if task == SAD:
            return g.serialize_acts(value)
        return g.one_line(value)


def gold_echo(session: DialogueSession) -> GoldEchoBackend:
    return GoldEchoBackend(session)


# ---------------------------------------------------------------------------
# scripted


class ScriptedBackend:
    """Replays queued completions, or delegates to ``fn(request)``.

    Every request is recorded in ``requests``. Returned text is cut at the
    request's stop sequences like a real server would.
    """

    def __init__(self, script: Sequence[str] | Callable[[CompletionRequest], str]):
        self._lock = threading.Lock()
        self._fn = script if callable(script) else None
        self._queue = deque(() if callable(script) else script)
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.requests.append(request)
            if self._fn is None:
                if not self._queue:
                    raise BackendUnavailable("scripted backend exhausted")
                text = self._queue.popleft()
        if self._fn is not None:
            text = self._fn(request)
        return cut_at_stop(text, request.stop)
