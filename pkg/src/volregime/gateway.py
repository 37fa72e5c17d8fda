"""Uniform forecaster interface over chat-completion backends and offline mocks."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

import httpx

from .errors import ConfigurationError, ServiceError, TransportError, ValidationError
from .promptcodec import SEPARATOR, PromptText, template

logger = logging.getLogger(__name__)

API_KEY_ENV = "VOLREGIME_API_KEY"
DEFAULT_TIMEOUT = 60.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF = (1.0, 2.0, 4.0)
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})

MOCK_VARIANTS = ("echo_last_variance", "cheating_oracle", "corrective", "constant")


@dataclass(frozen=True)
class ModelRequest:
    prompt: PromptText
    temperature: float = 0.0
    max_reply_tokens: int = 256

    def __post_init__(self):
        if self.temperature != 0:
            raise ValidationError("temperature is fixed at 0")
        if self.max_reply_tokens < 1:
            raise ValidationError("max_reply_tokens must be positive")


@dataclass(frozen=True)
class ModelReply:
    text: str
    latency: float = 0.0
    attempt: int = 1


class Backend(Protocol):
    def complete(self, request: ModelRequest) -> ModelReply: ...


def system_instruction() -> str:
    return template("system")


# --------------------------------------------------------------------- mocks

_VAR_FIELD = re.compile(r"realized_variance=([^,\s]+)")
_SCI = r"[-+]?\d\.\d+e[-+]?\d+"
_FEEDBACK = re.compile(rf"Ground truth: ({_SCI})\. Your prediction: ({_SCI})\.")


def query_window(prompt: str) -> str | None:
    """The last block of the prompt made only of ``day`` lines, if any."""
    for block in reversed(prompt.split(SEPARATOR)):
        lines = block.split("\n")
        if lines and all(line.startswith("day ") for line in lines):
            return block
    return None


def answer_text(value: float) -> str:
    # repr round-trips exactly, so mocks never add rounding of their own
    return template("answer").format(value=repr(float(value)))


def mock_corrective(previous: float, truth: float) -> str:
    """Reply moving halfway from ``previous`` to ``truth``."""
    return answer_text(previous + (truth - previous) / 2)


def _unit_hash(seed: int, text: str) -> float:
    digest = hashlib.sha256(f"{seed}\x00{text}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass(frozen=True)
class MockBehavior:
    variant: str
    seed: int = 0

    def __post_init__(self):
        if self.variant not in MOCK_VARIANTS:
            raise ConfigurationError(f"unknown mock variant {self.variant!r}; choose from {MOCK_VARIANTS}")


@dataclass
class MockModel:
    """Deterministic stand-in for a language model.

    ``echo_last_variance``
        answers with the last realized variance of the query window.
    ``cheating_oracle``
        looks the query window up in ``truths`` (rendered input text to the
        true next-day variance); on a feedback prompt it repeats the ground
        truth it was given.
    ``corrective``
        first guess is the last variance scaled by a seeded factor in
        [0.5, 2); on feedback it answers the midpoint of prediction and truth.
    ``constant``
        always answers ``value``.
    """

    behavior: MockBehavior
    value: float = 1e-4
    truths: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def of(cls, variant: str, seed: int = 0, **kw) -> MockModel:
        return cls(MockBehavior(variant, seed), **kw)

    def reply_text(self, prompt: str) -> str:
        variant = self.behavior.variant
        if variant == "constant":
            return answer_text(self.value)

        feedback = _FEEDBACK.search(prompt)
        window = query_window(prompt)
        if window is None and feedback is not None:
            truth, pred = feedback.groups()
            if variant == "corrective":
                return mock_corrective(float(pred), float(truth))
            if variant == "cheating_oracle":
                return template("answer").format(value=truth)
            return template("answer").format(value=pred)
        if window is None:
            return "I cannot forecast."

        last = _VAR_FIELD.findall(window)[-1]
        if variant == "echo_last_variance":
            return template("answer").format(value=last)
        if variant == "cheating_oracle":
            if window not in self.truths:
                return "I cannot forecast."
            return answer_text(self.truths[window])
        # corrective: deliberately imperfect first guess
        factor = 0.5 + 1.5 * _unit_hash(self.behavior.seed, prompt)
        return template("answer").format(value=f"{float(last) * factor:.5e}")

    def complete(self, request: ModelRequest) -> ModelReply:
        return ModelReply(self.reply_text(request.prompt.text))


class ForbiddenBackend:
    """Fails on any call; guards paths that must not reach a model."""

    def complete(self, request: ModelRequest) -> ModelReply:
        raise AssertionError("model backend was called on a path that must stay offline")


class RecordingBackend:
    """Wraps a backend and keeps every exchange."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.requests: list[ModelRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ModelRequest) -> ModelReply:
        with self._lock:
            self.requests.append(request)
        return self.inner.complete(request)


# -------------------------------------------------------------------- remote

class RemoteBackend:
    """OpenAI-style chat-completion endpoint.

    The credential comes from ``VOLREGIME_API_KEY`` and is checked at
    construction, before any network traffic.  Transient failures (transport
    errors, 408/409/429/5xx) are retried ``max_retries`` times with the given
    backoff schedule.
    """

    def __init__(self, endpoint: str, model: str, *, timeout: float = DEFAULT_TIMEOUT,
                 max_retries: int = DEFAULT_MAX_RETRIES, backoff=DEFAULT_BACKOFF,
                 client: httpx.Client | None = None, sleep=time.sleep, env=None):
        env = os.environ if env is None else env
        key = env.get(API_KEY_ENV, "")
        if not key:
            raise ConfigurationError(f"{API_KEY_ENV} is not set")
        if not endpoint or not model:
            raise ConfigurationError("remote backend needs both an endpoint and a model name")
        if max_retries < 0:
            raise ConfigurationError("max_retries must be nonnegative")
        self.endpoint = endpoint
        self.model = model
        self.max_retries = max_retries
        self.backoff = tuple(backoff)
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def payload(self, request: ModelRequest) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_instruction()},
                {"role": "user", "content": request.prompt.text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_reply_tokens,
        }

    def _delay(self, retry: int) -> float:
        if not self.backoff:
            return 0.0
        return self.backoff[min(retry, len(self.backoff) - 1)]

    def complete(self, request: ModelRequest) -> ModelReply:
        body = self.payload(request)
        last_exc: Exception | None = None
        start = time.monotonic()
        for attempt in range(1, self.max_retries + 2):
            if attempt > 1:
                self._sleep(self._delay(attempt - 2))
            try:
                resp = self._client.post(self.endpoint, json=body, headers=self._headers)
            except httpx.TransportError as exc:
                logger.warning("attempt %d/%d failed: %s", attempt, self.max_retries + 1, exc)
                last_exc = TransportError(f"request failed after {attempt} attempt(s): {exc}")
                continue
            if resp.status_code in RETRYABLE_STATUS:
                logger.warning("attempt %d/%d: HTTP %d", attempt, self.max_retries + 1, resp.status_code)
                last_exc = ServiceError(f"HTTP {resp.status_code} after {attempt} attempt(s)",
                                        status=resp.status_code)
                continue
            if not resp.is_success:
                raise ServiceError(f"HTTP {resp.status_code}: {resp.text[:200]}", status=resp.status_code)
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ServiceError(f"malformed reply body: {exc}", status=resp.status_code) from None
            return ModelReply(text, latency=time.monotonic() - start, attempt=attempt)
        raise last_exc


class ReplayBackend:
    """Serves replies from a JSON Lines cassette, recording misses via ``inner``.

    Entries are keyed by the SHA-256 of the exact prompt bytes.  Without an
    inner backend, a miss is a configuration error.
    """

    def __init__(self, path, inner: Backend | None = None):
        self.path = Path(path)
        self.inner = inner
        self._lock = threading.Lock()
        self._cache: dict[str, str] = {}
        if self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._cache[entry["key"]] = entry["reply"]

    @staticmethod
    def key(request: ModelRequest) -> str:
        return hashlib.sha256(request.prompt.text.encode()).hexdigest()

    def complete(self, request: ModelRequest) -> ModelReply:
        k = self.key(request)
        with self._lock:
            if k in self._cache:
                return ModelReply(self._cache[k])
        if self.inner is None:
            raise ConfigurationError(f"no recorded reply for prompt {k[:12]} in {self.path}")
        reply = self.inner.complete(request)
        with self._lock:
            self._cache[k] = reply.text
            with self.path.open("a") as fh:
                fh.write(json.dumps({"key": k, "prompt": request.prompt.text, "reply": reply.text}) + "\n")
        return reply


# ------------------------------------------------------------------- gateway

class Gateway:
    """Backend wrapper with a cap on in-flight requests."""

    def __init__(self, backend: Backend, max_in_flight: int = 4, max_reply_tokens: int = 256):
        if max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be at least 1")
        self.backend = backend
        self.max_in_flight = max_in_flight
        self.max_reply_tokens = max_reply_tokens
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: ModelRequest) -> ModelReply:
        with self._slots:
            return self.backend.complete(request)

    def ask(self, prompt: PromptText) -> ModelReply:
        return self.complete(ModelRequest(prompt, max_reply_tokens=self.max_reply_tokens))

    def map(self, fn, items):
        """Apply ``fn`` to ``items`` concurrently; results keep input order."""
        items = list(items)
        if self.max_in_flight == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(fn, items))


def parse_backend_spec(spec: str):
    """``remote`` or ``mock:<variant>[:<value>]`` -> (kind, variant, value)."""
    parts = spec.split(":")
    if parts[0] == "remote" and len(parts) == 1:
        return "remote", None, None
    if parts[0] == "mock" and len(parts) in (2, 3):
        MockBehavior(parts[1])
        value = float(parts[2]) if len(parts) == 3 else None
        return "mock", parts[1], value
    raise ConfigurationError(f"backend must be 'remote' or 'mock:<variant>', got {spec!r}")
