"""Completion-provider boundary.

Two implementations share one contract: an HTTP-backed client for real
endpoints and a deterministic scripted mock for tests and dry runs.
Both pass the request's temperature and max_tokens through verbatim;
neither ever rewrites prompt or response text.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass

import requests

from .errors import (
    AuthFailureError,
    MalformedResponseError,
    ProviderTimeout,
    RateLimitedError,
)

ENV_ENDPOINT = "MIMIR_LLM_ENDPOINT"
ENV_API_KEY = "MIMIR_LLM_API_KEY"
ENV_MODEL = "MIMIR_LLM_MODEL"

DEFAULT_MAX_RETRIES = 3


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float
    max_tokens: int
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


@dataclass(frozen=True)
class CompletionResult:
    text: str
    provider_name: str
    latency: float = 0.0


class Provider:
    """Interface every completion backend implements."""

    name = "provider"

    def complete(self, request: CompletionRequest) -> CompletionResult:
        raise NotImplementedError


class ScriptedProvider(Provider):
    """Deterministic mock: answers from an ordered script.

    Each script entry is ``(matcher, text)`` where the matcher is a
    literal substring looked for in the incoming prompt; a bare string
    entry means "match any prompt". Each request consumes the first
    unconsumed entry whose matcher occurs in the prompt; an exhausted or
    unmatched script raises MalformedResponseError, which in a test
    signals a script bug.

    Consumption is serialized on a lock so concurrent callers observe a
    single total order. ``calls`` records every request for assertions.
    """

    name = "mock"

    def __init__(self, script: list[str | tuple[str, str]]):
        self._entries: list[tuple[str, str]] = [
            ("", entry) if isinstance(entry, str) else (entry[0], entry[1])
            for entry in script
        ]
        self._consumed: list[bool] = [False] * len(self._entries)
        self._lock = threading.Lock()
        self.calls: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> CompletionResult:
        with self._lock:
            self.calls.append(request)
            for i, (matcher, text) in enumerate(self._entries):
                if not self._consumed[i] and matcher in request.prompt:
                    self._consumed[i] = True
                    return CompletionResult(text=text, provider_name=self.name)
        raise MalformedResponseError(
            f"scripted provider has no response for prompt: {request.prompt[:80]!r}"
        )

    @property
    def call_count(self) -> int:
        return len(self.calls)


def script_mock(responses: list[str | tuple[str, str]]) -> ScriptedProvider:
    """Build a ScriptedProvider from an ordered (matcher, text) script."""
    return ScriptedProvider(responses)


class EchoProvider(Provider):
    """Offline placeholder backend: answers with a canned line per prompt.

    Exists so the CLI and server stay demoable with no endpoint
    configured; real runs use HttpProvider.
    """

    name = "echo"

    def complete(self, request: CompletionRequest) -> CompletionResult:
        tail = request.prompt.strip().splitlines()[-1] if request.prompt.strip() else ""
        return CompletionResult(
            text=f"(echo) {tail[:120]}" if tail else "(echo)",
            provider_name=self.name,
        )


class HttpProvider(Provider):
    """HTTP client for a completion endpoint.

    The outbound payload is a JSON object with keys ``model``,
    ``prompt``, ``temperature``, ``max_tokens`` and ``stop``; when the
    endpoint is chat-style the prompt is wrapped as a single user
    message instead and ``payload_shape`` records which shape was used.

    RateLimited responses are retried up to ``max_retries`` times with
    exponential backoff, honoring a Retry-After hint when the server
    sends one; other failures surface immediately.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        shape: str = "prompt",
        max_retries: int = DEFAULT_MAX_RETRIES,
        timeout: float = 60.0,
        session: requests.Session | None = None,
        sleeper=time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.endpoint:
            raise AuthFailureError(f"no endpoint configured (set {ENV_ENDPOINT})")
        if shape not in ("prompt", "chat"):
            raise ValueError("shape must be 'prompt' or 'chat'")
        self.payload_shape = shape
        self.max_retries = max_retries
        self.timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleeper
        self.name = self.model or "http"

    def build_payload(self, request: CompletionRequest) -> dict:
        """The exact JSON object sent on the wire for ``request``."""
        payload = {
            "model": self.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stop": list(request.stop_sequences),
        }
        if self.payload_shape == "chat":
            payload["messages"] = [{"role": "user", "content": request.prompt}]
        else:
            payload["prompt"] = request.prompt
        return payload

    def complete(self, request: CompletionRequest) -> CompletionResult:
        body = json.dumps(self.build_payload(request)).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        attempt = 0
        started = time.monotonic()
        while True:
            try:
                response = self._session.post(
                    self.endpoint, data=body, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as exc:
                raise ProviderTimeout(f"provider timed out after {self.timeout}s") from exc
            except requests.RequestException as exc:
                raise MalformedResponseError(f"transport failure: {exc}") from exc

            if response.status_code == 429:
                hint = _retry_after_seconds(response)
                if attempt < self.max_retries:
                    self._sleep(hint if hint is not None else 2.0**attempt)
                    attempt += 1
                    continue
                raise RateLimitedError(
                    f"rate limited after {attempt} retries", retry_after=hint
                )
            if response.status_code in (401, 403):
                raise AuthFailureError(f"provider rejected credentials ({response.status_code})")
            if response.status_code >= 400:
                raise MalformedResponseError(
                    f"provider returned HTTP {response.status_code}: {response.text[:200]}"
                )

            text = _extract_text(response)
            return CompletionResult(
                text=text,
                provider_name=self.name,
                latency=time.monotonic() - started,
            )


def _retry_after_seconds(response) -> float | None:
    value = response.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None


def _extract_text(response) -> str:
    """Pull the completion text out of the common response layouts."""
    try:
        data = response.json()
    except ValueError as exc:
        raise MalformedResponseError(f"non-JSON provider response: {exc}") from exc
    if isinstance(data, dict):
        if isinstance(data.get("text"), str):
            return data["text"]
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                if isinstance(first.get("text"), str):
                    return first["text"]
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
    raise MalformedResponseError(f"no completion text in provider response: {str(data)[:200]}")


def resolve_provider(spec: str | None = None) -> Provider:
    """Pick a provider from a spec string or the environment.

    "echo" gives the offline placeholder; "http" (or an empty spec with
    MIMIR_LLM_ENDPOINT set) gives the HTTP client. With nothing
    configured the echo provider is returned so dry runs still work.
    """
    spec = (spec or "").strip().lower()
    if spec == "echo":
        return EchoProvider()
    if spec == "http" or (not spec and os.environ.get(ENV_ENDPOINT)):
        return HttpProvider()
    if not spec:
        return EchoProvider()
    raise ValueError(f"unknown provider spec {spec!r} (use 'http' or 'echo')")
