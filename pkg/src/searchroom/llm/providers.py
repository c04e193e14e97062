"""Language-model provider abstraction and its deterministic test double.

All pipeline calls go through :class:`LlmProvider.complete` with temperature
pinned to 0 and a single candidate. The scripted provider answers from a
rule table and is the double used by tests and replay corpora; the HTTP
provider is the reference live implementation for any endpoint speaking a
minimal JSON completion schema.
"""

from __future__ import annotations

import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import httpx

from .templates import PromptTemplate, Task, render_prompt

log = logging.getLogger("searchroom.llm")

DEFAULT_MAX_INPUT_TOKENS = 5000


class ProviderError(Exception):
    """Transport-level failure talking to a language model."""

    def __init__(self, message: str, *, attempts: int = 1, retryable: bool = True):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


class ScriptMiss(ProviderError):
    """The scripted provider has no rule for a request."""

    def __init__(self, message: str):
        super().__init__(message, retryable=False)


class MalformedOutput(Exception):
    """A provider response does not follow the task's output schema."""


@dataclass(frozen=True)
class CompletionRequest:
    """One model call. Temperature and candidate count are pinned for the
    whole pipeline; constructing anything else is a programming error."""

    template: PromptTemplate
    variables: Mapping[str, str]
    temperature: float = 0.0
    candidate_count: int = 1
    model_id: str = "default"
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("pipeline calls run at temperature 0.0")
        if self.candidate_count != 1:
            raise ValueError("pipeline calls request exactly one candidate")
        if self.max_input_tokens <= 0:
            raise ValueError("max_input_tokens must be positive")

    def prompt(self, shots: int) -> str:
        return render_prompt(self.template, dict(self.variables), shots=shots)


def variables_blob(variables: Mapping[str, str]) -> str:
    """Canonical text form of a request's variables (script matching key)."""
    return json.dumps(dict(variables), sort_keys=True, ensure_ascii=False)


def input_hash(variables: Mapping[str, str]) -> str:
    """sha256 of the canonical variable blob; exact script key."""
    return hashlib.sha256(variables_blob(variables).encode("utf-8")).hexdigest()


class LlmProvider(ABC):
    """Interface every language-model backend implements.

    Implementations must be safe for concurrent calls from multiple
    in-flight pipelines.
    """

    @property
    @abstractmethod
    def model_id(self) -> str: ...

    @property
    @abstractmethod
    def context_limit(self) -> int:
        """Upper bound on input tokens the backend accepts."""

    @abstractmethod
    def complete(self, request: CompletionRequest) -> str:
        """Return the raw completion text. Raises ProviderError on failure."""


@dataclass(frozen=True)
class ScriptRule:
    """One scripted response.

    Selection, most specific first: exact ``input_sha256`` over the request
    variables, then first rule whose ``match`` substring occurs in the
    canonical variable blob, then the task default (neither key set).
    """

    task: Task
    response: str
    match: str | None = None
    input_sha256: str | None = None


class ScriptedProvider(LlmProvider):
    """Deterministic provider answering from a rule table; stateless."""

    def __init__(
        self,
        rules: Iterable[ScriptRule],
        model_id: str = "scripted",
        context_limit: int = 1_000_000,
    ):
        self._rules = tuple(rules)
        self._model_id = model_id
        self._context_limit = context_limit

    @property
    def model_id(self) -> str:
        return self._model_id

    @property
    def context_limit(self) -> int:
        return self._context_limit

    def complete(self, request: CompletionRequest) -> str:
        task = request.template.task
        blob = variables_blob(request.variables)
        digest = input_hash(request.variables)
        candidates = [rule for rule in self._rules if rule.task == task]
        for rule in candidates:
            if rule.input_sha256 is not None and rule.input_sha256 == digest:
                return rule.response
        for rule in candidates:
            if rule.match is not None and rule.match in blob:
                return rule.response
        for rule in candidates:
            if rule.match is None and rule.input_sha256 is None:
                return rule.response
        raise ScriptMiss(f"no scripted response for task {task.value!r}")

    @classmethod
    def from_dicts(cls, entries: Sequence[Mapping[str, Any]], **kwargs: Any) -> ScriptedProvider:
        """Build from the replay-corpus ``script`` list."""
        rules = [
            ScriptRule(
                task=Task(entry["task"]),
                response=entry["response"],
                match=entry.get("match"),
                input_sha256=entry.get("input_sha256"),
            )
            for entry in entries
        ]
        return cls(rules, **kwargs)


class HttpLlmProvider(LlmProvider):
    """Reference live provider for a minimal JSON completion endpoint.

    POSTs ``{"model", "prompt", "temperature", "n"}`` and expects
    ``{"text": ...}`` back. Credentials come from the environment variable
    named in the service config and are sent as a bearer token.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str | None = None,
        timeout_s: float = 30.0,
        context_limit: int = 16_000,
        shots: int = 5,
        client: httpx.Client | None = None,
    ):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(
            base_url=base_url, timeout=timeout_s, headers=headers
        )
        self._model_id = model_id
        self._context_limit = context_limit
        self._shots = shots

    @property
    def model_id(self) -> str:
        return self._model_id

    @property
    def context_limit(self) -> int:
        return self._context_limit

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "model": request.model_id if request.model_id != "default" else self._model_id,
            "prompt": request.prompt(self._shots),
            "temperature": request.temperature,
            "n": request.candidate_count,
        }
        try:
            response = self._client.post("/complete", json=payload)
            response.raise_for_status()
            return response.json()["text"]
        except httpx.TimeoutException as exc:
            raise ProviderError(f"model call timed out: {exc}") from exc
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise ProviderError(f"model call failed: {exc}") from exc


class RecordingProvider(LlmProvider):
    """Pass-through wrapper that keeps every request, for tests and tracing."""

    def __init__(self, inner: LlmProvider):
        self.inner = inner
        self.requests: list[CompletionRequest] = []

    @property
    def model_id(self) -> str:
        return self.inner.model_id

    @property
    def context_limit(self) -> int:
        return self.inner.context_limit

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        log.debug("llm call task=%s model=%s", request.template.task.value, self.model_id)
        return self.inner.complete(request)

    def requests_for(self, task: Task) -> list[CompletionRequest]:
        return [r for r in self.requests if r.template.task == task]
