"""Chat-completion client abstraction.

One interface serves every LLM role (generator, decomposer, scorer, annotator,
reference writer): an OpenAI-compatible HTTP client for real endpoints and a
scripted mock for tests and offline runs. Retry and the concurrency cap live
in the shared base class so both behave identically.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import requests

from .core import ConfigError, InputError, InternalError, TransportError

DEFAULT_TEMPERATURE = 0.8
DEFAULT_TOP_P = 0.95
DEFAULT_MAX_TOKENS = 512
# Quality annotation runs colder than every other role.
ANNOTATION_TEMPERATURE = 0.1

BACKOFF_BASE_SECONDS = 0.5
BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class ChatRequest:
    model: str
    user_prompt: str
    system_prompt: Optional[str] = None
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.user_prompt:
            raise InputError("user_prompt must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InputError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise InputError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens < 1:
            raise InputError(f"max_tokens must be positive, got {self.max_tokens}")


@dataclass(frozen=True)
class ChatResponse:
    """Raw completion text; no trimming beyond transport framing."""

    text: str
    model: str
    usage: Optional[dict] = None


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrent_requests: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ConfigError(f"max_retries must be in [0, 5], got {self.max_retries}")
        if self.max_concurrent_requests < 1:
            raise ConfigError("max_concurrent_requests must be positive")


class ChatClient:
    """Shared retry loop and in-flight cap; subclasses implement one attempt."""

    def __init__(self, max_retries: int, max_concurrent: int, backoff_base: float = BACKOFF_BASE_SECONDS):
        self._max_retries = max_retries
        self._backoff_base = backoff_base
        self._slots = threading.BoundedSemaphore(max_concurrent)
        self._gauge_lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        """Run one completion, retrying transient transport failures.

        Backoff between attempts is exponential with full jitter.
        """
        if not isinstance(request, ChatRequest):
            raise InputError("complete() expects a ChatRequest")
        last_error: Optional[TransportError] = None
        for attempt in range(self._max_retries + 1):
            if attempt and self._backoff_base > 0:
                time.sleep(random.uniform(0.0, self._backoff_base * BACKOFF_FACTOR ** (attempt - 1)))
            with self._slots:
                self._enter()
                try:
                    return self._complete_once(request)
                except TransportError as err:
                    last_error = err
                finally:
                    self._exit()
        raise TransportError(
            f"giving up after {self._max_retries + 1} attempts: {last_error}"
        ) from last_error

    def _complete_once(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def _enter(self) -> None:
        with self._gauge_lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)

    def _exit(self) -> None:
        with self._gauge_lock:
            self.in_flight -= 1


class HttpChatClient(ChatClient):
    """OpenAI-compatible chat-completions client over HTTP."""

    def __init__(self, config: EndpointConfig, session: Optional[requests.Session] = None):
        super().__init__(config.max_retries, config.max_concurrent_requests)
        self.config = config
        self._session = session or requests.Session()

    def _complete_once(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_prompt})
        body = {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._session.post(url, json=body, headers=headers, timeout=self.config.timeout)
        except requests.RequestException as err:
            raise TransportError(f"request to {url} failed: {err}") from err
        if resp.status_code != 200:
            raise TransportError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as err:
            raise TransportError(f"malformed completion payload from {url}: {err}") from err
        usage = payload.get("usage")
        return ChatResponse(
            text=text if text is not None else "",
            model=payload.get("model", request.model),
            usage={"prompt": usage.get("prompt_tokens"), "completion": usage.get("completion_tokens")}
            if isinstance(usage, dict)
            else None,
        )


Matcher = Union[str, Callable[[ChatRequest], bool]]
# A canned reply: literal text, an exception to raise, a callable computing
# either, or a sequence consumed one element per matching call.
CannedResponse = Union[str, Exception, Callable[[ChatRequest], str], Sequence]


@dataclass
class _Rule:
    matcher: Matcher
    response: CannedResponse
    uses: int = 0

    def matches(self, request: ChatRequest) -> bool:
        if callable(self.matcher):
            return bool(self.matcher(request))
        return self.matcher in request.user_prompt


class MockChatClient(ChatClient):
    """Scripted client: answers by first matching rule, logs every request.

    Rules match on the user prompt (substring for string matchers). A request
    matching no rule raises InternalError so a test fails loudly.
    """

    def __init__(
        self,
        script: Sequence[tuple[Matcher, CannedResponse]],
        max_retries: int = 0,
        max_concurrent: int = 64,
    ):
        if not script:
            raise InputError("mock script must be non-empty")
        super().__init__(max_retries, max_concurrent, backoff_base=0.0)
        self._rules = [_Rule(m, r) for m, r in script]
        self._log_lock = threading.Lock()
        self.call_log: list[ChatRequest] = []

    def _complete_once(self, request: ChatRequest) -> ChatResponse:
        with self._log_lock:
            self.call_log.append(request)
        for rule in self._rules:
            if not rule.matches(request):
                continue
            with self._log_lock:
                use = rule.uses
                rule.uses += 1
            reply = rule.response
            if isinstance(reply, (list, tuple)):
                reply = reply[min(use, len(reply) - 1)]
            if callable(reply):
                reply = reply(request)
            if isinstance(reply, Exception):
                raise reply
            return ChatResponse(text=str(reply), model=request.model)
        raise InternalError(f"mock script has no rule for prompt: {request.user_prompt[:120]!r}")


def mock_with_script(script: Sequence[tuple[Matcher, CannedResponse]], **kwargs) -> MockChatClient:
    return MockChatClient(script, **kwargs)


@dataclass(frozen=True)
class RoleDefaults:
    """Per-role sampling defaults applied when building requests."""

    model: str
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: Optional[int] = None
    system_prompt: Optional[str] = None


@dataclass
class LlmRole:
    """A chat client plus the sampling defaults for one pipeline role."""

    client: ChatClient
    defaults: RoleDefaults = field(default_factory=lambda: RoleDefaults(model="mock"))

    def complete_text(self, user_prompt: str, system_prompt: Optional[str] = None) -> str:
        d = self.defaults
        request = ChatRequest(
            model=d.model,
            user_prompt=user_prompt,
            system_prompt=system_prompt if system_prompt is not None else d.system_prompt,
            temperature=d.temperature,
            top_p=d.top_p,
            max_tokens=d.max_tokens,
            seed=d.seed,
        )
        return self.client.complete(request).text
