"""Chat-completion gateway: one call surface for live endpoints, caches and mocks.

Every prompting module talks to a :class:`Gateway`. The gateway owns
retries, the on-disk response cache and the cap on simultaneous live calls;
transports only know how to turn a request into a reply.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .errors import EmptyCompletion, TransientTransportError, TransportError

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
API_KEY_ENV = "POETRAT_API_KEY"


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int | None = None
    # Passed through to endpoints that accept it; distinguishes repeated
    # samples of the same prompt in the cache.
    seed: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for m in self.messages:
            if m.role not in ROLES:
                raise ValueError(f"unknown role {m.role!r}")
        if self.messages[-1].role != "user":
            raise ValueError("last message must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def single(cls, prompt: str, model: str, temperature: float = 0.0, **kw) -> "ChatRequest":
        return cls(model=model, messages=(Message("user", prompt),), temperature=temperature, **kw)

    @property
    def last_user_message(self) -> str:
        return self.messages[-1].content

    def canonical(self) -> str:
        fields = [
            ["model", self.model],
            ["temperature", f"{self.temperature:.2f}"],
            ["messages", [[m.role, m.content] for m in self.messages]],
            ["max_tokens", self.max_tokens],
        ]
        if self.seed is not None:
            fields.append(["seed", self.seed])
        return json.dumps(fields, ensure_ascii=False, separators=(",", ":"))

    def cache_key(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class ChatResponse:
    content: str
    model: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    from_cache: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "model": self.model,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


class Transport(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...


# --- transports ----------------------------------------------------------------

class HttpTransport:
    """POSTs to a chat-completions endpoint with bearer-token auth."""

    def __init__(self, endpoint_url: str, api_key: str | None = None, timeout: float = 120.0):
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.timeout = timeout

    def send(self, request: ChatRequest) -> ChatResponse:
        body = json.dumps(
            {k: v for k, v in request.to_dict().items() if v is not None},
            ensure_ascii=False,
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.endpoint_url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 429 or exc.code >= 500:
                raise TransientTransportError(f"HTTP {exc.code}") from exc
            raise TransportError(f"HTTP {exc.code}: {exc.reason}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransientTransportError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise TransportError(f"invalid JSON from endpoint: {exc.msg}") from exc
        try:
            content = payload["choices"][0]["message"].get("content") or ""
        except (KeyError, IndexError, TypeError, AttributeError) as exc:
            raise TransportError("response has no choices[0].message") from exc
        usage = payload.get("usage") or {}
        return ChatResponse(
            content=content,
            model=payload.get("model", request.model),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


@dataclass
class MockRule:
    """Reply for requests whose last user message contains ``match``.

    ``reply`` may be a string, a callable taking the request, an exception
    instance to raise, or a list of those consumed in order (the last one
    repeats once the list is exhausted).
    """
    match: str
    reply: object
    _calls: int = field(default=0, repr=False)

    def next_reply(self, request: ChatRequest):
        reply = self.reply
        if isinstance(reply, (list, tuple)):
            reply = reply[min(self._calls, len(reply) - 1)]
        self._calls += 1
        if isinstance(reply, BaseException):
            raise reply
        if callable(reply):
            reply = reply(request)
        return reply


class MockTransport:
    """Scripted transport for tests and offline runs. First matching rule wins."""

    def __init__(self, script: Sequence):
        if not script:
            raise ValueError("mock script must be non-empty")
        self.rules = [r if isinstance(r, MockRule) else MockRule(*r) for r in script]
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0
        self.delay = 0.0

    @classmethod
    def from_file(cls, path) -> "MockTransport":
        """Load ``[{"match": ..., "reply": ...} | {"match": ..., "replies": [...]}, ...]``."""
        with Path(path).open(encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise ValueError(f"{path}: mock script must be a JSON list")
        rules = []
        for item in data:
            reply = item["replies"] if "replies" in item else item["reply"]
            rules.append(MockRule(item.get("match", ""), reply))
        return cls(rules)

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            rule = next((r for r in self.rules if r.match in request.last_user_message), None)
            try:
                reply = rule.next_reply(request) if rule is not None else None
            except BaseException:
                self._in_flight -= 1
                raise
        try:
            if self.delay:
                time.sleep(self.delay)
            if rule is None:
                raise TransportError("unscripted")
            return ChatResponse(content=str(reply), model=request.model)
        finally:
            with self._lock:
                self._in_flight -= 1


# --- cache ---------------------------------------------------------------------

class ResponseCache:
    """Append-only directory of ``<digest>.json`` files holding request and response."""

    def __init__(self, cache_dir):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, digest: str) -> Path:
        return self.dir / f"{digest}.json"

    def get(self, request: ChatRequest) -> ChatResponse | None:
        path = self._path(request.cache_key())
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError):
            log.warning("unreadable cache file %s ignored", path)
            return None
        return replace(ChatResponse(**data["response"]), from_cache=True)

    def put(self, request: ChatRequest, response: ChatResponse) -> None:
        path = self._path(request.cache_key())
        payload = json.dumps(
            {"request": request.to_dict(), "response": response.to_dict()},
            ensure_ascii=False, indent=1,
        )
        with self._lock:
            if path.exists():
                return
            fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)


# --- gateway -------------------------------------------------------------------

class Gateway:
    def __init__(
        self,
        transport: Transport,
        *,
        model: str = "gpt-3.5-turbo",
        temperature: float = 0.0,
        cache: ResponseCache | None = None,
        max_parallel: int = 4,
        retry_max: int = 3,
        retry_base_ms: int = 1000,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        self.transport = transport
        self.model = model
        self.temperature = temperature
        self.cache = cache
        self.max_parallel = max_parallel
        self.retry_max = retry_max
        self.retry_base_ms = retry_base_ms
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_parallel)
        self._stats_lock = threading.Lock()
        self.live_calls = 0
        self.cache_hits = 0

    def _count(self, from_cache: bool) -> None:
        with self._stats_lock:
            if from_cache:
                self.cache_hits += 1
            else:
                self.live_calls += 1

    def _send_with_retry(self, request: ChatRequest) -> ChatResponse:
        attempt = 0
        while True:
            try:
                with self._slots:
                    return self.transport.send(request)
            except TransientTransportError as exc:
                if attempt >= self.retry_max:
                    raise TransportError(f"giving up after {attempt + 1} attempts: {exc}") from exc
                delay = self.retry_base_ms / 1000.0 * (2 ** attempt)
                log.info("transient failure (%s), retrying in %.1fs", exc, delay)
                self._sleep(delay)
                attempt += 1

    def complete(self, request: ChatRequest, accept: Callable[[str], bool] | None = None) -> ChatResponse:
        """Return the completion for ``request``.

        A reply is only written to the cache when ``accept`` (if given) approves
        its content, so callers that retry on unusable replies reach the
        endpoint again instead of replaying the cached failure.
        """
        if self.cache is not None:
            cached = self.cache.get(request)
            if cached is not None:
                self._count(True)
                return cached
        response = self._send_with_retry(request)
        self._count(False)
        if not response.content.strip():
            raise EmptyCompletion(f"empty completion from {request.model}")
        if self.cache is not None and (accept is None or accept(response.content)):
            self.cache.put(request, response)
        return response

    def ask(self, prompt: str, *, model: str | None = None, temperature: float | None = None,
            seed: int | None = None, accept: Callable[[str], bool] | None = None) -> str:
        request = ChatRequest.single(
            prompt,
            model=model or self.model,
            temperature=self.temperature if temperature is None else temperature,
            seed=seed,
        )
        return self.complete(request, accept=accept).content

    def map(self, fn: Callable, items: Iterable) -> list:
        """Apply ``fn`` to ``items`` concurrently; results come back in input order."""
        items = list(items)
        if len(items) <= 1 or self.max_parallel == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=min(self.max_parallel, len(items))) as pool:
            return list(pool.map(fn, items))

    def session(self) -> "GatewaySession":
        return GatewaySession(self)


class GatewaySession:
    """A view onto a gateway that keeps its own call tallies.

    Batch drivers hand one session to each work item so per-item cache hits
    stay accurate when items run in parallel.
    """

    def __init__(self, parent: Gateway):
        self.parent = parent
        self._lock = threading.Lock()
        self.calls = 0
        self.cache_hits = 0

    def __getattr__(self, name):
        return getattr(self.parent, name)

    def complete(self, request: ChatRequest, accept=None) -> ChatResponse:
        try:
            response = self.parent.complete(request, accept=accept)
        except EmptyCompletion:
            with self._lock:
                self.calls += 1
            raise
        with self._lock:
            self.calls += 1
            self.cache_hits += response.from_cache
        return response

    ask = Gateway.ask
    map = Gateway.map
