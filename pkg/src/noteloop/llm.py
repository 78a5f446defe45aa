"""Chat-completion access: live OpenAI-compatible endpoint, scripted playback,
a content-addressed disk cache, and a recorder that turns live traffic into
playback scripts."""

from __future__ import annotations

import contextvars
import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

from .core import TokenUsage
from .errors import (
    ConfigurationError,
    ContractError,
    LoadError,
    PlaybackExhaustedError,
    ProviderError,
    TransportError,
)

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

# Set by the harness so playback entries can be scoped to one question.
current_item: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "noteloop_current_item", default=None
)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ContractError(f"unknown role {self.role!r}")
        if not self.content:
            raise ContractError("message content must be non-empty")


@dataclass(frozen=True)
class LMRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    want_logprobs: bool = False
    max_output_tokens: Optional[int] = None

    def __post_init__(self):
        if not self.messages:
            raise ContractError("request needs at least one message")
        object.__setattr__(self, "messages", tuple(self.messages))

    @property
    def prompt_text(self) -> str:
        return "\n\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class Completion:
    text: str
    usage: TokenUsage = TokenUsage()
    token_logprobs: Optional[tuple[float, ...]] = None
    tokens: Optional[tuple[str, ...]] = None
    cached: bool = False

    def __post_init__(self):
        if self.token_logprobs is not None:
            object.__setattr__(self, "token_logprobs", tuple(self.token_logprobs))
            if any(lp > 0 for lp in self.token_logprobs):
                raise ContractError("log-probabilities must be <= 0")
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "usage": {"input": self.usage.input, "output": self.usage.output},
            "token_logprobs": list(self.token_logprobs) if self.token_logprobs is not None else None,
            "tokens": list(self.tokens) if self.tokens is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict, cached: bool = False) -> Completion:
        return cls(
            text=d["text"],
            usage=TokenUsage.from_dict(d["usage"]),
            token_logprobs=d.get("token_logprobs"),
            tokens=d.get("tokens"),
            cached=cached,
        )


def cache_key(req: LMRequest) -> str:
    payload = {
        "model": req.model,
        "messages": [[m.role, m.content] for m in req.messages],
        "temperature": req.temperature,
        "want_logprobs": req.want_logprobs,
        "max_output_tokens": req.max_output_tokens,
    }
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def min_token_confidence(c: Completion, span: Optional[tuple[int, int]] = None) -> float:
    """Probability of the least confident generated token.

    With ``span`` (character offsets into ``c.text``) and per-token strings
    available, only tokens overlapping the span are considered.
    """
    logprobs = c.token_logprobs
    if not logprobs:
        raise ContractError("completion carries no token log-probabilities")
    if span is not None and c.tokens is not None and len(c.tokens) == len(logprobs):
        selected = []
        pos = 0
        for tok, lp in zip(c.tokens, logprobs):
            end = pos + len(tok)
            if end > span[0] and pos < span[1]:
                selected.append(lp)
            pos = end
        if selected:
            logprobs = selected
    return math.exp(min(logprobs))


class ResponseCache:
    """Content-addressed completion cache, one JSON file per key."""

    def __init__(self, directory: Path | str | None = None):
        self.directory = Path(directory) if directory else None
        self._mem: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def get(self, key: str) -> Optional[Completion]:
        with self._lock:
            hit = self._mem.get(key)
            if hit is None and self.directory:
                path = self.directory / f"{key}.json"
                if path.exists():
                    hit = json.loads(path.read_text(encoding="utf-8"))
                    self._mem[key] = hit
        return Completion.from_dict(hit, cached=True) if hit is not None else None

    def put(self, key: str, completion: Completion) -> None:
        data = completion.to_dict()
        with self._lock:
            self._mem[key] = data
            if self.directory:
                path = self.directory / f"{key}.json"
                tmp = path.with_suffix(".tmp")
                tmp.write_text(json.dumps(data, ensure_ascii=False), encoding="utf-8")
                os.replace(tmp, path)


class Gateway:
    """Common front for every backend: cache lookup, in-flight cap, and a
    running total of provider-charged usage."""

    parallel_safe = True

    def __init__(self, cache: Optional[ResponseCache] = None, max_in_flight: int = 8):
        self.cache = cache
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._usage_lock = threading.Lock()
        self.charged = TokenUsage()
        self.calls = 0

    def complete_chat(self, req: LMRequest) -> Completion:
        key = cache_key(req) if self.cache is not None else None
        if key is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        with self._slots:
            completion = self._complete(req)
        if req.want_logprobs and completion.token_logprobs is None:
            raise ConfigurationError(f"model {req.model!r} returned no logprobs")
        with self._usage_lock:
            self.charged = self.charged + completion.usage
            self.calls += 1
        if key is not None:
            self.cache.put(key, completion)
        return completion

    def _complete(self, req: LMRequest) -> Completion:
        raise NotImplementedError


def _is_offline() -> bool:
    return os.environ.get("NOTELOOP_OFFLINE", "") not in ("", "0")


class OpenAIGateway(Gateway):
    """OpenAI-compatible ``/chat/completions`` client.

    Retries transport failures and HTTP 429 up to ``attempts`` times with
    exponential backoff; usage is only counted for the attempt that succeeds.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        *,
        client: Optional[httpx.Client] = None,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
        cache: Optional[ResponseCache] = None,
        max_in_flight: int = 8,
    ):
        super().__init__(cache=cache, max_in_flight=max_in_flight)
        self.base_url = (base_url or os.environ.get("NOTELOOP_API_BASE") or "").rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("NOTELOOP_API_KEY", "")
        if not self.base_url:
            raise ConfigurationError("no endpoint: set NOTELOOP_API_BASE")
        if client is None:
            if _is_offline():
                raise ConfigurationError("live LLM calls are disabled (NOTELOOP_OFFLINE)")
            client = httpx.Client(timeout=timeout)
        self.client = client
        self.attempts = attempts
        self.backoff = backoff
        self.sleep = sleep

    def _payload(self, req: LMRequest) -> dict:
        body = {
            "model": req.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
        }
        if req.want_logprobs:
            body["logprobs"] = True
        if req.max_output_tokens is not None:
            body["max_tokens"] = req.max_output_tokens
        return body

    def _complete(self, req: LMRequest) -> Completion:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        url = f"{self.base_url}/chat/completions"
        last_exc: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(url, json=self._payload(req), headers=headers)
            except httpx.TransportError as exc:
                last_exc = exc
                log.warning("transport error on attempt %d: %s", attempt + 1, exc)
                continue
            if resp.status_code == 429:
                last_exc = ProviderError(f"rate limited: {resp.text[:200]}")
                log.warning("rate limited on attempt %d", attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:500]}")
            return self._parse(resp.json())
        raise TransportError(f"gave up after {self.attempts} attempts: {last_exc}")

    @staticmethod
    def _parse(data: dict) -> Completion:
        try:
            choice = data["choices"][0]
        except (KeyError, IndexError, TypeError):
            raise ProviderError(f"malformed response: {str(data)[:300]}")
        if choice.get("finish_reason") == "content_filter":
            raise ProviderError("completion refused by content filter")
        text = (choice.get("message") or {}).get("content") or ""
        usage = data.get("usage") or {}
        logprobs = tokens = None
        content = (choice.get("logprobs") or {}).get("content")
        if content:
            logprobs = [min(0.0, float(t["logprob"])) for t in content]
            tokens = [t.get("token", "") for t in content]
        return Completion(
            text=text,
            usage=TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
            token_logprobs=logprobs,
            tokens=tokens,
        )


# Playback ------------------------------------------------------------------


@dataclass
class PlaybackEntry:
    match: str
    response: str
    usage: TokenUsage
    request_digest: Optional[str] = None
    prompt_substring: tuple[str, ...] = ()
    probs: Optional[tuple[float, ...]] = None
    tokens: Optional[tuple[str, ...]] = None
    model: Optional[str] = None
    item: Optional[str] = None
    line: int = 0

    def matches(self, req: LMRequest, digest: str, item: Optional[str]) -> bool:
        if self.item is not None and self.item != item:
            return False
        if self.model is not None and self.model != req.model:
            return False
        if self.match == "exact":
            return self.request_digest == digest
        prompt = req.prompt_text
        return all(s in prompt for s in self.prompt_substring)

    def completion(self) -> Completion:
        logprobs = None
        if self.probs is not None:
            logprobs = [math.log(p) if p > 0 else -math.inf for p in self.probs]
        return Completion(self.response, self.usage, token_logprobs=logprobs, tokens=self.tokens)


def parse_playback_entry(d: dict, line: int = 0) -> PlaybackEntry:
    if not isinstance(d, dict) or "response" not in d:
        raise LoadError(f"line {line}: playback entry needs a 'response'")
    match = d.get("match", "prefix")
    if match == "substring":
        match = "prefix"
    if match not in ("exact", "prefix"):
        raise LoadError(f"line {line}: unknown match kind {match!r}")
    if match == "exact" and not d.get("request_digest"):
        raise LoadError(f"line {line}: exact match requires request_digest")
    subs = d.get("prompt_substring") or ()
    if isinstance(subs, str):
        subs = (subs,)
    probs = d.get("probs")
    if probs is not None and any(not 0.0 <= float(p) <= 1.0 for p in probs):
        raise LoadError(f"line {line}: probs must lie in [0, 1]")
    try:
        usage = TokenUsage.from_dict(d.get("usage") or {})
    except (TypeError, ValueError) as exc:
        raise LoadError(f"line {line}: bad usage: {exc}")
    return PlaybackEntry(
        match=match,
        response=str(d["response"]),
        usage=usage,
        request_digest=d.get("request_digest"),
        prompt_substring=tuple(subs),
        probs=tuple(float(p) for p in probs) if probs is not None else None,
        tokens=tuple(d["tokens"]) if d.get("tokens") is not None else None,
        model=d.get("model"),
        item=d.get("item"),
        line=line,
    )


class PlaybackGateway(Gateway):
    """Answers requests from a script; each entry is consumed once, and the
    first unconsumed matching entry (in file order) wins."""

    parallel_safe = False

    def __init__(self, entries: Sequence[PlaybackEntry], cache: Optional[ResponseCache] = None):
        super().__init__(cache=cache)
        self.entries = list(entries)
        self.consumed: list[int] = []
        self._used = [False] * len(self.entries)
        self._lock = threading.Lock()
        self.requests: list[LMRequest] = []

    def _complete(self, req: LMRequest) -> Completion:
        digest = cache_key(req)
        item = current_item.get()
        with self._lock:
            self.requests.append(req)
            for i, entry in enumerate(self.entries):
                if not self._used[i] and entry.matches(req, digest, item):
                    self._used[i] = True
                    self.consumed.append(i)
                    return entry.completion()
        raise PlaybackExhaustedError(
            f"no playback entry matches request {digest[:12]} (item={item}, model={req.model})"
        )

    @property
    def remaining(self) -> int:
        return self._used.count(False)


def playback_load(path: Path | str, cache: Optional[ResponseCache] = None) -> PlaybackGateway:
    entries = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read playback script {path}: {exc}")
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}:{n}: invalid JSON: {exc}")
        entries.append(parse_playback_entry(d, n))
    return PlaybackGateway(entries, cache=cache)


class RecordingGateway(Gateway):
    """Pass-through that appends every answered request to a playback script
    as an exact-digest entry. No credentials are ever written."""

    def __init__(self, inner: Gateway, path: Path | str):
        super().__init__(cache=None)
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self.parallel_safe = inner.parallel_safe

    def complete_chat(self, req: LMRequest) -> Completion:
        completion = self.inner.complete_chat(req)
        entry = {
            "match": "exact",
            "request_digest": cache_key(req),
            "model": req.model,
            "item": current_item.get(),
            "response": completion.text,
            "usage": {"input": completion.usage.input, "output": completion.usage.output},
        }
        if completion.token_logprobs is not None:
            entry["probs"] = [math.exp(lp) for lp in completion.token_logprobs]
            if completion.tokens is not None:
                entry["tokens"] = list(completion.tokens)
        with self._write_lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return completion


def ask(
    gateway: Gateway,
    model: str,
    messages: Sequence[ChatMessage],
    temperature: float,
    want_logprobs: bool = False,
    max_output_tokens: Optional[int] = None,
) -> Completion:
    return gateway.complete_chat(
        LMRequest(model, tuple(messages), temperature, want_logprobs, max_output_tokens)
    )
