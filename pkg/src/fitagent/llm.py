"""Chat-completion backends: live HTTP, transcript replay and recording."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

API_KEY_ENV = "FITAGENT_API_KEY"
BASE_URL_ENV = "FITAGENT_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_TIMEOUT = 120.0
ROLES = ("system", "user", "assistant")


class LLMError(RuntimeError):
    """Any failure to obtain a completion."""


class LLMConfigError(LLMError):
    pass


class LLMConnectionError(LLMError):
    pass


class LLMHTTPError(LLMError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body


class ReplayExhaustedError(LLMError):
    pass


class ReplayMismatchError(LLMError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float | None = None

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(**m) for m in self.messages)
        if not msgs:
            raise ValueError("a request needs at least one message")
        if msgs[0].role != "system":
            raise ValueError("the first message must be the system message")
        if self.temperature is not None and not 0 <= self.temperature <= 2:
            raise ValueError("temperature must lie in [0, 2]")
        object.__setattr__(self, "messages", msgs)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
        }
        if self.temperature is not None:
            d["temperature"] = self.temperature
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatRequest":
        return cls(d["model"], tuple(Message(**m) for m in d["messages"]), d.get("temperature"))


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict[str, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"content": self.content, "finish_reason": self.finish_reason}
        if self.usage is not None:
            d["usage"] = self.usage
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatResponse":
        return cls(d["content"], d.get("finish_reason", "stop"), d.get("usage"))


def _normalize_text(s: str) -> str:
    lines = s.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    return "\n".join(line.rstrip() for line in lines)


def request_digest(req: ChatRequest) -> str:
    """SHA-256 over a canonical JSON form of (model, messages, temperature)."""
    canon = {
        "model": req.model,
        "messages": [{"role": m.role, "content": _normalize_text(m.content)} for m in req.messages],
        "temperature": req.temperature,
    }
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_temperature(model_id: str) -> float | None:
    """0.1 for GPT-4-class ids; unset (server default) for GPT-5-class ids."""
    if model_id.lower().startswith("gpt-5"):
        return None
    return 0.1


class ChatBackend(Protocol):
    backend_id: str

    def complete(self, req: ChatRequest) -> ChatResponse: ...


# --------------------------------------------------------------------------
# Transcripts


@dataclass(frozen=True)
class TranscriptRecord:
    digest: str
    request: ChatRequest
    response: ChatResponse

    def to_line(self) -> str:
        obj = {"digest": self.digest, "request": self.request.to_dict(), "response": self.response.to_dict()}
        return json.dumps(obj, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "TranscriptRecord":
        return cls(obj["digest"], ChatRequest.from_dict(obj["request"]), ChatResponse.from_dict(obj["response"]))


@dataclass
class ChatTranscript:
    records: list[TranscriptRecord] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def load(cls, path: str | Path) -> "ChatTranscript":
        records, meta = [], {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LLMConfigError(f"{path}:{lineno}: malformed transcript line: {exc}") from exc
            if "meta" in obj and "digest" not in obj:
                meta = obj["meta"]
                continue
            records.append(TranscriptRecord.from_obj(obj))
        return cls(records, meta)

    def dump(self, path: str | Path) -> None:
        lines = [meta_line(self.metadata)] + [r.to_line() for r in self.records]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def meta_line(metadata: dict[str, Any]) -> str:
    return json.dumps({"meta": metadata}, sort_keys=True, ensure_ascii=False)


# --------------------------------------------------------------------------
# Backends


class OpenAIChatBackend:
    """POSTs to ``{base_url}/chat/completions`` with a bearer token."""

    backend_id = "live"

    def __init__(self, api_key: str | None = None, base_url: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT, client: httpx.Client | None = None):
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise LLMConfigError(f"missing credential: set {API_KEY_ENV}")
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self._client = client or httpx.Client(timeout=timeout)
        self._lock = threading.Lock()

    def complete(self, req: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        with self._lock:
            try:
                resp = self._client.post(url, json=req.to_dict(), headers=self._headers)
            except httpx.HTTPError as exc:
                raise LLMConnectionError(f"request to {url} failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise LLMHTTPError(resp.status_code, resp.text)
        try:
            body = resp.json()
            choice = body["choices"][0]
            content = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LLMError(f"unexpected response body: {resp.text[:500]}") from exc
        if content is None:
            raise LLMError("response has no content")
        return ChatResponse(content, choice.get("finish_reason") or "stop", body.get("usage"))


class ReplayBackend:
    """Serves recorded responses strictly in order.

    In strict mode each request must hash to the recorded digest; lenient
    mode only checks position, which keeps fixtures portable when prompts
    embed machine-specific paths.
    """

    backend_id = "replay"

    def __init__(self, transcript: ChatTranscript, strict: bool = True):
        self.transcript = transcript
        self.strict = strict
        self.position = 0

    @classmethod
    def from_file(cls, path: str | Path, strict: bool = True) -> "ReplayBackend":
        return cls(ChatTranscript.load(path), strict)

    @property
    def metadata(self) -> dict[str, Any]:
        return self.transcript.metadata

    def complete(self, req: ChatRequest) -> ChatResponse:
        if self.position >= len(self.transcript):
            raise ReplayExhaustedError(f"transcript exhausted after {len(self.transcript)} responses")
        rec = self.transcript.records[self.position]
        if self.strict:
            digest = request_digest(req)
            if digest != rec.digest:
                raise ReplayMismatchError(
                    f"request {self.position + 1} digest {digest[:12]} != recorded {rec.digest[:12]}"
                )
        self.position += 1
        return rec.response


class ScriptedBackend:
    """Returns canned response texts in order; used to author fixtures."""

    backend_id = "scripted"

    def __init__(self, responses: Iterable[str]):
        self.responses = list(responses)
        self.requests: list[ChatRequest] = []

    def complete(self, req: ChatRequest) -> ChatResponse:
        if len(self.requests) >= len(self.responses):
            raise ReplayExhaustedError(f"script exhausted after {len(self.responses)} responses")
        self.requests.append(req)
        return ChatResponse(self.responses[len(self.requests) - 1])


class RecordingBackend:
    """Forwards to ``inner`` and appends every exchange to a transcript file.

    Recording on top of a replay backend reuses the replayed transcript's
    metadata, so the copy is byte-identical to the source.
    """

    def __init__(self, inner: ChatBackend, path: str | Path):
        self.inner = inner
        self.backend_id = f"record:{inner.backend_id}"
        self.path = Path(path)
        self.count = 0
        meta = getattr(inner, "metadata", None)
        if not meta:
            meta = {
                "backend": inner.backend_id,
                "recorded_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            }
        self.metadata = dict(meta)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(meta_line(self.metadata) + "\n", encoding="utf-8")
        except OSError as exc:
            raise LLMConfigError(f"cannot write transcript {self.path}: {exc}") from exc

    def complete(self, req: ChatRequest) -> ChatResponse:
        resp = self.inner.complete(req)
        rec = TranscriptRecord(request_digest(req), req, resp)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(rec.to_line() + "\n")
        self.count += 1
        return resp


def record_mode(inner: ChatBackend, path: str | Path) -> RecordingBackend:
    return RecordingBackend(inner, path)


def make_request(model: str, messages: Sequence[Message | dict], temperature: float | None) -> ChatRequest:
    return ChatRequest(model, tuple(m if isinstance(m, Message) else Message(**m) for m in messages), temperature)


@dataclass(frozen=True)
class ChatSettings:
    model: str = "gpt-5"
    temperature: float | None = None

    @classmethod
    def for_model(cls, model: str, temperature: float | None = None) -> "ChatSettings":
        return cls(model, temperature if temperature is not None else default_temperature(model))


def ask(backend: ChatBackend, settings: ChatSettings, system: str, user: str) -> str:
    """One-shot system + user exchange; returns the response text."""
    req = make_request(settings.model, [Message("system", system), Message("user", user)], settings.temperature)
    return backend.complete(req).content
