"""Provider-neutral client for OpenAI-compatible chat completion endpoints.

One client speaks to candidate models, CoT teachers, and judges alike: every
backend in the workflow exposes the ``POST {base_url}/chat/completions``
shape. Calls go through an on-disk response cache keyed by request content, a
per-endpoint concurrency bound, and a bounded retry loop.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

__all__ = [
    "ChatMessage",
    "TextPart",
    "ImagePart",
    "EndpointConfig",
    "CachedExchange",
    "ModelClient",
    "ModelClientError",
    "ProviderError",
    "EndpointTimeoutError",
    "RetryExhaustedError",
    "UnsupportedMediaTypeError",
    "encode_image_part",
]

SUPPORTED_MEDIA_TYPES = ("image/png", "image/jpeg")

DEFAULT_MAX_IMAGE_EDGE = 1568


class ModelClientError(Exception):
    """Base class for client failures."""


class ProviderError(ModelClientError):
    """Non-2xx response with a provider error body."""

    def __init__(self, status_code: int, body: str):
        super().__init__(f"provider returned {status_code}: {body[:500]}")
        self.status_code = status_code
        self.body = body


class EndpointTimeoutError(ModelClientError):
    """The request exceeded the configured timeout."""


class RetryExhaustedError(ModelClientError):
    """All attempts failed; carries the per-attempt error trace."""

    def __init__(self, attempts: list[str]):
        super().__init__(
            f"endpoint failed after {len(attempts)} attempts: {attempts[-1]}"
        )
        self.attempts = attempts


class UnsupportedMediaTypeError(ModelClientError):
    """Image media type outside the supported set."""


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    media_type: str

    def __post_init__(self) -> None:
        if not self.data:
            raise ValueError("image part carries empty bytes")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    parts: tuple

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.parts:
            raise ValueError("message needs at least one part")

    @classmethod
    def user_text(cls, text: str) -> "ChatMessage":
        return cls(role="user", parts=(TextPart(text),))

    @classmethod
    def user_parts(cls, *parts) -> "ChatMessage":
        return cls(role="user", parts=tuple(parts))

    @classmethod
    def system(cls, text: str) -> "ChatMessage":
        return cls(role="system", parts=(TextPart(text),))


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings for one chat endpoint.

    API keys are never stored; ``api_key_source`` names the environment
    variable read at call time.
    """

    base_url: str
    model_name: str
    api_key_source: str = ""
    max_concurrent_requests: int = 4
    timeout_s: float = 60.0
    max_retries: int = 2
    temperature: Optional[float] = 0.0
    max_output_tokens: Optional[int] = None
    max_image_edge: int = DEFAULT_MAX_IMAGE_EDGE
    retry_backoff_s: float = 0.25

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be nonempty")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def api_key(self) -> str:
        return os.environ.get(self.api_key_source, "") if self.api_key_source else ""


@dataclass(frozen=True)
class CachedExchange:
    cache_key: str
    response_text: str
    created_at: float
    token_usage: Optional[dict] = None


def encode_image_part(data: bytes, media_type: str) -> dict:
    """Wire-format image attachment: a base64 data-URI content part."""
    if media_type not in SUPPORTED_MEDIA_TYPES:
        raise UnsupportedMediaTypeError(
            f"{media_type!r} not in {SUPPORTED_MEDIA_TYPES}"
        )
    b64 = base64.b64encode(data).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:{media_type};base64,{b64}"}}


def downscale_image(data: bytes, media_type: str, max_edge: int) -> bytes:
    """Shrink an image proportionally so its longest edge is <= max_edge.

    Returns the original bytes untouched when already small enough, keeping
    cache keys and uploads deterministic.
    """
    from PIL import Image

    with Image.open(io.BytesIO(data)) as im:
        w, h = im.size
        if max(w, h) <= max_edge:
            return data
        scale = max_edge / max(w, h)
        new_size = (max(1, round(w * scale)), max(1, round(h * scale)))
        resized = im.resize(new_size, Image.LANCZOS)
        out = io.BytesIO()
        if media_type == "image/jpeg":
            resized = resized.convert("RGB")
            resized.save(out, format="JPEG", quality=90)
        else:
            resized.save(out, format="PNG")
        return out.getvalue()


def canonical_request(config: EndpointConfig, messages: list[ChatMessage]) -> dict:
    """Deterministic request form used for cache keying.

    Image bytes enter as their sha256 digest, so the key stays content
    addressed without serializing payloads twice.
    """
    serialized = []
    for msg in messages:
        parts = []
        for part in msg.parts:
            if isinstance(part, TextPart):
                parts.append({"kind": "text", "text": part.text})
            else:
                parts.append({
                    "kind": "image",
                    "media_type": part.media_type,
                    "sha256": hashlib.sha256(part.data).hexdigest(),
                })
        serialized.append({"role": msg.role, "parts": parts})
    return {
        "model": config.model_name,
        "temperature": config.temperature,
        "max_output_tokens": config.max_output_tokens,
        "messages": serialized,
    }


def cache_key_for(config: EndpointConfig, messages: list[ChatMessage]) -> str:
    payload = json.dumps(
        canonical_request(config, messages), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed on-disk store; one file per exchange, named by key."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / key

    def get(self, key: str) -> Optional[CachedExchange]:
        path = self._path(key)
        try:
            payload = json.loads(path.read_text("utf-8"))
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        return CachedExchange(
            cache_key=key,
            response_text=payload["response_text"],
            created_at=payload.get("created_at", 0.0),
            token_usage=payload.get("token_usage"),
        )

    def put(self, key: str, response_text: str, token_usage: Optional[dict]) -> None:
        payload = {
            "response_text": response_text,
            "created_at": time.time(),
            "token_usage": token_usage,
        }
        # Atomic replace keeps concurrent writers from tearing entries.
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(payload, f)
            os.replace(tmp, self._path(key))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _wire_body(config: EndpointConfig, messages: list[ChatMessage]) -> dict:
    wire_messages = []
    for msg in messages:
        content = []
        for part in msg.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                data = downscale_image(part.data, part.media_type, config.max_image_edge)
                content.append(encode_image_part(data, part.media_type))
        wire_messages.append({"role": msg.role, "content": content})
    body = {"model": config.model_name, "messages": wire_messages}
    if config.temperature is not None:
        body["temperature"] = config.temperature
    if config.max_output_tokens is not None:
        body["max_tokens"] = config.max_output_tokens
    return body


class ModelClient:
    """Shareable, thread-safe client bound to one endpoint.

    The semaphore bounds in-flight requests; the cache and counters are
    lock-protected, so one instance serves any number of worker threads.
    """

    def __init__(self, config: EndpointConfig, cache_dir: Optional[Path] = None):
        self.config = config
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self._semaphore = threading.Semaphore(config.max_concurrent_requests)
        self._lock = threading.Lock()
        self.network_calls = 0

    def chat_complete(
        self,
        messages: list[ChatMessage],
        cache_mode: str = "use",
        config: Optional[EndpointConfig] = None,
    ) -> str:
        """Run one chat completion and return the assistant text.

        cache_mode: ``use`` serves hits without a network call and stores
        misses; ``bypass`` always calls and leaves the cache untouched;
        ``refresh`` always calls and overwrites the entry.
        """
        if cache_mode not in ("use", "bypass", "refresh"):
            raise ValueError(f"bad cache_mode {cache_mode!r}")
        cfg = config or self.config
        key = cache_key_for(cfg, messages)

        if self.cache and cache_mode == "use":
            hit = self.cache.get(key)
            if hit is not None:
                return hit.response_text

        text, usage = self._call(cfg, messages)

        if self.cache and cache_mode != "bypass":
            self.cache.put(key, text, usage)
        return text

    def _call(self, cfg: EndpointConfig, messages: list[ChatMessage]) -> tuple[str, Optional[dict]]:
        body = _wire_body(cfg, messages)
        headers = {"Content-Type": "application/json"}
        key = cfg.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = cfg.base_url.rstrip("/") + "/chat/completions"

        attempts: list[str] = []
        for attempt in range(1 + cfg.max_retries):
            if attempt:
                time.sleep(cfg.retry_backoff_s * (2 ** (attempt - 1)))
            try:
                with self._lock:
                    self.network_calls += 1
                with self._semaphore:
                    response = httpx.post(
                        url, json=body, headers=headers, timeout=cfg.timeout_s
                    )
            except httpx.TimeoutException as exc:
                attempts.append(f"timeout: {exc}")
                continue
            except httpx.HTTPError as exc:
                attempts.append(f"transport: {exc}")
                continue

            if response.status_code >= 500:
                attempts.append(f"http {response.status_code}: {response.text[:200]}")
                continue
            if response.status_code >= 300:
                raise ProviderError(response.status_code, response.text)

            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
            return text, payload.get("usage")

        if all(a.startswith("timeout") for a in attempts):
            raise EndpointTimeoutError(
                f"timed out after {len(attempts)} attempts against {url}"
            )
        raise RetryExhaustedError(attempts)
