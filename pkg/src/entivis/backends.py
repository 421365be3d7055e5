"""Vision-language model backends and answer decoding.

Two implementations share one interface: an HTTP adapter for OpenAI-style
chat-completion servers, and a deterministic mock driven by a fixture file.
Decoding prefers the constrained path (class probabilities from the first
generated token's top-k logprobs) and falls back to parsing the generated
text when logprobs are unavailable or contain no class token.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import math
import os
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx
from PIL import Image

from .core import ClassProbs, Decision, InputError, ProbSource, RuntimeFailure


class TransportError(RuntimeFailure):
    """The backend could not be reached (after retries)."""


class BackendError(RuntimeFailure):
    """The backend answered, but with an error or an unusable payload."""


class CapabilityError(InputError):
    """The request needs a capability the backend does not have."""


# ---------------------------------------------------------------------------
# Request/response types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InferenceRequest:
    """One generation request. images holds decoded rasters; backends that
    can only take a single image reject longer tuples."""

    prompt: str
    images: tuple[Image.Image, ...]
    max_new_tokens: int = 256
    want_logprobs: bool = True
    top_k_logprobs: int = 20

    def __post_init__(self) -> None:
        if not self.images:
            raise ValueError("an inference request needs at least one image")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")


@dataclass(frozen=True)
class TokenLogprobs:
    """Top-k alternatives for one generated token position, sorted by
    logprob descending. Token texts are unique."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        texts = [t for t, _ in self.entries]
        if len(set(texts)) != len(texts):
            raise ValueError("duplicate token text in logprob entries")
        ordered = tuple(sorted(self.entries, key=lambda e: -e[1]))
        object.__setattr__(self, "entries", ordered)


@dataclass(frozen=True)
class BackendReply:
    text: str
    logprobs: TokenLogprobs | None = None


@dataclass(frozen=True)
class BackendDescriptor:
    model_id: str
    multi_image: bool
    supports_logprobs: bool


class Backend(Protocol):
    descriptor: BackendDescriptor

    def query(self, request: InferenceRequest) -> BackendReply: ...


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

# Leading markers tokenizers prepend to word-initial tokens: ordinary
# whitespace, the sentencepiece low line (U+2581) and the byte-level BPE
# space marker (U+0120).
_TOKEN_MARKERS = "▁Ġ"


def _token_class(token_text: str) -> str | None:
    stripped = token_text.lstrip()
    stripped = stripped.lstrip(_TOKEN_MARKERS).lstrip()
    lowered = stripped.lower()
    if lowered == "yes":
        return "yes"
    if lowered == "no":
        return "no"
    return None


def class_probs_from_logprobs(
    logprobs: TokenLogprobs | Iterable[tuple[str, float]],
) -> ClassProbs | None:
    """Turn first-token logprobs into yes/no class probabilities.

    Every entry whose text normalizes to "yes" or "no" contributes exp(lp) to
    its class; the result is the yes share of the two sums. Returns None when
    no entry belongs to either class. The largest member logprob is factored
    out before exponentiation so uniform shifts cannot overflow.
    """

    entries = logprobs.entries if isinstance(logprobs, TokenLogprobs) else tuple(logprobs)
    members = [(cls, lp) for text, lp in entries if (cls := _token_class(text)) is not None]
    if not members:
        return None
    peak = max(lp for _, lp in members)
    s_yes = sum(math.exp(lp - peak) for cls, lp in members if cls == "yes")
    s_no = sum(math.exp(lp - peak) for cls, lp in members if cls == "no")
    p_yes = s_yes / (s_yes + s_no)
    return ClassProbs(p_yes=p_yes, p_no=1.0 - p_yes, source=ProbSource.CONSTRAINED)


_ANSWER_RE = re.compile(r"^[\W_]*(yes|no)\b", re.IGNORECASE | re.UNICODE)


def parse_answer(text: str) -> Decision:
    """Freeform fallback: the answer counts only when it leads with the word
    yes or no (punctuation before it is ignored); anything else is unknown."""

    match = _ANSWER_RE.match(text.strip())
    if not match:
        return Decision.UNKNOWN
    return Decision.YES if match.group(1).lower() == "yes" else Decision.NO


def classify(
    backend: Backend,
    prompt: str,
    images: Sequence[Image.Image],
    *,
    max_new_tokens: int = 256,
    top_k_logprobs: int = 20,
) -> ClassProbs | None:
    """Ask one yes/no question and decode the answer.

    Constrained decoding applies whenever the backend returns logprobs and at
    least one class token appears among them; otherwise the generated text is
    parsed, yielding a degenerate 1/0 probability pair. Returns None when even
    the text gives no answer.
    """

    if len(images) > 1 and not backend.descriptor.multi_image:
        raise CapabilityError(
            f"backend {backend.descriptor.model_id!r} takes a single image, got {len(images)}"
        )
    request = InferenceRequest(
        prompt=prompt,
        images=tuple(images),
        max_new_tokens=max_new_tokens,
        want_logprobs=backend.descriptor.supports_logprobs,
        top_k_logprobs=top_k_logprobs,
    )
    reply = backend.query(request)
    if reply.logprobs is not None:
        probs = class_probs_from_logprobs(reply.logprobs)
        if probs is not None:
            return probs
    decision = parse_answer(reply.text)
    if decision is Decision.YES:
        return ClassProbs(p_yes=1.0, p_no=0.0, source=ProbSource.FREEFORM_PARSED)
    if decision is Decision.NO:
        return ClassProbs(p_yes=0.0, p_no=1.0, source=ProbSource.FREEFORM_PARSED)
    return None


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------

def request_digest(prompt: str, images: Sequence[Image.Image]) -> str:
    """Stable digest of a request: prompt plus each raster's mode, size and
    raw pixels. Fixture files key on this."""

    h = hashlib.sha256()
    h.update(prompt.encode("utf-8"))
    for img in images:
        h.update(b"\x00")
        h.update(img.mode.encode("ascii"))
        h.update(f"{img.width}x{img.height}".encode("ascii"))
        h.update(img.tobytes())
    return h.hexdigest()


def _reply_from_spec(spec: Mapping[str, Any], want_logprobs: bool) -> BackendReply:
    text = spec.get("text", "")
    if not want_logprobs:
        return BackendReply(text=text)
    if "logprobs" in spec:
        entries = tuple((str(t), float(lp)) for t, lp in spec["logprobs"])
        return BackendReply(text=text, logprobs=TokenLogprobs(entries))
    if "p_yes" in spec:
        p = float(spec["p_yes"])
        if p <= 0.0:
            entries = (("No", 0.0),)
        elif p >= 1.0:
            entries = (("Yes", 0.0),)
        else:
            entries = (("Yes", math.log(p)), ("No", math.log(1.0 - p)))
        return BackendReply(text=text, logprobs=TokenLogprobs(entries))
    return BackendReply(text=text)


class MockBackend:
    """Deterministic stand-in for a model server.

    Lookup order per request: exact digest match, then the first prompt
    substring rule, then the default response. Pure, so identical requests
    always get identical replies, from any thread.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        fixtures: Mapping[str, Mapping[str, Any]] | None = None,
        rules: Sequence[Mapping[str, Any]] | None = None,
        default: Mapping[str, Any] | None = None,
    ) -> None:
        self.descriptor = descriptor
        self._fixtures = dict(fixtures or {})
        self._rules = list(rules or [])
        self._default = default

    def query(self, request: InferenceRequest) -> BackendReply:
        if len(request.images) > 1 and not self.descriptor.multi_image:
            raise CapabilityError(
                f"backend {self.descriptor.model_id!r} takes a single image"
            )
        want = request.want_logprobs and self.descriptor.supports_logprobs
        digest = request_digest(request.prompt, request.images)
        if digest in self._fixtures:
            return _reply_from_spec(self._fixtures[digest], want)
        for rule in self._rules:
            needle = rule.get("if_prompt_contains", "")
            if needle and needle in request.prompt:
                return _reply_from_spec(rule, want)
        if self._default is not None:
            return _reply_from_spec(self._default, want)
        raise BackendError(f"no mock fixture matches request digest {digest}")


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HttpBackendConfig:
    model_id: str
    endpoint_url: str
    api_key_env_var: str | None = None
    multi_image: bool = False
    supports_logprobs: bool = True
    top_k_logprobs: int = 20
    timeout_s: float = 60.0
    system_prompt: str = ""
    max_retries: int = 3
    retry_base_s: float = 0.5


def _image_data_uri(img: Image.Image) -> str:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    payload = base64.b64encode(buf.getvalue()).decode("ascii")
    return f"data:image/png;base64,{payload}"


class HttpBackend:
    """Adapter for chat-completion endpoints that accept inline images.

    The API key comes from the environment variable named in the config;
    keys never live in config files. Transient transport failures are
    retried with jittered exponential backoff, then surface as
    TransportError.
    """

    def __init__(self, config: HttpBackendConfig, transport: httpx.BaseTransport | None = None) -> None:
        self.config = config
        self.descriptor = BackendDescriptor(
            model_id=config.model_id,
            multi_image=config.multi_image,
            supports_logprobs=config.supports_logprobs,
        )
        headers = {}
        if config.api_key_env_var:
            key = os.environ.get(config.api_key_env_var)
            if not key:
                raise InputError(
                    f"environment variable {config.api_key_env_var!r} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            timeout=config.timeout_s,
            headers=headers,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _payload(self, request: InferenceRequest) -> dict[str, Any]:
        content: list[dict[str, Any]] = [{"type": "text", "text": request.prompt}]
        for img in request.images:
            content.append(
                {"type": "image_url", "image_url": {"url": _image_data_uri(img)}}
            )
        messages: list[dict[str, Any]] = []
        if self.config.system_prompt:
            messages.append({"role": "system", "content": self.config.system_prompt})
        messages.append({"role": "user", "content": content})
        payload: dict[str, Any] = {
            "model": self.config.model_id,
            "messages": messages,
            "max_tokens": request.max_new_tokens,
            "temperature": 0,
        }
        if request.want_logprobs and self.config.supports_logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = min(request.top_k_logprobs, self.config.top_k_logprobs)
        return payload

    def _post(self, payload: dict[str, Any]) -> httpx.Response:
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                return self._client.post(self.config.endpoint_url, json=payload)
            except httpx.TransportError as exc:
                last = exc
                if attempt < self.config.max_retries:
                    delay = self.config.retry_base_s * (2**attempt)
                    time.sleep(delay * (0.5 + random.random()))
        raise TransportError(f"backend unreachable after retries: {last}") from last

    def query(self, request: InferenceRequest) -> BackendReply:
        if len(request.images) > 1 and not self.config.multi_image:
            raise CapabilityError(
                f"backend {self.config.model_id!r} takes a single image, got {len(request.images)}"
            )
        response = self._post(self._payload(request))
        if response.status_code >= 400:
            raise BackendError(
                f"backend returned HTTP {response.status_code}: {response.text[:500]}"
            )
        try:
            body = response.json()
            choice = body["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from None
        logprobs = _parse_logprobs(choice)
        return BackendReply(text=text, logprobs=logprobs)


def _parse_logprobs(choice: Mapping[str, Any]) -> TokenLogprobs | None:
    lp = choice.get("logprobs")
    if not lp:
        return None
    content = lp.get("content") or []
    if not content:
        return None
    first = content[0]
    raw = first.get("top_logprobs") or [first]
    best: dict[str, float] = {}
    for item in raw:
        try:
            token = str(item["token"])
            value = float(item["logprob"])
        except (KeyError, TypeError, ValueError):
            continue
        if token not in best or value > best[token]:
            best[token] = value
    if not best:
        return None
    return TokenLogprobs(tuple(best.items()))


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

def load_backend(path: str | Path, transport: httpx.BaseTransport | None = None) -> Backend:
    """Build a backend from a JSON config file.

    Configs carrying an endpoint_url become HTTP backends; configs carrying
    fixtures/rules/default become mocks. An explicit "type" field overrides
    the detection.
    """

    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: backend config must be a JSON object")
    if "model_id" not in data:
        raise InputError(f"{path}: backend config lacks model_id")

    kind = data.get("type")
    if kind is None:
        kind = "http" if "endpoint_url" in data else "mock"

    if kind == "http":
        if "endpoint_url" not in data:
            raise InputError(f"{path}: http backend config lacks endpoint_url")
        config = HttpBackendConfig(
            model_id=data["model_id"],
            endpoint_url=data["endpoint_url"],
            api_key_env_var=data.get("api_key_env_var"),
            multi_image=bool(data.get("multi_image", False)),
            supports_logprobs=bool(data.get("supports_logprobs", True)),
            top_k_logprobs=int(data.get("top_k_logprobs", 20)),
            timeout_s=float(data.get("timeout_s", 60.0)),
            system_prompt=data.get("system_prompt", ""),
            max_retries=int(data.get("max_retries", 3)),
            retry_base_s=float(data.get("retry_base_s", 0.5)),
        )
        return HttpBackend(config, transport=transport)

    if kind == "mock":
        descriptor = BackendDescriptor(
            model_id=data["model_id"],
            multi_image=bool(data.get("multi_image", True)),
            supports_logprobs=bool(data.get("supports_logprobs", True)),
        )
        return MockBackend(
            descriptor,
            fixtures=data.get("fixtures"),
            rules=data.get("rules"),
            default=data.get("default"),
        )

    raise InputError(f"{path}: unknown backend type {kind!r}")
