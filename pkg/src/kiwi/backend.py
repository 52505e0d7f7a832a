"""Text-generation backends behind a minimal completion-style contract.

Wire protocol (HTTP JSON): request {model, prompt, temperature, max_tokens},
response {text}. Anything that speaks it can serve the pipeline; a
deterministic lexicon-driven mock ships here so the full system runs and
tests without any model.
"""

from __future__ import annotations

import dataclasses
import json
import re
import time
from dataclasses import dataclass
from typing import Protocol

import requests

from .spanmark import decode


class TransportError(RuntimeError):
    """Request never produced a usable response (connection, timeout, 5xx)."""


class BackendUnavailableError(RuntimeError):
    """Transport errors persisted through every retry."""


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model_name: str = "kiwi"
    temperature: float = 0.0
    max_output_chars: int = 8192
    request_timeout: float = 30.0
    max_retries: int = 3
    retry_backoff_s: float = 0.5
    batch_size: int = 100
    api_key: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    latency_s: float = 0.0
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.latency_s < 0:
            raise ValueError("latency must be >= 0")


class Backend(Protocol):
    def generate(self, prompt: str) -> GenerationResponse: ...

    def ping(self) -> bool: ...

    def describe(self) -> str: ...


class HttpBackend:
    """Client for any server speaking the completion contract.

    Transport failures raise TransportError; the retry policy lives with
    the caller (pipeline), not here, so one request maps to one attempt.
    """

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise ValueError("endpoint required")
        self.config = config
        self._session = requests.Session()
        if config.api_key:
            self._session.headers["Authorization"] = f"Bearer {config.api_key}"

    def generate(self, prompt: str) -> GenerationResponse:
        payload = {
            "model": self.config.model_name,
            "prompt": prompt,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_chars,
        }
        t0 = time.monotonic()
        try:
            resp = self._session.post(
                self.config.endpoint,
                json=payload,
                timeout=self.config.request_timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        latency = time.monotonic() - t0
        if resp.status_code >= 500:
            raise TransportError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"unexpected status {resp.status_code}")
        try:
            body = resp.json()
            text = body["text"]
        except (ValueError, KeyError) as exc:
            raise TransportError(f"malformed response body: {exc}") from exc
        return GenerationResponse(
            text=str(text)[: self.config.max_output_chars],
            latency_s=latency,
            prompt_tokens=body.get("prompt_tokens"),
            completion_tokens=body.get("completion_tokens"),
        )

    def ping(self) -> bool:
        try:
            self._session.head(self.config.endpoint, timeout=self.config.request_timeout)
        except requests.RequestException:
            return False
        return True  # any HTTP answer means the host is up

    def describe(self) -> str:
        return f"http:{self.config.endpoint}:{self.config.model_name}"


_INPUT_LABEL = "### Input Text: "
_OUTPUT_LABEL = "\n### Output Text:"
_GUIDE_CLASS = re.compile(r'Use <span class="([a-z_]+)">')


class MockBackend:
    """Deterministic backend driven by a surface→class lexicon.

    Reads the prompt's input line, strips any markup, then re-tags every
    lexicon surface found in it (longest match, left to right, whole-word
    hits only) whose class the prompt's markup guide advertises. With an
    empty lexicon it echoes the input verbatim.
    """

    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = dict(lexicon or {})
        # longest first so "left arm" beats "left" at the same start
        self._surfaces = sorted(self.lexicon, key=len, reverse=True)

    def generate(self, prompt: str) -> GenerationResponse:
        start = prompt.rfind(_INPUT_LABEL)
        end = prompt.rfind(_OUTPUT_LABEL)
        if start == -1 or end == -1 or end <= start:
            return GenerationResponse(text=prompt)
        input_text = prompt[start + len(_INPUT_LABEL) : end]
        allowed = set(_GUIDE_CLASS.findall(prompt[:start]))
        plain, _, _ = decode(input_text)
        return GenerationResponse(text=self._tag(plain, allowed))

    def _tag(self, plain: str, allowed: set[str]) -> str:
        out: list[str] = []
        i = 0
        while i < len(plain):
            hit = None
            for surface in self._surfaces:
                cls = self.lexicon[surface]
                if cls not in allowed:
                    continue
                if not plain.startswith(surface, i):
                    continue
                if not _word_bounded(plain, i, i + len(surface)):
                    continue
                hit = (surface, cls)
                break
            if hit is None:
                out.append(plain[i])
                i += 1
            else:
                surface, cls = hit
                out.append(f'<span class="{cls}">{surface}</span>')
                i += len(surface)
        return "".join(out)

    def ping(self) -> bool:
        return True

    def describe(self) -> str:
        return f"mock:{len(self.lexicon)}-entry-lexicon"


_WORDISH = re.compile(r"\w")


def _word_bounded(text: str, start: int, end: int) -> bool:
    """True when [start, end) neither starts nor ends inside a \\w run."""
    if start > 0 and _WORDISH.match(text[start]) and _WORDISH.match(text[start - 1]):
        return False
    if end < len(text) and _WORDISH.match(text[end - 1]) and _WORDISH.match(text[end]):
        return False
    return True


def make_backend(url: str, config: BackendConfig | None = None) -> Backend:
    """Build a backend from a URL-ish spec.

    "mock:" → empty-lexicon mock; "mock:/path/to/lexicon.json" → mock
    with surface→class entries from that file; anything else → HTTP
    client for that endpoint.
    """
    if url.startswith("mock:"):
        path = url[len("mock:") :]
        lexicon: dict[str, str] = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                lexicon = json.load(fh)
        return MockBackend(lexicon)
    cfg = config or BackendConfig()
    if cfg.endpoint != url:
        cfg = dataclasses.replace(cfg, endpoint=url)
    return HttpBackend(cfg)


__all__ = [
    "Backend",
    "BackendConfig",
    "BackendUnavailableError",
    "GenerationResponse",
    "HttpBackend",
    "MockBackend",
    "TransportError",
    "make_backend",
]
