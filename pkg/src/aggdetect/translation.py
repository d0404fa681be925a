"""Machine-translation client with caching, rate limiting, retries, and an
offline deterministic stub.

The live provider is pluggable (an adapter taking text + language pair);
translations are memoized in an append-only JSONL cache so that a corpus
built from machine translation is frozen and reproducible even though live
MT output drifts over time.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .corpus import Language

__all__ = [
    "TranslationRequest",
    "TranslationError",
    "RateLimited",
    "TranslationProvider",
    "StubTranslator",
    "HttpTranslator",
    "TranslationCache",
    "TranslationService",
    "BatchResult",
]


class TranslationError(Exception):
    """Provider failure that survived all retry attempts."""


class RateLimited(TranslationError):
    """Provider asked us to back off; retry_after is in seconds."""

    def __init__(self, retry_after: float = 1.0):
        super().__init__(f"rate limited, retry after {retry_after}s")
        self.retry_after = retry_after


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source_language: Language
    target_language: Language

    def __post_init__(self):
        if self.source_language == self.target_language:
            raise ValueError("source and target language must differ")
        if not self.text.strip():
            raise ValueError("cannot translate empty text")

    def cache_key(self) -> str:
        payload = "\x00".join(
            (self.text, self.source_language.value, self.target_language.value)
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranslationProvider(Protocol):
    provider_id: str

    def translate(self, text: str, source: Language, target: Language) -> str: ...


class StubTranslator:
    """Deterministic offline provider for tests and CI.

    Known texts come from a mapping table; anything else falls back to a
    reversible transform that prefixes each token with the target language
    tag, so translated fixtures stay human-checkable.
    """

    provider_id = "stub"

    def __init__(
        self,
        table: dict[str, str] | None = None,
        fail_texts: set[str] | None = None,
        latency: float = 0.0,
    ):
        self.table = dict(table or {})
        self.fail_texts = set(fail_texts or ())
        self.latency = latency
        self.calls: list[str] = []
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_observed_in_flight = 0

    def translate(self, text: str, source: Language, target: Language) -> str:
        with self._lock:
            self.calls.append(text)
            self._in_flight += 1
            self.max_observed_in_flight = max(
                self.max_observed_in_flight, self._in_flight
            )
        try:
            if self.latency:
                time.sleep(self.latency)
            if text in self.fail_texts:
                raise TranslationError(f"stub programmed failure for {text!r}")
            if text in self.table:
                return self.table[text]
            return " ".join(f"{target.value}::{tok}" for tok in text.split())
        finally:
            with self._lock:
                self._in_flight -= 1

    @property
    def call_count(self) -> int:
        return len(self.calls)


class HttpTranslator:
    """Adapter for an HTTPS JSON translation endpoint.

    Speaks ``POST {url} {"q": text, "source": src, "target": dst}`` and
    expects ``{"translatedText": ...}`` back. The API key is read from the
    environment variable named by ``api_key_env``.
    """

    def __init__(self, url: str, api_key_env: str = "AGGDETECT_MT_API_KEY",
                 provider_id: str = "http", timeout: float = 30.0):
        self.url = url
        self.api_key_env = api_key_env
        self.provider_id = provider_id
        self.timeout = timeout

    def translate(self, text: str, source: Language, target: Language) -> str:
        import os

        import requests

        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = requests.post(
            self.url,
            json={"q": text, "source": source.value, "target": target.value},
            headers=headers,
            timeout=self.timeout,
        )
        if resp.status_code == 429:
            raise RateLimited(float(resp.headers.get("Retry-After", 1.0)))
        if resp.status_code >= 400:
            raise TranslationError(f"provider returned HTTP {resp.status_code}")
        return resp.json()["translatedText"]


class TranslationCache:
    """Append-only JSONL cache keyed by the request hash.

    The full request is stored alongside each entry so hash collisions are
    detected instead of silently returning the wrong translation.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.is_file():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self._entries[rec["key"]] = rec

    def __len__(self):
        return len(self._entries)

    def get(self, request: TranslationRequest) -> str | None:
        rec = self._entries.get(request.cache_key())
        if rec is None:
            return None
        if rec["text"] != request.text:
            raise TranslationError(
                f"cache key collision for {request.cache_key()[:12]}..."
            )
        return rec["translated_text"]

    def put(self, request: TranslationRequest, translated: str, provider_id: str):
        rec = {
            "key": request.cache_key(),
            "source": request.source_language.value,
            "target": request.target_language.value,
            "text": request.text,
            "translated_text": translated,
            "provider_id": provider_id,
            "timestamp": time.time(),
        }
        with self._lock:
            self._entries[rec["key"]] = rec
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


@dataclass
class BatchResult:
    """Order-aligned batch output; failed indices hold None in texts."""

    texts: list[str | None]
    errors: dict[int, Exception] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


class TranslationService:
    """Cached, rate-limit-aware, retrying front end over a provider.

    Safe for concurrent callers; cache writes are serialized and the
    in-flight bound of translate_batch is a hard limit.
    """

    def __init__(
        self,
        provider: TranslationProvider,
        cache: TranslationCache | None = None,
        max_attempts: int = 5,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.provider = provider
        self.cache = cache if cache is not None else TranslationCache()
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep

    def translate(self, request: TranslationRequest) -> str:
        cached = self.cache.get(request)
        if cached is not None:
            return cached
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                translated = self.provider.translate(
                    request.text, request.source_language, request.target_language
                )
                self.cache.put(request, translated, self.provider.provider_id)
                return translated
            except RateLimited as exc:
                last_error = exc
                self._sleep(exc.retry_after)
            except Exception as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
        raise TranslationError(
            f"translation failed after {self.max_attempts} attempts: {last_error}"
        )

    def translate_batch(
        self, requests: list[TranslationRequest], max_in_flight: int = 4
    ) -> BatchResult:
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        texts: list[str | None] = [None] * len(requests)
        errors: dict[int, Exception] = {}
        if not requests:
            return BatchResult(texts)
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = {pool.submit(self.translate, req): i for i, req in enumerate(requests)}
            for fut, i in futures.items():
                try:
                    texts[i] = fut.result()
                except Exception as exc:
                    errors[i] = exc
        return BatchResult(texts, errors)
