import threading

import pytest

from aggdetect.corpus import Language
from aggdetect.translation import (
    BatchResult,
    RateLimited,
    StubTranslator,
    TranslationCache,
    TranslationError,
    TranslationRequest,
    TranslationService,
)


def req(text, src=Language.BN, dst=Language.EN):
    return TranslationRequest(text, src, dst)


class TestTranslationRequest:
    def test_same_language_rejected(self):
        with pytest.raises(ValueError):
            TranslationRequest("x", Language.EN, Language.EN)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            TranslationRequest("  ", Language.BN, Language.EN)

    def test_cache_key_distinguishes_pairs(self):
        a = req("hello", Language.BN, Language.EN)
        b = req("hello", Language.HI, Language.EN)
        assert a.cache_key() != b.cache_key()


class TestTranslate:
    def test_stub_mapping_table(self):
        stub = StubTranslator({"hello": "হ্যালো"})
        service = TranslationService(stub)
        assert service.translate(req("hello", Language.EN, Language.BN)) == "হ্যালো"

    def test_fallback_is_token_tagged(self):
        service = TranslationService(StubTranslator())
        assert service.translate(req("two words")) == "en::two en::words"

    def test_second_call_served_from_cache(self):
        stub = StubTranslator()
        service = TranslationService(stub)
        service.translate(req("hello"))
        assert stub.call_count == 1
        service.translate(req("hello"))
        assert stub.call_count == 1

    def test_duplicate_requests_call_count(self):
        stub = StubTranslator()
        service = TranslationService(stub)
        # 100 requests over 60 distinct texts -> exactly 60 provider calls
        texts = [f"text {i % 60}" for i in range(100)]
        for t in texts:
            service.translate(req(t))
        assert stub.call_count == 60

    def test_retry_until_success(self):
        stub = StubTranslator(fail_texts={"flaky"})
        attempts = []

        class FlakyOnce:
            provider_id = "flaky"

            def translate(self, text, src, dst):
                attempts.append(text)
                if len(attempts) < 3:
                    raise TranslationError("transient")
                return "ok"

        sleeps = []
        service = TranslationService(FlakyOnce(), sleep=sleeps.append)
        assert service.translate(req("x")) == "ok"
        assert len(attempts) == 3
        assert sleeps == [0.5, 1.0]  # exponential backoff

    def test_rate_limit_retry_after_honored(self):
        class Limited:
            provider_id = "limited"

            def __init__(self):
                self.calls = 0

            def translate(self, text, src, dst):
                self.calls += 1
                if self.calls == 1:
                    raise RateLimited(retry_after=7.5)
                return "done"

        sleeps = []
        service = TranslationService(Limited(), sleep=sleeps.append)
        assert service.translate(req("x")) == "done"
        assert sleeps == [7.5]

    def test_exhausted_retries_raise(self):
        stub = StubTranslator(fail_texts={"bad"})
        service = TranslationService(stub, max_attempts=3, sleep=lambda s: None)
        with pytest.raises(TranslationError, match="after 3 attempts"):
            service.translate(req("bad"))
        assert stub.call_count == 3


class TestCachePersistence:
    def test_warm_cache_zero_provider_calls(self, tmp_path):
        cache_path = tmp_path / "cache.jsonl"
        stub = StubTranslator()
        service = TranslationService(stub, TranslationCache(cache_path))
        for i in range(5):
            service.translate(req(f"t{i}"))
        assert stub.call_count == 5
        # fresh service over the same file: everything served from disk
        stub2 = StubTranslator()
        service2 = TranslationService(stub2, TranslationCache(cache_path))
        for i in range(5):
            service2.translate(req(f"t{i}"))
        assert stub2.call_count == 0

    def test_collision_detection(self, tmp_path):
        cache = TranslationCache(tmp_path / "c.jsonl")
        r = req("alpha")
        cache.put(r, "x", "stub")
        rec = cache._entries[r.cache_key()]
        rec["text"] = "tampered"
        with pytest.raises(TranslationError, match="collision"):
            cache.get(r)


class TestTranslateBatch:
    def test_empty(self):
        service = TranslationService(StubTranslator())
        result = service.translate_batch([])
        assert result.texts == [] and result.ok

    def test_alignment(self):
        service = TranslationService(StubTranslator({"b": "B!", "d": "D!"}))
        result = service.translate_batch([req(t) for t in "abcd"])
        assert result.texts == ["en::a", "B!", "en::c", "D!"]

    def test_partial_failures_reported_per_index(self):
        texts = [f"item {i}" for i in range(10)]
        stub = StubTranslator(fail_texts={texts[3], texts[7]})
        service = TranslationService(stub, max_attempts=2, sleep=lambda s: None)
        result = service.translate_batch([req(t) for t in texts])
        assert sorted(result.errors) == [3, 7]
        assert result.texts[3] is None and result.texts[7] is None
        assert all(result.texts[i] is not None for i in range(10) if i not in (3, 7))

    def test_in_flight_bound(self):
        stub = StubTranslator(latency=0.02)
        service = TranslationService(stub)
        service.translate_batch([req(f"t{i}") for i in range(12)], max_in_flight=3)
        assert stub.max_observed_in_flight <= 3

    def test_stub_is_pure(self):
        a = StubTranslator().translate("same text", Language.BN, Language.EN)
        b = StubTranslator().translate("same text", Language.BN, Language.EN)
        assert a == b

    def test_max_in_flight_validation(self):
        service = TranslationService(StubTranslator())
        with pytest.raises(ValueError):
            service.translate_batch([req("x")], max_in_flight=0)
