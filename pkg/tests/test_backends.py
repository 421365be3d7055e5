"""Backend decoding: constrained class probabilities, freeform fallback,
mock lookup order, HTTP adapter behaviour."""

from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entivis.backends import (
    BackendDescriptor,
    BackendError,
    BackendReply,
    CapabilityError,
    HttpBackend,
    HttpBackendConfig,
    InferenceRequest,
    MockBackend,
    TokenLogprobs,
    TransportError,
    class_probs_from_logprobs,
    classify,
    load_backend,
    parse_answer,
    request_digest,
)
from entivis.core import Decision, InputError, ProbSource

from conftest import make_image, mock_backend


class TestClassProbs:
    def test_worked_example_three_quarters(self):
        probs = class_probs_from_logprobs(
            [("Yes", math.log(0.5)), ("yes", math.log(0.1)), ("No", math.log(0.2))]
        )
        assert probs.p_yes == pytest.approx(0.75, abs=1e-12)
        assert probs.source is ProbSource.CONSTRAINED

    def test_equal_mass_is_half(self):
        probs = class_probs_from_logprobs([("Yes", math.log(0.3)), ("No", math.log(0.3))])
        assert probs.p_yes == pytest.approx(0.5, abs=1e-12)

    def test_no_class_tokens_gives_none(self):
        assert class_probs_from_logprobs([("The", -0.1), ("A", -0.9)]) is None

    def test_marker_variants_count(self):
        probs = class_probs_from_logprobs(
            [(" Yes", math.log(0.5)), ("YES", math.log(0.1)), ("▁yes", math.log(0.1)),
             ("Ġno", math.log(0.1)), ("No", math.log(0.2))]
        )
        assert probs.p_yes == pytest.approx(0.7 / 1.0, abs=1e-12)

    def test_november_is_not_no(self):
        assert class_probs_from_logprobs([("november", -0.1)]) is None

    def test_shift_invariance(self):
        base = [("Yes", -0.7), ("No", -1.4), ("Maybe", -2.0)]
        p0 = class_probs_from_logprobs(base).p_yes
        shifted = [(t, lp + 500.0) for t, lp in base]
        assert class_probs_from_logprobs(shifted).p_yes == pytest.approx(p0, abs=1e-9)

    def test_extreme_logprobs_do_not_overflow(self):
        probs = class_probs_from_logprobs([("Yes", 1e4), ("No", 1e4 - 2.0)])
        assert 0.0 < probs.p_yes < 1.0

    @given(st.floats(-30, 0), st.floats(-30, 0))
    def test_matches_direct_formula(self, lp_yes, lp_no):
        probs = class_probs_from_logprobs([("Yes", lp_yes), ("No", lp_no)])
        expected = math.exp(lp_yes) / (math.exp(lp_yes) + math.exp(lp_no))
        assert probs.p_yes == pytest.approx(expected, abs=1e-12)


class TestTokenLogprobs:
    def test_sorted_descending(self):
        tl = TokenLogprobs((("a", -2.0), ("b", -1.0), ("c", -3.0)))
        assert tl.entries == (("b", -1.0), ("a", -2.0), ("c", -3.0))

    def test_duplicate_text_rejected(self):
        with pytest.raises(ValueError):
            TokenLogprobs((("a", -1.0), ("a", -2.0)))


class TestParseAnswer:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("Yes.", Decision.YES),
            ("no, the person is not visible", Decision.NO),
            ("The image shows a bridge", Decision.UNKNOWN),
            ("  **Yes**, that is the same person", Decision.YES),
            ("NO", Decision.NO),
            ("november rain", Decision.UNKNOWN),
            ("yesterday it rained", Decision.UNKNOWN),
            ("", Decision.UNKNOWN),
            ("Yes!", Decision.YES),
        ],
    )
    def test_examples(self, text, expected):
        assert parse_answer(text) is expected


class TestClassify:
    def test_constrained_path(self, news_image):
        backend = mock_backend(default={"p_yes": 0.75, "text": "Yes"})
        probs = classify(backend, "is it?", [news_image])
        assert probs.p_yes == pytest.approx(0.75)
        assert probs.source is ProbSource.CONSTRAINED

    def test_text_fallback_no(self, news_image):
        backend = mock_backend(default={"text": "No"}, supports_logprobs=False)
        probs = classify(backend, "is it?", [news_image])
        assert (probs.p_yes, probs.p_no) == (0.0, 1.0)
        assert probs.source is ProbSource.FREEFORM_PARSED

    def test_unparseable_text_gives_none(self, news_image):
        backend = mock_backend(default={"text": "I cannot tell"}, supports_logprobs=False)
        assert classify(backend, "is it?", [news_image]) is None

    def test_classless_logprobs_fall_back_to_text(self, news_image):
        backend = mock_backend(
            default={"logprobs": [["The", -0.1], ["A", -0.9]], "text": "Yes."}
        )
        probs = classify(backend, "is it?", [news_image])
        assert probs.p_yes == 1.0
        assert probs.source is ProbSource.FREEFORM_PARSED

    def test_single_image_backend_rejects_pair(self, news_image):
        backend = mock_backend(default={"p_yes": 0.5}, multi_image=False)
        with pytest.raises(CapabilityError):
            classify(backend, "compare", [news_image, make_image()])


class TestMockBackend:
    def test_digest_beats_rules(self, news_image):
        prompt = "shows Maria Keller"
        digest = request_digest(prompt, [news_image])
        backend = mock_backend(
            fixtures={digest: {"p_yes": 0.9}},
            rules=[{"if_prompt_contains": "Maria Keller", "p_yes": 0.1}],
        )
        reply = backend.query(InferenceRequest(prompt=prompt, images=(news_image,)))
        assert class_probs_from_logprobs(reply.logprobs).p_yes == pytest.approx(0.9)

    def test_first_matching_rule_wins(self, news_image):
        backend = mock_backend(
            rules=[
                {"if_prompt_contains": "Keller", "p_yes": 0.8},
                {"if_prompt_contains": "Maria", "p_yes": 0.2},
            ],
        )
        reply = backend.query(
            InferenceRequest(prompt="Maria Keller?", images=(news_image,))
        )
        assert class_probs_from_logprobs(reply.logprobs).p_yes == pytest.approx(0.8)

    def test_default_catches_everything_else(self, news_image):
        backend = mock_backend(default={"p_yes": 0.5})
        reply = backend.query(InferenceRequest(prompt="anything", images=(news_image,)))
        assert class_probs_from_logprobs(reply.logprobs).p_yes == pytest.approx(0.5)

    def test_no_match_raises(self, news_image):
        backend = mock_backend()
        with pytest.raises(BackendError):
            backend.query(InferenceRequest(prompt="anything", images=(news_image,)))

    def test_p_yes_sugar_extremes(self, news_image):
        yes_only = mock_backend(default={"p_yes": 1.0})
        reply = yes_only.query(InferenceRequest(prompt="q", images=(news_image,)))
        assert reply.logprobs.entries == (("Yes", 0.0),)
        no_only = mock_backend(default={"p_yes": 0.0})
        reply = no_only.query(InferenceRequest(prompt="q", images=(news_image,)))
        assert reply.logprobs.entries == (("No", 0.0),)

    def test_logprobs_suppressed_when_unwanted(self, news_image):
        backend = mock_backend(default={"p_yes": 0.7, "text": "Yes"})
        reply = backend.query(
            InferenceRequest(prompt="q", images=(news_image,), want_logprobs=False)
        )
        assert reply.logprobs is None
        assert reply.text == "Yes"

    def test_thread_determinism(self, news_image):
        backend = mock_backend(
            rules=[{"if_prompt_contains": "q", "p_yes": 0.42, "text": "Yes"}]
        )
        request = InferenceRequest(prompt="q7", images=(news_image,))
        with ThreadPoolExecutor(max_workers=8) as pool:
            replies = list(pool.map(lambda _: backend.query(request), range(64)))
        assert all(r == replies[0] for r in replies)

    def test_digest_sensitive_to_pixels(self):
        a = request_digest("p", [make_image(color=(1, 2, 3))])
        b = request_digest("p", [make_image(color=(1, 2, 4))])
        assert a != b


def openai_reply(text, top=None, status=200):
    body = {"choices": [{"message": {"content": text}}]}
    if top is not None:
        body["choices"][0]["logprobs"] = {
            "content": [
                {
                    "token": top[0][0],
                    "logprob": top[0][1],
                    "top_logprobs": [{"token": t, "logprob": lp} for t, lp in top],
                }
            ]
        }
    return httpx.Response(status, json=body)


class TestHttpBackend:
    def config(self, **kw):
        kw.setdefault("model_id", "remote-model")
        kw.setdefault("endpoint_url", "http://backend.test/v1/chat/completions")
        kw.setdefault("max_retries", 2)
        kw.setdefault("retry_base_s", 0.001)
        return HttpBackendConfig(**kw)

    def test_round_trip_with_logprobs(self, news_image):
        seen = {}

        def handler(request):
            seen["payload"] = json.loads(request.content)
            return openai_reply("Yes", top=[("Yes", -0.3), ("No", -1.5)])

        backend = HttpBackend(self.config(), transport=httpx.MockTransport(handler))
        reply = backend.query(InferenceRequest(prompt="visible?", images=(news_image,)))
        assert reply.text == "Yes"
        assert ("Yes", -0.3) in reply.logprobs.entries

        payload = seen["payload"]
        assert payload["model"] == "remote-model"
        assert payload["temperature"] == 0
        assert payload["logprobs"] is True
        parts = payload["messages"][-1]["content"]
        assert parts[0] == {"type": "text", "text": "visible?"}
        assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")

    def test_api_key_header_from_env(self, news_image, monkeypatch):
        monkeypatch.setenv("ENTIVIS_TEST_KEY", "sk-secret")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return openai_reply("Yes")

        backend = HttpBackend(
            self.config(api_key_env_var="ENTIVIS_TEST_KEY"),
            transport=httpx.MockTransport(handler),
        )
        backend.query(InferenceRequest(prompt="q", images=(news_image,)))
        assert seen["auth"] == "Bearer sk-secret"

    def test_missing_env_var_rejected(self, monkeypatch):
        monkeypatch.delenv("ENTIVIS_NO_SUCH_KEY", raising=False)
        with pytest.raises(InputError):
            HttpBackend(self.config(api_key_env_var="ENTIVIS_NO_SUCH_KEY"))

    def test_http_error_status(self, news_image):
        transport = httpx.MockTransport(lambda request: httpx.Response(500, text="boom"))
        backend = HttpBackend(self.config(), transport=transport)
        with pytest.raises(BackendError):
            backend.query(InferenceRequest(prompt="q", images=(news_image,)))

    def test_transport_failure_retries_then_raises(self, news_image):
        calls = []

        def handler(request):
            calls.append(1)
            raise httpx.ConnectError("refused")

        backend = HttpBackend(self.config(), transport=httpx.MockTransport(handler))
        with pytest.raises(TransportError):
            backend.query(InferenceRequest(prompt="q", images=(news_image,)))
        # 1 initial try + max_retries retries.
        assert len(calls) == 3

    def test_recovers_on_retry(self, news_image):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 3:
                raise httpx.ReadTimeout("slow")
            return openai_reply("Yes")

        backend = HttpBackend(self.config(), transport=httpx.MockTransport(handler))
        reply = backend.query(InferenceRequest(prompt="q", images=(news_image,)))
        assert reply.text == "Yes"
        assert len(calls) == 3

    def test_malformed_body(self, news_image):
        transport = httpx.MockTransport(
            lambda request: httpx.Response(200, json={"unexpected": True})
        )
        backend = HttpBackend(self.config(), transport=transport)
        with pytest.raises(BackendError):
            backend.query(InferenceRequest(prompt="q", images=(news_image,)))

    def test_single_image_limit(self, news_image):
        backend = HttpBackend(
            self.config(multi_image=False),
            transport=httpx.MockTransport(lambda request: openai_reply("Yes")),
        )
        with pytest.raises(CapabilityError):
            backend.query(
                InferenceRequest(prompt="q", images=(news_image, make_image()))
            )


class TestLoadBackend:
    def test_mock_detected_from_rules(self, tmp_path, news_image):
        path = tmp_path / "b.json"
        path.write_text(json.dumps({
            "model_id": "m",
            "rules": [{"if_prompt_contains": "x", "p_yes": 0.6}],
            "default": {"p_yes": 0.5},
        }))
        backend = load_backend(path)
        assert isinstance(backend, MockBackend)
        assert backend.descriptor.model_id == "m"

    def test_http_detected_from_endpoint(self, tmp_path):
        path = tmp_path / "b.json"
        path.write_text(json.dumps({
            "model_id": "m",
            "endpoint_url": "http://backend.test/v1",
        }))
        backend = load_backend(path)
        assert isinstance(backend, HttpBackend)

    def test_missing_model_id(self, tmp_path):
        path = tmp_path / "b.json"
        path.write_text(json.dumps({"default": {"p_yes": 0.5}}))
        with pytest.raises(InputError):
            load_backend(path)

    def test_unknown_type(self, tmp_path):
        path = tmp_path / "b.json"
        path.write_text(json.dumps({"model_id": "m", "type": "carrier-pigeon"}))
        with pytest.raises(InputError):
            load_backend(path)
