"""Chat-completions HTTP client: request shape, auth, failure handling."""

import json

import httpx
import pytest

from ragtune.clients import ChatClientError, ChatCompletionsClient
from ragtune.querygen import DecodingParams


def scripted_transport(handler):
    return httpx.MockTransport(handler)


def ok_response(text="generated text"):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


class TestRequestShape:
    def test_posts_messages_with_decoding_params(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            return ok_response("the reply")

        client = ChatCompletionsClient(
            base_url="http://llm.test/v1", model="m-1", transport=scripted_transport(handler)
        )
        reply = client.complete("system says", "user asks", DecodingParams(temperature=0.2, max_tokens=64))
        assert reply == "the reply"
        assert seen["url"] == "http://llm.test/v1/chat/completions"
        assert seen["body"]["model"] == "m-1"
        assert seen["body"]["temperature"] == 0.2
        assert seen["body"]["max_tokens"] == 64
        assert seen["body"]["messages"] == [
            {"role": "system", "content": "system says"},
            {"role": "user", "content": "user asks"},
        ]

    def test_empty_system_prompt_sends_user_only(self):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            return ok_response()

        client = ChatCompletionsClient("http://llm.test", "m", transport=scripted_transport(handler))
        client.complete("", "just the question", DecodingParams())
        assert [m["role"] for m in seen["body"]["messages"]] == ["user"]


class TestAuth:
    def test_key_from_named_env_var(self, monkeypatch):
        monkeypatch.setenv("MY_CUSTOM_KEY", "sk-test-123")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return ok_response()

        client = ChatCompletionsClient(
            "http://llm.test", "m", api_key_env="MY_CUSTOM_KEY",
            transport=scripted_transport(handler),
        )
        client.complete("s", "u", DecodingParams())
        assert seen["auth"] == "Bearer sk-test-123"

    def test_missing_key_sends_no_auth_header(self, monkeypatch):
        monkeypatch.delenv("RAGTUNE_API_KEY", raising=False)
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return ok_response()

        client = ChatCompletionsClient("http://llm.test", "m", transport=scripted_transport(handler))
        client.complete("s", "u", DecodingParams())
        assert seen["auth"] is None


class TestFailures:
    def test_http_error_wrapped(self):
        def handler(request):
            return httpx.Response(503, json={"error": "overloaded"})

        client = ChatCompletionsClient("http://llm.test", "m", transport=scripted_transport(handler))
        with pytest.raises(ChatClientError, match="request failed"):
            client.complete("s", "u", DecodingParams())

    @pytest.mark.parametrize(
        "payload",
        [
            {"choices": []},
            {"choices": [{"message": {}}]},
            {"unexpected": True},
            {"choices": [{"message": {"content": 42}}]},
        ],
    )
    def test_malformed_response_wrapped(self, payload):
        def handler(request):
            return httpx.Response(200, json=payload)

        client = ChatCompletionsClient("http://llm.test", "m", transport=scripted_transport(handler))
        with pytest.raises(ChatClientError):
            client.complete("s", "u", DecodingParams())

    def test_network_error_wrapped(self):
        def handler(request):
            raise httpx.ConnectError("connection refused")

        client = ChatCompletionsClient("http://llm.test", "m", transport=scripted_transport(handler))
        with pytest.raises(ChatClientError):
            client.complete("s", "u", DecodingParams())
