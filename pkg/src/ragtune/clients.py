"""HTTP chat-completions client shared by query generation and RAG answering.

Request shape (POST {base_url}/chat/completions):

    {"model": ..., "messages": [{"role": "system", "content": ...},
                                {"role": "user", "content": ...}],
     "temperature": ..., "max_tokens": ...}

The expected response carries the text at choices[0].message.content.
Credentials come only from the environment variable named by
api_key_env; nothing here reads key material from files or flags.
"""

from __future__ import annotations

import os

import httpx

from .querygen import DecodingParams

DEFAULT_API_KEY_ENV = "RAGTUNE_API_KEY"


class ChatClientError(Exception):
    """The endpoint failed or returned an unusable response."""


class ChatCompletionsClient:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        headers = {}
        api_key = os.environ.get(api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout,
            transport=transport,
        )

    def complete(self, system_prompt: str, user_prompt: str, decoding: DecodingParams) -> str:
        messages = []
        if system_prompt:
            messages.append({"role": "system", "content": system_prompt})
        messages.append({"role": "user", "content": user_prompt})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": decoding.temperature,
            "max_tokens": decoding.max_tokens,
        }
        try:
            response = self._client.post("/chat/completions", json=payload)
            response.raise_for_status()
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise ChatClientError(f"chat completion request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ChatClientError(f"unexpected chat completion response shape: {exc}") from exc
        if not isinstance(content, str):
            raise ChatClientError("chat completion content is not a string")
        return content

    def close(self) -> None:
        self._client.close()
