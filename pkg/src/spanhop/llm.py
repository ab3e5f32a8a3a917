"""Chat and embedding endpoint clients.

The toolkit never bundles a model: callers talk to a JSON-over-HTTP
endpoint or replay content-addressed fixtures recorded earlier. Requests
are keyed by a hash of (system, user, decoding params) so replay files
are stable across runs.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .errors import ReplayMissError, TransportError

REPLAY_SCHEMA = "replay/v1"


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    json_mode: bool = True
    max_tokens: int | None = None


def request_key(system: str, user: str, params: DecodingParams) -> str:
    payload = json.dumps(
        {
            "system": system,
            "user": user,
            "temperature": params.temperature,
            "json_mode": params.json_mode,
            "max_tokens": params.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ChatClient(Protocol):
    name: str

    def send(self, system: str, user: str, params: DecodingParams = DecodingParams()) -> str: ...


class HttpChatClient:
    """OpenAI-style chat-completions endpoint; auth token read from the environment."""

    def __init__(
        self,
        url: str,
        model: str,
        auth_env: str = "SPANHOP_LLM_TOKEN",
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.name = f"http:{model}"
        self._url = url
        self._model = model
        self._auth_env = auth_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def send(self, system: str, user: str, params: DecodingParams = DecodingParams()) -> str:
        body: dict = {
            "model": self._model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
        }
        if params.json_mode:
            body["response_format"] = {"type": "json_object"}
        if params.max_tokens is not None:
            body["max_tokens"] = params.max_tokens
        headers = {}
        token = os.environ.get(self._auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(self._url, json=body, headers=headers)
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise TransportError(f"chat endpoint failure: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"chat endpoint returned unexpected body: {exc}") from exc


class ReplayChatClient:
    """Serves recorded responses from a fixture file; no network involved."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        data = json.loads(self._path.read_text(encoding="utf-8"))
        if data.get("schema") != REPLAY_SCHEMA:
            raise ReplayMissError(f"{path}: not a {REPLAY_SCHEMA} fixture")
        self._entries: dict[str, dict] = data["entries"]
        self.name = f"replay:{self._path.name}"

    def send(self, system: str, user: str, params: DecodingParams = DecodingParams()) -> str:
        key = request_key(system, user, params)
        entry = self._entries.get(key)
        if entry is None:
            raise ReplayMissError(f"no recorded response for request {key[:12]}…")
        return entry["response"]


class RecordingChatClient:
    """Wraps another client and persists every exchange for later replay."""

    def __init__(self, inner: ChatClient, path: str | Path):
        self._inner = inner
        self._path = Path(path)
        self._entries: dict[str, dict] = {}
        if self._path.exists():
            data = json.loads(self._path.read_text(encoding="utf-8"))
            self._entries = data.get("entries", {})
        self.name = f"recording({inner.name})"

    def send(self, system: str, user: str, params: DecodingParams = DecodingParams()) -> str:
        response = self._inner.send(system, user, params)
        key = request_key(system, user, params)
        self._entries[key] = {"response": response, "user_preview": user[:120]}
        return response

    def save(self) -> None:
        payload = {"schema": REPLAY_SCHEMA, "entries": dict(sorted(self._entries.items()))}
        self._path.write_text(
            json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
            encoding="utf-8",
        )


class EmbeddingClient(Protocol):
    name: str

    def embed(self, texts: list[str]) -> list[list[float]]: ...


class HttpEmbeddingClient:
    def __init__(
        self,
        url: str,
        model: str,
        auth_env: str = "SPANHOP_EMBED_TOKEN",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.name = f"http:{model}"
        self._url = url
        self._model = model
        self._auth_env = auth_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, texts: list[str]) -> list[list[float]]:
        headers = {}
        token = os.environ.get(self._auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(
                self._url, json={"model": self._model, "input": texts}, headers=headers
            )
            response.raise_for_status()
            data = response.json()["data"]
            return [row["embedding"] for row in data]
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding endpoint failure: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"embedding endpoint returned unexpected body: {exc}") from exc


class ReplayEmbeddingClient:
    """text -> vector fixture, keyed by the sha256 of the text."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        data = json.loads(self._path.read_text(encoding="utf-8"))
        self._entries: dict[str, list[float]] = data["entries"]
        self.name = f"replay:{self._path.name}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            key = hashlib.sha256(text.encode("utf-8")).hexdigest()
            if key not in self._entries:
                raise ReplayMissError(f"no recorded embedding for text {key[:12]}…")
            out.append(self._entries[key])
        return out
