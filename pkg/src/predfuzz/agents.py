"""Chat-agent abstraction with live, replay, and scripted backends.

Every backend answers ``complete(config, prompt) -> text``. The live
backend speaks the chat-completions wire protocol; the replay backend
serves a recorded transcript keyed by prompt digest; the scripted backend
pops per-role response queues for deterministic tests. A recording
wrapper captures any backend's traffic into a transcript.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import requests


class AgentRole(Enum):
    TEST_CASE_GENERATOR = "tcg"
    PREDICTIVE_EXECUTOR = "pe"


class AgentUnavailable(RuntimeError):
    """Live backend failed (transport or auth) after its retry budget."""


class TranscriptMiss(KeyError):
    """Replay backend has no entry for a prompt digest."""

    def __init__(self, digest: str):
        super().__init__(digest)
        self.digest = digest

    def __str__(self) -> str:
        return f"transcript has no entry for digest {self.digest}"


class ScriptExhausted(RuntimeError):
    """Scripted backend queue for a role ran dry."""


@dataclass
class AgentConfig:
    role: AgentRole
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    max_retries: int = 2
    request_timeout: float = 60.0
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def prompt_digest(role: AgentRole, prompt: str) -> str:
    payload = role.value.encode("utf-8") + b"\x00" + prompt.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


@dataclass
class Transcript:
    """Recorded (digest -> response) map; the full prompt rides along so a
    digest collision between distinct prompts is detectable."""

    entries: dict[str, dict] = field(default_factory=dict)
    models: dict[str, str] = field(default_factory=dict)
    created_at: Optional[str] = None

    def add(self, role: AgentRole, prompt: str, response: str, model_name: str = "") -> str:
        digest = prompt_digest(role, prompt)
        existing = self.entries.get(digest)
        if existing is not None:
            if existing["prompt"] != prompt:
                raise ValueError(f"digest collision for {digest}")
            return digest
        self.entries[digest] = {"role": role.value, "prompt": prompt, "response": response}
        if model_name:
            self.models.setdefault(role.value, model_name)
        return digest

    def lookup(self, role: AgentRole, prompt: str) -> str:
        digest = prompt_digest(role, prompt)
        entry = self.entries.get(digest)
        if entry is None:
            raise TranscriptMiss(digest)
        return entry["response"]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as handle:
            meta = {"kind": "meta", "models": self.models, "created_at": self.created_at}
            handle.write(json.dumps(meta, sort_keys=True) + "\n")
            for digest in sorted(self.entries):
                entry = self.entries[digest]
                record = {
                    "digest": digest,
                    "role": entry["role"],
                    "prompt": entry["prompt"],
                    "response": entry["response"],
                }
                handle.write(json.dumps(record, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        transcript = cls()
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                if record.get("kind") == "meta":
                    transcript.models = record.get("models", {})
                    transcript.created_at = record.get("created_at")
                    continue
                transcript.entries[record["digest"]] = {
                    "role": record["role"],
                    "prompt": record["prompt"],
                    "response": record["response"],
                }
        return transcript


class ChatBackend:
    """Base interface; concrete backends override complete()."""

    def complete(self, config: AgentConfig, prompt: str) -> str:
        raise NotImplementedError


class LiveBackend(ChatBackend):
    """Chat-completions client with bounded exponential backoff."""

    def __init__(self, backoff_base: float = 0.5, backoff_cap: float = 8.0):
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._session = requests.Session()

    def complete(self, config: AgentConfig, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt is empty")
        api_key = os.environ.get(config.api_key_env, "")
        url = config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": config.model_name,
            "temperature": config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        attempts = config.max_retries + 1
        for attempt in range(attempts):
            try:
                response = self._session.post(
                    url, json=body, headers=headers, timeout=config.request_timeout
                )
                if response.status_code == 200:
                    payload = response.json()
                    return payload["choices"][0]["message"]["content"]
                last_error = AgentUnavailable(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
            if attempt < attempts - 1:
                time.sleep(min(self.backoff_base * (2**attempt), self.backoff_cap))
        raise AgentUnavailable(
            f"{config.role.value} backend failed after {attempts} attempts: {last_error}"
        )


class ReplayBackend(ChatBackend):
    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def complete(self, config: AgentConfig, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt is empty")
        return self.transcript.lookup(config.role, prompt)


class ScriptedBackend(ChatBackend):
    """Pops one queued response per call, per role. Thread safe."""

    def __init__(self, queues: dict[AgentRole, list[str]]):
        self._queues = {role: list(items) for role, items in queues.items()}
        self._lock = threading.Lock()
        self.calls: dict[AgentRole, int] = {role: 0 for role in AgentRole}

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        """Script file: JSON object mapping role value ("tcg"/"pe") to a
        list of response strings."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        queues = {}
        for role in AgentRole:
            queues[role] = list(data.get(role.value, []))
        return cls(queues)

    def complete(self, config: AgentConfig, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt is empty")
        with self._lock:
            queue = self._queues.get(config.role)
            if not queue:
                raise ScriptExhausted(f"no scripted responses left for role '{config.role.value}'")
            self.calls[config.role] += 1
            return queue.pop(0)

    def remaining(self, role: AgentRole) -> int:
        with self._lock:
            return len(self._queues.get(role, []))


class RecordingBackend(ChatBackend):
    """Wraps another backend and captures every exchange into a transcript."""

    def __init__(self, inner: ChatBackend, transcript: Optional[Transcript] = None):
        self.inner = inner
        self.transcript = transcript if transcript is not None else Transcript()
        self.transcript.created_at = self.transcript.created_at or time.strftime(
            "%Y-%m-%dT%H:%M:%S"
        )
        self._lock = threading.Lock()

    def complete(self, config: AgentConfig, prompt: str) -> str:
        digest = prompt_digest(config.role, prompt)
        with self._lock:
            entry = self.transcript.entries.get(digest)
            if entry is not None:
                return entry["response"]
        response = self.inner.complete(config, prompt)
        with self._lock:
            self.transcript.add(config.role, prompt, response, config.model_name)
        return response


@dataclass
class AgentSuite:
    """One backend shared by both roles, plus per-role configuration."""

    backend: ChatBackend
    tcg: AgentConfig = field(
        default_factory=lambda: AgentConfig(AgentRole.TEST_CASE_GENERATOR, model_name="gpt-3.5-turbo")
    )
    pe: AgentConfig = field(
        default_factory=lambda: AgentConfig(AgentRole.PREDICTIVE_EXECUTOR, model_name="gpt-4o")
    )

    def config_for(self, role: AgentRole) -> AgentConfig:
        return self.tcg if role is AgentRole.TEST_CASE_GENERATOR else self.pe

    def complete(self, role: AgentRole, prompt: str) -> str:
        return self.backend.complete(self.config_for(role), prompt)


def record_transcript(config: AgentConfig, prompts: list[str], backend: Optional[ChatBackend] = None) -> Transcript:
    """Issue the prompts against a live backend, deduplicating by digest."""
    recorder = RecordingBackend(backend or LiveBackend())
    for prompt in prompts:
        recorder.complete(config, prompt)
    return recorder.transcript
