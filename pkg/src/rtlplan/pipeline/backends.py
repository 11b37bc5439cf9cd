"""Policy and judge backends: a scripted offline mock and a chat-completion HTTP client."""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Protocol, runtime_checkable

from .plan import SECTIONS, TestPlan, render_judge_prompt

DEFAULT_API_KEY_ENV = "RTLPLAN_API_KEY"


class BackendError(RuntimeError):
    """A backend could not produce a response (after any retries)."""


@runtime_checkable
class PolicyBackend(Protocol):
    def generate_plan(self, prompt: str) -> str: ...

    def compile_plan(self, prompt: str) -> str: ...


@runtime_checkable
class JudgeBackend(Protocol):
    def judge(self, plan: TestPlan) -> bool: ...


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class ScriptedPolicy:
    """Replays canned responses looked up by the sha256 of the prompt.

    Stage-1 and stage-2 prompts share one table; their texts never collide.
    """

    responses: Dict[str, str] = field(default_factory=dict)
    default: Optional[str] = None

    def add(self, prompt: str, response: str) -> None:
        self.responses[prompt_fingerprint(prompt)] = response

    def _lookup(self, prompt: str) -> str:
        fp = prompt_fingerprint(prompt)
        if fp in self.responses:
            return self.responses[fp]
        if self.default is not None:
            return self.default
        raise BackendError(f"no scripted response for prompt {fp[:12]}")

    def generate_plan(self, prompt: str) -> str:
        return self._lookup(prompt)

    def compile_plan(self, prompt: str) -> str:
        return self._lookup(prompt)

    def to_dict(self) -> dict:
        return {"responses": dict(sorted(self.responses.items())), "default": self.default}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScriptedPolicy":
        return cls(dict(d.get("responses", {})), d.get("default"))


@dataclass(frozen=True)
class MockJudge:
    """Accepts a plan whose every section has at least ``min_words`` words."""

    min_words: int = 3

    def judge(self, plan: TestPlan) -> bool:
        return all(len(getattr(plan, s).split()) >= self.min_words for s in SECTIONS)


@dataclass(frozen=True)
class ConstantJudge:
    verdict: bool = True

    def judge(self, plan: TestPlan) -> bool:
        return self.verdict


@dataclass
class ChatClient:
    """Minimal chat-completion client with bounded retries.

    Transport failures (connection errors, timeouts, HTTP 429/5xx) are retried
    ``retries`` times with exponential backoff; anything else fails at once.
    """

    endpoint: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    retries: int = 2
    backoff: float = 0.5
    timeout: float = 60.0
    temperature: float = 0.0
    urlopen: Callable = field(default=urllib.request.urlopen, repr=False)
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def _request(self, prompt: str) -> urllib.request.Request:
        body = json.dumps({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")

    def complete(self, prompt: str) -> str:
        last: Exception = BackendError("no attempt made")
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self.urlopen(self._request(prompt), timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as exc:
                last = exc
                if exc.code == 429 or exc.code >= 500:
                    continue
                raise BackendError(f"HTTP {exc.code} from {self.endpoint}") from exc
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last = exc
                continue
            except json.JSONDecodeError as exc:
                raise BackendError(f"non-JSON response from {self.endpoint}") from exc
            try:
                return payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendError("response has no choices[0].message.content") from exc
        raise BackendError(f"{self.endpoint} unreachable after {self.retries + 1} attempts: {last}")


@dataclass
class HttpPolicy:
    client: ChatClient

    def generate_plan(self, prompt: str) -> str:
        return self.client.complete(prompt)

    def compile_plan(self, prompt: str) -> str:
        return self.client.complete(prompt)


@dataclass
class HttpJudge:
    """Asks a model for a YES/NO quality verdict on the rendered plan."""

    client: ChatClient

    def judge(self, plan: TestPlan) -> bool:
        answer = self.client.complete(render_judge_prompt(plan))
        return answer.strip().upper().startswith("YES")


__all__ = [
    "BackendError", "ChatClient", "ConstantJudge", "DEFAULT_API_KEY_ENV", "HttpJudge", "HttpPolicy",
    "JudgeBackend", "MockJudge", "PolicyBackend", "ScriptedPolicy", "prompt_fingerprint",
]
