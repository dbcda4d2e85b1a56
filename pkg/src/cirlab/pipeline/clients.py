"""Annotation clients: the invocation contract, deterministic mocks for every
role, and a thin HTTP binding for live deployments.

Every mock is a pure function of (template id, inputs) with a documented
rule, so any expected value in a test can be recomputed by hand:

* pair checker: the three answers come from sha256(f"pair:{seed}:{ref}:{tgt}")
  bytes 0..2, answer i is Yes iff byte_i % 4 != 0;
* generator: words are picked from fixed lists by digest bytes of
  sha256(f"finemt:{seed}:{ref}:{tgt}"); a 3-yes evaluation produces three
  clauses, a 2-yes evaluation one conservative clause; byte 6 % 4 == 0
  appends a hallucinated sentence carrying the marker token HALLUC; byte
  7 % 4 == 0 appends verbose elaboration that pushes the text over the
  token limit;
* refiner: drops every sentence containing "halluc" (case-insensitive);
* compressor: drops sentences from the end until the text fits the limit
  (an over-long single sentence is returned as-is).
"""

from __future__ import annotations

import hashlib
import os
from typing import Protocol

from ..core.tokenizer import DEFAULT_TOKENIZER, Tokenizer

ROLES = ("pair_checker", "finemt_generator", "refiner", "compressor")


class ClientError(RuntimeError):
    pass


class ReplyParseError(ClientError):
    def __init__(self, message: str, raw_reply: str):
        super().__init__(f"{message}; raw reply: {raw_reply!r}")
        self.raw_reply = raw_reply


class MllmClient(Protocol):
    role: str
    deterministic: bool

    def invoke(self, template_id: str, inputs: dict) -> str: ...


def _digest(namespace: str, seed: int, ref_id: str, target_id: str) -> bytes:
    return hashlib.sha256(f"{namespace}:{seed}:{ref_id}:{target_id}".encode("utf-8")).digest()


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in text.split(".") if s.strip()]


def join_sentences(sentences: list[str]) -> str:
    return ". ".join(sentences) + ("." if sentences else "")


class MockPairChecker:
    role = "pair_checker"
    deterministic = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def answers_for(self, ref_id: str, target_id: str) -> tuple[bool, bool, bool]:
        d = _digest("pair", self.seed, ref_id, target_id)
        return tuple(d[i] % 4 != 0 for i in range(3))  # type: ignore[return-value]

    def invoke(self, template_id: str, inputs: dict) -> str:
        answers = self.answers_for(inputs["ref_id"], inputs["target_id"])
        return " ".join("Yes." if a else "No." for a in answers)


_NOUNS = ("dog", "cat", "dress", "shirt", "table", "car", "tree", "ball")
_ADJECTIVES = ("red", "blue", "green", "small", "large", "striped", "wooden", "shiny")
_VERBS = ("wearing", "holding", "facing")

_ELABORATION = (
    "the scene keeps a long arrangement of many small bright objects spread across "
    "the whole visible area with extra surface detail on every side and corner"
)


class MockFineMtGenerator:
    role = "finemt_generator"
    deterministic = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def text_for(self, ref_id: str, target_id: str, yes_count: int) -> str:
        d = _digest("finemt", self.seed, ref_id, target_id)
        n1, n2, n3 = (_NOUNS[d[i] % len(_NOUNS)] for i in (0, 1, 2))
        a1, a2, a3 = (_ADJECTIVES[d[i] % len(_ADJECTIVES)] for i in (3, 4, 5))
        v1 = _VERBS[d[8] % len(_VERBS)]
        if yes_count >= 3:
            sentences = [
                f"the {n1} is {a1}",
                f"the {n1} is {v1} a {a2} {n2}",
                f"add a {a3} {n3}",
            ]
        else:
            sentences = [f"the {n1} is {a1}"]
        if d[6] % 4 == 0:
            sentences.append("the background shows a HALLUC artifact")
        if d[7] % 4 == 0:
            sentences.extend([_ELABORATION] * 3)
        return join_sentences(sentences)

    def invoke(self, template_id: str, inputs: dict) -> str:
        return self.text_for(inputs["ref_id"], inputs["target_id"], inputs["yes_count"])


class MockRefiner:
    role = "refiner"
    deterministic = True

    def invoke(self, template_id: str, inputs: dict) -> str:
        kept = [s for s in split_sentences(inputs["text"]) if "halluc" not in s.lower()]
        return join_sentences(kept)


class MockCompressor:
    role = "compressor"
    deterministic = True

    def __init__(self, tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        self.tokenizer = tokenizer

    def invoke(self, template_id: str, inputs: dict) -> str:
        limit = int(inputs["limit"])
        sentences = split_sentences(inputs["text"])
        while len(sentences) > 1 and self.tokenizer.count(join_sentences(sentences)) > limit:
            sentences.pop()
        return join_sentences(sentences)


class HttpMllmClient:
    """Live binding: POSTs {template_id, prompt, inputs} to an endpoint and
    expects {"reply": "..."}.  Credentials come from an environment variable
    so secrets never live in config files."""

    deterministic = False

    def __init__(self, role: str, endpoint: str, credential_env: str | None = None, timeout: float = 60.0):
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        self.role = role
        self.endpoint = endpoint
        self.credential_env = credential_env
        self.timeout = timeout

    def invoke(self, template_id: str, inputs: dict) -> str:
        import httpx

        headers = {}
        if self.credential_env:
            token = os.environ.get(self.credential_env, "")
            if not token:
                raise ClientError(f"credential env var {self.credential_env!r} is empty")
            headers["Authorization"] = f"Bearer {token}"
        payload = {"template_id": template_id, "inputs": inputs, "prompt": inputs.get("prompt", "")}
        try:
            resp = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["reply"]
        except Exception as e:  # noqa: BLE001 - single failure surface for the stage
            raise ClientError(f"live client {self.role} failed: {e}") from e


def mock_clients(seed: int = 0, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> dict[str, MllmClient]:
    return {
        "pair_checker": MockPairChecker(seed=seed),
        "finemt_generator": MockFineMtGenerator(seed=seed),
        "refiner": MockRefiner(),
        "compressor": MockCompressor(tokenizer=tokenizer),
    }
