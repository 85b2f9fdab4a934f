"""Completion providers: a deterministic offline mock and a generic HTTP client.

The mock keeps the whole pipeline reproducible. Its relevance judgment is a
lexicon check against the final question line of the prompt; its generation
echoes the first reference AutoIR document embedded in the prompt. When the
prompt carries no reference document (a raw-manual knowledge base), it falls
back to scraping identifier-shaped tokens out of the reference text, which
is deliberately only as good as such scraping can be.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Protocol

from ..autoir import AutoIRProgram, AutoIRError, parse_autoir, serialize_autoir
from .prompts import GENERATION_INSTRUCTION_PREFIX, RELEVANCE_QUESTION_PREFIX

MODE_RELEVANCE = "relevance"
MODE_GENERATION = "generation"

PROVIDER_URL_ENV = "FLEX_PROVIDER_URL"
PROVIDER_KEY_ENV = "FLEX_PROVIDER_KEY"

DEFAULT_PROVIDER_TIMEOUT_S = 30.0


class ProviderError(Exception):
    """Transport failure, timeout, or a malformed provider reply."""


@dataclass(frozen=True)
class ProviderRequest:
    prompt: str
    mode: str


@dataclass(frozen=True)
class ProviderResponse:
    text: str


class Provider(Protocol):
    def complete(self, request: ProviderRequest) -> ProviderResponse: ...


@lru_cache(maxsize=1)
def driving_lexicon() -> frozenset[str]:
    text = resources.files("flexlane.data").joinpath("lexicon.json").read_text(encoding="utf-8")
    return frozenset(json.loads(text)["words"])


_WORD_RE = re.compile(r"[a-z0-9']+")
_AUTOIR_BLOCK_RE = re.compile(
    r"^moduleSelect:.*(?:\n(?:nodeSelect|paramSelect|configAction|Timer):.*){3,4}",
    re.MULTILINE,
)
_NODE_TOKEN_RE = re.compile(r"\b[a-z][a-z0-9_]*(?:_node|_planner)\b")
_PARAM_TOKEN_RE = re.compile(r"\b(?:use_[a-z0-9_]+|[a-z0-9_]+_(?:margin|duration|prefer|flag))\b")
_VALUE_TOKEN_RE = re.compile(r"\b(?:TRUE|FALSE|[A-Z]{2,}|\d+(?:\.\d+)?)\b")

_KNOWN_MODULES = ("perception", "planning", "control", "localization", "sensing")


def _lemmas(word: str) -> list[str]:
    variants = [word]
    for suffix in ("ing", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            variants.append(word[: -len(suffix)])
    return variants


def shares_driving_lemma(text: str, lexicon: frozenset[str] | None = None) -> bool:
    lexicon = lexicon if lexicon is not None else driving_lexicon()
    for word in _WORD_RE.findall(text.lower()):
        if any(variant in lexicon for variant in _lemmas(word)):
            return True
    return False


class MockProvider:
    """Deterministic offline stand-in for a remote language model."""

    def __init__(self, lexicon: frozenset[str] | None = None):
        self._lexicon = lexicon if lexicon is not None else driving_lexicon()

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        if request.mode == MODE_RELEVANCE:
            return self._relevance(request.prompt)
        if request.mode == MODE_GENERATION:
            return self._generation(request.prompt)
        raise ProviderError(f"unknown mode {request.mode!r}")

    def _relevance(self, prompt: str) -> ProviderResponse:
        utterance = _last_prefixed_line(prompt, RELEVANCE_QUESTION_PREFIX)
        if shares_driving_lemma(utterance, self._lexicon):
            return ProviderResponse(text="YES - mentions a driving concern.")
        return ProviderResponse(text="NO - nothing about driving here.")

    def _generation(self, prompt: str) -> ProviderResponse:
        match = _AUTOIR_BLOCK_RE.search(prompt)
        if match is not None:
            try:
                program = parse_autoir(match.group(0))
                return ProviderResponse(text=serialize_autoir(program))
            except AutoIRError:
                pass
        return ProviderResponse(text=serialize_autoir(self._scrape_program(prompt)))

    def _scrape_program(self, prompt: str) -> AutoIRProgram:
        """Best effort when no reference document exists: take the first
        parameter-shaped token in the reference text and pair it with the
        nearest preceding node and module mentions (documents usually name
        a node before describing its parameters). Value is the first
        literal-looking token after the parameter."""
        reference = prompt.split(GENERATION_INSTRUCTION_PREFIX, 1)[0]
        param_match = _PARAM_TOKEN_RE.search(reference)
        if param_match is None:
            return AutoIRProgram("planning", "unknown_node", "unknown_param", True)
        param = param_match.group(0)
        before = reference[: param_match.start()]
        node_mentions = _NODE_TOKEN_RE.findall(before) or _NODE_TOKEN_RE.findall(reference)
        node = node_mentions[-1] if node_mentions else "unknown_node"
        module_positions = [(before.rfind(m), m) for m in _KNOWN_MODULES if m in before]
        module = max(module_positions)[1] if module_positions else "planning"
        value_match = _VALUE_TOKEN_RE.search(reference[param_match.end():])
        raw_value = value_match.group(0) if value_match else "TRUE"
        value: bool | float | str
        if raw_value in ("TRUE", "FALSE"):
            value = raw_value == "TRUE"
        elif raw_value.isupper():
            value = raw_value
        else:
            value = float(raw_value)
        return AutoIRProgram(module, node, param, value)


class HttpProvider:
    """POSTs {prompt, mode} as JSON and expects {"text": ...} back.

    Endpoint and credentials come from FLEX_PROVIDER_URL / FLEX_PROVIDER_KEY
    unless given explicitly.
    """

    def __init__(self, url: str | None = None, api_key: str | None = None,
                 timeout: float = DEFAULT_PROVIDER_TIMEOUT_S):
        self.url = url or os.environ.get(PROVIDER_URL_ENV, "")
        self.api_key = api_key or os.environ.get(PROVIDER_KEY_ENV, "")
        self.timeout = timeout
        if not self.url:
            raise ProviderError(f"no provider endpoint; set {PROVIDER_URL_ENV}")

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        body = json.dumps({"prompt": request.prompt, "mode": request.mode}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, method="POST",
            headers={"Content-Type": "application/json",
                     "Authorization": f"Bearer {self.api_key}"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise ProviderError(f"provider call failed: {exc}") from exc
        text = doc.get("text")
        if not isinstance(text, str) or not text:
            raise ProviderError("provider reply carries no text")
        return ProviderResponse(text=text)


def mock_complete(request: ProviderRequest) -> ProviderResponse:
    """Module-level convenience over a shared MockProvider."""
    return _default_mock().complete(request)


@lru_cache(maxsize=1)
def _default_mock() -> MockProvider:
    return MockProvider()


def _last_prefixed_line(prompt: str, prefix: str) -> str:
    for line in reversed(prompt.splitlines()):
        if line.startswith(prefix):
            return line[len(prefix):].strip()
    return ""
