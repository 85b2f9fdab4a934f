"""End-to-end utterance handling: relevance gate, retrieval, generation.

The pipeline is immutable after construction and safe to share. With the
mock provider the whole path is deterministic: same utterance, knowledge
base, and templates always produce the same verdict and program.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..autoir import AutoIRError, AutoIRProgram, parse_autoir, validate_program
from ..registry import ParamRegistry
from .knowledge import KBIndex, KnowledgeEntry
from .prompts import (
    COT_RELEVANCE_TEMPLATE,
    GENERATION_TEMPLATE,
    PromptTemplate,
    build_generation_prompt,
    build_relevance_prompt,
)
from .providers import (
    MODE_GENERATION,
    MODE_RELEVANCE,
    Provider,
    ProviderRequest,
)

RETRIEVAL_K = 3

_VERDICT_RE = re.compile(r"^\s*(yes|no)\b", re.IGNORECASE)


class UnparseableResponseError(Exception):
    """The provider reply carries no leading YES/NO token."""


class TranslationFailedError(Exception):
    """Both generation attempts produced an invalid program."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class Utterance:
    text: str
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("utterance text must be non-empty")


@dataclass(frozen=True)
class RelevanceVerdict:
    relevant: bool
    rationale: str = ""


def classify_relevance(utterance: str, template: PromptTemplate,
                       provider: Provider) -> RelevanceVerdict:
    prompt = build_relevance_prompt(template, utterance)
    response = provider.complete(ProviderRequest(prompt=prompt, mode=MODE_RELEVANCE))
    match = _VERDICT_RE.match(response.text)
    if match is None:
        raise UnparseableResponseError(f"no YES/NO token in reply: {response.text!r}")
    return RelevanceVerdict(relevant=match.group(1).lower() == "yes",
                            rationale=response.text.strip())


def generate_autoir(instruction: str, index: KBIndex, template: PromptTemplate,
                    provider: Provider, registry: ParamRegistry,
                    k: int = RETRIEVAL_K,
                    retrieved: list[tuple[KnowledgeEntry, float]] | None = None,
                    ) -> AutoIRProgram:
    """Retrieve, prompt, parse, validate; one retry with the failure message
    appended to the prompt. Raises TranslationFailedError when both attempts
    yield an invalid program."""
    if retrieved is None:
        retrieved = index.retrieve(instruction, k) if len(index) else []
    failures: list[str] = []
    feedback: str | None = None
    for _attempt in range(2):
        prompt = build_generation_prompt(template, retrieved, instruction, feedback=feedback)
        response = provider.complete(ProviderRequest(prompt=prompt, mode=MODE_GENERATION))
        try:
            program = parse_autoir(response.text)
        except AutoIRError as exc:
            feedback = f"parse error: {exc}"
            failures.append(feedback)
            continue
        report = validate_program(program, registry)
        if report.ok:
            return program
        feedback = "; ".join(f"{issue.code}: {issue.message}" for issue in report.issues)
        failures.append(feedback)
    raise TranslationFailedError(
        f"no valid program for {instruction!r} after retry", attempts=failures,
    )


class TranslationPipeline:
    """Bundles templates, knowledge index, provider, and registry."""

    def __init__(self, index: KBIndex, provider: Provider, registry: ParamRegistry,
                 relevance_template: PromptTemplate = COT_RELEVANCE_TEMPLATE,
                 generation_template: PromptTemplate = GENERATION_TEMPLATE,
                 k: int = RETRIEVAL_K):
        self.index = index
        self.provider = provider
        self.registry = registry
        self.relevance_template = relevance_template
        self.generation_template = generation_template
        self.k = k

    def classify(self, utterance: str) -> RelevanceVerdict:
        return classify_relevance(utterance, self.relevance_template, self.provider)

    def retrieve(self, instruction: str) -> list[tuple[KnowledgeEntry, float]]:
        return self.index.retrieve(instruction, self.k) if len(self.index) else []

    def generate(self, instruction: str,
                 retrieved: list[tuple[KnowledgeEntry, float]] | None = None) -> AutoIRProgram:
        return generate_autoir(
            instruction, self.index, self.generation_template, self.provider,
            self.registry, k=self.k, retrieved=retrieved,
        )
