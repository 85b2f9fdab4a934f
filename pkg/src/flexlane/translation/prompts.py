"""Prompt templates and deterministic prompt assembly.

Two template families: the example-laden relevance template (a handful of
worked Q&A pairs teaching the yes/no judgment) and a bare baseline with no
examples, kept for comparison runs. Prompt assembly is pure concatenation
in a fixed order so the offline provider can parse its own input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..autoir import serialize_autoir
from .knowledge import KnowledgeEntry

RELEVANCE_QUESTION_PREFIX = "Q:"
GENERATION_INSTRUCTION_PREFIX = "Instruction:"
NO_REFERENCE_MARKER = "(no reference found)"


@dataclass(frozen=True)
class QAExample:
    question: str
    answer: str


@dataclass(frozen=True)
class PromptTemplate:
    task_description: str
    qa_examples: tuple[QAExample, ...] = ()
    output_constraints: str = ""


COT_RELEVANCE_TEMPLATE = PromptTemplate(
    task_description=(
        "You are the voice interface of a driving stack. Decide whether the "
        "passenger's sentence is an instruction about how the vehicle should "
        "drive. Think about whether acting on it would change driving behavior."
    ),
    qa_examples=(
        QAExample("Q: Please keep to the leftmost lane for a while.",
                  "A: YES - it asks for a lane preference, which changes planning."),
        QAExample("Q: What a nice song on the radio.",
                  "A: NO - it is small talk about music, not about driving."),
        QAExample("Q: The light is broken, just drive through.",
                  "A: YES - it asks the vehicle to disregard a traffic light."),
        QAExample("Q: Book a table for two tonight.",
                  "A: NO - a restaurant errand, nothing about vehicle behavior."),
    ),
    output_constraints="Answer with YES or NO as the first word, then a short reason.",
)

SIMPLE_RELEVANCE_TEMPLATE = PromptTemplate(
    task_description=(
        "Decide whether the sentence is an instruction about how the vehicle "
        "should drive."
    ),
    qa_examples=(),
    output_constraints="Answer with YES or NO as the first word.",
)

GENERATION_TEMPLATE = PromptTemplate(
    task_description=(
        "Translate the passenger's driving instruction into one AutoIR "
        "document. Reference examples pair a scenario with its correct "
        "AutoIR document; pick the closest scenario and adapt its document."
    ),
    output_constraints=(
        "Respond with exactly one AutoIR document in the canonical five-line "
        "form (moduleSelect, nodeSelect, paramSelect, configAction, Timer) "
        "and nothing else."
    ),
)


def build_relevance_prompt(template: PromptTemplate, utterance: str) -> str:
    parts = [template.task_description, ""]
    for example in template.qa_examples:
        parts.append(example.question)
        parts.append(example.answer)
    if template.qa_examples:
        parts.append("")
    parts.append(template.output_constraints)
    parts.append("")
    parts.append(f"{RELEVANCE_QUESTION_PREFIX} {utterance}")
    parts.append("A:")
    return "\n".join(parts)


def build_generation_prompt(template: PromptTemplate,
                            retrieved: list[tuple[KnowledgeEntry, float]],
                            instruction: str,
                            feedback: str | None = None) -> str:
    parts = [template.task_description, ""]
    if retrieved:
        for rank, (entry, _score) in enumerate(retrieved, start=1):
            parts.append(f"[{rank}] scenario: {entry.scenario_text}")
            if entry.program is not None:
                parts.append(serialize_autoir(entry.program))
            parts.append("")
    else:
        parts.append(NO_REFERENCE_MARKER)
        parts.append("")
    parts.append(template.output_constraints)
    if feedback:
        parts.append(f"Previous attempt was invalid: {feedback}")
    parts.append("")
    parts.append(f"{GENERATION_INSTRUCTION_PREFIX} {instruction}")
    return "\n".join(parts)
