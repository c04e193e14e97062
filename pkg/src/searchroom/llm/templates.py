"""Prompt templates for the five model tasks, loaded from text assets.

Asset format (one file per task and locale, ``assets/<task>_<locale>.txt``):
line-oriented sections introduced by a header line that is exactly
``[instruction]``, ``[demonstration.input]``, ``[demonstration.output]``
or ``[output_schema]``. Input/output headers must alternate and pair up;
everything between headers belongs to the preceding section verbatim
(leading/trailing blank lines trimmed). The files are plain editable text
so demonstrations can be revised without touching code.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from ..model import DialogueContext, Locale


class Task(str, Enum):
    REWRITE = "rewrite"
    CLARIFY = "clarify"
    EXTRACT = "extract"
    RAG = "rag"
    DIRECT_ANSWER = "direct_answer"


DEFAULT_SHOTS = 5

# Placeholder order used when rendering the final prompt input block.
TASK_VARIABLES: dict[Task, tuple[str, ...]] = {
    Task.REWRITE: ("context", "query"),
    Task.CLARIFY: ("context", "query"),
    Task.EXTRACT: ("query", "page_text"),
    Task.RAG: ("query", "references"),
    Task.DIRECT_ANSWER: ("query",),
}

_SECTIONS = ("instruction", "demonstration.input", "demonstration.output", "output_schema")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction, few-shot demonstrations, and output schema for one task."""

    task: Task
    locale: Locale
    instruction: str
    demonstrations: tuple[tuple[str, str], ...]
    output_schema: str

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise ValueError("template instruction must be non-empty")
        if not self.output_schema.strip():
            raise ValueError("template output schema must be non-empty")


class TemplateError(Exception):
    """An asset file does not follow the documented section format."""


def parse_template_text(task: Task, locale: Locale, text: str) -> PromptTemplate:
    sections: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        name = line.strip()[1:-1] if line.startswith("[") and line.rstrip().endswith("]") else None
        if name in _SECTIONS:
            current = []
            sections.append((name, current))
        elif current is not None:
            current.append(line)
        elif line.strip():
            raise TemplateError(f"content before first section header: {line!r}")

    instruction = ""
    output_schema = ""
    demos: list[tuple[str, str]] = []
    pending_input: str | None = None
    for name, lines in sections:
        body = "\n".join(lines).strip("\n")
        if name == "instruction":
            instruction = body
        elif name == "output_schema":
            output_schema = body
        elif name == "demonstration.input":
            if pending_input is not None:
                raise TemplateError("demonstration.input without a matching output")
            pending_input = body
        elif name == "demonstration.output":
            if pending_input is None:
                raise TemplateError("demonstration.output without a preceding input")
            demos.append((pending_input, body))
            pending_input = None
    if pending_input is not None:
        raise TemplateError("trailing demonstration.input without output")

    return PromptTemplate(
        task=task,
        locale=locale,
        instruction=instruction,
        demonstrations=tuple(demos),
        output_schema=output_schema,
    )


@lru_cache(maxsize=None)
def load_template(task: Task, locale: Locale) -> PromptTemplate:
    """Load the shipped template for a task and locale (cached)."""
    name = f"{task.value}_{locale.value}.txt"
    text = resources.files(__package__).joinpath("assets").joinpath(name).read_text("utf-8")
    return parse_template_text(task, locale, text)


def render_context(context: DialogueContext) -> str:
    """Canonical one-line-per-utterance rendering used inside prompts."""
    lines = []
    for utterance in context.utterances:
        flat = " ".join(utterance.text.split())
        lines.append(f"{utterance.author_id}: {flat}")
    return "\n".join(lines)


def render_input(task: Task, variables: dict[str, str]) -> str:
    """Render the prompt input block in the task's fixed placeholder order."""
    blocks = []
    for name in TASK_VARIABLES[task]:
        value = variables.get(name, "")
        if "\n" in value:
            blocks.append(f"{name}:\n{value}")
        else:
            blocks.append(f"{name}: {value}")
    return "\n".join(blocks)


def render_prompt(
    template: PromptTemplate, variables: dict[str, str], shots: int = DEFAULT_SHOTS
) -> str:
    """Assemble the full prompt: instruction, schema, demonstrations, input."""
    parts = [template.instruction, "", "Output format:", template.output_schema]
    for demo_input, demo_output in template.demonstrations[: max(shots, 0)]:
        parts += ["", "input:", demo_input, "output:", demo_output]
    parts += ["", "input:", render_input(template.task, variables), "output:"]
    return "\n".join(parts)
