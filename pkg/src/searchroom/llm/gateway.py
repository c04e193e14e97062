"""The single choke-point for model calls: query planning, reference
extraction, and answer composition.

Providers must emit a fenced, line-oriented ``key: value`` block (keys fixed
per task, see ``TASK_KEYS``). A response violating the schema triggers
exactly one automatic re-prompt; if that also fails, each operation degrades
as documented instead of crashing a live chat.
"""

from __future__ import annotations

import logging
import re

from ..model import DialogueContext, Locale, QueryPlan, ReferenceCard
from .providers import (
    CompletionRequest,
    LlmProvider,
    MalformedOutput,
    ProviderError,
)
from .templates import DEFAULT_SHOTS, Task, load_template, render_context

log = logging.getLogger("searchroom.llm")

# Keys a completion may carry per task; the first tuple element set is required.
TASK_KEYS: dict[Task, tuple[str, ...]] = {
    Task.REWRITE: ("reasoning", "rewritten"),
    Task.CLARIFY: ("reasoning", "needs_clarification", "question"),
    Task.EXTRACT: ("reference",),
    Task.RAG: ("answer",),
    Task.DIRECT_ANSWER: ("answer",),
}
REQUIRED_KEYS: dict[Task, tuple[str, ...]] = {
    Task.REWRITE: ("rewritten",),
    Task.CLARIFY: ("needs_clarification",),
    Task.EXTRACT: ("reference",),
    Task.RAG: ("answer",),
    Task.DIRECT_ANSWER: ("answer",),
}

_FENCE = re.compile(r"^\s*```")


def _fenced_body(raw: str) -> str:
    """Text between the first fence pair; the whole response if unfenced."""
    lines = raw.splitlines()
    start = None
    for i, line in enumerate(lines):
        if _FENCE.match(line):
            start = i
            break
    if start is None:
        return raw
    for j in range(start + 1, len(lines)):
        if _FENCE.match(lines[j]):
            return "\n".join(lines[start + 1 : j])
    return "\n".join(lines[start + 1 :])


def parse_structured(raw: str, task: Task) -> dict[str, str]:
    """Parse a task response into its key fields.

    Lines that do not start a known key continue the previous value, so
    multi-line answers survive. Raises MalformedOutput when a required key
    is missing or a value violates the task schema.
    """
    body = _fenced_body(raw)
    keys = TASK_KEYS[task]
    fields: dict[str, str] = {}
    current: str | None = None
    for line in body.splitlines():
        matched = None
        for key in keys:
            if line.startswith(f"{key}:"):
                matched = key
                break
        if matched is not None:
            fields[matched] = line[len(matched) + 1 :].lstrip()
            current = matched
        elif current is not None:
            fields[current] = f"{fields[current]}\n{line}"
    fields = {k: v.strip() for k, v in fields.items()}

    for key in REQUIRED_KEYS[task]:
        if key not in fields:
            raise MalformedOutput(f"{task.value} response is missing the {key!r} key")
    if task is Task.REWRITE and not fields["rewritten"]:
        raise MalformedOutput("rewrite response has an empty rewritten query")
    if task is Task.CLARIFY:
        flag = fields["needs_clarification"].lower()
        if flag not in ("true", "false"):
            raise MalformedOutput(f"needs_clarification must be true or false, got {flag!r}")
        if flag == "true" and not fields.get("question", ""):
            raise MalformedOutput("clarification requested without a question")
    return fields


def _call(
    provider: LlmProvider,
    task: Task,
    locale: Locale,
    variables: dict[str, str],
    *,
    max_input_tokens: int,
    model_id: str = "default",
) -> dict[str, str]:
    """Complete and parse, with one automatic re-prompt on malformed output."""
    request = CompletionRequest(
        template=load_template(task, locale),
        variables=variables,
        model_id=model_id,
        max_input_tokens=max_input_tokens,
    )
    raw = provider.complete(request)
    try:
        return parse_structured(raw, task)
    except MalformedOutput as first:
        log.warning("malformed %s output, re-prompting once: %s", task.value, first)
        raw = provider.complete(request)
        return parse_structured(raw, task)


def plan_query(
    provider: LlmProvider,
    context: DialogueContext,
    query: str,
    locale: Locale,
    *,
    clarify: bool = True,
    max_input_tokens: int = 5000,
    model_id: str = "default",
) -> QueryPlan:
    """Rewrite the query from dialogue context, then probe for ambiguity.

    A complete, context-independent query comes back unchanged. Malformed
    provider output degrades to an identity rewrite with no clarification,
    flagged on the plan; transport errors propagate with retry metadata.
    """
    if not query.strip():
        raise ValueError("query must be non-empty")
    context_block = render_context(context)
    degraded = False
    reasoning: list[str] = []

    try:
        fields = _call(
            provider,
            Task.REWRITE,
            locale,
            {"context": context_block, "query": query},
            max_input_tokens=max_input_tokens,
            model_id=model_id,
        )
        rewritten = fields["rewritten"]
        if fields.get("reasoning"):
            reasoning.append(fields["reasoning"])
    except MalformedOutput as exc:
        log.warning("rewrite degraded to identity: %s", exc)
        rewritten = query
        degraded = True

    needs_clarification = False
    question: str | None = None
    if clarify:
        try:
            fields = _call(
                provider,
                Task.CLARIFY,
                locale,
                {"context": context_block, "query": rewritten},
                max_input_tokens=max_input_tokens,
                model_id=model_id,
            )
            needs_clarification = fields["needs_clarification"].lower() == "true"
            if needs_clarification:
                question = fields["question"]
            if fields.get("reasoning"):
                reasoning.append(fields["reasoning"])
        except MalformedOutput as exc:
            log.warning("clarification probe degraded to none: %s", exc)
            degraded = True

    return QueryPlan(
        original=query,
        rewritten=rewritten,
        needs_clarification=needs_clarification,
        clarifying_question=question,
        reasoning_trace="\n".join(reasoning) or None,
        degraded=degraded,
    )


def extract_reference(
    provider: LlmProvider,
    rewritten_query: str,
    page_text: str,
    locale: Locale,
    *,
    max_input_tokens: int = 5000,
    model_id: str = "default",
) -> str:
    """Distill the query-relevant reference from one page's text.

    Returns the empty string when there is nothing relevant to extract or
    the provider fails; the caller filters such results out. Never raises a
    provider error, so one bad page cannot abort a whole result set.
    """
    if not page_text.strip():
        return ""
    try:
        fields = _call(
            provider,
            Task.EXTRACT,
            locale,
            {"query": rewritten_query, "page_text": page_text},
            max_input_tokens=max_input_tokens,
            model_id=model_id,
        )
        return fields["reference"]
    except MalformedOutput as exc:
        log.warning("extraction output unusable, filtering result: %s", exc)
        return ""
    except ProviderError as exc:
        log.warning("extraction call failed, filtering result: %s", exc)
        return ""


def compose_answer(
    provider: LlmProvider,
    rewritten_query: str,
    references: list[ReferenceCard],
    locale: Locale,
    *,
    max_input_tokens: int = 5000,
    model_id: str = "default",
) -> str:
    """Generate the raw answer string.

    With references the grounded task is used and the output may carry
    citation marks; without references the model answers from its own
    knowledge and emits none. Transport errors propagate so the caller can
    post a failure notice.
    """
    if references:
        block = "\n".join(f"[{card.rank}] {card.reference}" for card in references)
        task, variables = Task.RAG, {"query": rewritten_query, "references": block}
    else:
        task, variables = Task.DIRECT_ANSWER, {"query": rewritten_query}
    request = CompletionRequest(
        template=load_template(task, locale),
        variables=variables,
        model_id=model_id,
        max_input_tokens=max_input_tokens,
    )
    raw = provider.complete(request)
    try:
        return parse_structured(raw, task)["answer"]
    except MalformedOutput as first:
        log.warning("malformed %s output, re-prompting once: %s", task.value, first)
        raw = provider.complete(request)
    try:
        return parse_structured(raw, task)["answer"]
    except MalformedOutput as exc:
        # Salvage the raw text rather than dropping the answer on the floor.
        log.warning("answer output unfenced/malformed, using raw text: %s", exc)
        return _fenced_body(raw).strip()
