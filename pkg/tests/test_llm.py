from __future__ import annotations

import itertools
import json

import httpx
import pytest

from searchroom.llm.gateway import compose_answer, extract_reference, parse_structured, plan_query
from searchroom.llm.providers import (
    CompletionRequest,
    HttpLlmProvider,
    LlmProvider,
    MalformedOutput,
    ProviderError,
    RecordingProvider,
    ScriptMiss,
    ScriptRule,
    ScriptedProvider,
    input_hash,
)
from searchroom.llm.templates import (
    Task,
    TemplateError,
    load_template,
    parse_template_text,
    render_context,
    render_prompt,
)
from searchroom.model import Locale, ReferenceCard, validate_context

from .conftest import basic_script, fenced, utt


# -- templates ------------------------------------------------------------------


def test_every_task_resolves_for_both_locales() -> None:
    for task, locale in itertools.product(Task, Locale):
        template = load_template(task, locale)
        assert template.instruction.strip()
        assert template.output_schema.strip()
        assert len(template.demonstrations) == 5


def test_template_parser_rejects_preamble_and_orphan_demos() -> None:
    with pytest.raises(TemplateError):
        parse_template_text(Task.RAG, Locale.EN, "stray text\n[instruction]\nhi")
    with pytest.raises(TemplateError):
        parse_template_text(
            Task.RAG, Locale.EN,
            "[instruction]\nhi\n[demonstration.input]\nq\n[output_schema]\ns",
        )


def test_render_prompt_limits_demonstrations() -> None:
    template = load_template(Task.REWRITE, Locale.EN)
    two_shot = render_prompt(template, {"context": "c", "query": "q"}, shots=2)
    full = render_prompt(template, {"context": "c", "query": "q"}, shots=5)
    assert two_shot.count("input:") == 3  # 2 demos + the live input
    assert full.count("input:") == 6
    assert two_shot.rstrip().endswith("output:")


def test_render_context_flattens_multiline_messages() -> None:
    context = validate_context([utt(1, text="line one\nline two", author="ana")], 20)
    assert render_context(context) == "ana: line one line two"


# -- scripted provider -------------------------------------------------------------


def _request(task: Task, **variables: str) -> CompletionRequest:
    return CompletionRequest(template=load_template(task, Locale.EN), variables=variables)


def test_scripted_provider_prefers_hash_then_match_then_default() -> None:
    variables = {"context": "", "query": "exact"}
    provider = ScriptedProvider(
        [
            ScriptRule(Task.REWRITE, "default response"),
            ScriptRule(Task.REWRITE, "match response", match="exact"),
            ScriptRule(Task.REWRITE, "hash response", input_sha256=input_hash(variables)),
        ]
    )
    assert provider.complete(_request(Task.REWRITE, **variables)) == "hash response"
    assert provider.complete(_request(Task.REWRITE, context="", query="exact else")) == "match response"
    assert provider.complete(_request(Task.REWRITE, context="", query="other")) == "default response"


def test_scripted_provider_is_deterministic() -> None:
    provider = basic_script()
    request = _request(Task.REWRITE, context="a", query="b")
    assert provider.complete(request) == provider.complete(request)


def test_scripted_provider_misses_loudly() -> None:
    provider = ScriptedProvider([ScriptRule(Task.RAG, "x")])
    with pytest.raises(ScriptMiss):
        provider.complete(_request(Task.REWRITE, context="", query="q"))


def test_completion_request_pins_sampling() -> None:
    template = load_template(Task.REWRITE, Locale.EN)
    with pytest.raises(ValueError):
        CompletionRequest(template=template, variables={}, temperature=0.7)
    with pytest.raises(ValueError):
        CompletionRequest(template=template, variables={}, candidate_count=2)


# -- http provider ----------------------------------------------------------------


def test_http_provider_round_trip_and_errors() -> None:
    seen: list[httpx.Request] = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, json={"text": "fenced output"})

    client = httpx.Client(
        transport=httpx.MockTransport(handler), base_url="https://llm.example"
    )
    provider = HttpLlmProvider("https://llm.example", "m1", client=client)
    request = _request(Task.REWRITE, context="", query="q")
    assert provider.complete(request) == "fenced output"
    sent = json.loads(seen[0].read().decode())
    assert sent["temperature"] == 0.0 and sent["n"] == 1 and sent["model"] == "m1"

    failing = httpx.Client(
        transport=httpx.MockTransport(lambda r: httpx.Response(500)),
        base_url="https://llm.example",
    )
    with pytest.raises(ProviderError):
        HttpLlmProvider("https://llm.example", "m1", client=failing).complete(request)


# -- structured output parsing ------------------------------------------------------


def test_parse_structured_reads_fenced_key_block() -> None:
    raw = "noise before\n```\nreasoning: because\nrewritten: full query\n```\nnoise after"
    fields = parse_structured(raw, Task.REWRITE)
    assert fields == {"reasoning": "because", "rewritten": "full query"}


def test_parse_structured_joins_continuation_lines() -> None:
    raw = fenced(answer="first line") .replace("\n```", "\nsecond line\n```")
    assert parse_structured(raw, Task.RAG)["answer"] == "first line\nsecond line"


def test_parse_structured_accepts_unfenced_output() -> None:
    assert parse_structured("reference: found it", Task.EXTRACT)["reference"] == "found it"


@pytest.mark.parametrize(
    "raw,task",
    [
        ("```\nreasoning: only\n```", Task.REWRITE),
        ("```\nrewritten:\n```", Task.REWRITE),
        ("```\nneeds_clarification: maybe\nquestion: hm\n```", Task.CLARIFY),
        ("```\nneeds_clarification: true\nquestion:\n```", Task.CLARIFY),
        ("free prose with no keys at all", Task.RAG),
    ],
)
def test_parse_structured_rejects_schema_violations(raw: str, task: Task) -> None:
    with pytest.raises(MalformedOutput):
        parse_structured(raw, task)


# -- plan_query ----------------------------------------------------------------------


def _context(*texts: str):
    return validate_context([utt(i + 1, text=t) for i, t in enumerate(texts)], 20)


def test_plan_query_resolves_context_via_script() -> None:
    provider = RecordingProvider(
        basic_script(rewritten="who is the lead actor of Joy of Life season 2")
    )
    context = _context("I started the second season of Joy of Life.")
    plan = plan_query(provider, context, "who is the lead actor", Locale.EN)
    assert "Joy of Life" in plan.rewritten
    assert plan.needs_clarification is False
    assert plan.reasoning_trace is not None
    assert [r.template.task for r in provider.requests] == [Task.REWRITE, Task.CLARIFY]


def test_plan_query_identity_for_complete_query() -> None:
    provider = basic_script(rewritten="capital of France")
    plan = plan_query(provider, _context(), "capital of France", Locale.EN)
    assert plan.rewritten == plan.original == "capital of France"
    assert plan.needs_clarification is False


def test_plan_query_carries_clarifying_question_verbatim() -> None:
    question = "Do you mean the TV series or the novel?"
    provider = basic_script(needs_clarification=True, question=question)
    plan = plan_query(provider, _context("ambiguous chatter"), "reviews of it", Locale.EN)
    assert plan.needs_clarification is True
    assert plan.clarifying_question == question


def test_plan_query_skips_clarify_when_disabled() -> None:
    provider = RecordingProvider(basic_script())
    plan = plan_query(provider, _context(), "a query", Locale.EN, clarify=False)
    assert plan.needs_clarification is False
    assert [r.template.task for r in provider.requests] == [Task.REWRITE]


def test_plan_query_requires_nonempty_query() -> None:
    with pytest.raises(ValueError):
        plan_query(basic_script(), _context(), "   ", Locale.EN)


class FlakyProvider(LlmProvider):
    """Returns canned responses per task, malformed for the first N calls."""

    def __init__(self, good: dict[Task, str], malformed_calls: int = 0):
        self.good = good
        self.malformed_remaining = malformed_calls
        self.calls: list[Task] = []

    @property
    def model_id(self) -> str:
        return "flaky"

    @property
    def context_limit(self) -> int:
        return 100_000

    def complete(self, request: CompletionRequest) -> str:
        self.calls.append(request.template.task)
        if self.malformed_remaining > 0:
            self.malformed_remaining -= 1
            return "```\ngarbage with no keys\n```"
        return self.good[request.template.task]


def test_plan_query_reprompts_once_then_succeeds() -> None:
    provider = FlakyProvider(
        {
            Task.REWRITE: fenced(reasoning="r", rewritten="fixed query"),
            Task.CLARIFY: fenced(reasoning="r", needs_clarification="false", question=""),
        },
        malformed_calls=1,
    )
    plan = plan_query(provider, _context(), "q", Locale.EN)
    assert plan.rewritten == "fixed query"
    assert plan.degraded is False
    assert provider.calls == [Task.REWRITE, Task.REWRITE, Task.CLARIFY]


def test_plan_query_degrades_after_two_malformed_rewrites() -> None:
    provider = FlakyProvider(
        {Task.CLARIFY: fenced(reasoning="r", needs_clarification="false", question="")},
        malformed_calls=2,
    )
    plan = plan_query(provider, _context(), "the original", Locale.EN)
    assert plan.rewritten == "the original"
    assert plan.needs_clarification is False
    assert plan.degraded is True
    assert provider.calls[:2] == [Task.REWRITE, Task.REWRITE]


class DownProvider(LlmProvider):
    model_id = "down"
    context_limit = 1

    def complete(self, request: CompletionRequest) -> str:
        raise ProviderError("connection refused", attempts=3)


def test_plan_query_propagates_transport_errors_with_metadata() -> None:
    with pytest.raises(ProviderError) as excinfo:
        plan_query(DownProvider(), _context(), "q", Locale.EN)
    assert excinfo.value.attempts == 3


# -- extract_reference ------------------------------------------------------------------


def test_extract_returns_scripted_summary() -> None:
    provider = basic_script(reference="Water every two weeks.")
    out = extract_reference(provider, "watering monstera", "long page text", Locale.EN)
    assert out == "Water every two weeks."


def test_extract_returns_empty_for_irrelevant_page() -> None:
    provider = basic_script(reference="")
    assert extract_reference(provider, "q", "unrelated text", Locale.EN) == ""


def test_extract_skips_provider_call_for_empty_page() -> None:
    provider = RecordingProvider(basic_script())
    assert extract_reference(provider, "q", "   \n ", Locale.EN) == ""
    assert provider.requests == []


def test_extract_swallows_provider_errors() -> None:
    assert extract_reference(DownProvider(), "q", "some text", Locale.EN) == ""


# -- compose_answer ------------------------------------------------------------------


def _cards(n: int) -> list[ReferenceCard]:
    return [
        ReferenceCard(
            rank=i, title=f"T{i}", link=f"https://s{i}.example/", reference=f"ref {i}",
            source_rank=i,
        )
        for i in range(1, n + 1)
    ]


def test_compose_uses_rag_task_with_references() -> None:
    provider = RecordingProvider(basic_script(answer="The lead actor is X [1][3]."))
    raw = compose_answer(provider, "q", _cards(3), Locale.EN)
    assert raw == "The lead actor is X [1][3]."
    assert provider.requests[-1].template.task is Task.RAG
    assert "[1] ref 1" in provider.requests[-1].variables["references"]


def test_compose_uses_direct_task_without_references() -> None:
    provider = RecordingProvider(basic_script(direct="Plain answer."))
    raw = compose_answer(provider, "q", [], Locale.EN)
    assert raw == "Plain answer."
    assert provider.requests[-1].template.task is Task.DIRECT_ANSWER
    assert "[" not in raw


def test_compose_single_reference_citations() -> None:
    provider = basic_script(answer="Everything cited [1]. Every sentence [1].")
    raw = compose_answer(provider, "q", _cards(1), Locale.EN)
    assert raw.count("[1]") == 2


def test_compose_propagates_provider_errors() -> None:
    with pytest.raises(ProviderError):
        compose_answer(DownProvider(), "q", _cards(1), Locale.EN)


def test_compose_salvages_raw_text_after_two_malformed() -> None:
    provider = FlakyProvider({}, malformed_calls=2)
    raw = compose_answer(provider, "q", _cards(1), Locale.EN)
    assert raw == "garbage with no keys"
    assert provider.calls == [Task.RAG, Task.RAG]


# -- malformed-output corpus: one re-prompt then fallback, never a crash ---------------

MALFORMED_SAMPLES = [
    "",
    "no fences, no keys",
    "```\n```",
    "```\nwrong_key: value\n```",
    "```unterminated fence\nrewritten",
]


@pytest.mark.parametrize("sample", MALFORMED_SAMPLES)
def test_malformed_corpus_never_crashes_any_task(sample: str) -> None:
    class Stuck(LlmProvider):
        model_id = "stuck"
        context_limit = 10_000

        def __init__(self) -> None:
            self.calls = 0

        def complete(self, request: CompletionRequest) -> str:
            self.calls += 1
            return sample

    stuck = Stuck()
    plan = plan_query(stuck, _context(), "query text", Locale.EN)
    assert plan.degraded is True and plan.rewritten == "query text"
    assert stuck.calls == 4  # two per gateway call: rewrite, clarify

    stuck = Stuck()
    assert extract_reference(stuck, "q", "page", Locale.EN) == ""
    assert stuck.calls == 2

    stuck = Stuck()
    compose_answer(stuck, "q", _cards(1), Locale.EN)  # must not raise
    assert stuck.calls == 2
