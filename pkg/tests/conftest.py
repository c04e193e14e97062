from __future__ import annotations

from pathlib import Path

import pytest

from searchroom.llm.providers import ScriptRule, ScriptedProvider
from searchroom.llm.templates import Task
from searchroom.model import Utterance
from searchroom.search import CorpusIndex

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
SCENARIOS = FIXTURES / "scenarios"
WEBDOCS = FIXTURES / "webdocs"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def utt(
    n: int,
    text: str = "hello there",
    room: str = "room-1",
    author: str = "alice",
    ts: int | None = None,
    is_agent: bool = False,
) -> Utterance:
    return Utterance(
        id=f"u-{n:06d}",
        room_id=room,
        author_id=author,
        text=text,
        timestamp=ts if ts is not None else 1_700_000_000_000 + n * 1000,
        is_agent=is_agent,
    )


def fenced(**fields: str) -> str:
    """Build a fenced key-block response the way a well-behaved model would."""
    lines = [f"{key}: {value}" for key, value in fields.items()]
    return "```\n" + "\n".join(lines) + "\n```"


def basic_script(
    rewritten: str = "the rewritten query",
    *,
    needs_clarification: bool = False,
    question: str = "",
    reference: str = "A relevant summary of the page.",
    answer: str = "Grounded answer [1].",
    direct: str = "An answer from model knowledge alone.",
    extra: list[ScriptRule] | None = None,
) -> ScriptedProvider:
    """Scripted provider with one default response per task."""
    rules = list(extra or [])
    rules += [
        ScriptRule(Task.REWRITE, fenced(reasoning="scripted", rewritten=rewritten)),
        ScriptRule(
            Task.CLARIFY,
            fenced(
                reasoning="scripted",
                needs_clarification="true" if needs_clarification else "false",
                question=question,
            ),
        ),
        ScriptRule(Task.EXTRACT, fenced(reference=reference)),
        ScriptRule(Task.RAG, fenced(answer=answer)),
        ScriptRule(Task.DIRECT_ANSWER, fenced(answer=direct)),
    ]
    return ScriptedProvider(rules)


def make_corpus(
    tmp_path: Path,
    docs: list[tuple[str, str, str, str]],
    missing: set[str] | None = None,
) -> CorpusIndex:
    """Write a corpus directory from (url, title, keywords, body) tuples.

    URLs in ``missing`` get manifest entries but no file, modelling pages
    whose fetch fails.
    """
    corpus = tmp_path / "webdocs"
    corpus.mkdir(exist_ok=True)
    lines = []
    for i, (url, title, keywords, body) in enumerate(docs):
        file_name = f"doc{i:02d}.html"
        lines.append(f"{url}\t{file_name}\t{title}\t{keywords}")
        if missing is None or url not in missing:
            (corpus / file_name).write_text(
                f"<html><head><title>{title}</title></head><body><p>{body}</p></body></html>",
                "utf-8",
            )
    (corpus / "manifest.tsv").write_text("\n".join(lines) + "\n", "utf-8")
    return CorpusIndex.load(corpus)


class TickClock:
    """Deterministic millisecond clock for tests: +1s per call."""

    def __init__(self, start_ms: int = 1_700_000_000_000):
        self.now = start_ms

    def __call__(self) -> int:
        self.now += 1000
        return self.now
