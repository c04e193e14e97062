"""Shared domain types used across the whole service.

Every type here is an immutable value object with a canonical JSON
encoding (snake_case field names, see ``to_dict``/``from_dict``); the
same encoding is used by the behavior logs, the wire protocol, and the
replay corpus format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence
from urllib.parse import urlparse

DEFAULT_WINDOW_LIMIT = 20


class Locale(str, Enum):
    EN = "en"
    ZH = "zh"


def canonical_json(data: Any, indent: int | None = None) -> str:
    """Deterministic JSON text: sorted keys, UTF-8 literals, stable separators."""
    if indent is None:
        return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return json.dumps(data, sort_keys=True, ensure_ascii=False, indent=indent)


@dataclass(frozen=True)
class Utterance:
    """One message in a room, user- or agent-authored."""

    id: str
    room_id: str
    author_id: str
    text: str
    timestamp: int  # milliseconds since epoch
    is_agent: bool = False

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("utterance text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "room_id": self.room_id,
            "author_id": self.author_id,
            "text": self.text,
            "timestamp": self.timestamp,
            "is_agent": self.is_agent,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Utterance:
        return cls(
            id=data["id"],
            room_id=data["room_id"],
            author_id=data["author_id"],
            text=data["text"],
            timestamp=int(data["timestamp"]),
            is_agent=bool(data.get("is_agent", False)),
        )


@dataclass(frozen=True)
class DialogueContext:
    """The trailing window of room conversation fed to the language model.

    Utterances keep room order: non-decreasing timestamp, ties broken by
    utterance id (lexicographic).
    """

    utterances: tuple[Utterance, ...] = ()
    window_limit: int = DEFAULT_WINDOW_LIMIT

    def __post_init__(self) -> None:
        if self.window_limit <= 0:
            raise ValueError("window_limit must be positive")
        if len(self.utterances) > self.window_limit:
            raise ValueError(
                f"context holds {len(self.utterances)} utterances, limit is {self.window_limit}"
            )
        for prev, cur in zip(self.utterances, self.utterances[1:]):
            if (prev.timestamp, prev.id) > (cur.timestamp, cur.id):
                raise ValueError("context utterances must keep room order")

    def __len__(self) -> int:
        return len(self.utterances)

    def to_dict(self) -> dict[str, Any]:
        return {
            "utterances": [u.to_dict() for u in self.utterances],
            "window_limit": self.window_limit,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DialogueContext:
        return cls(
            utterances=tuple(Utterance.from_dict(u) for u in data["utterances"]),
            window_limit=int(data["window_limit"]),
        )


def validate_context(
    utterances: Sequence[Utterance], window_limit: int = DEFAULT_WINDOW_LIMIT
) -> DialogueContext:
    """Build a DialogueContext from the trailing ``window_limit`` utterances.

    The input must already be in room order (the room stores it that way);
    the output is always a suffix of the input. Empty input yields an empty
    context.
    """
    if window_limit <= 0:
        raise ValueError("window_limit must be positive")
    tail = tuple(utterances[-window_limit:]) if utterances else ()
    return DialogueContext(utterances=tail, window_limit=window_limit)


@dataclass(frozen=True)
class QueryPlan:
    """Outcome of query processing for one user query.

    ``rewritten`` is the self-contained form of ``original``; when the
    provider reports the query already complete, the two are equal.
    ``reasoning_trace`` holds hidden chain-of-thought text kept for research
    output only, never shown to users. ``degraded`` marks plans produced by
    the malformed-output fallback.
    """

    original: str
    rewritten: str
    needs_clarification: bool = False
    clarifying_question: str | None = None
    reasoning_trace: str | None = None
    degraded: bool = False

    def __post_init__(self) -> None:
        if not self.rewritten.strip():
            raise ValueError("rewritten query must be non-empty")
        has_question = bool(self.clarifying_question and self.clarifying_question.strip())
        if self.needs_clarification != has_question:
            raise ValueError(
                "needs_clarification must hold exactly when a clarifying question is present"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "original": self.original,
            "rewritten": self.rewritten,
            "needs_clarification": self.needs_clarification,
            "clarifying_question": self.clarifying_question,
            "reasoning_trace": self.reasoning_trace,
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> QueryPlan:
        return cls(
            original=data["original"],
            rewritten=data["rewritten"],
            needs_clarification=bool(data["needs_clarification"]),
            clarifying_question=data.get("clarifying_question"),
            reasoning_trace=data.get("reasoning_trace"),
            degraded=bool(data.get("degraded", False)),
        )


def is_absolute_url(link: str) -> bool:
    parsed = urlparse(link)
    return bool(parsed.scheme and parsed.netloc)


@dataclass(frozen=True)
class SerpEntry:
    """One raw search result: title, link, and the engine's snippet."""

    rank: int  # 1-based
    title: str
    link: str
    snippet: str = ""

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be 1-based")
        if not is_absolute_url(self.link):
            raise ValueError(f"link must be an absolute URL: {self.link!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "title": self.title,
            "link": self.link,
            "snippet": self.snippet,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SerpEntry:
        return cls(
            rank=int(data["rank"]),
            title=data["title"],
            link=data["link"],
            snippet=data.get("snippet", ""),
        )


@dataclass(frozen=True)
class ReferenceCard:
    """A search result after extraction: the snippet is replaced by the
    query-relevant reference distilled from the fetched page.

    Cards are re-numbered contiguously from 1 after filtering;
    ``source_rank`` keeps the original SERP position.
    """

    rank: int
    title: str
    link: str
    reference: str
    source_rank: int

    def __post_init__(self) -> None:
        if self.rank < 1 or self.source_rank < 1:
            raise ValueError("ranks must be 1-based")
        if not self.reference.strip():
            raise ValueError("reference must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "title": self.title,
            "link": self.link,
            "reference": self.reference,
            "source_rank": self.source_rank,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ReferenceCard:
        return cls(
            rank=int(data["rank"]),
            title=data["title"],
            link=data["link"],
            reference=data["reference"],
            source_rank=int(data["source_rank"]),
        )


@dataclass(frozen=True)
class AnswerSegment:
    """A span of answer text plus the citation marks that follow it.

    ``citations`` is an ordered set: unique 1-based reference ranks in the
    order they appeared. It may be empty.
    """

    text: str
    citations: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.citations)) != len(self.citations):
            raise ValueError("citations must be unique within a segment")

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "citations": list(self.citations)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AnswerSegment:
        return cls(text=data["text"], citations=tuple(int(c) for c in data["citations"]))


@dataclass(frozen=True)
class CitedAnswer:
    """A generated answer decomposed into (segment, citation set) pairs."""

    segments: tuple[AnswerSegment, ...]
    reference_count: int
    llm_only: bool
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.reference_count < 0:
            raise ValueError("reference_count must be non-negative")
        for segment in self.segments:
            for citation in segment.citations:
                if not 1 <= citation <= self.reference_count:
                    raise ValueError(
                        f"citation {citation} out of range 1..{self.reference_count}"
                    )
        if self.llm_only and self.reference_count != 0:
            raise ValueError("llm_only answers must have reference_count 0")

    def cited_ranks(self) -> tuple[int, ...]:
        """All cited ranks in ascending order, deduplicated."""
        return tuple(sorted({c for s in self.segments for c in s.citations}))

    def to_dict(self) -> dict[str, Any]:
        return {
            "segments": [s.to_dict() for s in self.segments],
            "reference_count": self.reference_count,
            "llm_only": self.llm_only,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CitedAnswer:
        return cls(
            segments=tuple(AnswerSegment.from_dict(s) for s in data["segments"]),
            reference_count=int(data["reference_count"]),
            llm_only=bool(data["llm_only"]),
            warnings=tuple(data.get("warnings", ())),
        )
