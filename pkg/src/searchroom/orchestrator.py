"""End-to-end agent pipeline: mention handling, the one-round clarification
state machine, and the four offline result-returning modes.

The orchestrator is transport-agnostic. It consumes room history, returns a
list of agent actions for the hosting service to materialize (posts, result
cards), and is the single writer of conversation records so that history
and the conversation log always agree.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Mapping, Sequence, Union

from .answers import parse_citations, render
from .llm.gateway import compose_answer, plan_query
from .llm.providers import LlmProvider, ProviderError
from .logs import ConversationKind, ConversationRecord, LogStore
from .model import (
    CitedAnswer,
    DialogueContext,
    Locale,
    QueryPlan,
    ReferenceCard,
    SerpEntry,
    validate_context,
)
from .pages import PageFetcher, TokenBudget, build_references
from .search import SearchProvider, SearchUnavailable

log = logging.getLogger("searchroom.agent")

DEFAULT_MENTION_TOKEN = "@searchagent"
DEFAULT_AGENT_ID = "searchagent"
DEFAULT_CLARIFICATION_EXPIRY_MS = 10 * 60 * 1000


class Mode(str, Enum):
    DIRECT_SEARCH = "direct_search"
    WIZARD_OF_OZ = "wizard_of_oz"
    REWRITE_THEN_SEARCH = "rewrite_then_search"
    FULL_AGENT = "full_agent"


MODE_NUMBERS: dict[Mode, int] = {
    Mode.DIRECT_SEARCH: 1,
    Mode.WIZARD_OF_OZ: 2,
    Mode.REWRITE_THEN_SEARCH: 3,
    Mode.FULL_AGENT: 4,
}
MODES_BY_NUMBER = {number: mode for mode, number in MODE_NUMBERS.items()}


class MissingRewrite(Exception):
    """Wizard-of-oz mode was run without the externally supplied rewrite."""


@dataclass(frozen=True)
class PipelineConfig:
    mode: Mode = Mode.FULL_AGENT
    max_clarification_rounds: int = 1  # 0 or 1
    window_limit: int = 20
    max_results: int = 10
    token_cap: int = 5000
    locale: Locale = Locale.EN
    page_size: int = 3
    clarification_expiry_ms: int = DEFAULT_CLARIFICATION_EXPIRY_MS

    def __post_init__(self) -> None:
        if self.max_clarification_rounds not in (0, 1):
            raise ValueError("max_clarification_rounds must be 0 or 1")
        for name in ("window_limit", "max_results", "token_cap", "page_size",
                     "clarification_expiry_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PipelineConfig:
        kwargs = dict(data)
        if "mode" in kwargs:
            kwargs["mode"] = Mode(kwargs["mode"])
        if "locale" in kwargs:
            kwargs["locale"] = Locale(kwargs["locale"])
        return cls(**kwargs)


@dataclass(frozen=True)
class PendingClarification:
    room_id: str
    asking_user_id: str
    query_plan: QueryPlan
    issued_at: int
    expiry_ms: int = DEFAULT_CLARIFICATION_EXPIRY_MS
    pipeline_id: str = ""

    def expired(self, now_ms: int) -> bool:
        return now_ms >= self.issued_at + self.expiry_ms


@dataclass(frozen=True)
class PostAnswer:
    pipeline_id: str
    text: str  # rendered display string, reference block included
    answer: CitedAnswer


@dataclass(frozen=True)
class AskClarification:
    pipeline_id: str
    question: str


@dataclass(frozen=True)
class PostFailure:
    pipeline_id: str
    text: str


@dataclass(frozen=True)
class PresentCards:
    pipeline_id: str
    cards: tuple[ReferenceCard, ...]
    effective_query: str


AgentAction = Union[PostAnswer, AskClarification, PostFailure, PresentCards]


@dataclass(frozen=True)
class ModeReport:
    """Structural record of one offline pipeline run, for replay comparison."""

    mode: Mode
    effective_query: str
    scenario_id: str = ""
    results: tuple[SerpEntry, ...] = ()
    cards: tuple[ReferenceCard, ...] = ()
    answer: CitedAnswer | None = None
    answer_text: str | None = None
    llm_only: bool | None = None
    reasoning_trace: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "mode": self.mode.value,
            "mode_number": MODE_NUMBERS[self.mode],
            "effective_query": self.effective_query,
            "results": [e.to_dict() for e in self.results],
            "cards": [c.to_dict() for c in self.cards],
            "answer": self.answer.to_dict() if self.answer else None,
            "answer_text": self.answer_text,
            "llm_only": self.llm_only,
            "reasoning_trace": self.reasoning_trace,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ModeReport:
        return cls(
            mode=Mode(data["mode"]),
            effective_query=data["effective_query"],
            scenario_id=data.get("scenario_id", ""),
            results=tuple(SerpEntry.from_dict(e) for e in data["results"]),
            cards=tuple(ReferenceCard.from_dict(c) for c in data["cards"]),
            answer=CitedAnswer.from_dict(data["answer"]) if data.get("answer") else None,
            answer_text=data.get("answer_text"),
            llm_only=data.get("llm_only"),
            reasoning_trace=data.get("reasoning_trace"),
        )


_MESSAGES: dict[str, dict[Locale, str]] = {
    "search_failed": {
        Locale.EN: "Sorry, web search is unavailable right now. Please try again later.",
        Locale.ZH: "抱歉，网络搜索暂时不可用，请稍后再试。",
    },
    "model_failed": {
        Locale.EN: "Sorry, I could not process that query. Please try again later.",
        Locale.ZH: "抱歉，我暂时无法处理这个查询，请稍后再试。",
    },
    "empty_query": {
        Locale.EN: "Please include a query after the mention.",
        Locale.ZH: "请在提及我时附上要查询的内容。",
    },
}


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


class AgentPipeline:
    """Wires the gateway, search, page pipeline, and logs into the agent.

    One instance serves many rooms. Pending-clarification state is updated
    under an internal lock; the hosting service additionally serializes all
    message handling per room, so at most one pipeline runs per room at a
    time while distinct rooms proceed in parallel.
    """

    def __init__(
        self,
        llm: LlmProvider,
        search: SearchProvider,
        fetcher: PageFetcher,
        logs: LogStore,
        config: PipelineConfig | None = None,
        *,
        clock: Callable[[], int] = _now_ms,
        mention_token: str = DEFAULT_MENTION_TOKEN,
        agent_id: str = DEFAULT_AGENT_ID,
        parallelism: int = 4,
    ):
        self.llm = llm
        self.search = search
        self.fetcher = fetcher
        self.logs = logs
        self.config = config or PipelineConfig()
        self.clock = clock
        self.mention_token = mention_token
        self.agent_id = agent_id
        self.parallelism = parallelism
        self._lock = threading.Lock()
        self._pending: dict[str, PendingClarification] = {}
        self._pipeline_count = 0

    # -- plumbing ----------------------------------------------------------

    def _next_pipeline_id(self) -> str:
        with self._lock:
            self._pipeline_count += 1
            return f"p-{self._pipeline_count:06d}"

    def _message(self, key: str) -> str:
        return _MESSAGES[key][self.config.locale]

    def _log_conversation(
        self, room_id: str, author_id: str, text: str,
        kind: ConversationKind, pipeline_id: str | None,
    ) -> None:
        self.logs.append(
            ConversationRecord(
                room_id=room_id,
                author_id=author_id,
                text=text,
                timestamp=self.clock(),
                kind=kind,
                pipeline_id=pipeline_id,
            )
        )

    def is_mention(self, text: str) -> bool:
        return self.mention_token in text

    def strip_mention(self, text: str) -> str:
        return " ".join(text.replace(self.mention_token, " ", 1).split())

    def pending_for(self, room_id: str) -> PendingClarification | None:
        with self._lock:
            return self._pending.get(room_id)

    # -- live message handling ----------------------------------------------

    def on_message(
        self, room_id: str, user_id: str, text: str, history: Sequence
    ) -> list[AgentAction]:
        """Entry point for every user message the service accepts.

        ``history`` is the room history in order, with the triggering
        message as its last element. Returns the agent actions to post.
        """
        if self.is_mention(text):
            return self.handle_mention(room_id, user_id, text, history)
        return self.handle_reply(room_id, user_id, text, history)

    def handle_mention(
        self, room_id: str, user_id: str, message_text: str, history: Sequence
    ) -> list[AgentAction]:
        """Run the pipeline for a mention, or ask one clarifying question."""
        pipeline_id = self._next_pipeline_id()
        self._log_conversation(
            room_id, user_id, message_text, ConversationKind.USER_MESSAGE, pipeline_id
        )
        query = self.strip_mention(message_text)
        if not query:
            return self._fail(room_id, pipeline_id, self._message("empty_query"))

        # The mention message itself is excluded from the dialogue context;
        # its text minus the token is the query.
        context = validate_context(list(history)[:-1], self.config.window_limit)
        clarify_allowed = (
            self.config.max_clarification_rounds > 0 and self.pending_for(room_id) is None
        )
        try:
            plan = plan_query(
                self.llm, context, query, self.config.locale,
                clarify=clarify_allowed, max_input_tokens=self.config.token_cap,
            )
        except ProviderError as exc:
            log.warning("query planning failed: %s (attempts=%s)", exc, exc.attempts)
            return self._fail(room_id, pipeline_id, self._message("model_failed"))

        if clarify_allowed and plan.needs_clarification:
            pending = PendingClarification(
                room_id=room_id,
                asking_user_id=user_id,
                query_plan=plan,
                issued_at=self.clock(),
                expiry_ms=self.config.clarification_expiry_ms,
                pipeline_id=pipeline_id,
            )
            with self._lock:
                self._pending[room_id] = pending
            question = plan.clarifying_question or ""
            self._log_conversation(
                room_id, self.agent_id, question,
                ConversationKind.AGENT_CLARIFICATION, pipeline_id,
            )
            return [AskClarification(pipeline_id=pipeline_id, question=question)]

        return self._complete(room_id, pipeline_id, plan)

    def handle_reply(
        self, room_id: str, user_id: str, text: str, history: Sequence
    ) -> list[AgentAction]:
        """Resume a pending clarification or just log ordinary conversation.

        Only the asking user's next message resumes the pipeline; everyone
        else's messages still enter the context window via room history.
        Expired pending questions are cleared and the reply becomes an
        ordinary message.
        """
        with self._lock:
            pending = self._pending.get(room_id)
            if pending is not None and pending.expired(self.clock()):
                del self._pending[room_id]
                pending = None
            resuming = pending is not None and pending.asking_user_id == user_id
            if resuming:
                del self._pending[room_id]

        self._log_conversation(
            room_id, user_id, text, ConversationKind.USER_MESSAGE,
            pending.pipeline_id if resuming and pending else None,
        )
        if not resuming or pending is None:
            return []

        # The reply is part of the context for the re-run; clarification is
        # disabled so the agent answers after this one round.
        context = validate_context(list(history), self.config.window_limit)
        try:
            plan = plan_query(
                self.llm, context, pending.query_plan.original, self.config.locale,
                clarify=False, max_input_tokens=self.config.token_cap,
            )
        except ProviderError as exc:
            log.warning("query planning failed on resume: %s", exc)
            return self._fail(room_id, pending.pipeline_id, self._message("model_failed"))
        return self._complete(room_id, pending.pipeline_id, plan)

    def _fail(self, room_id: str, pipeline_id: str, text: str) -> list[AgentAction]:
        self._log_conversation(
            room_id, self.agent_id, text, ConversationKind.AGENT_ERROR, pipeline_id
        )
        return [PostFailure(pipeline_id=pipeline_id, text=text)]

    def _complete(
        self, room_id: str, pipeline_id: str, plan: QueryPlan
    ) -> list[AgentAction]:
        """search -> build references -> compose -> parse -> render."""
        try:
            entries = self.search.search(plan.rewritten, self.config.max_results)
        except SearchUnavailable as exc:
            log.warning("search failed: %s", exc)
            return self._fail(room_id, pipeline_id, self._message("search_failed"))

        cards = build_references(
            entries, plan, self.fetcher, self.llm,
            TokenBudget(self.config.token_cap), self.config.locale,
            parallelism=self.parallelism,
        )
        try:
            raw = compose_answer(
                self.llm, plan.rewritten, cards, self.config.locale,
                max_input_tokens=self.config.token_cap,
            )
        except ProviderError as exc:
            log.warning("answer composition failed: %s", exc)
            return self._fail(room_id, pipeline_id, self._message("model_failed"))

        answer = parse_citations(raw, len(cards))
        for warning in answer.warnings:
            log.warning("pipeline %s: %s", pipeline_id, warning)
        rendered = render(answer, cards)
        self._log_conversation(
            room_id, self.agent_id, rendered, ConversationKind.AGENT_ANSWER, pipeline_id
        )
        actions: list[AgentAction] = [
            PostAnswer(pipeline_id=pipeline_id, text=rendered, answer=answer)
        ]
        actions.append(
            PresentCards(
                pipeline_id=pipeline_id,
                cards=tuple(cards),
                effective_query=plan.rewritten,
            )
        )
        return actions

    # -- offline mode selector ----------------------------------------------

    def run_mode(
        self,
        transcript: DialogueContext,
        query: str,
        config: PipelineConfig | None = None,
        human_rewrite: str | None = None,
    ) -> ModeReport:
        """Run one of the four result-returning modes over a transcript.

        Modes 1-3 return search results only: the raw query, the supplied
        human rewrite, or the model rewrite as the effective query. Mode 4
        runs the whole pipeline and adds the cited answer. Offline runs
        never ask clarifying questions (there is nobody to reply), so modes
        3 and 4 issue the identical search query under identical scripts.
        """
        cfg = config or self.config
        mode = cfg.mode
        if mode is Mode.DIRECT_SEARCH:
            return ModeReport(
                mode=mode,
                effective_query=query,
                results=tuple(self.search.search(query, cfg.max_results)),
            )
        if mode is Mode.WIZARD_OF_OZ:
            if not human_rewrite or not human_rewrite.strip():
                raise MissingRewrite("wizard_of_oz mode needs a human-authored rewrite")
            return ModeReport(
                mode=mode,
                effective_query=human_rewrite,
                results=tuple(self.search.search(human_rewrite, cfg.max_results)),
            )

        plan = plan_query(
            self.llm, transcript, query, cfg.locale,
            clarify=False, max_input_tokens=cfg.token_cap,
        )
        if mode is Mode.REWRITE_THEN_SEARCH:
            return ModeReport(
                mode=mode,
                effective_query=plan.rewritten,
                results=tuple(self.search.search(plan.rewritten, cfg.max_results)),
                reasoning_trace=plan.reasoning_trace,
            )

        entries = self.search.search(plan.rewritten, cfg.max_results)
        cards = build_references(
            entries, plan, self.fetcher, self.llm,
            TokenBudget(cfg.token_cap), cfg.locale, parallelism=self.parallelism,
        )
        raw = compose_answer(
            self.llm, plan.rewritten, cards, cfg.locale, max_input_tokens=cfg.token_cap
        )
        answer = parse_citations(raw, len(cards))
        return ModeReport(
            mode=mode,
            effective_query=plan.rewritten,
            cards=tuple(cards),
            answer=answer,
            answer_text=render(answer, cards),
            llm_only=answer.llm_only,
            reasoning_trace=plan.reasoning_trace,
        )
