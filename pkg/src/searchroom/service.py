"""The chat service: rooms, membership, message fan-out, mention dispatch,
result-card pagination, and click handling.

Events are plain dicts matching the wire protocol (docs/wire-protocol.md).
Per-room handling is serialized by a room lock; distinct rooms run in
parallel. Delivery to a disconnected member is dropped; history is re-sent
when they reconnect.
"""

from __future__ import annotations

import math
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .logs import ClickRecord, LogStore, SearchAction, SearchRecord
from .model import ReferenceCard, Utterance
from .orchestrator import (
    AgentPipeline,
    AskClarification,
    PostAnswer,
    PostFailure,
    PresentCards,
)


class ServiceError(Exception):
    code = "error"


class UnknownRoom(ServiceError):
    code = "unknown_room"


class NotAMember(ServiceError):
    code = "not_a_member"


class EmptyMessage(ServiceError):
    code = "empty_message"


class NoActiveResults(ServiceError):
    code = "no_active_results"


class UnknownRank(ServiceError):
    code = "unknown_rank"


EventCallback = Callable[[dict[str, Any]], None]


@dataclass
class ActiveCards:
    """The room-wide card set of the latest pipeline; paging is per user."""

    pipeline_id: str
    cards: tuple[ReferenceCard, ...]
    effective_query: str
    page_index: dict[str, int] = field(default_factory=dict)


@dataclass
class _Room:
    room_id: str
    members: set[str] = field(default_factory=set)
    history: list[Utterance] = field(default_factory=list)
    active: ActiveCards | None = None
    listeners: dict[str, tuple[str, EventCallback]] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock)
    utterance_count: int = 0


class ChatService:
    """In-process service core; the network layer adapts connections to it."""

    def __init__(self, agent: AgentPipeline, logs: LogStore, page_size: int = 3):
        if page_size <= 0:
            raise ValueError("page_size must be positive")
        self.agent = agent
        self.logs = logs
        self.page_size = page_size
        self._rooms: dict[str, _Room] = {}
        self._lock = threading.Lock()

    # -- rooms and membership ------------------------------------------------

    def create_room(self, room_id: str | None = None) -> str:
        with self._lock:
            room_id = room_id or f"room-{len(self._rooms) + 1}"
            if room_id in self._rooms:
                raise ServiceError(f"room {room_id!r} already exists")
            self._rooms[room_id] = _Room(room_id=room_id)
            return room_id

    def _room(self, room_id: str) -> _Room:
        with self._lock:
            room = self._rooms.get(room_id)
        if room is None:
            raise UnknownRoom(f"no such room: {room_id!r}")
        return room

    def join(self, room_id: str, user_id: str) -> None:
        room = self._room(room_id)
        with room.lock:
            room.members.add(user_id)

    def rooms(self) -> list[str]:
        with self._lock:
            return sorted(self._rooms)

    def history(self, room_id: str) -> list[Utterance]:
        room = self._room(room_id)
        with room.lock:
            return list(room.history)

    # -- connections -----------------------------------------------------------

    def connect(self, room_id: str, user_id: str, callback: EventCallback) -> str:
        """Register a live connection; history (and any active result page)
        is replayed to the new connection immediately."""
        room = self._room(room_id)
        with room.lock:
            if user_id not in room.members:
                raise NotAMember(f"{user_id!r} has not joined {room_id!r}")
            connection_id = uuid.uuid4().hex
            room.listeners[connection_id] = (user_id, callback)
            callback(
                {
                    "type": "history",
                    "room_id": room_id,
                    "utterances": [u.to_dict() for u in room.history],
                }
            )
            if room.active is not None:
                callback(self._page_event(room, user_id))
            return connection_id

    def disconnect(self, connection_id: str) -> None:
        with self._lock:
            rooms = list(self._rooms.values())
        for room in rooms:
            with room.lock:
                room.listeners.pop(connection_id, None)

    def _fan_out(self, room: _Room, event: dict[str, Any], only_user: str | None = None) -> None:
        for user_id, callback in list(room.listeners.values()):
            if only_user is not None and user_id != only_user:
                continue
            try:
                callback(event)
            except Exception:
                # A broken listener must not take the room down.
                pass

    # -- messages ---------------------------------------------------------------

    def post_message(self, room_id: str, user_id: str, text: str) -> Utterance:
        """Append, fan out, and hand the message to the agent.

        Mentions trigger the pipeline; other messages may resume a pending
        clarification. A mention arriving while the room is busy simply
        waits on the room lock, so pipelines run in arrival order.
        """
        room = self._room(room_id)
        with room.lock:
            if user_id not in room.members:
                raise NotAMember(f"{user_id!r} has not joined {room_id!r}")
            if not text.strip():
                raise EmptyMessage("message text is empty")
            utterance = self._append_utterance(room, user_id, text, is_agent=False)
            self._fan_out(room, {"type": "message", "utterance": utterance.to_dict()})
            actions = self.agent.on_message(room_id, user_id, text, list(room.history))
            for action in actions:
                self._apply_action(room, action)
            return utterance

    def _append_utterance(self, room: _Room, author_id: str, text: str, is_agent: bool) -> Utterance:
        room.utterance_count += 1
        last_ts = room.history[-1].timestamp if room.history else 0
        utterance = Utterance(
            id=f"u-{room.utterance_count:06d}",
            room_id=room.room_id,
            author_id=author_id,
            text=text,
            timestamp=max(self.agent.clock(), last_ts),
            is_agent=is_agent,
        )
        room.history.append(utterance)
        return utterance

    def _apply_action(self, room: _Room, action) -> None:
        if isinstance(action, PostAnswer):
            utterance = self._append_utterance(room, self.agent.agent_id, action.text, True)
            self._fan_out(
                room,
                {
                    "type": "agent_answer",
                    "room_id": room.room_id,
                    "pipeline_id": action.pipeline_id,
                    "text": action.text,
                    "llm_only": action.answer.llm_only,
                    "reference_count": action.answer.reference_count,
                    "utterance": utterance.to_dict(),
                },
            )
        elif isinstance(action, AskClarification):
            utterance = self._append_utterance(room, self.agent.agent_id, action.question, True)
            self._fan_out(
                room,
                {
                    "type": "clarifying_question",
                    "room_id": room.room_id,
                    "pipeline_id": action.pipeline_id,
                    "text": action.question,
                    "utterance": utterance.to_dict(),
                },
            )
        elif isinstance(action, PostFailure):
            utterance = self._append_utterance(room, self.agent.agent_id, action.text, True)
            self._fan_out(
                room,
                {
                    "type": "error",
                    "room_id": room.room_id,
                    "pipeline_id": action.pipeline_id,
                    "code": "pipeline_failed",
                    "text": action.text,
                    "utterance": utterance.to_dict(),
                },
            )
        elif isinstance(action, PresentCards):
            # The new pipeline's cards replace the previous set room-wide.
            if action.cards:
                room.active = ActiveCards(
                    pipeline_id=action.pipeline_id,
                    cards=action.cards,
                    effective_query=action.effective_query,
                )
                self._fan_out(room, self._page_event(room, user_id=None))
            else:
                room.active = None

    # -- result cards -------------------------------------------------------------

    def _page_count(self, active: ActiveCards) -> int:
        return max(1, math.ceil(len(active.cards) / self.page_size))

    def _page_event(self, room: _Room, user_id: str | None) -> dict[str, Any]:
        active = room.active
        assert active is not None
        index = active.page_index.get(user_id, 0) if user_id is not None else 0
        start = index * self.page_size
        return {
            "type": "result_page",
            "room_id": room.room_id,
            "pipeline_id": active.pipeline_id,
            "cards": [c.to_dict() for c in active.cards[start : start + self.page_size]],
            "page_index": index,
            "page_count": self._page_count(active),
            "total_cards": len(active.cards),
        }

    def page_nav(self, room_id: str, user_id: str, direction: str) -> dict[str, Any]:
        """Move the user's result page by one, clamped to the valid range.

        A clamped no-op emits no search record and no event; a real move
        logs one record and sends the new page to this user only.
        """
        if direction not in ("next", "prev"):
            raise ServiceError(f"direction must be next or prev, got {direction!r}")
        room = self._room(room_id)
        with room.lock:
            if user_id not in room.members:
                raise NotAMember(f"{user_id!r} has not joined {room_id!r}")
            active = room.active
            if active is None:
                raise NoActiveResults("no result cards are active in this room")
            current = active.page_index.get(user_id, 0)
            delta = 1 if direction == "next" else -1
            target = min(max(current + delta, 0), self._page_count(active) - 1)
            event = self._page_event(room, user_id)
            if target == current:
                return event
            active.page_index[user_id] = target
            self.logs.append(
                SearchRecord(
                    room_id=room_id,
                    user_id=user_id,
                    pipeline_id=active.pipeline_id,
                    action=SearchAction.PAGE_NEXT if delta > 0 else SearchAction.PAGE_PREV,
                    effective_query=active.effective_query,
                    page_index=target,
                    timestamp=self.agent.clock(),
                )
            )
            event = self._page_event(room, user_id)
            self._fan_out(room, event, only_user=user_id)
            return event

    def click(self, room_id: str, user_id: str, rank: int) -> str:
        """Record a click on a result card and return its link to open."""
        room = self._room(room_id)
        with room.lock:
            if user_id not in room.members:
                raise NotAMember(f"{user_id!r} has not joined {room_id!r}")
            active = room.active
            if active is None:
                raise NoActiveResults("no result cards are active in this room")
            if not 1 <= rank <= len(active.cards):
                raise UnknownRank(f"rank {rank} is not in 1..{len(active.cards)}")
            card = active.cards[rank - 1]
            self.logs.append(
                ClickRecord(
                    room_id=room_id,
                    user_id=user_id,
                    pipeline_id=active.pipeline_id,
                    result_rank=rank,
                    link=card.link,
                    timestamp=self.agent.clock(),
                )
            )
            return card.link
