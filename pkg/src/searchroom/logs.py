"""Durable, append-only behavior logs: conversation, search, and click.

Records are immutable values with the canonical JSON encoding; the tagged
union discriminator is the ``record_type`` field. The file store writes one
UTF-8, newline-delimited JSON record per line, split into numbered parts
once a part exceeds the size limit. A relational store can be added behind
the same interface.
"""

from __future__ import annotations

import json
import sys
import threading
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Union

from .model import canonical_json

MAX_BUFFERED_RECORDS = 10_000
DEFAULT_PART_BYTES = 32 * 1024 * 1024


class ConversationKind(str, Enum):
    USER_MESSAGE = "user_message"
    AGENT_ANSWER = "agent_answer"
    AGENT_CLARIFICATION = "agent_clarification"
    AGENT_ERROR = "agent_error"


class SearchAction(str, Enum):
    ISSUED = "issued"
    PAGE_NEXT = "page_next"
    PAGE_PREV = "page_prev"


class StorageUnavailable(Exception):
    pass


@dataclass(frozen=True)
class ConversationRecord:
    room_id: str
    author_id: str
    text: str
    timestamp: int
    kind: ConversationKind
    pipeline_id: str | None = None
    record_id: int = 0  # assigned by the store at append time

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_type": "conversation",
            "record_id": self.record_id,
            "room_id": self.room_id,
            "author_id": self.author_id,
            "text": self.text,
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "pipeline_id": self.pipeline_id,
        }


@dataclass(frozen=True)
class SearchRecord:
    room_id: str
    user_id: str
    pipeline_id: str
    action: SearchAction
    effective_query: str
    page_index: int
    timestamp: int
    record_id: int = 0

    def __post_init__(self) -> None:
        if self.page_index < 0:
            raise ValueError("page_index must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_type": "search",
            "record_id": self.record_id,
            "room_id": self.room_id,
            "user_id": self.user_id,
            "pipeline_id": self.pipeline_id,
            "action": self.action.value,
            "effective_query": self.effective_query,
            "page_index": self.page_index,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class ClickRecord:
    room_id: str
    user_id: str
    pipeline_id: str
    result_rank: int
    link: str
    timestamp: int
    record_id: int = 0

    def __post_init__(self) -> None:
        if self.result_rank < 1:
            raise ValueError("result_rank must be 1-based")

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_type": "click",
            "record_id": self.record_id,
            "room_id": self.room_id,
            "user_id": self.user_id,
            "pipeline_id": self.pipeline_id,
            "result_rank": self.result_rank,
            "link": self.link,
            "timestamp": self.timestamp,
        }


BehaviorLogRecord = Union[ConversationRecord, SearchRecord, ClickRecord]


def record_from_dict(data: Mapping[str, Any]) -> BehaviorLogRecord:
    record_type = data["record_type"]
    if record_type == "conversation":
        return ConversationRecord(
            room_id=data["room_id"],
            author_id=data["author_id"],
            text=data["text"],
            timestamp=int(data["timestamp"]),
            kind=ConversationKind(data["kind"]),
            pipeline_id=data.get("pipeline_id"),
            record_id=int(data["record_id"]),
        )
    if record_type == "search":
        return SearchRecord(
            room_id=data["room_id"],
            user_id=data["user_id"],
            pipeline_id=data["pipeline_id"],
            action=SearchAction(data["action"]),
            effective_query=data["effective_query"],
            page_index=int(data["page_index"]),
            timestamp=int(data["timestamp"]),
            record_id=int(data["record_id"]),
        )
    if record_type == "click":
        return ClickRecord(
            room_id=data["room_id"],
            user_id=data["user_id"],
            pipeline_id=data["pipeline_id"],
            result_rank=int(data["result_rank"]),
            link=data["link"],
            timestamp=int(data["timestamp"]),
            record_id=int(data["record_id"]),
        )
    raise ValueError(f"unknown record_type {record_type!r}")


def record_type_of(record: BehaviorLogRecord) -> str:
    return record.to_dict()["record_type"]


class LogStore(ABC):
    """Append-only record storage; appends within a room are serialized."""

    @abstractmethod
    def append(self, record: BehaviorLogRecord) -> BehaviorLogRecord:
        """Persist the record and return it stamped with its record_id.

        The record is durable (or safely buffered, see FileLogStore) before
        this returns; a scan issued afterwards will include it.
        """

    @abstractmethod
    def scan(
        self,
        room_id: str,
        *,
        record_types: Iterable[str] | None = None,
        start_ms: int | None = None,
        end_ms: int | None = None,
    ) -> list[BehaviorLogRecord]:
        """Records for a room in append order, optionally filtered by record
        type and half-open time range ``[start_ms, end_ms)``."""

    @abstractmethod
    def rooms(self) -> list[str]:
        """All room ids that have at least one record."""

    def export_merged(self) -> Iterator[BehaviorLogRecord]:
        """One stream over all rooms, sorted by (timestamp, room, record_id)."""
        merged: list[BehaviorLogRecord] = []
        for room_id in self.rooms():
            merged.extend(self.scan(room_id))
        merged.sort(key=lambda r: (r.timestamp, r.room_id, r.record_id))
        return iter(merged)


def _matches(
    record: BehaviorLogRecord,
    record_types: set[str] | None,
    start_ms: int | None,
    end_ms: int | None,
) -> bool:
    if record_types is not None and record_type_of(record) not in record_types:
        return False
    if start_ms is not None and record.timestamp < start_ms:
        return False
    if end_ms is not None and record.timestamp >= end_ms:
        return False
    return True


class MemoryLogStore(LogStore):
    """In-memory store for tests and replays."""

    def __init__(self) -> None:
        self._records: dict[str, list[BehaviorLogRecord]] = {}
        self._lock = threading.Lock()

    def append(self, record: BehaviorLogRecord) -> BehaviorLogRecord:
        with self._lock:
            room = self._records.setdefault(record.room_id, [])
            stamped = replace(record, record_id=len(room) + 1)
            room.append(stamped)
            return stamped

    def scan(self, room_id, *, record_types=None, start_ms=None, end_ms=None):
        kinds = set(record_types) if record_types is not None else None
        with self._lock:
            records = list(self._records.get(room_id, ()))
        return [r for r in records if _matches(r, kinds, start_ms, end_ms)]

    def rooms(self) -> list[str]:
        with self._lock:
            return sorted(self._records)


class FileLogStore(LogStore):
    """Append-only JSONL files, one sequence of numbered parts per room.

    Writes are flushed and fsynced before acknowledgment. If the filesystem
    turns unavailable, up to MAX_BUFFERED_RECORDS records are buffered in
    memory and retried on later appends; on overflow the oldest buffered
    record is dropped with a diagnostic on stderr.
    """

    def __init__(self, directory: str | Path, max_part_bytes: int = DEFAULT_PART_BYTES):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._max_part_bytes = max_part_bytes
        self._lock = threading.Lock()
        self._next_id: dict[str, int] = {}
        self._pending: deque[BehaviorLogRecord] = deque()

    def _parts(self, room_id: str) -> list[Path]:
        return sorted(
            self._dir.glob(f"{room_id}.*.jsonl"),
            key=lambda p: int(p.name.rsplit(".", 2)[-2]),
        )

    def _recover_next_id(self, room_id: str) -> int:
        last = 0
        for part in self._parts(room_id):
            for line in part.read_text("utf-8").splitlines():
                if line.strip():
                    last = json.loads(line)["record_id"]
        return last + 1

    def _current_part(self, room_id: str) -> Path:
        parts = self._parts(room_id)
        if not parts:
            return self._dir / f"{room_id}.1.jsonl"
        current = parts[-1]
        if current.stat().st_size >= self._max_part_bytes:
            index = int(current.name.rsplit(".", 2)[-2]) + 1
            return self._dir / f"{room_id}.{index}.jsonl"
        return current

    def _write(self, record: BehaviorLogRecord) -> None:
        import os

        line = canonical_json(record.to_dict())
        path = self._current_part(record.room_id)
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def append(self, record: BehaviorLogRecord) -> BehaviorLogRecord:
        with self._lock:
            room_id = record.room_id
            if room_id not in self._next_id:
                self._next_id[room_id] = self._recover_next_id(room_id)
            stamped = replace(record, record_id=self._next_id[room_id])
            self._next_id[room_id] += 1
            try:
                while self._pending:
                    self._write(self._pending[0])
                    self._pending.popleft()
                self._write(stamped)
            except OSError as exc:
                if len(self._pending) >= MAX_BUFFERED_RECORDS:
                    dropped = self._pending.popleft()
                    print(
                        f"searchroom: log buffer full, dropping record "
                        f"{dropped.room_id}/{dropped.record_id}",
                        file=sys.stderr,
                    )
                print(f"searchroom: log write failed, buffering: {exc}", file=sys.stderr)
                self._pending.append(stamped)
            return stamped

    def scan(self, room_id, *, record_types=None, start_ms=None, end_ms=None):
        kinds = set(record_types) if record_types is not None else None
        records: list[BehaviorLogRecord] = []
        with self._lock:
            parts = self._parts(room_id)
            pending = [r for r in self._pending if r.room_id == room_id]
        for part in parts:
            try:
                text = part.read_text("utf-8")
            except OSError as exc:
                raise StorageUnavailable(str(exc)) from exc
            for line in text.splitlines():
                if line.strip():
                    records.append(record_from_dict(json.loads(line)))
        records.extend(pending)
        return [r for r in records if _matches(r, kinds, start_ms, end_ms)]

    def rooms(self) -> list[str]:
        names = {p.name.rsplit(".", 2)[0] for p in self._dir.glob("*.jsonl")}
        with self._lock:
            names.update(r.room_id for r in self._pending)
        return sorted(names)
