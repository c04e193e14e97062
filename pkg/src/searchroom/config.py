"""Service configuration: one JSON file wires providers, limits, and storage.

Example::

    {
      "mention_token": "@searchagent",
      "locale": "en",
      "window_limit": 20,
      "max_results": 10,
      "token_cap": 5000,
      "page_size": 3,
      "max_clarification_rounds": 1,
      "storage_path": "./logs",
      "llm": {"kind": "scripted", "script_path": "fixtures/scenarios/tv-lead-actor.json"},
      "search": {"kind": "corpus", "corpus_dir": "fixtures/webdocs"},
      "fetcher": {"kind": "corpus", "corpus_dir": "fixtures/webdocs"}
    }

Live providers name the environment variables their credentials come from
(``api_key_env``); the key itself never lives in the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .llm.providers import HttpLlmProvider, LlmProvider, ScriptedProvider
from .logs import FileLogStore, LogStore, MemoryLogStore
from .model import Locale
from .orchestrator import DEFAULT_AGENT_ID, DEFAULT_MENTION_TOKEN, AgentPipeline, PipelineConfig
from .pages import CorpusFetcher, HttpFetcher, PageFetcher
from .search import CorpusIndex, CorpusSearchProvider, HttpSearchProvider, SearchProvider
from .service import ChatService


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AppConfig:
    mention_token: str = DEFAULT_MENTION_TOKEN
    agent_id: str = DEFAULT_AGENT_ID
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    storage_path: str | None = None
    llm: Mapping[str, Any] = field(default_factory=dict)
    search: Mapping[str, Any] = field(default_factory=dict)
    fetcher: Mapping[str, Any] = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path) -> AppConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        pipeline_keys = (
            "max_clarification_rounds", "window_limit", "max_results",
            "token_cap", "locale", "page_size", "clarification_expiry_ms",
        )
        pipeline = PipelineConfig.from_dict(
            {k: data[k] for k in pipeline_keys if k in data}
        )
        return cls(
            mention_token=data.get("mention_token", DEFAULT_MENTION_TOKEN),
            agent_id=data.get("agent_id", DEFAULT_AGENT_ID),
            pipeline=pipeline,
            storage_path=data.get("storage_path"),
            llm=data.get("llm", {}),
            search=data.get("search", {}),
            fetcher=data.get("fetcher", {}),
            base_dir=path.parent,
        )

    def _resolve(self, relative: str) -> Path:
        path = Path(relative)
        return path if path.is_absolute() else self.base_dir / path

    def _env(self, spec: Mapping[str, Any]) -> str | None:
        name = spec.get("api_key_env")
        if not name:
            return None
        value = os.environ.get(name)
        if value is None:
            raise ConfigError(f"environment variable {name} is not set")
        return value

    def build_llm(self) -> LlmProvider:
        kind = self.llm.get("kind", "scripted")
        if kind == "scripted":
            script_path = self.llm.get("script_path")
            if script_path is None:
                return ScriptedProvider([])
            data = json.loads(self._resolve(script_path).read_text("utf-8"))
            rules = data["script"] if isinstance(data, dict) else data
            return ScriptedProvider.from_dicts(rules)
        if kind == "http":
            return HttpLlmProvider(
                base_url=self.llm["base_url"],
                model_id=self.llm.get("model_id", "default"),
                api_key=self._env(self.llm),
                timeout_s=float(self.llm.get("timeout_s", 30.0)),
            )
        raise ConfigError(f"unknown llm kind {kind!r}")

    def build_search(self) -> SearchProvider:
        kind = self.search.get("kind", "corpus")
        if kind == "corpus":
            return CorpusSearchProvider(self._index(self.search))
        if kind == "http":
            return HttpSearchProvider(
                base_url=self.search["base_url"],
                api_key=self._env(self.search),
                timeout_s=float(self.search.get("timeout_s", 10.0)),
            )
        raise ConfigError(f"unknown search kind {kind!r}")

    def build_fetcher(self) -> PageFetcher:
        kind = self.fetcher.get("kind", "corpus")
        if kind == "corpus":
            return CorpusFetcher(self._index(self.fetcher))
        if kind == "http":
            return HttpFetcher(timeout_s=float(self.fetcher.get("timeout_s", 10.0)))
        raise ConfigError(f"unknown fetcher kind {kind!r}")

    def _index(self, spec: Mapping[str, Any]) -> CorpusIndex:
        corpus_dir = spec.get("corpus_dir")
        if corpus_dir is None:
            raise ConfigError("corpus provider needs a corpus_dir")
        return CorpusIndex.load(self._resolve(corpus_dir))

    def build_logs(self) -> LogStore:
        if self.storage_path is None:
            return MemoryLogStore()
        return FileLogStore(self._resolve(self.storage_path))

    def build_service(self) -> ChatService:
        logs = self.build_logs()
        agent = AgentPipeline(
            llm=self.build_llm(),
            search=self.build_search(),
            fetcher=self.build_fetcher(),
            logs=logs,
            config=self.pipeline,
            mention_token=self.mention_token,
            agent_id=self.agent_id,
        )
        return ChatService(agent, logs, page_size=self.pipeline.page_size)
