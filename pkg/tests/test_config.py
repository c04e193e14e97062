from __future__ import annotations

import json
from pathlib import Path

import pytest

from searchroom.config import AppConfig, ConfigError
from searchroom.llm.providers import HttpLlmProvider, ScriptedProvider
from searchroom.logs import FileLogStore, MemoryLogStore
from searchroom.model import Locale
from searchroom.pages import CorpusFetcher, HttpFetcher
from searchroom.search import CorpusSearchProvider, HttpSearchProvider

REPO_ROOT = Path(__file__).resolve().parent.parent


def test_example_config_builds_a_working_service(tmp_path) -> None:
    data = json.loads((REPO_ROOT / "config.example.json").read_text("utf-8"))
    data["storage_path"] = str(tmp_path / "logs")
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(data), "utf-8")
    # Relative fixture paths resolve against the config file directory.
    data["llm"]["script_path"] = str(REPO_ROOT / "fixtures/scenarios/tv-lead-actor.json")
    data["search"]["corpus_dir"] = str(REPO_ROOT / "fixtures/webdocs")
    data["fetcher"]["corpus_dir"] = str(REPO_ROOT / "fixtures/webdocs")
    config_path.write_text(json.dumps(data), "utf-8")

    config = AppConfig.load(config_path)
    assert config.pipeline.locale is Locale.EN
    assert config.pipeline.window_limit == 20
    service = config.build_service()
    room = service.create_room("demo")
    service.join(room, "alice")
    service.post_message(room, "alice", "@searchagent who is the lead actor")
    history = service.history(room)
    assert any(u.is_agent for u in history)


def test_default_providers_and_memory_store(tmp_path) -> None:
    config_path = tmp_path / "c.json"
    config_path.write_text(
        json.dumps(
            {
                "search": {"kind": "corpus", "corpus_dir": str(REPO_ROOT / "fixtures/webdocs")},
                "fetcher": {"kind": "corpus", "corpus_dir": str(REPO_ROOT / "fixtures/webdocs")},
            }
        ),
        "utf-8",
    )
    config = AppConfig.load(config_path)
    assert isinstance(config.build_llm(), ScriptedProvider)
    assert isinstance(config.build_logs(), MemoryLogStore)
    assert isinstance(config.build_search(), CorpusSearchProvider)
    assert isinstance(config.build_fetcher(), CorpusFetcher)


def test_http_providers_and_env_credentials(tmp_path, monkeypatch) -> None:
    config_path = tmp_path / "c.json"
    config_path.write_text(
        json.dumps(
            {
                "storage_path": str(tmp_path / "logs"),
                "llm": {"kind": "http", "base_url": "https://llm.example",
                        "model_id": "m", "api_key_env": "LLM_KEY"},
                "search": {"kind": "http", "base_url": "https://serp.example"},
                "fetcher": {"kind": "http", "timeout_s": 5},
            }
        ),
        "utf-8",
    )
    config = AppConfig.load(config_path)
    with pytest.raises(ConfigError, match="LLM_KEY"):
        config.build_llm()
    monkeypatch.setenv("LLM_KEY", "sk-secret")
    assert isinstance(config.build_llm(), HttpLlmProvider)
    assert isinstance(config.build_search(), HttpSearchProvider)
    assert isinstance(config.build_fetcher(), HttpFetcher)
    assert isinstance(config.build_logs(), FileLogStore)


def test_config_errors(tmp_path) -> None:
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{oops", "utf-8")
    with pytest.raises(ConfigError, match="bad.json:1"):
        AppConfig.load(bad_json)

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"llm": {"kind": "telepathy"}}), "utf-8")
    with pytest.raises(ConfigError, match="telepathy"):
        AppConfig.load(unknown).build_llm()

    no_dir = tmp_path / "nodir.json"
    no_dir.write_text(json.dumps({"search": {"kind": "corpus"}}), "utf-8")
    with pytest.raises(ConfigError, match="corpus_dir"):
        AppConfig.load(no_dir).build_search()
