"""Offline replay harness: run transcript scenarios through the four
result-returning modes with scripted providers and write comparison reports.

A corpus is a directory of scenario JSON files (see docs/scenario.schema.json).
Each scenario is self-contained: transcript, query, scripted provider
responses, and a pointer to the mock web corpus. Replays are bit-reproducible
because every timestamp comes from the scenario file, never the wall clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Sequence

import jsonschema

from .llm.providers import LlmProvider, ScriptedProvider
from .logs import MemoryLogStore
from .model import Utterance, canonical_json, validate_context
from .orchestrator import (
    MODE_NUMBERS,
    MODES_BY_NUMBER,
    AgentPipeline,
    Mode,
    ModeReport,
    PipelineConfig,
)
from .pages import CorpusFetcher, PageFetcher
from .search import CorpusIndex, CorpusSearchProvider, SearchProvider


class CorpusError(Exception):
    """A scenario file failed to parse or validate."""

    def __init__(self, path: Path, message: str, line: int | None = None):
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class ScenarioMismatch(Exception):
    """diff_reports was given reports from different scenarios."""


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    path: Path
    locale: str
    clock_ms: int
    web_corpus: Path
    room_id: str
    transcript: tuple[Utterance, ...]
    query: str
    script: tuple[dict[str, Any], ...]
    human_rewrite: str | None = None
    clarification_reply: str | None = None
    config: dict[str, Any] | None = None


def _schema(name: str) -> dict[str, Any]:
    text = resources.files("searchroom").joinpath("schemas").joinpath(name).read_text("utf-8")
    return json.loads(text)


def load_scenario(path: Path) -> Scenario:
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(path, f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    try:
        jsonschema.validate(data, _schema("scenario.schema.json"))
    except jsonschema.ValidationError as exc:
        pointer = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise CorpusError(path, f"schema violation at {pointer}: {exc.message}") from exc
    try:
        transcript = tuple(Utterance.from_dict(u) for u in data["transcript"])
    except ValueError as exc:
        raise CorpusError(path, f"bad transcript utterance: {exc}") from exc
    return Scenario(
        scenario_id=data["scenario_id"],
        path=path,
        locale=data["locale"],
        clock_ms=int(data["clock_ms"]),
        web_corpus=(path.parent / data["web_corpus"]).resolve(),
        room_id=data.get("room_id", "replay"),
        transcript=transcript,
        query=data["query"],
        script=tuple(data["script"]),
        human_rewrite=data.get("human_rewrite"),
        clarification_reply=data.get("clarification_reply"),
        config=data.get("config"),
    )


def load_corpus(corpus_dir: Path) -> list[Scenario]:
    """All scenarios in the directory, sorted by scenario id."""
    scenarios = [load_scenario(p) for p in sorted(corpus_dir.glob("*.json"))]
    seen: set[str] = set()
    for scenario in scenarios:
        if scenario.scenario_id in seen:
            raise CorpusError(scenario.path, f"duplicate scenario_id {scenario.scenario_id!r}")
        seen.add(scenario.scenario_id)
    return sorted(scenarios, key=lambda s: s.scenario_id)


def scenario_config(scenario: Scenario, mode: Mode) -> PipelineConfig:
    overrides = dict(scenario.config or {})
    overrides["mode"] = mode.value
    overrides.setdefault("locale", scenario.locale)
    return PipelineConfig.from_dict(overrides)


def build_pipeline(
    scenario: Scenario,
    *,
    llm: LlmProvider | None = None,
    search: SearchProvider | None = None,
    fetcher: PageFetcher | None = None,
) -> AgentPipeline:
    """Scripted, clock-seeded pipeline for one scenario.

    Pass live providers to override the scripted ones (the --live flag);
    anything not overridden stays deterministic.
    """
    index = CorpusIndex.load(scenario.web_corpus)
    ticker = _SeededClock(scenario.clock_ms)
    return AgentPipeline(
        llm=llm or ScriptedProvider.from_dicts(scenario.script),
        search=search or CorpusSearchProvider(index),
        fetcher=fetcher or CorpusFetcher(index),
        logs=MemoryLogStore(),
        config=scenario_config(scenario, Mode.FULL_AGENT),
        clock=ticker,
    )


class _SeededClock:
    """Deterministic clock: scenario epoch plus one second per tick."""

    def __init__(self, start_ms: int):
        self._now = start_ms

    def __call__(self) -> int:
        self._now += 1000
        return self._now


def run_scenario_mode(scenario: Scenario, mode: Mode, pipeline: AgentPipeline | None = None) -> ModeReport:
    pipeline = pipeline or build_pipeline(scenario)
    config = scenario_config(scenario, mode)
    transcript = validate_context(scenario.transcript, config.window_limit)
    report = pipeline.run_mode(
        transcript, scenario.query, config, human_rewrite=scenario.human_rewrite
    )
    return replace(report, scenario_id=scenario.scenario_id)


def modes_for(scenario: Scenario, selector: str) -> list[Mode]:
    """Expand a --mode selector; ``all`` means every applicable mode
    (wizard-of-oz is skipped when the scenario carries no human rewrite)."""
    if selector == "all":
        modes = list(MODE_NUMBERS)
        if not scenario.human_rewrite:
            modes.remove(Mode.WIZARD_OF_OZ)
        return modes
    return [MODES_BY_NUMBER[int(selector)]]


def report_path(out_dir: Path, report: ModeReport) -> Path:
    return out_dir / f"{report.scenario_id}.mode-{MODE_NUMBERS[report.mode]}.json"


def write_report(out_dir: Path, report: ModeReport) -> Path:
    try:
        jsonschema.validate(report.to_dict(), _schema("report.schema.json"))
    except jsonschema.ValidationError as exc:  # pragma: no cover - a bug guard
        raise RuntimeError(f"generated report violates its schema: {exc.message}") from exc
    path = report_path(out_dir, report)
    path.write_text(canonical_json(report.to_dict(), indent=2) + "\n", "utf-8")
    return path


def replay_corpus(
    corpus_dir: Path,
    mode_selector: str,
    out_dir: Path,
    *,
    llm: LlmProvider | None = None,
    search: SearchProvider | None = None,
    fetcher: PageFetcher | None = None,
) -> list[Path]:
    """Run every scenario in the corpus and write one report per mode."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for scenario in load_corpus(corpus_dir):
        for mode in modes_for(scenario, mode_selector):
            pipeline = build_pipeline(scenario, llm=llm, search=search, fetcher=fetcher)
            report = run_scenario_mode(scenario, mode, pipeline)
            written.append(write_report(out_dir, report))
    return written


def _links(report: ModeReport) -> list[str]:
    if report.cards:
        return [card.link for card in report.cards]
    return [entry.link for entry in report.results]


def diff_reports(a: ModeReport, b: ModeReport) -> str:
    """Field-level differences between two reports of the same scenario.

    Returns an empty string when the reports agree on effective query,
    result links, cited ranks, and answer presence.
    """
    if a.scenario_id != b.scenario_id:
        raise ScenarioMismatch(f"{a.scenario_id!r} vs {b.scenario_id!r}")
    label_a = f"mode-{MODE_NUMBERS[a.mode]}"
    label_b = f"mode-{MODE_NUMBERS[b.mode]}"
    lines: list[str] = []
    if a.effective_query != b.effective_query:
        lines.append(
            f"effective_query: {label_a}={a.effective_query!r} {label_b}={b.effective_query!r}"
        )
    links_a, links_b = _links(a), _links(b)
    if links_a != links_b:
        lines.append(f"result_links: {label_a}={links_a} {label_b}={links_b}")
    cited_a = a.answer.cited_ranks() if a.answer else ()
    cited_b = b.answer.cited_ranks() if b.answer else ()
    if cited_a != cited_b:
        lines.append(f"cited_ranks: {label_a}={list(cited_a)} {label_b}={list(cited_b)}")
    if (a.answer is None) != (b.answer is None):
        lines.append(
            f"answer: {label_a}={'present' if a.answer else 'absent'} "
            f"{label_b}={'present' if b.answer else 'absent'}"
        )
    return "\n".join(lines)
