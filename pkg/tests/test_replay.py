from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from searchroom.cli import main
from searchroom.orchestrator import MODE_NUMBERS, Mode, ModeReport
from searchroom.replay import (
    CorpusError,
    ScenarioMismatch,
    diff_reports,
    load_corpus,
    load_scenario,
    modes_for,
    replay_corpus,
    run_scenario_mode,
)

from .conftest import SCENARIOS


def scenario(scenario_id: str):
    return load_scenario(SCENARIOS / f"{scenario_id}.json")


def test_fixture_corpus_loads_in_id_order() -> None:
    scenarios = load_corpus(SCENARIOS)
    assert [s.scenario_id for s in scenarios] == [
        "ambiguous-python",
        "coffee-llm-only",
        "marathon-token-cap",
        "solar-cost",
        "tv-lead-actor",
        "zh-tea",
    ]


def test_bad_json_reports_file_and_line(tmp_path) -> None:
    bad = tmp_path / "broken.json"
    bad.write_text('{\n  "scenario_id": "x",\n  oops\n}', "utf-8")
    with pytest.raises(CorpusError) as excinfo:
        load_scenario(bad)
    assert "broken.json:3" in str(excinfo.value)


def test_schema_violation_reports_pointer(tmp_path) -> None:
    bad = tmp_path / "invalid.json"
    bad.write_text(json.dumps({"scenario_id": "x"}), "utf-8")
    with pytest.raises(CorpusError) as excinfo:
        load_scenario(bad)
    assert "schema violation" in str(excinfo.value)


def test_duplicate_scenario_ids_rejected(tmp_path) -> None:
    source = (SCENARIOS / "tv-lead-actor.json").read_text("utf-8")
    data = json.loads(source)
    data["web_corpus"] = str(SCENARIOS / ".." / "webdocs")
    for name in ("a.json", "b.json"):
        (tmp_path / name).write_text(json.dumps(data), "utf-8")
    with pytest.raises(CorpusError, match="duplicate scenario_id"):
        load_corpus(tmp_path)


# -- frozen expectations for the flagship scenario ------------------------------------


def test_mode_one_searches_raw_query_and_finds_nothing() -> None:
    report = run_scenario_mode(scenario("tv-lead-actor"), Mode.DIRECT_SEARCH)
    assert report.effective_query == "who is the lead actor"
    assert report.results == ()


def test_mode_two_uses_human_rewrite_verbatim() -> None:
    report = run_scenario_mode(scenario("tv-lead-actor"), Mode.WIZARD_OF_OZ)
    assert report.effective_query == "Joy of Life season 2 lead actor"
    assert [e.link for e in report.results] == [
        "https://castdb.example/joy-of-life",
        "https://tvpedia.example/joy-of-life-s2",
        "https://dramareview.example/joy-of-life-review",
        "https://streamnews.example/joy-of-life-renewal",
    ]


def test_modes_three_and_four_agree_and_only_four_answers() -> None:
    three = run_scenario_mode(scenario("tv-lead-actor"), Mode.REWRITE_THEN_SEARCH)
    four = run_scenario_mode(scenario("tv-lead-actor"), Mode.FULL_AGENT)
    assert three.effective_query == four.effective_query
    assert three.answer is None and four.answer is not None
    assert four.answer.cited_ranks() == (1, 2, 3)
    assert [c.source_rank for c in four.cards] == [1, 2, 3]
    assert four.cards[0].link == "https://castdb.example/joy-of-life"
    assert "Zhang Ruoyun" in (four.answer_text or "")


def test_all_empty_extractions_flag_llm_only() -> None:
    report = run_scenario_mode(scenario("coffee-llm-only"), Mode.FULL_AGENT)
    assert report.llm_only is True
    assert report.cards == ()
    assert report.answer is not None
    assert "[" not in (report.answer_text or "[")


def test_modes_for_skips_wizard_without_rewrite(tmp_path) -> None:
    data = json.loads((SCENARIOS / "tv-lead-actor.json").read_text("utf-8"))
    del data["human_rewrite"]
    data["web_corpus"] = "../../fixtures/webdocs"
    path = tmp_path / "no-rewrite.json"
    path.write_text(json.dumps(data), "utf-8")
    loaded = load_scenario(path)
    assert Mode.WIZARD_OF_OZ not in modes_for(loaded, "all")
    assert modes_for(loaded, "2") == [Mode.WIZARD_OF_OZ]


# -- report files ---------------------------------------------------------------------


def test_replay_writes_one_report_per_scenario_mode(tmp_path) -> None:
    written = replay_corpus(SCENARIOS, "all", tmp_path / "out")
    assert len(written) == 24  # 6 scenarios x 4 modes, all carry rewrites
    names = sorted(p.name for p in written)
    assert "tv-lead-actor.mode-1.json" in names
    assert "zh-tea.mode-4.json" in names
    report = ModeReport.from_dict(
        json.loads((tmp_path / "out" / "tv-lead-actor.mode-4.json").read_text("utf-8"))
    )
    assert report.scenario_id == "tv-lead-actor"
    assert report.mode is Mode.FULL_AGENT


def test_replay_is_byte_identical_across_runs(tmp_path) -> None:
    first = replay_corpus(SCENARIOS, "all", tmp_path / "one")
    second = replay_corpus(SCENARIOS, "all", tmp_path / "two")
    assert [p.name for p in first] == [p.name for p in second]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_empty_corpus_writes_nothing(tmp_path) -> None:
    empty = tmp_path / "corpus"
    empty.mkdir()
    assert replay_corpus(empty, "all", tmp_path / "out") == []


# -- diff -----------------------------------------------------------------------------


def test_diff_modes_three_vs_four() -> None:
    three = run_scenario_mode(scenario("tv-lead-actor"), Mode.REWRITE_THEN_SEARCH)
    four = run_scenario_mode(scenario("tv-lead-actor"), Mode.FULL_AGENT)
    delta = diff_reports(three, four)
    assert "effective_query" not in delta
    assert "answer: mode-3=absent mode-4=present" in delta


def test_diff_identical_reports_is_empty() -> None:
    a = run_scenario_mode(scenario("tv-lead-actor"), Mode.FULL_AGENT)
    b = run_scenario_mode(scenario("tv-lead-actor"), Mode.FULL_AGENT)
    assert diff_reports(a, b) == ""


def test_diff_modes_one_vs_two_shows_queries() -> None:
    one = run_scenario_mode(scenario("tv-lead-actor"), Mode.DIRECT_SEARCH)
    two = run_scenario_mode(scenario("tv-lead-actor"), Mode.WIZARD_OF_OZ)
    delta = diff_reports(one, two)
    assert "effective_query" in delta


def test_diff_rejects_mismatched_scenarios() -> None:
    a = run_scenario_mode(scenario("tv-lead-actor"), Mode.DIRECT_SEARCH)
    b = run_scenario_mode(scenario("zh-tea"), Mode.DIRECT_SEARCH)
    with pytest.raises(ScenarioMismatch):
        diff_reports(a, b)


# -- command line -----------------------------------------------------------------------


def test_cli_replay_and_diff(tmp_path) -> None:
    runner = CliRunner()
    out = tmp_path / "reports"
    result = runner.invoke(
        main, ["replay", "--corpus", str(SCENARIOS), "--mode", "all", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "24 report(s)" in result.output

    identical = runner.invoke(
        main,
        ["diff", str(out / "tv-lead-actor.mode-4.json"), str(out / "tv-lead-actor.mode-4.json")],
    )
    assert identical.exit_code == 0

    differing = runner.invoke(
        main,
        ["diff", str(out / "tv-lead-actor.mode-1.json"), str(out / "tv-lead-actor.mode-3.json")],
    )
    assert differing.exit_code == 1
    assert "effective_query" in differing.output

    mismatched = runner.invoke(
        main,
        ["diff", str(out / "tv-lead-actor.mode-1.json"), str(out / "zh-tea.mode-1.json")],
    )
    assert mismatched.exit_code == 2


def test_cli_replay_rejects_bad_corpus(tmp_path) -> None:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "bad.json").write_text("{not json", "utf-8")
    runner = CliRunner()
    result = runner.invoke(
        main, ["replay", "--corpus", str(corpus), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 2
    assert "corpus error" in result.output


def test_cli_empty_corpus_exits_zero(tmp_path) -> None:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    runner = CliRunner()
    result = runner.invoke(
        main, ["replay", "--corpus", str(corpus), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 0
    assert "0 report(s)" in result.output


def test_cli_export_logs(tmp_path) -> None:
    from searchroom.logs import ConversationKind, ConversationRecord, FileLogStore

    store = FileLogStore(tmp_path / "logs")
    store.append(
        ConversationRecord(
            room_id="r1", author_id="a", text="hi", timestamp=5,
            kind=ConversationKind.USER_MESSAGE,
        )
    )
    runner = CliRunner()
    result = runner.invoke(main, ["export-logs", "--storage", str(tmp_path / "logs")])
    assert result.exit_code == 0
    assert json.loads(result.output.strip())["text"] == "hi"
