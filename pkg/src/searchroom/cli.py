"""Command-line entry points: replay harness, report diff, server, log export."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .model import canonical_json
from .orchestrator import MissingRewrite, ModeReport
from .replay import CorpusError, ScenarioMismatch, diff_reports, replay_corpus


@click.group()
def main() -> None:
    """Collaborative search agent toolbox."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--mode", default="all", type=click.Choice(["1", "2", "3", "4", "all"]))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Service config supplying live providers (with --live).")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--live", is_flag=True, default=False,
              help="Use the configured live providers instead of the scenario scripts.")
@click.option("--seed-clock", "seed_clock", type=int, default=None,
              help="Epoch-ms fallback for scenarios without clock_ms (rarely needed).")
def replay(corpus: Path, mode: str, config_path: Path | None, out: Path, live: bool,
           seed_clock: int | None) -> None:
    """Replay a scenario corpus through the result-returning modes."""
    llm = search = fetcher = None
    if live:
        if config_path is None:
            raise click.UsageError("--live needs --config to know the providers")
        from .config import AppConfig

        app_config = AppConfig.load(config_path)
        llm, search, fetcher = (
            app_config.build_llm(), app_config.build_search(), app_config.build_fetcher()
        )
    try:
        written = replay_corpus(corpus, mode, out, llm=llm, search=search, fetcher=fetcher)
    except CorpusError as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(2)
    except MissingRewrite as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for path in written:
        click.echo(str(path))
    click.echo(f"{len(written)} report(s) written to {out}")


@main.command()
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def diff(report_a: Path, report_b: Path) -> None:
    """Show field-level differences between two mode reports."""
    a = ModeReport.from_dict(json.loads(report_a.read_text("utf-8")))
    b = ModeReport.from_dict(json.loads(report_b.read_text("utf-8")))
    try:
        delta = diff_reports(a, b)
    except ScenarioMismatch as exc:
        click.echo(f"error: reports are from different scenarios: {exc}", err=True)
        sys.exit(2)
    if delta:
        click.echo(delta)
        sys.exit(1)
    click.echo("reports are identical on compared fields")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True, type=int)
def serve(config_path: Path, host: str, port: int) -> None:
    """Run the chat service with the websocket wire protocol."""
    import uvicorn

    from .server import app_from_config

    uvicorn.run(app_from_config(str(config_path)), host=host, port=port, log_level="info")


@main.command("export-logs")
@click.option("--storage", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--room", "room_id", default=None, help="Limit to one room.")
def export_logs(storage: Path, room_id: str | None) -> None:
    """Print the merged, time-sorted behavior-log stream as JSON lines."""
    from .logs import FileLogStore

    store = FileLogStore(storage)
    records = store.scan(room_id) if room_id else list(store.export_merged())
    for record in records:
        click.echo(canonical_json(record.to_dict()))


if __name__ == "__main__":
    main()
