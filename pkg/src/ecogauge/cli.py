"""Command-line entry points: serve, replay, analyze, export, config-check."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from . import history
from .config import ConfigError, ServiceConfig, load_config
from .eventlog import EventLog, parse_iso
from .footprint import PROFILES
from .service import Service, TraceError, load_trace, replay_trace


def _load(config_path: Optional[str], profile: Optional[str] = None) -> ServiceConfig:
    try:
        config = load_config(config_path)
    except (ConfigError, OSError) as exc:
        raise click.ClickException(str(exc))
    if profile is not None:
        if profile not in PROFILES:
            raise click.ClickException(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
        config = replace(config, resource_profile=profile)
    return config


@click.group()
def main() -> None:
    """Eco-feedback gateway for LLM chat usage."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file.")
@click.option("--listen", default=None, help="Override host:port to bind.")
@click.option("--storage-dir", default=None, help="Override the storage directory.")
def serve(config_path: Optional[str], listen: Optional[str], storage_dir: Optional[str]) -> None:
    """Run the HTTP service (and the observing proxy when enabled)."""
    import uvicorn

    from .api import create_app

    config = _load(config_path)
    if listen:
        config = replace(config, listen=listen)
    if storage_dir:
        config = replace(config, storage_dir=storage_dir)

    service = Service(config)
    app = create_app(service)

    proxy = None
    if config.proxy.enabled:
        from .proxy import ObservingProxy

        host, _, port = config.proxy.listen.partition(":")
        proxy = ObservingProxy(
            host, int(port or 8081), config.proxy.upstream,
            on_record=service.handle_transaction,
            user_header=config.proxy.user_header,
            default_user=config.proxy.default_user,
        )
        proxy.start()
        click.echo(f"proxy observing on {config.proxy.listen} -> {config.proxy.upstream}")

    host, _, port = config.listen.partition(":")
    try:
        uvicorn.run(app, host=host, port=int(port or 8080))
    finally:
        if proxy is not None:
            proxy.stop()


@main.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True,
              help="JSONL trace: {user_id, occurred_at, kind?} per line, sorted per user.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the trajectory report here (default: stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--profile", default=None, help="Resource profile override.")
def replay(trace_path: str, out_path: Optional[str], config_path: Optional[str],
           profile: Optional[str]) -> None:
    """Deterministically replay a timestamped query trace and report the trajectory."""
    config = _load(config_path, profile)
    try:
        report = replay_trace(load_trace(Path(trace_path)), config)
    except (TraceError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc))
    document = json.dumps(report, indent=2)
    if out_path:
        Path(out_path).write_text(document + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(document)


@main.command()
@click.option("--export", "export_path", type=click.Path(exists=True), required=True,
              help="Path to conversations.json.")
@click.option("--download-date", required=True, help="Install date, YYYY-MM-DD (UTC midnight).")
@click.option("--profile", default=None, type=click.Choice(sorted(PROFILES)),
              help="Resource profile for the footprint summary.")
@click.option("--format", "fmt", default="human", type=click.Choice(["human", "json"]))
def analyze(export_path: str, download_date: str, profile: Optional[str], fmt: str) -> None:
    """Count user messages in the pre-trial and trial windows of a chat export."""
    config = _load(None, profile)
    try:
        export = history.parse_export(Path(export_path).read_text(encoding="utf-8"))
        window = history.AnalysisWindow.from_date_string(download_date)
    except (history.ExportParseError, history.ExportSchemaError, ValueError) as exc:
        raise click.ClickException(str(exc))
    report = history.count_windows(export, window)
    if fmt == "human":
        for line in history.report_lines(report):
            click.echo(line)
    else:
        click.echo(json.dumps({
            "queries_in_trial": report.queries_in_trial,
            "queries_before_trial": report.queries_before_trial,
            "footprint": history.footprint_report(report, config.resource_model()),
        }, indent=2))


@main.command(name="export")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--storage-dir", default=None, help="Storage directory holding events.jsonl.")
@click.option("--from", "start", default=None, help="Window start (ISO-8601).")
@click.option("--to", "end", default=None, help="Window end (ISO-8601).")
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "jsonl"]))
@click.option("--out", "out_path", type=click.Path(), default=None)
def export_cmd(config_path: Optional[str], storage_dir: Optional[str], start: Optional[str],
               end: Optional[str], fmt: str, out_path: Optional[str]) -> None:
    """Export the event log, optionally filtered to a time window."""
    config = _load(config_path)
    if storage_dir:
        config = replace(config, storage_dir=storage_dir)
    log = EventLog(config.storage_path() / "events.jsonl")
    document = log.export(
        start=parse_iso(start) if start else None,
        end=parse_iso(end) if end else None,
        fmt=fmt,
    )
    if out_path:
        Path(out_path).write_text(document, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        sys.stdout.write(document)


@main.command(name="config-check")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def config_check(config_path: str) -> None:
    """Validate a config file and print the derived settings."""
    config = _load(config_path)
    service_view = {
        "resource_profile": config.resource_profile,
        "listen": config.listen,
        "storage_dir": config.storage_dir,
        "popup": {"limit": config.popup_limit, "mode": config.popup_mode},
        "ingest": {
            "url_pattern": config.url_pattern,
            "ignore_substrings": list(config.ignore_substrings),
            "proxy_enabled": config.proxy.enabled,
        },
        "read_more_url": config.read_more_url,
    }
    click.echo("config OK")
    click.echo(json.dumps(service_view, indent=2))


if __name__ == "__main__":
    main()
