"""Command-line entry points for the experiment pipeline."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from .config import load_config
from .errors import ProsogapError
from .pipeline import (
    EXIT_FATAL,
    run_evaluate,
    run_export_mushra,
    run_prepare,
    run_sensitivity,
    run_synthesize,
)

_config_option = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=False, path_type=Path),
    help="Experiment config JSON.",
)
_seed_option = click.option("--seed", type=int, default=None, help="Override the config seed.")
_workers_option = click.option(
    "--workers", type=int, default=None, help="Override the config worker count."
)


def _run(stage, config_path: Path, seed: Optional[int], workers: Optional[int], **kwargs) -> None:
    try:
        cfg = load_config(config_path, seed=seed, workers=workers)
        code = stage(cfg, **kwargs)
    except ProsogapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    sys.exit(code)


@click.group()
def main() -> None:
    """Incremental synthesis experiments: predictions, audio, metrics,
    sensitivity, and listening tests."""


@main.command()
@_config_option
@_seed_option
@_workers_option
def prepare(config_path: Path, seed: Optional[int], workers: Optional[int]) -> None:
    """Fill the next-word prediction cache."""
    _run(run_prepare, config_path, seed, workers)


@main.command()
@_config_option
@_seed_option
@_workers_option
def synthesize(config_path: Path, seed: Optional[int], workers: Optional[int]) -> None:
    """Synthesize every lookahead condition and assemble audio."""
    _run(run_synthesize, config_path, seed, workers)


@main.command()
@_config_option
@_seed_option
@_workers_option
def evaluate(config_path: Path, seed: Optional[int], workers: Optional[int]) -> None:
    """Compute duration, energy and pitch error tables."""
    _run(run_evaluate, config_path, seed, workers)


@main.command()
@_config_option
@_seed_option
@_workers_option
@click.option(
    "--ratings",
    "ratings_csv",
    type=click.Path(path_type=Path),
    default=None,
    help="Listening-test export CSV to correlate against.",
)
def sensitivity(
    config_path: Path,
    seed: Optional[int],
    workers: Optional[int],
    ratings_csv: Optional[Path],
) -> None:
    """Per-phoneme feature ranges, JND classification and sentence scores."""
    _run(run_sensitivity, config_path, seed, workers, ratings_csv=ratings_csv)


@main.command("export-mushra")
@_config_option
@_seed_option
@_workers_option
@click.option(
    "--sentences",
    "sentences",
    default=None,
    help="Comma-separated utterance ids (default: config, else first 20).",
)
def export_mushra(
    config_path: Path,
    seed: Optional[int],
    workers: Optional[int],
    sentences: Optional[str],
) -> None:
    """Build a listening-test bundle from assembled audio."""
    ids = [s.strip() for s in sentences.split(",") if s.strip()] if sentences else None
    _run(run_export_mushra, config_path, seed, workers, sentence_ids=ids)


@main.command("serve-mushra")
@click.option(
    "--bundle",
    "bundle_dir",
    required=True,
    type=click.Path(exists=True, path_type=Path),
    help="Bundle directory containing trials.json and trials/.",
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True, type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--log",
    "log_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Ratings log (default: <bundle>/ratings.jsonl).",
)
@click.option(
    "--static",
    "static_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory with the listener UI to serve at /.",
)
def serve_mushra(
    bundle_dir: Path,
    host: str,
    port: int,
    seed: int,
    log_path: Optional[Path],
    static_dir: Optional[Path],
) -> None:
    """Serve the listening test over HTTP."""
    import uvicorn

    from .mushra.app import create_app
    from .mushra.core import MushraService, load_trial_bundle

    try:
        trials = load_trial_bundle(bundle_dir)
        service = MushraService(
            trials,
            log_path or bundle_dir / "ratings.jsonl",
            seed=seed,
            bundle_dir=bundle_dir,
        )
    except ProsogapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    app = create_app(service, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
