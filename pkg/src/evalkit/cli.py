"""Command-line entry point.

Exit codes: 0 success, 1 validation or run failure, 2 environment/IO failure.
Every command is a thin adapter over the library flows in workflows.py.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import workflows
from .analysis import meta_results_to_rows
from .config import validate_config
from .errors import EvalKitError, ProjectError
from .server import serve as serve_forever

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ENVIRONMENT = 2


def _exit_for(exc: Exception) -> int:
    if isinstance(exc, (OSError, ProjectError)):
        return EXIT_ENVIRONMENT
    return EXIT_FAILURE


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (EvalKitError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_for(exc))


def _parse_levels(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise click.BadParameter(f"levels must be integers, got {text!r}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Evaluate LLM outputs and meta-evaluate the evaluators."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path: str):
    """Validate a pipeline config file, reporting every problem found."""
    try:
        report = validate_config(config_path)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENVIRONMENT)
    except EvalKitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(report.to_text(), nl=False)
    sys.exit(EXIT_OK if report.ok else EXIT_FAILURE)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--resume/--no-resume", default=True,
              help="Skip already-succeeded generations and scores (default on).")
def run(project_dir: str, config_path: str, resume: bool):
    """Run generation and scoring for every experiment in the config."""
    report = _guard(workflows.run_config, project_dir, config_path, resume=resume)
    click.echo(report.summary())
    sys.exit(EXIT_OK if report.all_succeeded else EXIT_FAILURE)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--levels", default="1,2,3", show_default=True,
              help="Comma-separated degradation levels to build.")
def perturb(project_dir: str, levels: str):
    """Create degraded output variants for meta-evaluation ladders."""
    produced = _guard(
        workflows.perturb_project, project_dir, levels=_parse_levels(levels)
    )
    for key, by_level in produced.items():
        counts = ", ".join(f"level {lvl}: {n}" for lvl, n in sorted(by_level.items()))
        click.echo(f"{key}  {counts}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--metrics", default=None,
              help="Comma-separated registered metric names to (re)score.")
def score(project_dir: str, metrics: str | None):
    """Score existing generations with each experiment's evaluators."""
    selected = None if metrics is None else {m.strip() for m in metrics.split(",")}
    report = _guard(workflows.score_project, project_dir, metrics=selected)
    click.echo(report.summary())
    sys.exit(EXIT_OK)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--levels", default="0", show_default=True,
              help="Perturbation levels to include as table rows.")
@click.option("--correlation", type=click.Choice(["spearman", "kendall"]),
              default="spearman", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "csv", "json"]),
              default="text", show_default=True)
def analyse(project_dir: str, levels: str, correlation: str, fmt: str):
    """Tabulate mean scores and inter-metric correlations."""
    table, _corr, paths = _guard(
        workflows.analyse_project,
        project_dir,
        levels=_parse_levels(levels),
        correlation=correlation,
    )
    if fmt == "text":
        click.echo(table.to_text(), nl=False)
    elif fmt == "csv":
        click.echo(table.to_csv_text(), nl=False)
    else:
        click.echo(json.dumps(table.to_json_dict(), indent=2, sort_keys=True))
    for path in paths:
        click.echo(f"wrote {path}", err=True)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--correlation", type=click.Choice(["spearman", "kendall"]),
              default="spearman", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "csv", "json"]),
              default="text", show_default=True)
def meta(project_dir: str, correlation: str, fmt: str):
    """Rank metrics by reliability against perturbation ladders."""
    results, paths = _guard(
        workflows.meta_project, project_dir, correlation=correlation
    )
    rows = meta_results_to_rows(results)
    if fmt == "json":
        click.echo(json.dumps({"results": rows}, indent=2, sort_keys=True))
    elif fmt == "csv":
        out = (Path(project_dir) / "analysis" / "meta_eval.csv").read_text()
        click.echo(out, nl=False)
    else:
        width = max(len(r["metric"]) for r in rows)
        for row in rows:
            avg = row["avg_correlation"]
            shown = "degenerate" if avg is None else f"{avg:+.3f}"
            click.echo(
                f"{row['metric']:<{width}}  {shown}  "
                f"(n={row['n_samples']}, degenerate={row['n_degenerate']})"
            )
    for path in paths:
        click.echo(f"wrote {path}", err=True)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["text", "json"]),
              default="text", show_default=True)
def status(project_dir: str, fmt: str):
    """Show experiment statuses, progress counts, and file issues."""
    view = _guard(workflows.project_status, project_dir)
    if fmt == "json":
        click.echo(json.dumps(view.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(view.to_text(), nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--ui-dir", default=None, type=click.Path(),
              help="Directory of built guide UI assets to host.")
def serve(project_dir: str, port: int, ui_dir: str | None):
    """Host the read-only results API and the guide UI."""
    _guard(serve_forever, project_dir, port=port, ui_dir=ui_dir)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
