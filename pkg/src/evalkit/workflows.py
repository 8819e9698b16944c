"""End-to-end flows behind the CLI commands.

Each flow is plain library code so programmatic use and the CLI produce
identical outputs.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Iterable

from .analysis import (
    CorrelationMatrix,
    MetaEvalResult,
    TableArtifact,
    build_results_matrix,
    correlate_metrics,
    meta_evaluate,
    tabulate,
    write_correlation,
    write_meta,
    write_results,
)
from .config import ValidationReport, validate_config
from .datasets import load_dataset, preprocess
from .errors import AnalysisInputError, ConfigurationError
from .figures import (
    render_correlation_heatmap,
    render_meta_bars,
    render_results_heatmap,
)
from .generation import collect_ladders, perturb
from .model import SUCCEEDED, expand_batch, experiment_key
from .orchestrator import (
    ExperimentOutcome,
    RunReport,
    execute,
    plan_schedule,
    score_experiment,
    status,
)
from .project import Project
from .providers import Gateway

logger = logging.getLogger(__name__)


def load_batch(config_path: str | Path) -> ValidationReport:
    report = validate_config(config_path)
    if not report.ok:
        raise ConfigurationError(
            "invalid config:\n" + report.to_text().rstrip()
        )
    return report


def run_config(
    project_dir: str | Path,
    config_path: str | Path,
    resume: bool = True,
    gateway: Gateway | None = None,
    clock=None,
) -> RunReport:
    """Expand the batch, plan the schedule, and execute generation + scoring."""
    report = load_batch(config_path)
    configs = expand_batch(report.batch)
    plan = plan_schedule(configs)
    project = Project(project_dir, clock=clock)
    gateway = gateway or Gateway(max_in_flight=report.settings["concurrency"])
    logger.info(
        "running %d experiment(s), %d model load(s)",
        len(plan.configs), plan.model_load_count,
    )
    return execute(plan, project, gateway, resume=resume)


def perturb_project(
    project_dir: str | Path,
    levels: Iterable[int] = (1, 2, 3),
    gateway: Gateway | None = None,
    clock=None,
) -> dict[str, dict[int, int]]:
    """Build perturbed variants for every level-0 experiment in the project.

    Returns, per source key and level, the number of succeeded rewrites.
    """
    levels = sorted(set(levels) - {0})
    for level in levels:
        if level not in (1, 2, 3):
            raise ConfigurationError("perturbation levels must be within 1..3")
    project = Project(project_dir, clock=clock, create=False)
    gateway = gateway or Gateway()
    produced: dict[str, dict[int, int]] = {}
    with project.lock():
        sources = [
            key
            for key in sorted(project.experiments)
            if project.config_for(key).perturbation_level == 0
        ]
        if not sources:
            raise AnalysisInputError("no level-0 experiments to perturb")
        for key in sources:
            config = project.config_for(key)
            produced[key] = {}
            for level in levels:
                records = perturb(config, level, project, gateway)
                produced[key][level] = sum(
                    1 for r in records if r.status == SUCCEEDED
                )
    return produced


def score_project(
    project_dir: str | Path,
    metrics: set[str] | None = None,
    gateway: Gateway | None = None,
    clock=None,
) -> RunReport:
    """Re-score existing generations; already-scored pairs are skipped."""
    project = Project(project_dir, clock=clock, create=False)
    gateway = gateway or Gateway()
    report = RunReport()
    with project.lock():
        for key in sorted(project.experiments):
            config = project.config_for(key)
            if not config.evaluators:
                continue
            generations = [
                r for r in project.load_generations(key).values()
                if r.status == SUCCEEDED
            ]
            if not generations:
                continue
            records = preprocess(load_dataset(config.dataset), config.preprocessor)
            outcome = ExperimentOutcome(key=key, status="scored")
            score_experiment(
                config, key, records.samples, generations, project, gateway,
                outcome, resume=True, metrics_filter=metrics,
            )
            report.outcomes.append(outcome)
    return report


def _score_table(project: Project, key: str) -> dict[str, dict[str, float]]:
    return {
        metric: {
            sid: rec.value for sid, rec in project.load_scores(key, metric).items()
        }
        for metric in project.score_metrics(key)
    }


def analyse_project(
    project_dir: str | Path,
    levels: Iterable[int] = (0,),
    correlation: str = "spearman",
    figures: bool = True,
) -> tuple[TableArtifact, CorrelationMatrix | None, list[Path]]:
    """Summarise mean scores and inter-metric correlations; write artifacts."""
    project = Project(project_dir, create=False)
    wanted = set(levels)
    per_sample = {}
    row_labels = {}
    for key in sorted(project.experiments):
        config = project.config_for(key)
        if config.perturbation_level not in wanted:
            continue
        table = _score_table(project, key)
        if not table:
            continue
        per_sample[key] = table
        row_labels[key] = {
            "dataset": config.dataset.name,
            "model": config.model.model_name,
            "level": config.perturbation_level,
        }
    if not per_sample:
        raise AnalysisInputError(
            f"no scored experiments at level(s) {sorted(wanted)}"
        )
    ordered = sorted(
        per_sample,
        key=lambda k: (
            row_labels[k]["dataset"], row_labels[k]["model"], row_labels[k]["level"],
        ),
    )
    matrix = build_results_matrix(
        {k: per_sample[k] for k in ordered}, row_labels=row_labels
    )
    table = tabulate(matrix)
    out_dir = project.analysis_dir()
    paths = write_results(table, out_dir)

    corr = None
    pooled: dict[str, dict[tuple[str, str], float]] = {}
    for key, by_metric in per_sample.items():
        for metric, sample_values in by_metric.items():
            for sid, value in sample_values.items():
                pooled.setdefault(metric, {})[(key, sid)] = value
    if len(pooled) >= 2:
        corr = correlate_metrics(pooled, method=correlation)
        paths += write_correlation(corr, out_dir)
    else:
        logger.warning("fewer than 2 metrics scored; skipping correlation matrix")

    if figures:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(parents=True, exist_ok=True)
        paths.append(render_results_heatmap(table, fig_dir / "results_heatmap.png"))
        if corr is not None:
            paths.append(
                render_correlation_heatmap(corr, fig_dir / "metric_correlation.png")
            )
    return table, corr, paths


def meta_project(
    project_dir: str | Path,
    correlation: str = "spearman",
    figures: bool = True,
) -> tuple[list[MetaEvalResult], list[Path]]:
    """Meta-evaluate every metric over all complete perturbation ladders.

    Ladders from every level-0 experiment are pooled; per-sample rank
    correlations are averaged within each metric.
    """
    project = Project(project_dir, create=False)
    all_ladders = []
    scores: dict[str, dict[str, dict[int, float]]] = {}
    for key in sorted(project.experiments):
        config = project.config_for(key)
        if config.perturbation_level != 0:
            continue
        level_keys = {
            level: experiment_key(config.at_level(level)) for level in range(4)
        }
        if not all(
            project.generation_path(k).exists() for k in level_keys.values()
        ):
            continue
        try:
            result = collect_ladders(project, key)
        except AnalysisInputError:
            continue
        for ladder in result.ladders:
            all_ladders.append(
                replace(ladder, sample_id=f"{key}:{ladder.sample_id}")
            )
        for level, level_key in level_keys.items():
            for metric in project.score_metrics(level_key):
                for sid, rec in project.load_scores(level_key, metric).items():
                    scores.setdefault(metric, {}).setdefault(f"{key}:{sid}", {})[
                        level
                    ] = rec.value
    if not all_ladders:
        raise AnalysisInputError(
            "no complete perturbation ladders found; run perturb (levels 1-3) first"
        )
    results = meta_evaluate(all_ladders, scores, method=correlation)
    out_dir = project.analysis_dir()
    paths = write_meta(results, out_dir)
    if figures:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(parents=True, exist_ok=True)
        paths.append(render_meta_bars(results, fig_dir / "meta_eval.png"))
    return results, paths


def project_status(project_dir: str | Path):
    return status(Project(project_dir, create=False))
