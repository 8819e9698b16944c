"""Experiment scheduling, execution, resumption, and status reporting.

Experiments run sequentially in plan order (parallelism lives inside an
experiment, per sample), grouped by model so each distinct model is loaded
once. Every state change persists through the project handle, so a killed
run resumes without repeating work for succeeded items.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .datasets import load_dataset, preprocess
from .errors import EvalKitError, MetricError, ProviderError
from .generation import perturb, run_generation
from .metrics import ScoringContext, build_scorers
from .model import (
    SUCCEEDED,
    ExperimentConfig,
    ModelSpec,
    experiment_key,
)
from .project import FileIssue, Project
from .providers import Gateway

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchedulePlan:
    """Execution order plus the number of model loads it will cost."""

    configs: tuple[ExperimentConfig, ...]
    model_load_count: int

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(experiment_key(c) for c in self.configs)


def plan_schedule(configs: list[ExperimentConfig]) -> SchedulePlan:
    """Group experiments by model, stable within groups.

    Under the cost model of one load per maximal run of consecutive
    identical models, grouping is optimal: the plan costs exactly one load
    per distinct model.
    """
    if not configs:
        raise EvalKitError("plan_schedule requires at least one experiment")
    first_seen: dict[ModelSpec, int] = {}
    for config in configs:
        first_seen.setdefault(config.model, len(first_seen))
    ordered = sorted(configs, key=lambda c: first_seen[c.model])
    return SchedulePlan(configs=tuple(ordered), model_load_count=len(first_seen))


@dataclass
class ExperimentOutcome:
    key: str
    status: str
    generated: int = 0
    generation_failures: int = 0
    scored: dict[str, int] = field(default_factory=dict)
    metric_errors: dict[str, int] = field(default_factory=dict)
    error: str | None = None


@dataclass
class RunReport:
    outcomes: list[ExperimentOutcome] = field(default_factory=list)

    @property
    def all_succeeded(self) -> bool:
        return all(o.status == "succeeded" for o in self.outcomes)

    def summary(self) -> str:
        lines = []
        for o in self.outcomes:
            parts = [f"{o.key} {o.status}", f"generated {o.generated}"]
            if o.generation_failures:
                parts.append(f"{o.generation_failures} generation failure(s)")
            for metric, n in o.scored.items():
                errs = o.metric_errors.get(metric, 0)
                parts.append(f"{metric}: {n} scored" + (f", {errs} error(s)" if errs else ""))
            if o.error:
                parts.append(f"error: {o.error}")
            lines.append("  ".join(parts))
        return "\n".join(lines)


def score_experiment(
    config: ExperimentConfig,
    key: str,
    samples,
    generations,
    project: Project,
    gateway: Gateway,
    outcome: ExperimentOutcome,
    resume: bool,
    metrics_filter: set[str] | None = None,
) -> None:
    scorers = build_scorers(config.evaluators)
    ctx = ScoringContext(gateway=gateway, experiment_key=key, model=config.model)
    by_id = {s.id: s for s in samples}
    for scorer in scorers:
        if metrics_filter is not None and scorer.name not in metrics_filter:
            continue
        already = set(project.load_scores(key, scorer.name)) if resume else set()
        scored = len(already)
        errors = 0
        for record in generations:
            if record.status != SUCCEEDED or record.sample_id in already:
                continue
            sample = by_id.get(record.sample_id)
            if sample is None:
                # Generation record ids always come from the dataset; guard anyway.
                continue
            try:
                score = scorer.score(sample, record.output_text, ctx)
            except (MetricError, ProviderError) as exc:
                errors += 1
                project.log_line(
                    key, f"metric {scorer.name} sample {record.sample_id}: {exc}"
                )
                continue
            project.append_score(score)
            scored += 1
        outcome.scored[scorer.name] = scored
        if errors:
            outcome.metric_errors[scorer.name] = errors


def execute(
    plan: SchedulePlan,
    project: Project,
    gateway: Gateway | None = None,
    resume: bool = True,
    metrics_filter: set[str] | None = None,
) -> RunReport:
    """Run generation then scoring for every experiment in plan order.

    With resume=True, succeeded generation and score records are skipped.
    With resume=False, record files for the planned experiments are cleared
    first. Per-experiment failures never abort the whole run.
    """
    gateway = gateway or Gateway()
    report = RunReport()
    with project.lock():
        if not resume:
            for config in plan.configs:
                key = project.register(config)
                project.generation_path(key).unlink(missing_ok=True)
                for metric in project.score_metrics(key):
                    project.score_path(key, metric).unlink(missing_ok=True)
        for config in plan.configs:
            key = project.register(config)
            outcome = ExperimentOutcome(key=key, status="running")
            report.outcomes.append(outcome)
            project.set_status(key, "running")
            project.log_line(key, f"starting (level {config.perturbation_level})")
            try:
                records = preprocess(load_dataset(config.dataset), config.preprocessor)
                project.set_status(key, "running", n_samples=len(records))
                if config.perturbation_level == 0:
                    generations = run_generation(config, records, project, gateway)
                else:
                    _ensure_base(config, records, project, gateway)
                    generations = perturb(
                        config.at_level(0), config.perturbation_level,
                        project, gateway,
                    )
                outcome.generated = sum(
                    1 for r in generations if r.status == SUCCEEDED
                )
                outcome.generation_failures = sum(
                    1 for r in generations if r.status != SUCCEEDED
                )
                score_experiment(
                    config, key, records.samples, generations, project,
                    gateway, outcome, resume, metrics_filter,
                )
                if outcome.generation_failures == 0:
                    outcome.status = "succeeded"
                elif outcome.generated > 0:
                    outcome.status = "failed-partial"
                else:
                    outcome.status = "failed"
                project.set_status(key, outcome.status)
                project.log_line(key, f"finished: {outcome.status}")
            except (EvalKitError, OSError) as exc:
                outcome.status = "failed"
                outcome.error = str(exc)
                project.set_status(key, "failed", error=str(exc))
                project.log_line(key, f"failed: {exc}")
                logger.error("experiment %s failed: %s", key, exc)
    return report


def _ensure_base(
    config: ExperimentConfig, records, project: Project, gateway: Gateway
) -> None:
    """Perturbed experiments need level-0 outputs; generate any missing."""
    base = config.at_level(0)
    base_key = project.register(base)
    succeeded = {
        sid
        for sid, rec in project.load_generations(base_key).items()
        if rec.status == SUCCEEDED
    }
    if any(s.id not in succeeded for s in records.samples):
        run_generation(base, records, project, gateway)


@dataclass
class ExperimentStatus:
    key: str
    status: str
    model: str
    level: int
    n_samples: int | None
    generated: int
    generation_failures: int
    scored: dict[str, int]
    log: str


@dataclass
class StatusView:
    experiments: list[ExperimentStatus]
    issues: list[FileIssue]

    def to_dict(self) -> dict:
        return {
            "experiments": [vars(e) for e in self.experiments],
            "issues": [vars(i) for i in self.issues],
        }

    def to_text(self) -> str:
        lines = []
        for e in self.experiments:
            total = "?" if e.n_samples is None else str(e.n_samples)
            scored = ", ".join(f"{m}={n}" for m, n in sorted(e.scored.items()))
            lines.append(
                f"{e.key}  {e.status:<14}  {e.model} L{e.level}  "
                f"generated {e.generated}/{total}"
                + (f"  failures {e.generation_failures}" if e.generation_failures else "")
                + (f"  scores: {scored}" if scored else "")
                + f"  log: {e.log}"
            )
        for issue in self.issues:
            lines.append(f"ISSUE {issue.path}:{issue.line}: {issue.problem}")
        return "\n".join(lines) + ("\n" if lines else "")


def status(project: Project) -> StatusView:
    """Read-only view of experiment statuses and sample-level progress."""
    experiments = []
    for key, entry in sorted(project.experiments.items()):
        config = project.config_for(key)
        generations = project.load_generations(key, strict=False)
        scored = {
            metric: len(project.load_scores(key, metric))
            for metric in project.score_metrics(key)
        }
        experiments.append(
            ExperimentStatus(
                key=key,
                status=entry.status,
                model=config.model.model_name,
                level=config.perturbation_level,
                n_samples=entry.n_samples,
                generated=sum(1 for r in generations.values() if r.status == SUCCEEDED),
                generation_failures=sum(
                    1 for r in generations.values() if r.status != SUCCEEDED
                ),
                scored=scored,
                log=entry.log,
            )
        )
    return StatusView(experiments=experiments, issues=project.scan_issues())
