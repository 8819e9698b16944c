"""Prompt rendering, generation runs, and perturbation ladders.

Generation is resumable: records persist incrementally through the project
handle, and previously succeeded (experiment, sample) pairs are never
regenerated. Perturbation rewrites succeeded outputs with fixed degradation
prompts and stores them under the same experiment at levels 1..3.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from . import prompts
from .datasets import RecordSet
from .errors import (
    AnalysisInputError,
    ConfigurationError,
    ProviderError,
    TemplateError,
)
from .model import (
    FAILED,
    SUCCEEDED,
    ExperimentConfig,
    GenerationRecord,
    ModelSpec,
    PromptTemplate,
    Sample,
    experiment_key,
)
from .project import Project
from .providers import Gateway, GenerationRequest, SamplingParams

logger = logging.getLogger(__name__)

_SLOT = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")

_FENCE = re.compile(r"^```[^\n]*\n(.*)\n```\s*$", re.DOTALL)


@dataclass(frozen=True)
class PerturbationLadder:
    """One sample's output at every degradation level, 0 = unperturbed."""

    sample_id: str
    variants: dict[int, str]
    source_experiment_key: str

    def __post_init__(self):
        if set(self.variants) != {0, 1, 2, 3}:
            raise ConfigurationError(
                f"ladder for {self.sample_id!r} must cover levels 0..3, "
                f"got {sorted(self.variants)}"
            )


def _resolve_slot(sample: Sample, name: str) -> str:
    if name in ("prompt", "input", "input_text"):
        return sample.input_text
    if name in ("reference", "reference_text"):
        if sample.reference_text is None:
            raise TemplateError(name)
        return sample.reference_text
    if name == "id":
        return sample.id
    if name in sample.meta:
        return sample.meta[name]
    raise TemplateError(name)


def _render_text(text: str, sample: Sample) -> str:
    def repl(m: re.Match) -> str:
        if m.group(0) == "{{":
            return "{"
        if m.group(0) == "}}":
            return "}"
        return _resolve_slot(sample, m.group(1))

    return _SLOT.sub(repl, text)


def render_prompt(template: PromptTemplate, sample: Sample) -> tuple[str | None, str]:
    """Substitute {field} slots with sample values, verbatim.

    Slots resolve to sample fields (prompt/input for the input text,
    reference, id) or meta keys; ``{{`` and ``}}`` escape literal braces.
    Substituted values are never re-scanned for slots.
    """
    system = None if template.system_text is None else _render_text(
        template.system_text, sample
    )
    return system, _render_text(template.user_text, sample)


def postprocess_output(text: str, mode: str) -> str:
    if mode == "none":
        return text
    if mode == "trim":
        return text.strip()
    if mode == "strip_markdown_fences":
        m = _FENCE.match(text.strip())
        return m.group(1).strip() if m else text.strip()
    raise ConfigurationError(f"unknown postprocess mode {mode!r}")


def _run_requests(
    config: ExperimentConfig,
    key: str,
    plan: list[tuple[Sample, GenerationRequest]],
    existing: dict[str, GenerationRecord],
    order: list[str],
    project: Project,
    gateway: Gateway,
    model: ModelSpec,
) -> list[GenerationRecord]:
    """Execute pending requests and merge with already-succeeded records.

    Records are appended in sample order, so an interrupted run leaves a
    clean prefix of the uninterrupted run's file.
    """
    postprocess = config.generation.postprocess
    new_records: dict[str, GenerationRecord] = {}
    if plan:
        requests = [req for _, req in plan]
        started = project.clock()
        for i, outcome in gateway.iter_batch(model, requests):
            sample = plan[i][0]
            if isinstance(outcome, ProviderError):
                record = GenerationRecord(
                    experiment_key=key,
                    sample_id=sample.id,
                    status=FAILED,
                    error=str(outcome),
                    created=started,
                    finished=project.clock(),
                )
                logger.warning("sample %s failed: %s", sample.id, outcome)
            else:
                record = GenerationRecord(
                    experiment_key=key,
                    sample_id=sample.id,
                    status=SUCCEEDED,
                    output_text=postprocess_output(outcome.text, postprocess),
                    token_logprobs=outcome.token_logprobs,
                    usage=outcome.usage,
                    created=started,
                    finished=project.clock(),
                )
            project.append_generation(record)
            new_records[sample.id] = record
    merged = {**existing, **new_records}
    return [merged[sid] for sid in order if sid in merged]


def run_generation(
    config: ExperimentConfig,
    records: RecordSet,
    project: Project,
    gateway: Gateway,
) -> list[GenerationRecord]:
    """Generate one output per sample for an unperturbed experiment.

    Previously succeeded (experiment, sample) pairs are skipped; failures are
    recorded per sample and the run continues over the remaining samples.
    """
    if config.perturbation_level != 0:
        raise ConfigurationError(
            "run_generation handles level 0 only; use perturb for levels 1..3"
        )
    key = project.register(config)
    existing = {
        sid: rec
        for sid, rec in project.load_generations(key).items()
        if rec.status == SUCCEEDED
    }
    sampling = SamplingParams.from_model(config.model)
    plan = []
    for sample in records.samples:
        if sample.id in existing:
            continue
        system, user = render_prompt(config.generation.template, sample)
        plan.append(
            (sample, GenerationRequest(user=user, system=system, sampling=sampling))
        )
    order = [s.id for s in records.samples]
    return _run_requests(
        config, key, plan, existing, order, project, gateway, config.model
    )


def perturb(
    source_config: ExperimentConfig,
    level: int,
    project: Project,
    gateway: Gateway,
    model: ModelSpec | None = None,
) -> list[GenerationRecord]:
    """Rewrite succeeded base outputs at the given degradation level.

    Results are stored under the derived experiment key (the source config at
    the requested level). The rewriting model defaults to the generation
    model; sampling settings carry over from generation.
    """
    if level not in (1, 2, 3):
        raise ConfigurationError("perturbation level must be 1, 2, or 3")
    base_config = source_config.at_level(0)
    base_key = experiment_key(base_config)
    base_records = {
        sid: rec
        for sid, rec in project.load_generations(base_key).items()
        if rec.status == SUCCEEDED
    }
    if not base_records:
        raise AnalysisInputError(
            f"no succeeded base generations under {base_key}; run generation first"
        )

    derived = source_config.at_level(level)
    derived_key = project.register(derived)
    existing = {
        sid: rec
        for sid, rec in project.load_generations(derived_key).items()
        if rec.status == SUCCEEDED
    }
    perturbation_model = model or source_config.model
    sampling = SamplingParams.from_model(perturbation_model)
    template = prompts.PERTURBATION_PROMPTS[level]

    order = sorted(base_records)
    plan = []
    for sample_id in order:
        if sample_id in existing:
            continue
        user = template.replace("{prompt}", base_records[sample_id].output_text)
        plan.append(
            (
                Sample(id=sample_id, input_text=base_records[sample_id].output_text),
                GenerationRequest(user=user, sampling=sampling),
            )
        )
    return _run_requests(
        derived, derived_key, plan, existing, order, project, gateway,
        perturbation_model,
    )


@dataclass(frozen=True)
class LadderBuildResult:
    ladders: tuple[PerturbationLadder, ...]
    excluded: dict[str, list[int]] = field(default_factory=dict)


def build_ladders(project: Project, source_experiment_key: str) -> list[PerturbationLadder]:
    """Assemble complete level-0..3 ladders for one source experiment.

    Samples missing a succeeded record at any level are excluded and
    reported; having no complete ladder at all is an error.
    """
    return collect_ladders(project, source_experiment_key).ladders  # type: ignore[return-value]


def collect_ladders(project: Project, source_experiment_key: str) -> LadderBuildResult:
    config = project.config_for(source_experiment_key)
    if config.perturbation_level != 0:
        raise ConfigurationError(
            f"{source_experiment_key} is a perturbed experiment; "
            "pass its level-0 source key"
        )

    by_level: dict[int, dict[str, GenerationRecord]] = {}
    for level in range(4):
        key = experiment_key(config.at_level(level))
        by_level[level] = {
            sid: rec
            for sid, rec in project.load_generations(key).items()
            if rec.status == SUCCEEDED
        }

    ladders = []
    excluded: dict[str, list[int]] = {}
    for sample_id in sorted(by_level[0]):
        missing = [lvl for lvl in range(4) if sample_id not in by_level[lvl]]
        if missing:
            excluded[sample_id] = missing
            continue
        ladders.append(
            PerturbationLadder(
                sample_id=sample_id,
                variants={
                    lvl: by_level[lvl][sample_id].output_text for lvl in range(4)
                },
                source_experiment_key=source_experiment_key,
            )
        )
    if excluded:
        logger.warning(
            "excluded %d sample(s) with incomplete ladders under %s: %s",
            len(excluded), source_experiment_key,
            ", ".join(f"{sid} (missing levels {lvls})" for sid, lvls in excluded.items()),
        )
    if not ladders:
        raise AnalysisInputError(
            f"no complete perturbation ladders for {source_experiment_key}"
        )
    return LadderBuildResult(ladders=tuple(ladders), excluded=excluded)
