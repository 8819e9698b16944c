"""Pipeline config files: one YAML or JSON document per study.

The document mirrors ExperimentBatchConfig: datasets, generations, models,
evaluators, and sweep dimensions. Validation collects every problem it can
find, each tagged with a path into the document (e.g. models[0].temperature).
"""

from __future__ import annotations

import importlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .datasets import preprocessor_names
from .errors import ConfigurationError
from .model import (
    METRIC_FAMILIES,
    DatasetSpec,
    EvaluatorConfig,
    ExperimentBatchConfig,
    GenerationSteps,
    ModelSpec,
    PromptTemplate,
)


@dataclass
class ValidationReport:
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)
    batch: ExperimentBatchConfig | None = None
    settings: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def fail(self, path: str, message: str) -> None:
        self.errors.append((path, message))

    def to_text(self) -> str:
        if self.ok:
            lines = ["OK"]
        else:
            lines = [f"{path}: {message}" for path, message in self.errors]
        lines += [f"warning: {path}: {message}" for path, message in self.warnings]
        return "\n".join(lines) + "\n"


def load_document(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping")
    return doc


def _require_list(doc: dict, key: str, report: ValidationReport) -> list:
    value = doc.get(key)
    if value is None:
        report.fail(key, "required section is missing")
        return []
    if not isinstance(value, list) or not value:
        report.fail(key, "must be a nonempty list")
        return []
    return value


def _build_model(block: Any, path: str, report: ValidationReport) -> ModelSpec | None:
    if not isinstance(block, dict):
        report.fail(path, "must be a mapping")
        return None
    known = {
        "provider", "model_name", "endpoint_url", "api_key_env",
        "temperature", "top_p", "seed", "max_tokens",
    }
    for extra in set(block) - known:
        report.warnings.append((f"{path}.{extra}", "unknown field ignored"))
    kwargs = {k: block[k] for k in known & set(block)}
    try:
        model = ModelSpec(**kwargs)
    except (ConfigurationError, TypeError) as exc:
        report.fail(_model_error_path(path, exc), str(exc))
        return None
    if model.api_key_env and model.api_key_env not in os.environ:
        report.fail(f"{path}.api_key_env", f"env var {model.api_key_env!r} is not set")
    return model


def _model_error_path(path: str, exc: Exception) -> str:
    message = str(exc)
    for fieldname in ("temperature", "top_p", "max_tokens", "endpoint_url",
                      "model_name", "provider"):
        if fieldname in message:
            return f"{path}.{fieldname}"
    return path


def _build_dataset(block: Any, path: str, report: ValidationReport) -> DatasetSpec | None:
    if not isinstance(block, dict):
        report.fail(path, "must be a mapping")
        return None
    try:
        return DatasetSpec(
            name=block.get("name", ""),
            source=block.get("source", ""),
            version=str(block.get("version", "0")),
            checksum=block.get("checksum"),
            split=block.get("split", "test"),
            field_map=block.get("field_map", {"id_field": "id", "input_field": "input"}),
        )
    except ConfigurationError as exc:
        report.fail(path, str(exc))
        return None


def _build_generation(block: Any, path: str, report: ValidationReport) -> GenerationSteps | None:
    if not isinstance(block, dict):
        report.fail(path, "must be a mapping")
        return None
    template = block.get("template")
    if not isinstance(template, dict):
        report.fail(f"{path}.template", "must be a mapping with a user prompt")
        return None
    try:
        return GenerationSteps(
            name=block.get("name", ""),
            template=PromptTemplate(
                name=template.get("name", block.get("name", "")),
                system_text=template.get("system"),
                user_text=template.get("user", ""),
            ),
            postprocess=block.get("postprocess", "trim"),
        )
    except ConfigurationError as exc:
        report.fail(path, str(exc))
        return None


def _build_evaluator(block: Any, path: str, report: ValidationReport) -> EvaluatorConfig | None:
    if not isinstance(block, dict):
        report.fail(path, "must be a mapping")
        return None
    metric = block.get("metric", "")
    if metric not in METRIC_FAMILIES:
        report.fail(
            f"{path}.metric",
            f"unknown metric {metric!r}; registered: {', '.join(METRIC_FAMILIES)}",
        )
        return None
    judge = None
    if "judge" in block:
        judge = _build_model(block["judge"], f"{path}.judge", report)
        if judge is None:
            return None
    model = None
    if "model" in block:
        model = _build_model(block["model"], f"{path}.model", report)
        if model is None:
            return None
    scale = block.get("scale", [1, 5])
    if not (isinstance(scale, list) and len(scale) == 2):
        report.fail(f"{path}.scale", "must be a [lo, hi] pair")
        return None
    try:
        return EvaluatorConfig(
            metric=metric,
            variant=block.get("variant"),
            judge=judge,
            judge_alias=block.get("judge_alias"),
            model=model,
            questions=block.get("questions", 10),
            embedder=block.get("embedder", "hash"),
            scale_lo=scale[0],
            scale_hi=scale[1],
            brevity_penalty=block.get("brevity_penalty", False),
            max_n=block.get("max_n", 4),
        )
    except ConfigurationError as exc:
        report.fail(path, str(exc))
        return None


def validate_document(doc: dict[str, Any]) -> ValidationReport:
    """Validate a parsed config document, reporting all errors found."""
    report = ValidationReport()

    for i, module in enumerate(doc.get("plugins", []) or []):
        try:
            importlib.import_module(module)
        except ImportError as exc:
            report.fail(f"plugins[{i}]", f"cannot import {module!r}: {exc}")

    datasets = [
        ds
        for i, block in enumerate(_require_list(doc, "datasets", report))
        if (ds := _build_dataset(block, f"datasets[{i}]", report)) is not None
    ]
    generations = [
        gen
        for i, block in enumerate(_require_list(doc, "generations", report))
        if (gen := _build_generation(block, f"generations[{i}]", report)) is not None
    ]
    models = [
        m
        for i, block in enumerate(_require_list(doc, "models", report))
        if (m := _build_model(block, f"models[{i}]", report)) is not None
    ]
    evaluators = [
        ev
        for i, block in enumerate(doc.get("evaluators", []) or [])
        if (ev := _build_evaluator(block, f"evaluators[{i}]", report)) is not None
    ]

    preprocessors = doc.get("preprocessors", ["identity"])
    if not isinstance(preprocessors, list) or not preprocessors:
        report.fail("preprocessors", "must be a nonempty list")
        preprocessors = ["identity"]
    registered = {"identity", *preprocessor_names()}
    for i, name in enumerate(preprocessors):
        if name not in registered:
            report.fail(
                f"preprocessors[{i}]",
                f"unknown preprocessor {name!r}; registered: "
                + ", ".join(sorted(registered)),
            )

    levels = doc.get("perturbation_levels", [0])
    if not isinstance(levels, list) or not levels:
        report.fail("perturbation_levels", "must be a nonempty list")
        levels = [0]
    for i, level in enumerate(levels):
        if level not in (0, 1, 2, 3):
            report.fail(f"perturbation_levels[{i}]", "must be in 0..3")

    concurrency = doc.get("concurrency", 4)
    if not isinstance(concurrency, int) or concurrency < 1:
        report.fail("concurrency", "must be a positive integer")
    correlation = doc.get("correlation", "spearman")
    if correlation not in ("spearman", "kendall"):
        report.fail("correlation", "must be 'spearman' or 'kendall'")

    report.settings = {"concurrency": concurrency, "correlation": correlation}
    if report.ok:
        report.batch = ExperimentBatchConfig(
            datasets=tuple(datasets),
            preprocessors=tuple(preprocessors),
            generations=tuple(generations),
            models=tuple(models),
            evaluators=tuple(evaluators),
            perturbation_levels=tuple(levels),
        )
    return report


def validate_config(path: str | Path) -> ValidationReport:
    """Parse and validate a config file; I/O problems raise OSError."""
    doc = load_document(path)
    return validate_document(doc)
