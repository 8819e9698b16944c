"""Shared data model: datasets, experiments, records, and stable keying.

All types are immutable value objects validated at construction, so they can
be shared freely across threads. Experiment identity covers (dataset,
preprocessor, generation, model, perturbation level); evaluators are attached
to a config but scores are stored per metric, outside the identity hash.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Literal

from .errors import ConfigurationError

PENDING = "pending"
RUNNING = "running"
SUCCEEDED = "succeeded"
FAILED = "failed"

RecordStatus = Literal["pending", "running", "succeeded", "failed"]

#: Metric families exposed through the registry. g_eval expands to
#: ``g_eval_<variant>_<judge-alias>`` names, one per configured judge.
METRIC_FAMILIES = (
    "bleu_precision",
    "rouge_1",
    "rouge_2",
    "rouge_l",
    "bert_score_f1",
    "g_eval",
    "qags_ternary",
    "qags_judge",
)

_G_EVAL_NAME = re.compile(r"^g_eval_(brief|detailed)_[a-z0-9_]+$")
_HEX64 = re.compile(r"^[0-9a-fA-F]{64}$")


def is_registered_metric_name(name: str) -> bool:
    """True for static family names and expanded g_eval names."""
    if name in METRIC_FAMILIES and name != "g_eval":
        return True
    return bool(_G_EVAL_NAME.match(name))


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset lives and how its columns map onto samples."""

    name: str
    source: str
    version: str = "0"
    checksum: str | None = None
    split: str = "test"
    field_map: dict[str, str] = field(
        default_factory=lambda: {"id_field": "id", "input_field": "input"}
    )

    def __post_init__(self):
        if not self.name:
            raise ConfigurationError("DatasetSpec.name must be nonempty")
        if not self.source:
            raise ConfigurationError("DatasetSpec.source must be nonempty")
        if self.checksum is not None and not _HEX64.match(self.checksum):
            raise ConfigurationError(
                "DatasetSpec.checksum must be 64 hex chars (SHA-256)"
            )
        if "id_field" not in self.field_map or "input_field" not in self.field_map:
            raise ConfigurationError(
                "DatasetSpec.field_map requires id_field and input_field"
            )
        names = [v for v in self.field_map.values() if v]
        if len(names) != len(set(names)):
            raise ConfigurationError("DatasetSpec.field_map names must be distinct")


@dataclass(frozen=True)
class Sample:
    """One evaluation unit: an input text and an optional reference."""

    id: str
    input_text: str
    reference_text: str | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ConfigurationError("Sample.id must be nonempty")
        if not self.input_text:
            raise ConfigurationError(f"Sample {self.id!r}: input_text must be nonempty")


@dataclass(frozen=True, eq=True)
class ModelSpec:
    """A text-generation model plus its sampling configuration."""

    provider: Literal["openai_compatible", "mock", "scripted"]
    model_name: str
    endpoint_url: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    top_p: float = 1.0
    seed: int | None = None
    max_tokens: int | None = None

    def __post_init__(self):
        if self.provider not in ("openai_compatible", "mock", "scripted"):
            raise ConfigurationError(f"unknown provider {self.provider!r}")
        if not self.model_name:
            raise ConfigurationError("ModelSpec.model_name must be nonempty")
        if self.provider == "openai_compatible" and not self.endpoint_url:
            raise ConfigurationError(
                "openai_compatible models require an endpoint_url"
            )
        if self.temperature < 0:
            raise ConfigurationError("ModelSpec.temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ConfigurationError("ModelSpec.top_p must be in (0, 1]")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ConfigurationError("ModelSpec.max_tokens must be positive")


@dataclass(frozen=True)
class PromptTemplate:
    """System/user prompt pair with ``{placeholder}`` slots.

    Placeholders resolve against sample fields (``prompt``/``input`` for the
    input text, ``reference``, ``id``) or meta keys; ``{{`` escapes a brace.
    """

    name: str
    user_text: str
    system_text: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ConfigurationError("PromptTemplate.name must be nonempty")
        if not self.user_text:
            raise ConfigurationError("PromptTemplate.user_text must be nonempty")


@dataclass(frozen=True)
class GenerationSteps:
    """Named generation recipe: a prompt template plus output postprocessing."""

    name: str
    template: PromptTemplate
    postprocess: Literal["none", "strip_markdown_fences", "trim"] = "trim"

    def __post_init__(self):
        if not self.name:
            raise ConfigurationError("GenerationSteps.name must be nonempty")
        if self.postprocess not in ("none", "strip_markdown_fences", "trim"):
            raise ConfigurationError(
                f"unknown postprocess {self.postprocess!r}"
            )


@dataclass(frozen=True)
class EvaluatorConfig:
    """One metric to run, with its judge/model/embedder knobs.

    ``metric`` is a family from METRIC_FAMILIES. The registered score name is
    the family name, except g_eval which expands to
    ``g_eval_<variant>_<judge_alias>``.
    """

    metric: str
    variant: str | None = None
    judge: ModelSpec | None = None
    judge_alias: str | None = None
    model: ModelSpec | None = None
    questions: int = 10
    embedder: str = "hash"
    scale_lo: int = 1
    scale_hi: int = 5
    brevity_penalty: bool = False
    max_n: int = 4

    def __post_init__(self):
        if self.metric not in METRIC_FAMILIES:
            raise ConfigurationError(
                f"unknown metric {self.metric!r}; registered families: "
                + ", ".join(METRIC_FAMILIES)
            )
        if self.metric == "g_eval":
            if self.variant not in ("brief", "detailed"):
                raise ConfigurationError(
                    "g_eval requires variant 'brief' or 'detailed'"
                )
            if self.judge is None:
                raise ConfigurationError("g_eval requires a judge model")
            if self.scale_lo >= self.scale_hi:
                raise ConfigurationError("g_eval scale must satisfy lo < hi")
        if self.metric == "qags_judge" and self.judge is None:
            raise ConfigurationError("qags_judge requires a judge model")
        if self.questions < 1:
            raise ConfigurationError("questions must be >= 1")
        if self.max_n < 1:
            raise ConfigurationError("max_n must be >= 1")

    @property
    def name(self) -> str:
        """Registered metric name used in configs and score files."""
        if self.metric == "g_eval":
            alias = self.judge_alias or _alias(self.judge.model_name)
            return f"g_eval_{self.variant}_{alias}"
        return self.metric


def _alias(model_name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", model_name.lower()).strip("_")


@dataclass(frozen=True)
class ExperimentConfig:
    """One (dataset, preprocessor, generation, model, level) combination."""

    dataset: DatasetSpec
    generation: GenerationSteps
    model: ModelSpec
    preprocessor: str = "identity"
    evaluators: tuple[EvaluatorConfig, ...] = ()
    perturbation_level: int = 0

    def __post_init__(self):
        if self.perturbation_level not in (0, 1, 2, 3):
            raise ConfigurationError("perturbation_level must be in 0..3")
        object.__setattr__(self, "evaluators", tuple(self.evaluators))

    def at_level(self, level: int) -> "ExperimentConfig":
        """The same experiment at a different perturbation level."""
        return replace(self, perturbation_level=level)


@dataclass(frozen=True)
class ExperimentBatchConfig:
    """A sweep: the Cartesian product of the listed dimensions.

    ``evaluators`` is attached wholesale to every expanded config, it is not
    a product dimension.
    """

    datasets: tuple[DatasetSpec, ...]
    generations: tuple[GenerationSteps, ...]
    models: tuple[ModelSpec, ...]
    preprocessors: tuple[str, ...] = ("identity",)
    evaluators: tuple[EvaluatorConfig, ...] = ()
    perturbation_levels: tuple[int, ...] = (0,)

    def __post_init__(self):
        for dim in ("datasets", "preprocessors", "generations", "models",
                    "perturbation_levels"):
            if not getattr(self, dim):
                raise ConfigurationError(f"batch dimension {dim!r} is empty")
        for attr in ("datasets", "generations", "models", "preprocessors",
                     "evaluators", "perturbation_levels"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))


def expand_batch(batch: ExperimentBatchConfig) -> list[ExperimentConfig]:
    """Expand a batch into the full Cartesian product of its dimensions.

    Order is deterministic: dimensions nest in the order (datasets,
    preprocessors, generations, models, perturbation_levels), each in input
    order, with the rightmost dimension varying fastest.
    """
    configs = []
    for ds, pre, gen, model, level in itertools.product(
        batch.datasets, batch.preprocessors, batch.generations, batch.models,
        batch.perturbation_levels,
    ):
        configs.append(
            ExperimentConfig(
                dataset=ds,
                preprocessor=pre,
                generation=gen,
                model=model,
                evaluators=batch.evaluators,
                perturbation_level=level,
            )
        )
    return configs


@dataclass(frozen=True)
class TokenLogprob:
    """Log probability of one emitted token plus its top alternatives."""

    token: str
    logprob: float
    top_alternatives: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "token": self.token,
            "logprob": self.logprob,
            "top_alternatives": [list(a) for a in self.top_alternatives],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TokenLogprob":
        return cls(
            token=d["token"],
            logprob=d["logprob"],
            top_alternatives=tuple(
                (t, lp) for t, lp in d.get("top_alternatives", [])
            ),
        )


@dataclass(frozen=True)
class GenerationRecord:
    """One model output for one sample, as persisted in generations/*.jsonl."""

    experiment_key: str
    sample_id: str
    status: RecordStatus
    output_text: str | None = None
    token_logprobs: tuple[TokenLogprob, ...] | None = None
    usage: dict[str, int] = field(default_factory=dict)
    error: str | None = None
    created: str | None = None
    finished: str | None = None

    def __post_init__(self):
        if self.status == SUCCEEDED and self.output_text is None:
            raise ConfigurationError("succeeded record requires output_text")
        if self.status == FAILED and not self.error:
            raise ConfigurationError("failed record requires an error")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "experiment_key": self.experiment_key,
            "sample_id": self.sample_id,
            "status": self.status,
            "output_text": self.output_text,
            "usage": self.usage,
            "error": self.error,
            "created": self.created,
            "finished": self.finished,
        }
        if self.token_logprobs is not None:
            d["token_logprobs"] = [t.to_dict() for t in self.token_logprobs]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GenerationRecord":
        lps = d.get("token_logprobs")
        return cls(
            experiment_key=d["experiment_key"],
            sample_id=d["sample_id"],
            status=d["status"],
            output_text=d.get("output_text"),
            token_logprobs=None if lps is None else tuple(
                TokenLogprob.from_dict(t) for t in lps
            ),
            usage=d.get("usage", {}),
            error=d.get("error"),
            created=d.get("created"),
            finished=d.get("finished"),
        )


@dataclass(frozen=True)
class ScoreRecord:
    """One metric value for one (experiment, sample) pair."""

    experiment_key: str
    sample_id: str
    metric_name: str
    value: float
    sub_values: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ConfigurationError(
                f"score for {self.metric_name!r} must be finite, got {self.value}"
            )
        if not is_registered_metric_name(self.metric_name):
            raise ConfigurationError(
                f"{self.metric_name!r} is not a registered metric name"
            )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScoreRecord":
        return cls(
            experiment_key=d["experiment_key"],
            sample_id=d["sample_id"],
            metric_name=d["metric_name"],
            value=d["value"],
            sub_values=d.get("sub_values", {}),
            artifacts=d.get("artifacts", {}),
        )


def _normalize_prompt_text(text: str | None) -> str | None:
    """Trim trailing whitespace per line and surrounding blank lines."""
    if text is None:
        return None
    return "\n".join(line.rstrip() for line in text.strip().splitlines())


def _identity_dict(config: ExperimentConfig) -> dict[str, Any]:
    tpl = config.generation.template
    return {
        "dataset": {
            "name": config.dataset.name,
            "version": config.dataset.version,
            "source": config.dataset.source,
            "checksum": config.dataset.checksum,
            "split": config.dataset.split,
            "field_map": dict(config.dataset.field_map),
        },
        "preprocessor": config.preprocessor,
        "generation": {
            "name": config.generation.name,
            "postprocess": config.generation.postprocess,
            "template": {
                "name": tpl.name,
                "system_text": _normalize_prompt_text(tpl.system_text),
                "user_text": _normalize_prompt_text(tpl.user_text),
            },
        },
        "model": asdict(config.model),
        "perturbation_level": config.perturbation_level,
    }


def canonical_json(obj: Any) -> str:
    """UTF-8 JSON with sorted keys and no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def experiment_key(config: ExperimentConfig) -> str:
    """Stable 16-hex-char content hash of the experiment identity.

    Identity covers dataset, preprocessor, generation steps, model, and
    perturbation level. Evaluators are excluded: scores are stored per metric
    under the same key, so attaching evaluators after the fact does not
    invalidate generations.
    """
    payload = canonical_json(_identity_dict(config)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    """Full JSON form of a config, round-trippable via config_from_dict.

    Prompt text is stored raw; only key hashing normalizes whitespace.
    """
    tpl = config.generation.template
    return {
        "dataset": asdict(config.dataset),
        "preprocessor": config.preprocessor,
        "generation": {
            "name": config.generation.name,
            "postprocess": config.generation.postprocess,
            "template": {
                "name": tpl.name,
                "system_text": tpl.system_text,
                "user_text": tpl.user_text,
            },
        },
        "model": asdict(config.model),
        "perturbation_level": config.perturbation_level,
        "evaluators": [_evaluator_to_dict(e) for e in config.evaluators],
    }


def _evaluator_to_dict(ev: EvaluatorConfig) -> dict[str, Any]:
    d = asdict(ev)
    d["judge"] = None if ev.judge is None else asdict(ev.judge)
    d["model"] = None if ev.model is None else asdict(ev.model)
    return d


def _evaluator_from_dict(d: dict[str, Any]) -> EvaluatorConfig:
    d = dict(d)
    if d.get("judge"):
        d["judge"] = ModelSpec(**d["judge"])
    if d.get("model"):
        d["model"] = ModelSpec(**d["model"])
    return EvaluatorConfig(**d)


def config_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    tpl = d["generation"]["template"]
    return ExperimentConfig(
        dataset=DatasetSpec(**d["dataset"]),
        preprocessor=d["preprocessor"],
        generation=GenerationSteps(
            name=d["generation"]["name"],
            postprocess=d["generation"]["postprocess"],
            template=PromptTemplate(
                name=tpl["name"],
                system_text=tpl["system_text"],
                user_text=tpl["user_text"],
            ),
        ),
        model=ModelSpec(**d["model"]),
        evaluators=tuple(_evaluator_from_dict(e) for e in d.get("evaluators", [])),
        perturbation_level=d["perturbation_level"],
    )
