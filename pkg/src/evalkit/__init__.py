"""Toolkit for evaluating LLM outputs on custom datasets and meta-evaluating
the evaluators with controlled perturbation ladders."""

from .analysis import (
    CorrelationMatrix,
    MetaEvalResult,
    ResultsMatrix,
    build_results_matrix,
    correlate_metrics,
    kendall_tau_b,
    meta_evaluate,
    spearman,
    tabulate,
)
from .datasets import RecordSet, load_dataset, preprocess, register_preprocessor
from .generation import (
    PerturbationLadder,
    build_ladders,
    perturb,
    render_prompt,
    run_generation,
)
from .model import (
    DatasetSpec,
    EvaluatorConfig,
    ExperimentBatchConfig,
    ExperimentConfig,
    GenerationRecord,
    GenerationSteps,
    ModelSpec,
    PromptTemplate,
    Sample,
    ScoreRecord,
    TokenLogprob,
    expand_batch,
    experiment_key,
)
from .orchestrator import RunReport, SchedulePlan, execute, plan_schedule, status
from .project import Project
from .providers import (
    Gateway,
    GenerationRequest,
    GenerationResult,
    SamplingParams,
    register_script,
    script_from_map,
)

__version__ = "0.1.0"

__all__ = [
    "CorrelationMatrix",
    "DatasetSpec",
    "EvaluatorConfig",
    "ExperimentBatchConfig",
    "ExperimentConfig",
    "Gateway",
    "GenerationRecord",
    "GenerationRequest",
    "GenerationResult",
    "GenerationSteps",
    "MetaEvalResult",
    "ModelSpec",
    "PerturbationLadder",
    "Project",
    "PromptTemplate",
    "RecordSet",
    "ResultsMatrix",
    "RunReport",
    "Sample",
    "SamplingParams",
    "SchedulePlan",
    "ScoreRecord",
    "TokenLogprob",
    "build_ladders",
    "build_results_matrix",
    "correlate_metrics",
    "expand_batch",
    "execute",
    "experiment_key",
    "kendall_tau_b",
    "load_dataset",
    "meta_evaluate",
    "perturb",
    "plan_schedule",
    "preprocess",
    "register_preprocessor",
    "register_script",
    "render_prompt",
    "run_generation",
    "script_from_map",
    "spearman",
    "status",
    "tabulate",
    "__version__",
]
