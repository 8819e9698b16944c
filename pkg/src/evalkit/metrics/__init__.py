"""Score calculators behind one interface: score(sample, output, context).

Statistical metrics are pure functions; LLM-backed metrics go through the
provider gateway. Each scorer produces a ScoreRecord whose metric_name is
its registered name, with values always in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from ..errors import MetricError
from ..model import EvaluatorConfig, ModelSpec, Sample, ScoreRecord
from ..providers import Gateway
from .embedding import FixedEmbedder, HashEmbedder, bert_score, get_embedder, register_embedder
from .geval import BUILTIN_VARIANTS, JudgePromptVariant, RatingDistribution, g_eval
from .ngram import PRF, bleu_precision, rouge_l, rouge_n
from .qags import generate_questions, qags_judge_score, qags_ternary_score
from .tokenizer import tokenize

__all__ = [
    "BUILTIN_VARIANTS",
    "FixedEmbedder",
    "HashEmbedder",
    "JudgePromptVariant",
    "PRF",
    "RatingDistribution",
    "Scorer",
    "ScoringContext",
    "bert_score",
    "bleu_precision",
    "build_scorers",
    "g_eval",
    "generate_questions",
    "get_embedder",
    "qags_judge_score",
    "qags_ternary_score",
    "register_embedder",
    "rouge_l",
    "rouge_n",
    "tokenize",
]


@dataclass
class ScoringContext:
    """Everything a scorer needs besides the sample and the output text."""

    gateway: Gateway
    experiment_key: str
    model: ModelSpec  # the generation model; default QA model for QAGS


class Scorer(Protocol):
    name: str

    def score(self, sample: Sample, output: str, ctx: ScoringContext) -> ScoreRecord: ...


def _require_reference(sample: Sample, metric: str) -> str:
    if not sample.reference_text:
        raise MetricError(f"{metric} requires a reference text (sample {sample.id})")
    return sample.reference_text


class BleuScorer:
    name = "bleu_precision"

    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg

    def score(self, sample
: Sample, output: str, ctx: ScoringContext) -> ScoreRecord:
        reference = _require_reference(sample, self.name)
        value = bleu_precision(
            output, reference,
            max_n=self.cfg.max_n,
            brevity_penalty=self.cfg.brevity_penalty,
        )
        artifacts = {}
        if not tokenize(output):
            artifacts["degenerate_input"] = True
        return ScoreRecord(
            experiment_key=ctx.experiment_key,
            sample_id=sample.id,
            metric_name=self.name,
            value=value,
            artifacts=artifacts,
        )


class RougeScorer:
    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg
        self.name = cfg.metric  # rouge_1, rouge_2, rouge_l

    def score(self, sample: Sample, output: str, ctx: ScoringContext) -> ScoreRecord:
        reference = _require_reference(sample, self.name)
        if self.name == "rouge_l":
            prf = rouge_l(output, reference)
            flagged = not tokenize(output) or not tokenize(reference)
        else:
            n = int(self.name.rsplit("_", 1)[1])
            prf = rouge_n(output, reference, n)
            flagged = (
                len(tokenize(output)) < n or len(tokenize(reference)) < n
            )
        artifacts = {"degenerate_input": True} if flagged else {}
        return ScoreRecord(
            experiment_key=ctx.experiment_key,
            sample_id=sample.id,
            metric_name=self.name,
            value=prf.f1,
            sub_values={"precision": prf.precision, "recall": prf.recall},
            artifacts=artifacts,
        )


class BertScoreScorer:
    name = "bert_score_f1"

    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg

    def score(self, sample: Sample, output: str, ctx: ScoringContext) -> ScoreRecord:
        reference = _require_reference(sample, self.name)
        embedder = get_embedder(self.cfg.embedder)
        prf = bert_score(output, reference, embedder)
        return ScoreRecord(
            experiment_key=ctx.experiment_key,
            sample_id=sample.id,
            metric_name=self.name,
            value=prf.f1,
            sub_values={"precision": prf.precision, "recall": prf.recall},
        )


class GEvalScorer:
    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg
        self.name = cfg.name
        self.variant = BUILTIN_VARIANTS[cfg.variant]

    def score(self, sample: Sample, output: str, ctx: ScoringContext) -> ScoreRecord:
        value, artifacts = g_eval(
            source=sample.input_text,
            candidate=output,
            variant=self.variant,
            judge=self.cfg.judge,
            gateway=ctx.gateway,
            scale=(self.cfg.scale_lo, self.cfg.scale_hi),
        )
        return ScoreRecord(
            experiment_key=ctx.experiment_key,
            sample_id=sample.id,
            metric_name=self.name,
            value=value,
            artifacts=artifacts,
        )


class QagsScorer:
    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg
        self.name = cfg.metric  # qags_ternary or qags_judge

    def score(self, sample: Sample, output: str, ctx: ScoringContext) -> ScoreRecord:
        model = self.cfg.model or ctx.model
        mode = "ternary" if self.name == "qags_ternary" else "open"
        questions = generate_questions(
            output, model, ctx.gateway, mode=mode, k=self.cfg.questions
        )
        if self.name == "qags_ternary":
            value, artifacts = qags_ternary_score(
                sample.input_text, output, questions, model, ctx.gateway
            )
        else:
            value, artifacts = qags_judge_score(
                sample.input_text, output, questions, model,
                self.cfg.judge, ctx.gateway,
            )
        return ScoreRecord(
            experiment_key=ctx.experiment_key,
            sample_id=sample.id,
            metric_name=self.name,
            value=value,
            artifacts=artifacts,
        )


_SCORER_TYPES = {
    "bleu_precision": BleuScorer,
    "rouge_1": RougeScorer,
    "rouge_2": RougeScorer,
    "rouge_l": RougeScorer,
    "bert_score_f1": BertScoreScorer,
    "g_eval": GEvalScorer,
    "qags_ternary": QagsScorer,
    "qags_judge": QagsScorer,
}


def build_scorers(evaluators: tuple[EvaluatorConfig, ...]) -> list[Scorer]:
    """Instantiate one scorer per evaluator config, in config order."""
    scorers = [_SCORER_TYPES[cfg.metric](cfg) for cfg in evaluators]
    names = [s.name for s in scorers]
    if len(names) != len(set(names)):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise MetricError(f"duplicate metric names in evaluator list: {dupes}")
    return scorers
