"""Question-answering factual consistency scores.

Questions are generated from the candidate text, then answered from the
source and from the candidate independently; agreement between the two
answer sets measures how well the candidate's claims are supported.
"""

from __future__ import annotations

import re
from typing import Any, Literal

from .. import prompts
from ..errors import MetricError
from ..model import ModelSpec
from ..providers import Gateway, GenerationRequest, SamplingParams

_LINE_PREFIX = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*")
_TERNARY = re.compile(r"\b(yes|no|unknown)\b", re.IGNORECASE)

QagsMode = Literal["ternary", "open"]


def _ask(gateway: Gateway, model: ModelSpec, user: str) -> str:
    request = GenerationRequest(user=user, sampling=SamplingParams.from_model(model))
    return gateway.generate(model, request).text


def generate_questions(
    candidate: str,
    model: ModelSpec,
    gateway: Gateway,
    mode: QagsMode = "ternary",
    k: int = 10,
) -> list[str]:
    """Up to k distinct questions grounded in the candidate's claims."""
    if not candidate.strip():
        raise MetricError("cannot generate questions from an empty candidate")
    template = (
        prompts.QUESTION_GEN_TERNARY_PROMPT
        if mode == "ternary"
        else prompts.QUESTION_GEN_OPEN_PROMPT
    )
    user = template.replace("{candidate}", candidate).replace("{k}", str(k))
    text = _ask(gateway, model, user)

    questions: list[str] = []
    for line in text.splitlines():
        line = _LINE_PREFIX.sub("", line).strip()
        if line and line not in questions:
            questions.append(line)
    # Prefer actual questions when the model added commentary around them.
    marked = [q for q in questions if q.endswith("?")]
    if marked:
        questions = marked
    if not questions:
        raise MetricError(f"no parsable questions in model output: {text[:120]!r}")
    return questions[:k]


def _answer_ternary(
    context: str, question: str, model: ModelSpec, gateway: Gateway
) -> str:
    user = prompts.ANSWER_TERNARY_PROMPT.replace("{context}", context).replace(
        "{question}", question
    )
    text = _ask(gateway, model, user)
    m = _TERNARY.search(text)
    # An unparsable answer gives no usable information, same as unknown.
    return m.group(1).lower() if m else "unknown"


def qags_ternary_score(
    source: str,
    candidate: str,
    questions: list[str],
    model: ModelSpec,
    gateway: Gateway,
) -> tuple[float, dict[str, Any]]:
    """Fraction of retained questions where source- and candidate-conditioned
    answers agree.

    Questions whose candidate-conditioned answer is unknown are dropped. A
    definite candidate answer with an unknown source answer is an unsupported
    claim and counts as disagreement.
    """
    if not questions:
        raise MetricError("qags_ternary_score requires at least one question")
    rows = []
    agreements = 0
    retained = 0
    for question in questions:
        src_answer = _answer_ternary(source, question, model, gateway)
        cand_answer = _answer_ternary(candidate, question, model, gateway)
        dropped = cand_answer == "unknown"
        agree = not dropped and src_answer == cand_answer
        if not dropped:
            retained += 1
            agreements += agree
        rows.append(
            {
                "question": question,
                "source_answer": src_answer,
                "candidate_answer": cand_answer,
                "dropped": dropped,
                "agree": agree,
            }
        )
    if retained == 0:
        raise MetricError("all questions dropped (candidate answers unknown)")
    artifacts = {"questions": rows, "retained": retained, "mode": "ternary"}
    return agreements / retained, artifacts


def _answer_open(
    context: str, question: str, model: ModelSpec, gateway: Gateway
) -> str:
    user = prompts.ANSWER_OPEN_PROMPT.replace("{context}", context).replace(
        "{question}", question
    )
    return _ask(gateway, model, user).strip()


def _equivalence_verdict(
    question: str, answer_a: str, answer_b: str, judge: ModelSpec, gateway: Gateway
) -> bool | None:
    """True if equivalent, False if different, None if unparsable."""
    user = (
        prompts.EQUIVALENCE_JUDGE_PROMPT.replace("{question}", question)
        .replace("{answer_a}", answer_a)
        .replace("{answer_b}", answer_b)
    )
    text = _ask(gateway, judge, user).strip().lower()
    if text.startswith("not") or text.startswith("different"):
        return False
    if text.startswith("equivalent"):
        return True
    if "equivalent" in text and "not equivalent" not in text:
        return True
    if "different" in text:
        return False
    return None


def qags_judge_score(
    source: str,
    candidate: str,
    questions: list[str],
    model: ModelSpec,
    judge: ModelSpec,
    gateway: Gateway,
) -> tuple[float, dict[str, Any]]:
    """Fraction of questions whose open answers the judge deems equivalent.

    Unparsable judge verdicts drop the question; dropping every question is
    a metric error.
    """
    if not questions:
        raise MetricError("qags_judge_score requires at least one question")
    rows = []
    equivalent = 0
    judged = 0
    for question in questions:
        src_answer = _answer_open(source, question, model, gateway)
        cand_answer = _answer_open(candidate, question, model, gateway)
        verdict = _equivalence_verdict(question, src_answer, cand_answer, judge, gateway)
        if verdict is not None:
            judged += 1
            equivalent += verdict
        rows.append(
            {
                "question": question,
                "source_answer": src_answer,
                "candidate_answer": cand_answer,
                "verdict": verdict,
            }
        )
    if judged == 0:
        raise MetricError("all judge verdicts unparsable")
    artifacts = {
        "questions": rows,
        "judged": judged,
        "dropped": len(questions) - judged,
        "mode": "judge",
    }
    return equivalent / judged, artifacts
