"""Prompt assets and structured-output instruction markers.

Perturbation and judge prompts ship as editable text files under assets/.
The marker strings below are the exact instruction phrases those prompts end
with; the mock provider recognizes them to synthesize parseable offline
responses.
"""

from __future__ import annotations

from importlib import resources


def _asset(name: str) -> str:
    return resources.files("evalkit.assets").joinpath(name).read_text(encoding="utf-8")


#: Default generation prompt for dialogue-to-note tasks ({prompt} = dialogue).
NOTE_GENERATION_PROMPT = _asset("note_generation.txt")

#: Fixed rewrite prompts per degradation level ({prompt} = the text to degrade).
#: Level 1 rephrases without changing meaning, level 2 introduces minor
#: content changes, level 3 changes the meaning significantly.
PERTURBATION_PROMPTS: dict[int, str] = {
    1: _asset("perturb_level1.txt"),
    2: _asset("perturb_level2.txt"),
    3: _asset("perturb_level3.txt"),
}

#: Judge rating prompts by variant id ({source}, {candidate} slots).
JUDGE_PROMPTS: dict[str, str] = {
    "brief": _asset("judge_brief.txt"),
    "detailed": _asset("judge_detailed.txt"),
}

RATING_MARKER = "single integer rating"
TERNARY_MARKER = "exactly one word: yes, no, or unknown"
QUESTIONS_MARKER = "one question per line"
EQUIVALENCE_MARKER = "exactly one word: equivalent or different"

QUESTION_GEN_TERNARY_PROMPT = """\
Read the following document and write questions that check its factual claims.

**Document**
{candidate}

Write up to {k} distinct questions, each answerable with yes or no using only \
the document's factual claims. Cover different claims; do not repeat \
questions. Write one question per line with no numbering or commentary.
"""

QUESTION_GEN_OPEN_PROMPT = """\
Read the following document and write questions that check its factual claims.

**Document**
{candidate}

Write up to {k} distinct open-ended questions whose answers are short facts \
stated in the document. Cover different claims; do not repeat questions. \
Write one question per line with no numbering or commentary.
"""

ANSWER_TERNARY_PROMPT = """\
Answer the question using only the information in the context.

**Context**
{context}

**Question**
{question}

Answer with exactly one word: yes, no, or unknown. Use unknown when the \
context does not contain the information needed to answer.
"""

ANSWER_OPEN_PROMPT = """\
Answer the question using only the information in the context. If the context \
does not contain the information needed, answer exactly: unknown.

**Context**
{context}

**Question**
{question}

Answer in one short sentence.
"""

EQUIVALENCE_JUDGE_PROMPT = """\
Decide whether two answers to the same question convey the same information.

**Question**
{question}

**Answer A**
{answer_a}

**Answer B**
{answer_b}

Respond with exactly one word: equivalent or different.
"""
