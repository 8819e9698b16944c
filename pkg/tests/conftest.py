from __future__ import annotations

import json

import pytest

from evalkit.model import (
    DatasetSpec,
    EvaluatorConfig,
    ExperimentConfig,
    GenerationSteps,
    ModelSpec,
    PromptTemplate,
    Sample,
)
from evalkit.providers import clear_scripts

FROZEN_TS = "2025-06-01T00:00:00+00:00"


@pytest.fixture(autouse=True)
def _clean_script_registry():
    yield
    clear_scripts()


@pytest.fixture(autouse=True)
def _clean_preprocessor_registry():
    from evalkit import datasets

    before = dict(datasets._PREPROCESSORS)
    yield
    datasets._PREPROCESSORS.clear()
    datasets._PREPROCESSORS.update(before)


@pytest.fixture
def frozen_clock():
    return lambda: FROZEN_TS


@pytest.fixture
def mock_model():
    return ModelSpec(
        provider="mock", model_name="mock-a", temperature=0.7, top_p=0.95, seed=42
    )


def make_sample(i: int, with_reference: bool = True) -> Sample:
    return Sample(
        id=f"s{i:03d}",
        input_text=f"D: patient {i} reports symptom {i}. P: it started {i} days ago.",
        reference_text=(
            f"CHIEF COMPLAINT: symptom {i}. HISTORY: onset {i} days ago."
            if with_reference
            else None
        ),
    )


def write_jsonl_dataset(path, n: int = 5) -> DatasetSpec:
    rows = [
        {
            "encounter_id": f"s{i:03d}",
            "dialogue": f"D: patient {i} reports symptom {i}. P: it started {i} days ago.",
            "note": f"CHIEF COMPLAINT: symptom {i}. HISTORY: onset {i} days ago.",
        }
        for i in range(n)
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return DatasetSpec(
        name="toy",
        source=str(path),
        field_map={
            "id_field": "encounter_id",
            "input_field": "dialogue",
            "reference_field": "note",
        },
    )


def make_template(user: str = "Summarise:\n{prompt}", system: str | None = None):
    return PromptTemplate(name="summarise", user_text=user, system_text=system)


def make_config(
    dataset: DatasetSpec,
    model: ModelSpec,
    evaluators: tuple[EvaluatorConfig, ...] = (),
    level: int = 0,
    user_text: str = "Summarise:\n{prompt}",
) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=dataset,
        generation=GenerationSteps(name="summarise", template=make_template(user_text)),
        model=model,
        evaluators=evaluators,
        perturbation_level=level,
    )
