"""Result analysers: tabular summaries, inter-metric correlation, and
perturbation-based meta-evaluation.

Meta-evaluation correlates each metric's scores across a sample's
degradation ladder with the known quality ordering (level 0 best), then
averages the per-sample rank correlations. Zero-variance samples are
uninformative and are excluded from the average, not scored as 0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

from .errors import AnalysisInputError, ConfigurationError
from .generation import PerturbationLadder

#: Ground-truth quality ranking over perturbation levels 0..3: higher score
#: should mean less degraded.
LEVEL_QUALITY = (3.0, 2.0, 1.0, 0.0)


def spearman(xs: Iterable[float], ys: Iterable[float]) -> float | None:
    """Pearson correlation of fractional (average) ranks.

    Returns None (degenerate) when either input has zero rank variance.
    """
    x = np.asarray(list(xs), dtype=np.float64)
    y = np.asarray(list(ys), dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigurationError(
            f"length mismatch: {x.shape[0]} vs {y.shape[0]}"
        )
    if x.shape[0] < 2:
        raise ConfigurationError("need at least 2 observations")
    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return None
    rho = np.corrcoef(rx, ry)[0, 1]
    return float(rho)


def kendall_tau_b(xs: Iterable[float], ys: Iterable[float]) -> float | None:
    """Kendall's tau-b; None when either input is constant."""
    x = np.asarray(list(xs), dtype=np.float64)
    y = np.asarray(list(ys), dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigurationError(
            f"length mismatch: {x.shape[0]} vs {y.shape[0]}"
        )
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    tau = stats.kendalltau(x, y, variant="b").statistic
    return None if math.isnan(tau) else float(tau)


def correlation_fn(method: str):
    if method == "spearman":
        return spearman
    if method == "kendall":
        return kendall_tau_b
    raise ConfigurationError(f"unknown correlation method {method!r}")


@dataclass(frozen=True)
class MetaEvalResult:
    """Average rank correlation of one metric against the known ordering."""

    metric_name: str
    avg_correlation: float | None
    per_sample: tuple[tuple[str, float | None], ...]
    n_degenerate: int

    @property
    def n_samples(self) -> int:
        return len(self.per_sample) - self.n_degenerate


def meta_evaluate(
    ladders: Iterable[PerturbationLadder],
    scores: Mapping[str, Mapping[str, Mapping[int, float]]],
    method: str = "spearman",
) -> list[MetaEvalResult]:
    """Rank metrics by how well their scores track the degradation ladders.

    ``scores[metric][sample_id][level]`` holds the metric's value for one
    perturbed variant. Samples missing any level for a metric are excluded
    from that metric's average. Results are sorted best to worst, degenerate
    metrics last.
    """
    ladder_list = list(ladders)
    if not ladder_list:
        raise AnalysisInputError("meta_evaluate needs at least one ladder")
    corr = correlation_fn(method)

    results = []
    for metric in sorted(scores):
        per_sample: list[tuple[str, float | None]] = []
        degenerate = 0
        excluded = []
        values = []
        for ladder in ladder_list:
            sample_scores = scores[metric].get(ladder.sample_id, {})
            if any(level not in sample_scores for level in range(4)):
                excluded.append(ladder.sample_id)
                continue
            vector = [sample_scores[level] for level in range(4)]
            rho = corr(vector, LEVEL_QUALITY)
            per_sample.append((ladder.sample_id, rho))
            if rho is None:
                degenerate += 1
            else:
                values.append(rho)
        if excluded:
            logger.warning(
                "metric %s: excluded %d sample(s) missing level scores: %s",
                metric, len(excluded), ", ".join(excluded[:10]),
            )
        results.append(
            MetaEvalResult(
                metric_name=metric,
                avg_correlation=sum(values) / len(values) if values else None,
                per_sample=tuple(per_sample),
                n_degenerate=degenerate,
            )
        )
    results.sort(
        key=lambda r: (r.avg_correlation is None,
                       -(r.avg_correlation or 0.0),
                       r.metric_name)
    )
    return results


@dataclass(frozen=True)
class CorrelationMatrix:
    metrics: tuple[str, ...]
    cells: dict[tuple[str, str], float | None]
    counts: dict[tuple[str, str], int]

    def get(self, a: str, b: str) -> float | None:
        return self.cells[(a, b)]


def correlate_metrics(
    values: Mapping[str, Mapping[Any, float]],
    method: str = "spearman",
    min_overlap: int = 3,
) -> CorrelationMatrix:
    """Pairwise correlation of metrics over their shared scored samples.

    Pairs sharing fewer than min_overlap observations are marked unavailable
    (None). The matrix is symmetric with a unit diagonal.
    """
    metrics = tuple(sorted(values))
    if len(metrics) < 2:
        raise AnalysisInputError("correlate_metrics needs at least 2 metrics")
    corr = correlation_fn(method)

    cells: dict[tuple[str, str], float | None] = {}
    counts: dict[tuple[str, str], int] = {}
    for i, a in enumerate(metrics):
        cells[(a, a)] = 1.0
        counts[(a, a)] = len(values[a])
        for b in metrics[i + 1 :]:
            shared = sorted(set(values[a]) & set(values[b]), key=repr)
            counts[(a, b)] = counts[(b, a)] = len(shared)
            if len(shared) < min_overlap:
                rho = None
            else:
                rho = corr(
                    [values[a][s] for s in shared], [values[b][s] for s in shared]
                )
            cells[(a, b)] = cells[(b, a)] = rho
    return CorrelationMatrix(metrics=metrics, cells=cells, counts=counts)


@dataclass(frozen=True)
class Cell:
    mean: float
    count: int


@dataclass(frozen=True)
class ResultsMatrix:
    """Mean score per (experiment, metric); missing cells stay missing."""

    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: dict[tuple[str, str], Cell]
    row_labels: dict[str, dict[str, Any]] = field(default_factory=dict)

    def cell(self, row: str, col: str) -> Cell | None:
        return self.cells.get((row, col))


def build_results_matrix(
    per_sample: Mapping[str, Mapping[str, Mapping[str, float]]],
    row_labels: Mapping[str, dict[str, Any]] | None = None,
) -> ResultsMatrix:
    """Aggregate per-sample scores into a (experiment x metric) mean matrix.

    ``per_sample[experiment][metric][sample_id]`` are the raw values; means
    are taken over the samples actually scored.
    """
    rows = tuple(per_sample)
    columns = tuple(sorted({m for by_metric in per_sample.values() for m in by_metric}))
    cells = {}
    for row, by_metric in per_sample.items():
        for metric, sample_values in by_metric.items():
            if sample_values:
                vals = list(sample_values.values())
                cells[(row, metric)] = Cell(
                    mean=sum(vals) / len(vals), count=len(vals)
                )
    return ResultsMatrix(
        rows=rows,
        columns=columns,
        cells=cells,
        row_labels=dict(row_labels or {}),
    )


@dataclass(frozen=True)
class TableArtifact:
    """Renderable results table with rank-1/rank-2 annotations per column."""

    matrix: ResultsMatrix
    rank1: dict[str, tuple[str, ...]]
    rank2: dict[str, tuple[str, ...]]

    def to_csv_text(self) -> str:
        label_fields = _label_fields(self.matrix)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["experiment"] + label_fields + list(self.matrix.columns))
        for row in self.matrix.rows:
            labels = self.matrix.row_labels.get(row, {})
            record = [row] + [labels.get(f, "") for f in label_fields]
            for col in self.matrix.columns:
                cell = self.matrix.cell(row, col)
                record.append("" if cell is None else f"{cell.mean:.6f}")
            writer.writerow(record)
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned table; *value* marks column rank 1, _value_ rank 2."""
        label_fields = _label_fields(self.matrix)
        header = ["experiment"] + label_fields + list(self.matrix.columns)
        body = []
        for row in self.matrix.rows:
            labels = self.matrix.row_labels.get(row, {})
            line = [row] + [str(labels.get(f, "")) for f in label_fields]
            for col in self.matrix.columns:
                cell = self.matrix.cell(row, col)
                if cell is None:
                    line.append("-")
                elif row in self.rank1.get(col, ()):
                    line.append(f"*{cell.mean:.3f}*")
                elif row in self.rank2.get(col, ()):
                    line.append(f"_{cell.mean:.3f}_")
                else:
                    line.append(f"{cell.mean:.3f}")
            body.append(line)
        widths = [
            max(len(r[i]) for r in [header] + body) for i in range(len(header))
        ]
        lines = [
            "  ".join(val.ljust(w) for val, w in zip(r, widths)).rstrip()
            for r in [header] + body
        ]
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "columns": list(self.matrix.columns),
            "rows": [
                {
                    "experiment": row,
                    **self.matrix.row_labels.get(row, {}),
                    "metrics": {
                        col: {"mean": cell.mean, "n": cell.count}
                        for col in self.matrix.columns
                        if (cell := self.matrix.cell(row, col)) is not None
                    },
                }
                for row in self.matrix.rows
            ],
            "rank1": {col: list(rows) for col, rows in self.rank1.items()},
            "rank2": {col: list(rows) for col, rows in self.rank2.items()},
        }


def _label_fields(matrix: ResultsMatrix) -> list[str]:
    fields: list[str] = []
    for labels in matrix.row_labels.values():
        for name in labels:
            if name not in fields:
                fields.append(name)
    return fields


def tabulate(matrix: ResultsMatrix) -> TableArtifact:
    """Annotate the best and second-best row per metric column.

    Ties share the better rank: every row matching the column maximum is
    rank 1, every row matching the second-highest distinct value is rank 2.
    """
    if not matrix.rows or not matrix.columns:
        raise AnalysisInputError("cannot tabulate an empty results matrix")
    rank1: dict[str, tuple[str, ...]] = {}
    rank2: dict[str, tuple[str, ...]] = {}
    for col in matrix.columns:
        present = [
            (row, cell.mean)
            for row in matrix.rows
            if (cell := matrix.cell(row, col)) is not None
        ]
        if not present:
            continue
        distinct = sorted({mean for _, mean in present}, reverse=True)
        best = distinct[0]
        rank1[col] = tuple(row for row, mean in present if mean == best)
        if len(distinct) > 1:
            second = distinct[1]
            rank2[col] = tuple(row for row, mean in present if mean == second)
    return TableArtifact(matrix=matrix, rank1=rank1, rank2=rank2)


# -- file emission ----------------------------------------------------------


def write_results(table: TableArtifact, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    csv_path.write_text(table.to_csv_text(), encoding="utf-8")
    json_path = out_dir / "results.json"
    json_path.write_text(
        json.dumps(table.to_json_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    return [csv_path, json_path]


def meta_results_to_rows(results: list[MetaEvalResult]) -> list[dict[str, Any]]:
    return [
        {
            "metric": r.metric_name,
            "avg_correlation": r.avg_correlation,
            "n_samples": r.n_samples,
            "n_degenerate": r.n_degenerate,
        }
        for r in results
    ]


def write_meta(results: list[MetaEvalResult], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = meta_results_to_rows(results)
    csv_path = out_dir / "meta_eval.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "avg_correlation", "n_samples", "n_degenerate"])
    for row in rows:
        avg = row["avg_correlation"]
        writer.writerow(
            [
                row["metric"],
                "degenerate" if avg is None else f"{avg:.6f}",
                row["n_samples"],
                row["n_degenerate"],
            ]
        )
    csv_path.write_text(buf.getvalue(), encoding="utf-8")
    json_path = out_dir / "meta_eval.json"
    json_path.write_text(
        json.dumps({"results": rows}, indent=2, sort_keys=True), encoding="utf-8"
    )
    return [csv_path, json_path]


def write_correlation(matrix: CorrelationMatrix, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "metric_correlation.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric"] + list(matrix.metrics))
    for a in matrix.metrics:
        row = [a]
        for b in matrix.metrics:
            rho = matrix.get(a, b)
            row.append("" if rho is None else f"{rho:.6f}")
        writer.writerow(row)
    csv_path.write_text(buf.getvalue(), encoding="utf-8")
    json_path = out_dir / "metric_correlation.json"
    json_path.write_text(
        json.dumps(
            {
                "metrics": list(matrix.metrics),
                "cells": [
                    {
                        "a": a,
                        "b": b,
                        "correlation": matrix.get(a, b),
                        "n": matrix.counts[(a, b)],
                    }
                    for a in matrix.metrics
                    for b in matrix.metrics
                ],
            },
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    return [csv_path, json_path]
