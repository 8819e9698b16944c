"""Dataset loading, verification, and task preprocessing.

Supported formats are JSONL (one object per line) and CSV with a header row,
selected by file extension. Remote sources are cached under a
content-addressed directory; set EVAL_CACHE_DIR to relocate the cache.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import httpx

from .errors import ConfigurationError, IntegrityError, SchemaError
from .model import DatasetSpec, Sample

logger = logging.getLogger(__name__)

#: A preprocessor maps one sample to a transformed sample, or to None to
#: drop it from the record set. It must be pure and deterministic.
PreprocessFn = Callable[[Sample], Sample | None]

_PREPROCESSORS: dict[str, PreprocessFn] = {}


@dataclass(frozen=True)
class RecordSet:
    """An ordered, immutable collection of samples for one dataset."""

    spec: DatasetSpec
    samples: tuple[Sample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        ids = [s.id for s in self.samples]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate sample ids: {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.samples)


def register_preprocessor(name: str, fn: PreprocessFn) -> None:
    if not name:
        raise ConfigurationError("preprocessor name must be nonempty")
    _PREPROCESSORS[name] = fn


def preprocessor_names() -> list[str]:
    return sorted(_PREPROCESSORS)


def preprocess(records: RecordSet, preprocessor: str) -> RecordSet:
    """Apply a registered preprocessor to every sample.

    "identity" returns the input unchanged. Preprocessors returning None drop
    the sample.
    """
    if preprocessor == "identity":
        return records
    fn = _PREPROCESSORS.get(preprocessor)
    if fn is None:
        raise ConfigurationError(
            f"unknown preprocessor {preprocessor!r}; registered: "
            + ", ".join(["identity"] + preprocessor_names())
        )
    kept = [out for s in records.samples if (out := fn(s)) is not None]
    return RecordSet(spec=records.spec, samples=tuple(kept))


def _normalize_whitespace(sample: Sample) -> Sample:
    def squash(text: str | None) -> str | None:
        return None if text is None else " ".join(text.split())

    return replace(
        sample,
        input_text=squash(sample.input_text),
        reference_text=squash(sample.reference_text),
    )


def _require_reference(sample: Sample) -> Sample | None:
    return sample if sample.reference_text else None


register_preprocessor("normalize_whitespace", _normalize_whitespace)
register_preprocessor("require_reference", _require_reference)


def cache_root() -> Path:
    return Path(os.environ.get("EVAL_CACHE_DIR", "cache")) / "datasets"


def _fetch(url: str) -> Path:
    """Download a remote source into the cache; a cache hit skips the fetch."""
    digest = hashlib.sha256(url.encode("utf-8")).hexdigest()
    filename = url.rstrip("/").rsplit("/", 1)[-1] or "data"
    target = cache_root() / digest / filename
    if target.exists():
        logger.debug("cache hit for %s at %s", url, target)
        return target
    target.parent.mkdir(parents=True, exist_ok=True)
    logger.info("downloading %s", url)
    resp = httpx.get(url, follow_redirects=True, timeout=60.0)
    resp.raise_for_status()
    tmp = target.with_suffix(target.suffix + ".part")
    tmp.write_bytes(resp.content)
    os.replace(tmp, target)
    return target


def _resolve_source(spec: DatasetSpec) -> Path:
    if spec.source.startswith(("http://", "https://")):
        return _fetch(spec.source)
    path = Path(spec.source)
    if path.is_dir():
        # Split selection convention: <name>.<split>.<ext> inside the directory.
        for ext in ("jsonl", "csv"):
            candidate = path / f"{spec.name}.{spec.split}.{ext}"
            if candidate.exists():
                return candidate
        raise OSError(
            f"no {spec.name}.{spec.split}.jsonl or .csv under {path}"
        )
    return path


def _verify_checksum(path: Path, expected: str) -> None:
    actual = hashlib.sha256(path.read_bytes()).hexdigest()
    if actual != expected.lower():
        raise IntegrityError(
            f"checksum mismatch for {path}: expected {expected}, got {actual}"
        )


def _iter_rows(path: Path):
    if path.suffix == ".jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"row {lineno}: invalid JSON ({exc})") from exc
    elif path.suffix == ".csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                yield lineno, row
    else:
        raise OSError(f"unsupported dataset format: {path.suffix!r} (want .jsonl or .csv)")


def _row_to_sample(spec: DatasetSpec, lineno: int, row: dict) -> Sample:
    fm = spec.field_map
    id_field = fm["id_field"]
    input_field = fm["input_field"]
    ref_field = fm.get("reference_field")

    for col in [id_field, input_field] + ([ref_field] if ref_field else []):
        if col not in row:
            raise SchemaError(f"row {lineno}: missing column {col!r}")

    mapped = {id_field, input_field} | ({ref_field} if ref_field else set())
    meta = {k: str(v) for k, v in row.items() if k not in mapped}
    ref = row[ref_field] if ref_field else None
    return Sample(
        id=str(row[id_field]),
        input_text=str(row[input_field]),
        reference_text=None if ref is None else str(ref),
        meta=meta,
    )


def load_dataset(spec: DatasetSpec) -> RecordSet:
    """Load a dataset into samples, preserving file order.

    The checksum, when present, is verified against the resolved file before
    parsing. Duplicate ids and missing columns are schema errors.
    """
    path = _resolve_source(spec)
    if not path.exists():
        raise OSError(f"dataset source not found: {path}")
    if spec.checksum:
        _verify_checksum(path, spec.checksum)

    samples = [_row_to_sample(spec, lineno, row) for lineno, row in _iter_rows(path)]
    if not samples:
        logger.warning("dataset %s loaded 0 samples from %s", spec.name, path)
    return RecordSet(spec=spec, samples=tuple(samples))
