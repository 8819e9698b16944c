"""Project directory: manifest, record files, logs, and the process lock.

Layout, relative to the project root:

    project.json                     manifest (atomic temp-file + rename)
    .lock                            single-process guard
    generations/<key>.jsonl          one generation record per line
    scores/<key>/<metric>.jsonl      one score record per line
    logs/<key>.log                   per-experiment log
    analysis/                        analyser outputs

Record files are append-only with full-line writes, so a crash leaves at
worst one truncated trailing line, which readers tolerate and report.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .errors import ProjectError, ProjectLockedError
from .model import (
    ExperimentConfig,
    GenerationRecord,
    ScoreRecord,
    canonical_json,
    config_from_dict,
    config_to_dict,
    experiment_key,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "project.json"
LOCK_NAME = ".lock"


def default_clock() -> str:
    """ISO-8601 UTC now; EVALKIT_CLOCK pins it for reproducible runs."""
    fixed = os.environ.get("EVALKIT_CLOCK")
    if fixed:
        return fixed
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class FileIssue:
    path: str
    line: int
    problem: str


@dataclass
class ExperimentEntry:
    config: dict[str, Any]
    status: str = "pending"
    log: str = ""
    created: str = ""
    updated: str = ""
    n_samples: int | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "status": self.status,
            "log": self.log,
            "created": self.created,
            "updated": self.updated,
            "n_samples": self.n_samples,
            "error": self.error,
        }


class Project:
    """Tracks every experiment in one directory; all writes flow through it."""

    def __init__(self, root: str | Path, clock=None, create: bool = True):
        self.root = Path(root)
        self.clock = clock or default_clock
        self._lock_held = False
        manifest_path = self.root / MANIFEST_NAME
        if manifest_path.exists():
            try:
                data = json.loads(manifest_path.read_text(encoding="utf-8"))
                self.experiments: dict[str, ExperimentEntry] = {
                    key: ExperimentEntry(**entry)
                    for key, entry in data.get("experiments", {}).items()
                }
            except (ValueError, TypeError) as exc:
                raise ProjectError(
                    f"manifest {manifest_path} is unreadable: {exc}"
                ) from exc
        elif create:
            self.root.mkdir(parents=True, exist_ok=True)
            self.experiments = {}
            self._save_manifest()
        else:
            raise ProjectError(f"no project at {self.root}")

    # -- manifest ---------------------------------------------------------

    def _save_manifest(self) -> None:
        payload = {
            "version": 1,
            "experiments": {
                key: entry.to_dict() for key, entry in sorted(self.experiments.items())
            },
        }
        tmp = self.root / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self.root / MANIFEST_NAME)

    def register(self, config: ExperimentConfig) -> str:
        """Add an experiment to the manifest (idempotent); returns its key."""
        key = experiment_key(config)
        if key not in self.experiments:
            now = self.clock()
            self.experiments[key] = ExperimentEntry(
                config=config_to_dict(config),
                status="pending",
                log=f"logs/{key}.log",
                created=now,
                updated=now,
            )
            self._save_manifest()
        return key

    def set_status(self, key: str, status: str, error: str | None = None,
                   n_samples: int | None = None) -> None:
        entry = self._entry(key)
        entry.status = status
        entry.updated = self.clock()
        if error is not None:
            entry.error = error
        if n_samples is not None:
            entry.n_samples = n_samples
        self._save_manifest()

    def config_for(self, key: str) -> ExperimentConfig:
        return config_from_dict(self._entry(key).config)

    def _entry(self, key: str) -> ExperimentEntry:
        if key not in self.experiments:
            raise ProjectError(f"unknown experiment {key!r}")
        return self.experiments[key]

    # -- record files -----------------------------------------------------

    def generation_path(self, key: str) -> Path:
        return self.root / "generations" / f"{key}.jsonl"

    def score_path(self, key: str, metric: str) -> Path:
        return self.root / "scores" / key / f"{metric}.jsonl"

    def analysis_dir(self) -> Path:
        return self.root / "analysis"

    def _append_line(self, path: Path, payload: dict[str, Any]) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json(payload) + "\n")
            fh.flush()

    def append_generation(self, record: GenerationRecord) -> None:
        self._append_line(self.generation_path(record.experiment_key), record.to_dict())

    def append_score(self, record: ScoreRecord) -> None:
        self._append_line(
            self.score_path(record.experiment_key, record.metric_name),
            record.to_dict(),
        )

    def _read_jsonl(
        self, path: Path, strict: bool = True
    ) -> Iterator[tuple[int, dict[str, Any]]]:
        """Tolerates a truncated trailing line (interrupted write).

        With strict=False corrupt interior lines are skipped too, for
        read-only inspection paths; scan_issues reports them either way.
        """
        if not path.exists():
            return
        lines = path.read_text(encoding="utf-8").splitlines()
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except ValueError:
                if lineno == len(lines):
                    logger.warning("ignoring truncated last line of %s", path)
                    return
                if strict:
                    raise ProjectError(f"{path}:{lineno}: corrupt record line")
                logger.warning("skipping corrupt line %s:%d", path, lineno)

    def load_generations(
        self, key: str, strict: bool = True
    ) -> dict[str, GenerationRecord]:
        """Latest record per sample id, in first-seen order."""
        records: dict[str, GenerationRecord] = {}
        for _, payload in self._read_jsonl(self.generation_path(key), strict=strict):
            record = GenerationRecord.from_dict(payload)
            records[record.sample_id] = record
        return records

    def load_scores(self, key: str, metric: str) -> dict[str, ScoreRecord]:
        records: dict[str, ScoreRecord] = {}
        for _, payload in self._read_jsonl(self.score_path(key, metric)):
            record = ScoreRecord.from_dict(payload)
            records[record.sample_id] = record
        return records

    def score_metrics(self, key: str) -> list[str]:
        """Metric names with score files for this experiment."""
        directory = self.root / "scores" / key
        if not directory.is_dir():
            return []
        return sorted(p.stem for p in directory.glob("*.jsonl"))

    def scan_issues(self) -> list[FileIssue]:
        """Report unparseable record lines with file and line number."""
        issues = []
        for path in sorted(self.root.glob("generations/*.jsonl")) + sorted(
            self.root.glob("scores/*/*.jsonl")
        ):
            lines = path.read_text(encoding="utf-8").splitlines()
            for lineno, line in enumerate(lines, start=1):
                if not line.strip():
                    continue
                try:
                    json.loads(line)
                except ValueError:
                    issues.append(
                        FileIssue(
                            path=str(path.relative_to(self.root)),
                            line=lineno,
                            problem="corrupt record line"
                            + (" (truncated write)" if lineno == len(lines) else ""),
                        )
                    )
        return issues

    # -- logs and locking --------------------------------------------------

    def log_line(self, key: str, message: str) -> None:
        path = self.root / "logs" / f"{key}.log"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(f"{self.clock()} {message}\n")

    def lock(self) -> "_ProjectLock":
        return _ProjectLock(self)


class _ProjectLock:
    """Exclusive per-directory lock; stale locks from dead pids are reclaimed."""

    def __init__(self, project: Project):
        self.path = project.root / LOCK_NAME

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            holder = self._holder_pid()
            if holder is not None and _pid_alive(holder):
                raise ProjectLockedError(
                    f"project is locked by running process {holder} ({self.path})"
                ) from None
            logger.warning("reclaiming stale lock %s (pid %s)", self.path, holder)
            self.path.unlink(missing_ok=True)
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False

    def _holder_pid(self) -> int | None:
        try:
            return int(self.path.read_text().strip())
        except (OSError, ValueError):
            return None


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
