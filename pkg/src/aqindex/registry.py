"""Versioned on-disk store for cohorts, model artifacts and run logs.

Documents are JSON files under one root directory.  Writes go through a
temp-file-then-rename step, so a reader never observes a half-written
document and a crash mid-write leaves the previous version intact.  Model
artifacts hold only deterministic content (identical request and seed give
identical bytes); wall-clock metadata lives in a sidecar file.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
from pathlib import Path
from typing import Optional

__all__ = [
    "UnknownCohort",
    "UnknownModel",
    "UnknownRun",
    "canonical_json",
    "content_id",
    "Registry",
]

_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]{0,63}")


class UnknownCohort(LookupError):
    pass


class UnknownModel(LookupError):
    pass


class UnknownRun(LookupError):
    pass


def canonical_json(obj) -> str:
    """One JSON byte-string per value: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def content_id(prefix: str, obj) -> str:
    """Deterministic id from content, so identical inputs collide on purpose."""
    digest = hashlib.sha256(canonical_json(obj).encode()).hexdigest()
    return f"{prefix}-{digest[:16]}"


class Registry:
    """File-backed store with atomic writes and per-model write locks."""

    def __init__(self, root):
        self.root = Path(root)
        for sub in ("cohorts", "models", "runs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._locks_guard = threading.Lock()
        self._locks: dict = {}

    def lock_for(self, key: str) -> threading.Lock:
        with self._locks_guard:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    # -- plumbing ---------------------------------------------------------

    def _write_json(self, path: Path, obj) -> None:
        text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def _read_json(path: Path, missing: type[LookupError], what: str):
        if not path.is_file():
            raise missing(what)
        return json.loads(path.read_text())

    @staticmethod
    def _check_id(value: str, missing: type[LookupError]) -> str:
        # reject anything that could escape the store directory
        if not _ID_RE.fullmatch(value or "") or ".." in value:
            raise missing(value)
        return value

    @staticmethod
    def _list_ids(folder: Path) -> list:
        return sorted(p.stem for p in folder.glob("*.json")
                      if not p.name.endswith(".meta.json"))

    # -- cohorts ----------------------------------------------------------

    def put_cohort(self, document: dict) -> str:
        cohort_id = content_id("c", document)
        self._write_json(self.root / "cohorts" / f"{cohort_id}.json", document)
        return cohort_id

    def get_cohort(self, cohort_id: str) -> dict:
        self._check_id(cohort_id, UnknownCohort)
        return self._read_json(self.root / "cohorts" / f"{cohort_id}.json",
                               UnknownCohort, cohort_id)

    def list_cohorts(self) -> list:
        return self._list_ids(self.root / "cohorts")

    # -- models -----------------------------------------------------------

    def model_path(self, model_id: str) -> Path:
        return self.root / "models" / f"{model_id}.json"

    def put_model(self, model_id: str, artifact: dict,
                  meta: Optional[dict] = None) -> None:
        self._check_id(model_id, UnknownModel)
        # artifact first: a model is visible only once fully written
        self._write_json(self.model_path(model_id), artifact)
        if meta is not None:
            self._write_json(self.root / "models" / f"{model_id}.meta.json",
                             meta)

    def get_model(self, model_id: str) -> dict:
        self._check_id(model_id, UnknownModel)
        return self._read_json(self.model_path(model_id), UnknownModel,
                               model_id)

    def get_model_meta(self, model_id: str) -> dict:
        self._check_id(model_id, UnknownModel)
        path = self.root / "models" / f"{model_id}.meta.json"
        return json.loads(path.read_text()) if path.is_file() else {}

    def has_model(self, model_id: str) -> bool:
        return bool(_ID_RE.fullmatch(model_id or "")) \
            and self.model_path(model_id).is_file()

    def list_models(self) -> list:
        return self._list_ids(self.root / "models")

    # -- runs -------------------------------------------------------------

    def put_run(self, run_id: str, document: dict) -> None:
        self._check_id(run_id, UnknownRun)
        self._write_json(self.root / "runs" / f"{run_id}.json", document)

    def get_run(self, run_id: str) -> dict:
        self._check_id(run_id, UnknownRun)
        return self._read_json(self.root / "runs" / f"{run_id}.json",
                               UnknownRun, run_id)

    def list_runs(self) -> list:
        return self._list_ids(self.root / "runs")
