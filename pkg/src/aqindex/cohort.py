"""Reference cohorts: generation, import/export, pair and triplet building.

A cohort is the training signal for every scorer in the package: a positive
class of academics assumed mutually similar in quality and a negative class
assumed clearly weaker.  Cohorts come from CSV/JSON imports of raw records
or from a seeded synthetic sampler whose class locations are spaced far
enough apart that the separation assumption holds by construction.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations, product
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    FeatureVector,
    InvalidRecord,
    NormalizationCaps,
    derive_features,
    normalize,
    record_from_mapping,
    validate_record,
)

__all__ = [
    "LEVELS",
    "RESEARCH_TYPES",
    "COHORT_SCHEMA_VERSION",
    "DEFAULT_POSITIVE_LOCATIONS",
    "DEFAULT_NEGATIVE_LOCATIONS",
    "BadSpec",
    "EmptyClass",
    "CohortImportError",
    "Cohort",
    "SyntheticSpec",
    "AnchorSpec",
    "TrainingPair",
    "TrainingTriplet",
    "generate",
    "import_cohort",
    "load_cohort",
    "save_cohort",
    "make_pairs",
    "make_triplets",
    "pair_arrays",
    "triplet_arrays",
]

LEVELS = ("AssistProf", "AssocProf", "Prof")
RESEARCH_TYPES = ("theoretical", "applied")
COHORT_SCHEMA_VERSION = 1

# class location defaults: clearly separated, comfortably inside [0, 1]
_OFFSETS = np.linspace(-0.08, 0.08, N_FEATURES)
DEFAULT_POSITIVE_LOCATIONS = 0.72 + _OFFSETS
DEFAULT_NEGATIVE_LOCATIONS = 0.32 + 0.5 * _OFFSETS
DEFAULT_DISPERSION = 0.12


class BadSpec(ValueError):
    """Generation or anchor parameters outside their documented domain."""


class EmptyClass(ValueError):
    """A cohort class needed by the operation has no members."""


class CohortImportError(InvalidRecord):
    """One or more rows failed validation; lists every failing row."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class Cohort:
    positives: list
    negatives: list
    level: str = "AssistProf"
    field_tag: str = "synthetic"
    research_type: str = "applied"

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if self.research_type not in RESEARCH_TYPES:
            raise ValueError(f"research_type must be one of {RESEARCH_TYPES}")
        ids = [fv.candidate_id for fv in self.positives + self.negatives]
        if len(ids) != len(set(ids)):
            raise ValueError("candidate ids must be unique across the cohort")

    @property
    def n_pos(self) -> int:
        return len(self.positives)

    @property
    def n_neg(self) -> int:
        return len(self.negatives)

    def positive_matrix(self) -> np.ndarray:
        return np.stack([fv.x for fv in self.positives])

    def negative_matrix(self) -> np.ndarray:
        return np.stack([fv.x for fv in self.negatives])

    def to_dict(self) -> dict:
        members = []
        for cls, group in (("positive", self.positives),
                           ("negative", self.negatives)):
            for fv in group:
                members.append({
                    "candidate_id": fv.candidate_id,
                    "class": cls,
                    "x": [float(v) for v in fv.x],
                })
        return {
            "version": COHORT_SCHEMA_VERSION,
            "level": self.level,
            "field_tag": self.field_tag,
            "research_type": self.research_type,
            "feature_names": list(FEATURE_NAMES),
            "members": members,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cohort":
        if d.get("version") != COHORT_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported cohort document version {d.get('version')!r}")
        names = d.get("feature_names")
        if names is not None and tuple(names) != FEATURE_NAMES:
            raise ValueError("cohort document feature order does not match")
        pos, neg = [], []
        for m in d["members"]:
            fv = FeatureVector(str(m["candidate_id"]),
                               np.asarray(m["x"], dtype=np.float64))
            if m["class"] == "positive":
                pos.append(fv)
            elif m["class"] == "negative":
                neg.append(fv)
            else:
                raise ValueError(f"unknown class {m['class']!r} "
                                 f"for {m['candidate_id']}")
        return cls(positives=pos, negatives=neg, level=d["level"],
                   field_tag=d["field_tag"], research_type=d["research_type"])


def save_cohort(cohort: Cohort, path) -> None:
    Path(path).write_text(json.dumps(cohort.to_dict(), indent=2,
                                     sort_keys=True) + "\n")


def load_cohort(path) -> Cohort:
    return Cohort.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded truncated-bell sampler around per-class feature locations."""

    n_pos: int = 20
    n_neg: int = 20
    pos_loc: Optional[np.ndarray] = None
    neg_loc: Optional[np.ndarray] = None
    dispersion: float = DEFAULT_DISPERSION
    rng_seed: int = 0
    level: str = "AssistProf"
    field_tag: str = "synthetic"
    research_type: str = "applied"

    def __post_init__(self):
        pos = (DEFAULT_POSITIVE_LOCATIONS if self.pos_loc is None
               else np.asarray(self.pos_loc, dtype=np.float64))
        neg = (DEFAULT_NEGATIVE_LOCATIONS if self.neg_loc is None
               else np.asarray(self.neg_loc, dtype=np.float64))
        object.__setattr__(self, "pos_loc", pos)
        object.__setattr__(self, "neg_loc", neg)
        if self.n_pos < 1 or self.n_neg < 1:
            raise BadSpec("n_pos and n_neg must be >= 1")
        if pos.shape != (N_FEATURES,) or neg.shape != (N_FEATURES,):
            raise BadSpec(f"class locations must have {N_FEATURES} entries")
        if np.any(pos < 0) or np.any(pos > 1) or np.any(neg < 0) or np.any(neg > 1):
            raise BadSpec("class locations must lie in [0, 1]")
        if np.any(pos < neg):
            raise BadSpec("positive locations must dominate negative ones")
        if self.dispersion < 0:
            raise BadSpec("dispersion must be non-negative")


def generate(spec: SyntheticSpec) -> Cohort:
    """Sample a cohort; deterministic under spec.rng_seed.

    Draws are normal around the class locations, clipped to [0, 1].  If the
    empirical class means fail to separate componentwise (possible only for
    tight spacing), sampling repeats with a warning, up to 32 attempts.
    """
    rng = np.random.default_rng(spec.rng_seed)
    for _ in range(32):
        xp = np.clip(rng.normal(spec.pos_loc, spec.dispersion,
                                (spec.n_pos, N_FEATURES)), 0.0, 1.0)
        xn = np.clip(rng.normal(spec.neg_loc, spec.dispersion,
                                (spec.n_neg, N_FEATURES)), 0.0, 1.0)
        if np.all(xp.mean(axis=0) >= xn.mean(axis=0)):
            pos = [FeatureVector(f"pos-{i + 1:03d}", xp[i])
                   for i in range(spec.n_pos)]
            neg = [FeatureVector(f"neg-{i + 1:03d}", xn[i])
                   for i in range(spec.n_neg)]
            return Cohort(positives=pos, negatives=neg, level=spec.level,
                          field_tag=spec.field_tag,
                          research_type=spec.research_type)
        warnings.warn("class means failed to separate; resampling",
                      stacklevel=2)
    raise BadSpec("could not separate class means; widen the location gap "
                  "or lower the dispersion")


def _iter_rows(path):
    """Yield (row_number, mapping) from a CSV file or a JSON array of objects."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        data = json.loads(p.read_text())
        if not isinstance(data, list):
            raise InvalidRecord("JSON import expects a top-level array")
        for i, row in enumerate(data, start=1):
            yield i, dict(row)
    else:
        with open(p, newline="") as fh:
            for i, row in enumerate(csv.DictReader(fh), start=2):
                row.pop(None, None)
                yield i, row


def import_cohort(path, caps: Optional[NormalizationCaps] = None,
                  level: str = "AssistProf", field_tag: str = "imported",
                  research_type: str = "applied") -> Cohort:
    """Validate, derive and normalize every row of a labelled records file.

    Rows carry the raw record schema plus a ``class`` column with values
    ``positive`` or ``negative``.  All failing rows are reported together,
    each with its row number.
    """
    caps = caps or NormalizationCaps()
    problems: list[str] = []
    pos, neg = [], []
    for line, row in _iter_rows(path):
        cls = str(row.pop("class", row.pop("label", ""))).strip().lower()
        if cls not in ("positive", "negative"):
            problems.append(f"row {line}: class must be positive or negative")
            continue
        try:
            rec = record_from_mapping(row, line=line)
            report = validate_record(rec)
            if not report.ok:
                problems.append(f"row {line}: " + "; ".join(report.violations))
                continue
            fv = normalize(derive_features(rec), caps)
        except InvalidRecord as exc:
            problems.append(f"row {line}: {exc}")
            continue
        (pos if cls == "positive" else neg).append(fv)
    if problems:
        raise CohortImportError(problems)
    if not pos:
        raise EmptyClass("no positive-class rows in the file")
    if not neg:
        raise EmptyClass("no negative-class rows in the file")
    return Cohort(positives=pos, negatives=neg, level=level,
                  field_tag=field_tag, research_type=research_type)


@dataclass(frozen=True)
class AnchorSpec:
    """Fixed reference vector for triplet training: ideal but attainable.

    Valid anchors stay in [0, 1] and dominate the default positive-class
    locations componentwise, so "ideal" always means at least as strong as a
    typical positive-class academic.
    """

    anchor: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=np.float64)
        object.__setattr__(self, "anchor", a)
        if a.shape != (N_FEATURES,):
            raise BadSpec(f"anchor must have {N_FEATURES} entries")
        if not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
            raise BadSpec("anchor entries must lie in [0, 1]")
        if np.any(a < DEFAULT_POSITIVE_LOCATIONS - 1e-12):
            raise BadSpec("anchor must dominate the default positive-class "
                          "locations componentwise")

    @classmethod
    def from_positives(cls, cohort: Cohort,
                       percentile: float = 95.0) -> "AnchorSpec":
        """Componentwise percentile of the positive class, floored at the
        default positive locations and capped at 1.0."""
        if cohort.n_pos == 0:
            raise EmptyClass("cannot derive an anchor without positives")
        q = np.percentile(cohort.positive_matrix(), percentile, axis=0)
        return cls(np.minimum(np.maximum(q, DEFAULT_POSITIVE_LOCATIONS), 1.0))

    def vector(self) -> FeatureVector:
        return FeatureVector("anchor", self.anchor)


@dataclass(frozen=True)
class TrainingPair:
    x_a: FeatureVector
    x_b: FeatureVector
    y: int  # 1 = same class, 0 = cross class

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError("pair label must be 0 or 1")


@dataclass(frozen=True)
class TrainingTriplet:
    anchor: FeatureVector
    pos: FeatureVector
    neg: FeatureVector


def make_pairs(cohort: Cohort) -> list:
    """All unordered positive pairs (y=1) plus all cross pairs (y=0).

    Self-pairs are excluded: they contribute zero loss and cannot move any
    optimum.  Counts are C(n_pos, 2) + n_pos * n_neg.
    """
    if cohort.n_pos == 0 or cohort.n_neg == 0:
        raise EmptyClass("pair building needs both classes non-empty")
    if cohort.n_pos == 1:
        warnings.warn("single positive member: no similar pairs available",
                      stacklevel=2)
    pairs = [TrainingPair(a, b, 1)
             for a, b in combinations(cohort.positives, 2)]
    pairs += [TrainingPair(p, n, 0)
              for p, n in product(cohort.positives, cohort.negatives)]
    return pairs


def make_triplets(cohort: Cohort,
                  anchor: Optional[AnchorSpec] = None) -> list:
    """One triplet per (positive, negative) pair, all sharing one anchor."""
    if cohort.n_pos == 0 or cohort.n_neg == 0:
        raise EmptyClass("triplet building needs both classes non-empty")
    spec = anchor or AnchorSpec.from_positives(cohort)
    a = spec.vector()
    return [TrainingTriplet(a, p, n)
            for p, n in product(cohort.positives, cohort.negatives)]


def pair_arrays(pairs: Sequence[TrainingPair]):
    """Stack pairs into (x_a, x_b, y) arrays for the trainers."""
    x_a = np.stack([p.x_a.x for p in pairs])
    x_b = np.stack([p.x_b.x for p in pairs])
    y = np.array([float(p.y) for p in pairs])
    return x_a, x_b, y


def triplet_arrays(triplets: Sequence[TrainingTriplet]):
    """Stack triplets into (anchor, pos, neg) arrays for the trainers."""
    x_a = np.stack([t.anchor.x for t in triplets])
    x_p = np.stack([t.pos.x for t in triplets])
    x_n = np.stack([t.neg.x for t in triplets])
    return x_a, x_p, x_n
