"""Feature construction for academic candidate records.

Raw per-candidate inputs (publication counts, citation indices, supervision
counts, university rankings, GPAs, research time) are turned into 21
per-research-year quality features, then normalized to [0, 1] with a fixed,
monotone scheme: larger counts, smaller ranks and higher GPAs always yield
larger feature values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "RATE",
    "RANK",
    "GPA",
    "FEATURE_NAMES",
    "FEATURE_KINDS",
    "N_FEATURES",
    "RAW_FIELDS",
    "RawAcademicRecord",
    "DerivedFeatures",
    "NormalizationCaps",
    "FeatureVector",
    "FeatureRanking",
    "ValidationReport",
    "InvalidRecord",
    "ZeroResearchTime",
    "ZeroPostPhDTime",
    "validate_record",
    "derive_features",
    "normalize",
    "record_from_mapping",
    "read_records_csv",
    "write_records_csv",
]

# Feature kinds: per-year rates saturate at a cap, university ranks are
# inverted (rank 1 is best), GPAs are divided by their scale.
RATE = "rate"
RANK = "rank"
GPA = "gpa"

# The 21 features in canonical order.  The default importance ranking is the
# position in this list (1 = most important).
FEATURE_NAMES = (
    "q1_rate",            # Q1 papers per author per research year
    "h_index_rate",       # h-index per research year
    "citation_rate",      # citations per research year
    "i10_rate",           # i10-index per research year
    "book_rate",          # books per author per research year
    "award_rate",         # awards / recognized work per research year
    "phd_rank_intl",      # international rank of PhD university
    "patent_rate",        # patents per author per research year
    "project_rate",       # PI projects per research year
    "phd_student_rate",   # PhD students per post-PhD year
    "q2_rate",
    "phd_rank_natl",      # national rank of PhD university
    "bsc_rank_intl",      # international rank of BSc university
    "bsc_rank_natl",      # national rank of BSc university
    "ms_student_rate",    # MS students per post-PhD year
    "gpa_grad",
    "gpa_undergrad",
    "q3_rate",
    "q4_rate",
    "book_chapter_rate",
    "conference_rate",
)

FEATURE_KINDS = (
    RATE, RATE, RATE, RATE, RATE, RATE, RANK, RATE, RATE, RATE,
    RATE, RANK, RANK, RANK, RATE, GPA, GPA, RATE, RATE, RATE, RATE,
)

N_FEATURES = len(FEATURE_NAMES)

_RANK_FEATURES = tuple(i for i, k in enumerate(FEATURE_KINDS) if k == RANK)
_RATE_FEATURES = tuple(i for i, k in enumerate(FEATURE_KINDS) if k == RATE)
_GPA_FEATURES = tuple(i for i, k in enumerate(FEATURE_KINDS) if k == GPA)


class InvalidRecord(ValueError):
    """Raised when an operation requires a record that passes validation."""


class ZeroResearchTime(InvalidRecord):
    """Research time (from PhD start) must be strictly positive."""


class ZeroPostPhDTime(InvalidRecord):
    """Student supervision reported but post-PhD research time is zero."""


@dataclass(frozen=True)
class RawAcademicRecord:
    """Raw inputs for one candidate, as collected from CVs and databases.

    Counts are non-negative; ``*_ave_auth`` fields give the average number of
    authors for the corresponding output type and must be >= 1 whenever the
    count is positive.  ``t_res`` is research time in years since PhD start,
    ``t_res_prime`` since PhD graduation.  University ranks are >= 1 and may
    be absent (None).  GPAs live on ``gpa_scale`` (default 4.0).
    """

    candidate_id: str
    n_q1: float = 0
    n_q2: float = 0
    n_q3: float = 0
    n_q4: float = 0
    n_q1_ave_auth: float = 1.0
    n_q2_ave_auth: float = 1.0
    n_q3_ave_auth: float = 1.0
    n_q4_ave_auth: float = 1.0
    n_q1_fa: float = 0
    n_conf: float = 0
    n_conf_ave_auth: float = 1.0
    n_book: float = 0
    n_book_ave_auth: float = 1.0
    n_book_chp: float = 0
    n_book_chp_ave_auth: float = 1.0
    n_cit: float = 0
    h_ind: float = 0
    i10_ind: float = 0
    n_pat: float = 0
    n_pat_ave_auth: float = 1.0
    n_prj: float = 0
    n_award_recog_work: float = 0
    n_ms_stud: float = 0
    n_phd_stud: float = 0
    t_res: float = 1.0
    t_res_prime: float = 0.0
    r_nat_bs: Optional[float] = None
    r_nat_phd: Optional[float] = None
    r_inat_bs: Optional[float] = None
    r_inat_phd: Optional[float] = None
    gpa_u: float = 0.0
    gpa_g: float = 0.0
    gpa_scale: float = 4.0
    n_course_u: float = 0    # ingested but unused by the 21 features
    n_course_g: float = 0    # ingested but unused by the 21 features


RAW_FIELDS = tuple(f.name for f in fields(RawAcademicRecord))

_COUNT_FIELDS = (
    "n_q1", "n_q2", "n_q3", "n_q4", "n_q1_fa", "n_conf", "n_book",
    "n_book_chp", "n_cit", "h_ind", "i10_ind", "n_pat", "n_prj",
    "n_award_recog_work", "n_ms_stud", "n_phd_stud", "n_course_u",
    "n_course_g",
)

# (count field, paired average-authors field)
_AVE_AUTH_PAIRS = (
    ("n_q1", "n_q1_ave_auth"),
    ("n_q2", "n_q2_ave_auth"),
    ("n_q3", "n_q3_ave_auth"),
    ("n_q4", "n_q4_ave_auth"),
    ("n_conf", "n_conf_ave_auth"),
    ("n_book", "n_book_ave_auth"),
    ("n_book_chp", "n_book_chp_ave_auth"),
    ("n_pat", "n_pat_ave_auth"),
)

_RANK_FIELDS = ("r_nat_bs", "r_nat_phd", "r_inat_bs", "r_inat_phd")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of record validation: empty ``violations`` means valid."""

    candidate_id: str
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise InvalidRecord(
                f"record {self.candidate_id!r}: " + "; ".join(self.violations)
            )


def validate_record(raw: RawAcademicRecord) -> ValidationReport:
    """Check every structural invariant of a raw record.

    Returns a report listing each violated invariant; the list is empty iff
    the record is valid.  Nothing raises here: callers decide whether a bad
    record is fatal.
    """
    v: list[str] = []
    for name in _COUNT_FIELDS:
        if getattr(raw, name) < 0:
            v.append(f"{name} must be non-negative")
    for count_f, auth_f in _AVE_AUTH_PAIRS:
        if getattr(raw, count_f) > 0 and getattr(raw, auth_f) < 1:
            v.append(f"{auth_f} must be >= 1 when {count_f} > 0")
    if raw.t_res <= 0:
        v.append("t_res must be positive")
    if raw.t_res_prime < 0:
        v.append("t_res_prime must be non-negative")
    elif raw.t_res < raw.t_res_prime:
        v.append("t_res must be >= t_res_prime")
    for name in _RANK_FIELDS:
        r = getattr(raw, name)
        if r is None:
            continue
        if r < 1 or float(r) != int(r):
            v.append(f"{name} must be an integer >= 1 when present")
    if raw.gpa_scale <= 0:
        v.append("gpa_scale must be positive")
    else:
        for name in ("gpa_u", "gpa_g"):
            g = getattr(raw, name)
            if not 0 <= g <= raw.gpa_scale:
                v.append(f"{name} must lie in [0, {raw.gpa_scale}]")
    return ValidationReport(raw.candidate_id, tuple(v))


@dataclass(frozen=True)
class DerivedFeatures:
    """The 21 features on their raw scales, before normalization.

    Rate features are per-year (and per-author where collaboration applies),
    rank features keep the raw rank (>= 1), GPA features keep the raw GPA.
    ``absent`` marks rank features with no applicable rank.
    """

    candidate_id: str
    values: np.ndarray            # shape (21,)
    absent: np.ndarray            # shape (21,) bool, only rank slots may be True
    gpa_scale: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "absent", np.asarray(self.absent, dtype=bool))
        if self.values.shape != (N_FEATURES,) or self.absent.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} feature slots")

    def value(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])


def _per_author_rate(count: float, ave_auth: float, t: float) -> float:
    if count == 0:
        return 0.0
    return count / (ave_auth * t)


def derive_features(raw: RawAcademicRecord) -> DerivedFeatures:
    """Build the 21 raw-scale features from one validated record.

    Publication-like counts are divided by (average authors x research time);
    citation indices, awards and PI projects by research time alone; student
    supervision counts by post-PhD time; ranks and GPAs pass through.
    """
    report = validate_record(raw)
    report.raise_if_invalid()
    if raw.t_res == 0:
        raise ZeroResearchTime(f"record {raw.candidate_id!r}: t_res is zero")
    n_students = raw.n_ms_stud + raw.n_phd_stud
    if raw.t_res_prime == 0 and n_students > 0:
        raise ZeroPostPhDTime(
            f"record {raw.candidate_id!r}: supervised students reported "
            "but t_res_prime is zero"
        )

    t = raw.t_res
    tp = raw.t_res_prime
    values = np.zeros(N_FEATURES)
    absent = np.zeros(N_FEATURES, dtype=bool)

    def put(name, value):
        values[FEATURE_NAMES.index(name)] = value

    put("q1_rate", _per_author_rate(raw.n_q1, raw.n_q1_ave_auth, t))
    put("q2_rate", _per_author_rate(raw.n_q2, raw.n_q2_ave_auth, t))
    put("q3_rate", _per_author_rate(raw.n_q3, raw.n_q3_ave_auth, t))
    put("q4_rate", _per_author_rate(raw.n_q4, raw.n_q4_ave_auth, t))
    put("conference_rate", _per_author_rate(raw.n_conf, raw.n_conf_ave_auth, t))
    put("book_rate", _per_author_rate(raw.n_book, raw.n_book_ave_auth, t))
    put("book_chapter_rate",
        _per_author_rate(raw.n_book_chp, raw.n_book_chp_ave_auth, t))
    put("patent_rate", _per_author_rate(raw.n_pat, raw.n_pat_ave_auth, t))
    put("citation_rate", raw.n_cit / t)
    put("h_index_rate", raw.h_ind / t)
    put("i10_rate", raw.i10_ind / t)
    put("award_rate", raw.n_award_recog_work / t)
    put("project_rate", raw.n_prj / t)
    put("ms_student_rate", raw.n_ms_stud / tp if tp > 0 else 0.0)
    put("phd_student_rate", raw.n_phd_stud / tp if tp > 0 else 0.0)
    put("gpa_grad", raw.gpa_g)
    put("gpa_undergrad", raw.gpa_u)

    for name, rank_field in (
        ("phd_rank_intl", "r_inat_phd"),
        ("phd_rank_natl", "r_nat_phd"),
        ("bsc_rank_intl", "r_inat_bs"),
        ("bsc_rank_natl", "r_nat_bs"),
    ):
        idx = FEATURE_NAMES.index(name)
        r = getattr(raw, rank_field)
        if r is None:
            absent[idx] = True
            values[idx] = np.nan
        else:
            values[idx] = float(r)

    return DerivedFeatures(raw.candidate_id, values, absent, raw.gpa_scale)


# Saturation caps for the per-year rate features.  These are engineering
# defaults, not measured constants: each cap marks an output rate beyond
# which extra volume no longer raises the feature.  Override via config.
DEFAULT_RATE_CAPS = {
    "q1_rate": 2.0,
    "h_index_rate": 2.0,
    "citation_rate": 200.0,
    "i10_rate": 3.0,
    "book_rate": 0.2,
    "award_rate": 1.0,
    "patent_rate": 0.5,
    "project_rate": 0.5,
    "phd_student_rate": 1.0,
    "q2_rate": 2.0,
    "ms_student_rate": 2.0,
    "q3_rate": 2.0,
    "q4_rate": 2.0,
    "book_chapter_rate": 0.5,
    "conference_rate": 3.0,
}

ABSENT_RANK_ZERO = "zero"   # absent rank contributes 0
ABSENT_RANK_CAP = "cap"     # absent rank treated as the worst rank (rank_cap)


@dataclass(frozen=True)
class NormalizationCaps:
    """Fixed normalization parameters shared by training and scoring.

    Rates map by v -> min(v / cap, 1).  Ranks invert linearly so rank 1 maps
    to 1.0 and ranks >= rank_cap map to 0.0.  GPAs divide by gpa_scale.
    Using fixed caps (rather than cohort min-max) keeps scores comparable
    across runs and preserves monotonicity.
    """

    rate_caps: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_RATE_CAPS))
    rank_cap: int = 500
    gpa_scale: float = 4.0
    absent_rank_policy: str = ABSENT_RANK_ZERO

    def __post_init__(self):
        missing = [FEATURE_NAMES[i] for i in _RATE_FEATURES
                   if FEATURE_NAMES[i] not in self.rate_caps]
        if missing:
            raise ValueError(f"missing rate caps for: {missing}")
        if any(self.rate_caps[FEATURE_NAMES[i]] <= 0 for i in _RATE_FEATURES):
            raise ValueError("all rate caps must be positive")
        if self.rank_cap < 2:
            raise ValueError("rank_cap must be >= 2")
        if self.gpa_scale <= 0:
            raise ValueError("gpa_scale must be positive")
        if self.absent_rank_policy not in (ABSENT_RANK_ZERO, ABSENT_RANK_CAP):
            raise ValueError(
                f"unknown absent_rank_policy {self.absent_rank_policy!r}")

    def cap_vector(self) -> np.ndarray:
        caps = np.ones(N_FEATURES)
        for i in _RATE_FEATURES:
            caps[i] = self.rate_caps[FEATURE_NAMES[i]]
        return caps

    def to_dict(self) -> dict:
        return {
            "rate_caps": {k: float(v) for k, v in sorted(self.rate_caps.items())},
            "rank_cap": int(self.rank_cap),
            "gpa_scale": float(self.gpa_scale),
            "absent_rank_policy": self.absent_rank_policy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationCaps":
        return cls(
            rate_caps=dict(d.get("rate_caps", DEFAULT_RATE_CAPS)),
            rank_cap=int(d.get("rank_cap", 500)),
            gpa_scale=float(d.get("gpa_scale", 4.0)),
            absent_rank_policy=d.get("absent_rank_policy", ABSENT_RANK_ZERO),
        )


@dataclass(frozen=True)
class FeatureVector:
    """Normalized feature vector: 21 components, each in [0, 1]."""

    candidate_id: str
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        object.__setattr__(self, "x", x)
        if x.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} components, got {x.shape}")
        if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
            raise ValueError("feature vector components must lie in [0, 1]")


def _normalize_rank(r: float, rank_cap: int) -> float:
    return max(0.0, 1.0 - (r - 1.0) / (rank_cap - 1.0))


def normalize(d: DerivedFeatures, caps: NormalizationCaps) -> FeatureVector:
    """Map raw-scale features into [0, 1] with the monotone scheme in `caps`.

    Better raw values (higher rates/GPAs, smaller ranks) never decrease any
    output component.  Absent ranks contribute 0 under both policies of the
    default linear inversion (`zero` maps directly to 0; `cap` assigns the
    worst rank first).
    """
    x = np.zeros(N_FEATURES)
    for i in _RATE_FEATURES:
        cap = caps.rate_caps[FEATURE_NAMES[i]]
        x[i] = min(d.values[i] / cap, 1.0)
    for i in _RANK_FEATURES:
        if d.absent[i]:
            if caps.absent_rank_policy == ABSENT_RANK_ZERO:
                x[i] = 0.0
            else:
                x[i] = _normalize_rank(float(caps.rank_cap), caps.rank_cap)
        else:
            x[i] = _normalize_rank(d.values[i], caps.rank_cap)
    scale = d.gpa_scale if d.gpa_scale > 0 else caps.gpa_scale
    for i in _GPA_FEATURES:
        x[i] = min(max(d.values[i] / scale, 0.0), 1.0)
    return FeatureVector(d.candidate_id, x)


@dataclass(frozen=True)
class FeatureRanking:
    """Importance ranking of the 21 features: a permutation of 1..21.

    ``ranks[i]`` is the rank of feature ``FEATURE_NAMES[i]``; 1 is the most
    important.  The default ranking follows the canonical feature order.
    """

    ranks: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranks, dtype=np.int64)
        object.__setattr__(self, "ranks", r)
        if r.shape != (N_FEATURES,) or sorted(r.tolist()) != list(range(1, N_FEATURES + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{N_FEATURES}")

    @classmethod
    def default(cls) -> "FeatureRanking":
        return cls(np.arange(1, N_FEATURES + 1))

    def order(self) -> np.ndarray:
        """Feature indices sorted from most to least important."""
        return np.argsort(self.ranks, kind="stable")

    def to_list(self) -> list[int]:
        return [int(r) for r in self.ranks]


# ---------------------------------------------------------------------------
# CSV interchange


def record_from_mapping(row: dict, line: Optional[int] = None) -> RawAcademicRecord:
    """Build a record from a string/number mapping (CSV row or JSON object).

    Absent ranks are empty strings or missing keys.  Raises ``InvalidRecord``
    with the offending field name on unparseable values.
    """
    where = f" (row {line})" if line is not None else ""
    kwargs: dict = {}
    cid = row.get("candidate_id")
    if cid is None or str(cid).strip() == "":
        raise InvalidRecord(f"missing candidate_id{where}")
    kwargs["candidate_id"] = str(cid).strip()
    for name in RAW_FIELDS:
        if name == "candidate_id" or name not in row:
            continue
        value = row[name]
        if isinstance(value, str):
            value = value.strip()
        if name in _RANK_FIELDS:
            if value is None or value == "":
                kwargs[name] = None
                continue
        elif value is None or value == "":
            continue  # keep the field default
        try:
            kwargs[name] = float(value)
        except (TypeError, ValueError):
            raise InvalidRecord(f"field {name} is not numeric{where}") from None
    unknown = set(row) - set(RAW_FIELDS)
    if unknown - {"class", "label"}:
        raise InvalidRecord(
            f"unknown fields {sorted(unknown - {'class', 'label'})}{where}")
    return RawAcademicRecord(**kwargs)


def read_records_csv(path: str | Path) -> list[RawAcademicRecord]:
    """Read one candidate per row; header uses the raw input field names."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=2):
            row.pop(None, None)
            records.append(record_from_mapping(row, line=i))
    return records


def write_records_csv(records: Iterable[RawAcademicRecord], path: str | Path,
                      extra_columns: Optional[dict[str, Sequence]] = None) -> None:
    """Write records with the canonical header (absent ranks as empty cells)."""
    records = list(records)
    extra = extra_columns or {}
    header = list(RAW_FIELDS) + list(extra)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j, rec in enumerate(records):
            row = []
            for name in RAW_FIELDS:
                value = getattr(rec, name)
                row.append("" if value is None else value)
            for col in extra:
                row.append(extra[col][j])
            writer.writerow(row)
