"""Pre-score screening, committee rank aggregation and ranking reports.

The filter encodes per-level minimum requirements applied before any score
is computed: floors on Q1 first-author and total journal papers that scale
with seniority, ceilings on university ranks, and a graduate GPA floor.
Candidates who miss a requirement stay in the report with an explanation,
so a committee sees the whole field, not a silently truncated one.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import regression, siamese
from .cohort import LEVELS
from .features import FeatureRanking, FeatureVector, N_FEATURES, RawAcademicRecord

__all__ = [
    "K_BY_LEVEL",
    "L_BY_LEVEL",
    "EmptyInput",
    "InvalidPermutation",
    "CapsMismatch",
    "FilterSpec",
    "FilterResult",
    "ReportEntry",
    "AQIReport",
    "apply_filter",
    "aggregate_rankings",
    "rank_candidates",
]

# seniority multipliers: floors are 2*K Q1 first-author and 2*L total papers
K_BY_LEVEL = {"AssistProf": 1, "AssocProf": 3, "Prof": 5}
L_BY_LEVEL = {"AssistProf": 1, "AssocProf": 5, "Prof": 8}


class EmptyInput(ValueError):
    """No rankings supplied to aggregate."""


class InvalidPermutation(ValueError):
    """A committee ranking is not a permutation of 1..n."""


class CapsMismatch(ValueError):
    """Candidates were normalized with different caps than the model."""


@dataclass(frozen=True)
class FilterSpec:
    """Minimum requirements for one appointment level.

    Rank ceilings apply only when the rank is known; the GPA floor is
    expressed on a 4.0 reference scale and compared as a ratio, so records
    on other scales are judged fairly.
    """

    level: str
    max_national_rank: int = 10
    max_international_rank: int = 100
    min_gpa_g: float = 3.5
    gpa_ref_scale: float = 4.0

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if self.max_national_rank < 1 or self.max_international_rank < 1:
            raise ValueError("rank ceilings must be >= 1")
        if not 0 < self.min_gpa_g <= self.gpa_ref_scale:
            raise ValueError("min_gpa_g must lie in (0, gpa_ref_scale]")

    @property
    def k(self) -> int:
        return K_BY_LEVEL[self.level]

    @property
    def l(self) -> int:
        return L_BY_LEVEL[self.level]

    @property
    def min_q1_first_author(self) -> int:
        return 2 * self.k

    @property
    def min_total_papers(self) -> int:
        return 2 * self.l

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "max_national_rank": self.max_national_rank,
            "max_international_rank": self.max_international_rank,
            "min_gpa_g": self.min_gpa_g,
            "gpa_ref_scale": self.gpa_ref_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(**d)


@dataclass(frozen=True)
class FilterResult:
    candidate_id: str
    passed: bool
    reasons: tuple = ()


def apply_filter(raw: RawAcademicRecord, spec: FilterSpec) -> FilterResult:
    """Check every applicable threshold; reasons name each miss.

    The filter is monotone: improving any single input (more papers, a
    better rank, a higher GPA) never turns a pass into a fail.
    """
    reasons: list[str] = []
    if raw.n_q1_fa < spec.min_q1_first_author:
        reasons.append(f"needs >= {spec.min_q1_first_author} Q1 first-author "
                       f"papers, has {_fmt(raw.n_q1_fa)}")
    total = raw.n_q1 + raw.n_q2 + raw.n_q3 + raw.n_q4
    if total < spec.min_total_papers:
        reasons.append(f"needs >= {spec.min_total_papers} journal papers, "
                       f"has {_fmt(total)}")
    for label, rank in (("BSc", raw.r_nat_bs), ("PhD", raw.r_nat_phd)):
        if rank is not None and rank > spec.max_national_rank:
            reasons.append(f"{label} national rank {_fmt(rank)} exceeds "
                           f"{spec.max_national_rank}")
    for label, rank in (("BSc", raw.r_inat_bs), ("PhD", raw.r_inat_phd)):
        if rank is not None and rank > spec.max_international_rank:
            reasons.append(f"{label} international rank {_fmt(rank)} exceeds "
                           f"{spec.max_international_rank}")
    scale = raw.gpa_scale if raw.gpa_scale > 0 else spec.gpa_ref_scale
    if raw.gpa_g / scale < spec.min_gpa_g / spec.gpa_ref_scale:
        reasons.append(f"graduate GPA {_fmt(raw.gpa_g)}/{_fmt(scale)} below "
                       f"{spec.min_gpa_g}/{spec.gpa_ref_scale}")
    return FilterResult(raw.candidate_id, passed=not reasons,
                        reasons=tuple(reasons))


def _fmt(v: float) -> str:
    return str(int(v)) if float(v) == int(v) else f"{v:g}"


def aggregate_rankings(rankings: Sequence) -> Union[FeatureRanking, list]:
    """Combine committee rankings by average rank.

    Features sort ascending by mean rank; exact ties keep the canonical
    feature order.  Inputs may be FeatureRanking objects or plain 1..n
    permutations of any common length; the result is a FeatureRanking when
    n matches the feature count, otherwise a plain rank list.
    """
    if len(rankings) == 0:
        raise EmptyInput("need at least one ranking")
    rows = []
    n = None
    for r in rankings:
        vec = r.ranks if isinstance(r, FeatureRanking) else np.asarray(r)
        vec = np.asarray(vec, dtype=np.int64)
        if n is None:
            n = vec.shape[0]
        if vec.shape != (n,) or sorted(vec.tolist()) != list(range(1, n + 1)):
            raise InvalidPermutation(
                f"ranking {vec.tolist()} is not a permutation of 1..{n}")
        rows.append(vec)
    avg = np.mean(rows, axis=0)
    by_importance = sorted(range(n), key=lambda i: (avg[i], i))
    out = np.empty(n, dtype=np.int64)
    for rank_pos, feat in enumerate(by_importance, start=1):
        out[feat] = rank_pos
    if n == N_FEATURES:
        return FeatureRanking(out)
    return out.tolist()


@dataclass(frozen=True)
class ReportEntry:
    rank: int
    candidate_id: str
    aqi: float
    passed_filter: bool
    reasons: tuple = ()


@dataclass(frozen=True)
class AQIReport:
    """Candidates sorted by AQI descending, ties by id ascending."""

    entries: tuple

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "entries": [
                {
                    "rank": e.rank,
                    "candidate_id": e.candidate_id,
                    "aqi": e.aqi,
                    "passed_filter": e.passed_filter,
                    "reasons": list(e.reasons),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AQIReport":
        return cls(entries=tuple(
            ReportEntry(rank=m["rank"], candidate_id=m["candidate_id"],
                        aqi=m["aqi"], passed_filter=m["passed_filter"],
                        reasons=tuple(m["reasons"]))
            for m in d["entries"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["rank", "candidate_id", "aqi", "passed_filter",
                         "reasons"])
        for e in self.entries:
            writer.writerow([e.rank, e.candidate_id, f"{e.aqi:.6f}",
                             e.passed_filter, " | ".join(e.reasons)])
        return buf.getvalue()


def _score_one(model, x: np.ndarray, backend=None) -> float:
    if isinstance(model, regression.ModelWeights):
        return 100.0 * regression.evaluate(model, x)
    if isinstance(model, siamese.SiameseNet):
        return float(100.0 * model.score(x, backend=backend)[0])
    raise TypeError(f"cannot score with {type(model).__name__}")


def rank_candidates(model, candidates: Sequence[FeatureVector],
                    filter_results: Optional[Sequence[FilterResult]] = None,
                    candidate_caps=None, model_caps=None,
                    backend=None) -> AQIReport:
    """Score every candidate (filtered-out ones included, flagged) and sort.

    When both caps snapshots are supplied they must agree; scoring features
    normalized one way with weights tuned another silently shifts every AQI.
    """
    if candidate_caps is not None and model_caps is not None:
        if candidate_caps.to_dict() != model_caps.to_dict():
            raise CapsMismatch(
                "candidate normalization caps differ from the model snapshot")
    flags = {}
    for fr in filter_results or ():
        flags[fr.candidate_id] = fr
    scored = []
    for fv in candidates:
        fr = flags.get(fv.candidate_id)
        scored.append((
            _score_one(model, fv.x, backend=backend),
            fv.candidate_id,
            fr.passed if fr is not None else True,
            fr.reasons if fr is not None else (),
        ))
    scored.sort(key=lambda t: (-t[0], t[1]))
    entries = tuple(
        ReportEntry(rank=i, candidate_id=cid, aqi=aqi, passed_filter=passed,
                    reasons=reasons)
        for i, (aqi, cid, passed, reasons) in enumerate(scored, start=1))
    return AQIReport(entries=entries)
