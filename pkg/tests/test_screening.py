"""Hard eligibility filter, rank aggregation and report assembly."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqindex.features import (
    N_FEATURES,
    FeatureRanking,
    FeatureVector,
    RawAcademicRecord,
)
from aqindex.regression import M1, ModelWeights
from aqindex.screening import (
    CapsMismatch,
    EmptyInput,
    FilterSpec,
    InvalidPermutation,
    aggregate_rankings,
    apply_filter,
    rank_candidates,
)
from aqindex.siamese import SiameseNet


def candidate(**kw):
    base = dict(candidate_id="c", n_q1=12, n_q1_fa=6, n_q2=4,
                n_conf=3, n_cit=400, h_ind=10, t_res=8.0, t_res_prime=5.0,
                r_nat_phd=4, r_inat_phd=40, r_nat_bs=6, r_inat_bs=80,
                gpa_u=3.6, gpa_g=3.8)
    base.update(kw)
    return RawAcademicRecord(**base)


# ---------------------------------------------------------------------------
# threshold schedule


def test_quota_schedule_by_level():
    assert FilterSpec(level="AssistProf").min_q1_first_author == 2
    assert FilterSpec(level="AssistProf").min_total_papers == 2
    assert FilterSpec(level="AssocProf").min_q1_first_author == 6
    assert FilterSpec(level="AssocProf").min_total_papers == 10
    assert FilterSpec(level="Prof").min_q1_first_author == 10
    assert FilterSpec(level="Prof").min_total_papers == 16


def test_unknown_level_rejected():
    with pytest.raises(ValueError):
        FilterSpec(level="Provost")


# ---------------------------------------------------------------------------
# the three reference profiles


def test_assistant_with_single_q1_first_author_fails():
    rec = candidate(n_q1=1, n_q1_fa=1, n_q2=0, n_conf=0)
    out = apply_filter(rec, FilterSpec(level="AssistProf"))
    assert not out.passed
    assert any("Q1 first-author" in r for r in out.reasons)


def test_low_graduate_gpa_fails():
    rec = candidate(gpa_g=3.4)
    out = apply_filter(rec, FilterSpec(level="AssistProf"))
    assert not out.passed
    assert any("GPA" in r for r in out.reasons)


def test_strong_professor_profile_passes():
    rec = candidate(n_q1=30, n_q1_fa=14, n_q2=8, n_cit=2500, h_ind=25,
                    t_res=18.0, t_res_prime=14.0,
                    r_nat_phd=2, r_inat_phd=15, gpa_g=3.9)
    out = apply_filter(rec, FilterSpec(level="Prof"))
    assert out.passed
    assert out.reasons == ()


# ---------------------------------------------------------------------------
# individual rules


def test_total_papers_counts_all_journal_quartiles():
    # Q1..Q4 sum to the journal total; conference papers do not count
    rec = candidate(n_q1=2, n_q1_fa=2, n_q2=0, n_q3=0, n_q4=0, n_conf=50)
    spec = FilterSpec(level="AssocProf")      # needs 10 journal papers
    out = apply_filter(rec, spec)
    assert any("journal" in r for r in out.reasons)


def test_rank_ceiling_applies_when_present():
    rec = candidate(r_nat_phd=30)             # ceiling is 10
    out = apply_filter(rec, FilterSpec(level="AssistProf"))
    assert not out.passed
    assert any("national rank 30" in r for r in out.reasons)


def test_international_rank_ceiling():
    rec = candidate(r_inat_bs=150)            # ceiling is 100
    out = apply_filter(rec, FilterSpec(level="AssistProf"))
    assert any("international rank 150" in r for r in out.reasons)


def test_absent_ranks_do_not_trip_ceilings():
    rec = candidate(r_nat_phd=None, r_inat_phd=None,
                    r_nat_bs=None, r_inat_bs=None)
    out = apply_filter(rec, FilterSpec(level="AssistProf"))
    assert out.passed


def test_gpa_compared_as_fraction_of_scale():
    # 17.5 / 20 = 0.875 matches 3.5 / 4.0 exactly
    rec = candidate(gpa_g=17.5, gpa_u=15.0, gpa_scale=20.0)
    assert apply_filter(rec, FilterSpec(level="AssistProf")).passed
    rec_low = candidate(gpa_g=17.0, gpa_u=15.0, gpa_scale=20.0)
    assert not apply_filter(rec_low, FilterSpec(level="AssistProf")).passed


def test_reasons_accumulate():
    rec = candidate(n_q1=0, n_q1_fa=0, n_q2=0, n_conf=0,
                    r_nat_phd=99, gpa_g=2.0)
    out = apply_filter(rec, FilterSpec(level="Prof"))
    assert len(out.reasons) >= 4


def test_threshold_overrides():
    spec = FilterSpec(level="AssistProf", max_national_rank=50)
    rec = candidate(r_nat_phd=30)
    assert apply_filter(rec, spec).passed


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=60, deadline=None)
def test_filter_is_monotone(seed):
    # improving any single raw input never flips pass -> fail
    rng = np.random.default_rng(seed)
    rec = candidate(
        n_q1=int(rng.integers(0, 14)), n_q1_fa=int(rng.integers(0, 8)),
        n_q2=int(rng.integers(0, 8)),
        r_nat_phd=int(rng.integers(1, 30)), gpa_g=float(rng.uniform(3, 4)))
    spec = FilterSpec(level="AssocProf")
    before = apply_filter(rec, spec).passed
    bumps = {
        "n_q1": rec.n_q1 + 1, "n_q1_fa": rec.n_q1_fa + 1,
        "n_q2": rec.n_q2 + 2, "gpa_g": min(4.0, rec.gpa_g + 0.2),
        "r_nat_phd": max(1, int(rec.r_nat_phd) - 3),
    }
    for field_name, better in bumps.items():
        improved = RawAcademicRecord(**{**rec.__dict__, field_name: better})
        after = apply_filter(improved, spec).passed
        if before:
            assert after, f"improving {field_name} flipped pass to fail"


# ---------------------------------------------------------------------------
# rank aggregation


def test_aggregate_single_ranking_is_identity():
    assert aggregate_rankings([[1, 2, 3]]) == [1, 2, 3]


def test_aggregate_opposite_rankings_tie_break_canonical():
    # averages tie everywhere; earlier position wins
    assert aggregate_rankings([[1, 2, 3], [3, 2, 1]]) == [1, 2, 3]


def test_aggregate_partial_tie():
    # averages: (1.5, 1.5, 3); the first-position tie goes to feature 0
    assert aggregate_rankings([[1, 2, 3], [2, 1, 3]]) == [1, 2, 3]


def test_aggregate_majority_wins():
    out = aggregate_rankings([[2, 1, 3], [2, 1, 3], [1, 2, 3]])
    assert out == [2, 1, 3]


def test_aggregate_duplicated_input_is_idempotent():
    base = [4, 2, 1, 3]
    assert aggregate_rankings([base, base, base]) == base


def test_aggregate_output_is_permutation_property():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        panel = [list(rng.permutation(n) + 1) for _ in range(int(rng.integers(1, 6)))]
        out = aggregate_rankings(panel)
        assert sorted(out) == list(range(1, n + 1))


def test_aggregate_full_width_returns_ranking_object():
    panel = [list(range(1, N_FEATURES + 1))]
    out = aggregate_rankings(panel)
    assert isinstance(out, FeatureRanking)


def test_aggregate_rejects_empty():
    with pytest.raises(EmptyInput):
        aggregate_rankings([])


def test_aggregate_rejects_non_permutation():
    with pytest.raises(InvalidPermutation):
        aggregate_rankings([[1, 1, 3]])


def test_aggregate_rejects_mixed_lengths():
    with pytest.raises((InvalidPermutation, ValueError)):
        aggregate_rankings([[1, 2, 3], [1, 2]])


# ---------------------------------------------------------------------------
# report construction


def uniform_model():
    return ModelWeights(M1, np.full(21, 1 / 21))


def fv(cid, level_value):
    return FeatureVector(cid, np.full(N_FEATURES, level_value))


def test_rank_candidates_orders_by_aqi():
    report = rank_candidates(uniform_model(), [fv("low", 0.2), fv("high", 0.9),
                                               fv("mid", 0.5)])
    ids = [e.candidate_id for e in report.entries]
    assert ids == ["high", "mid", "low"]
    assert [e.rank for e in report.entries] == [1, 2, 3]
    assert report.entries[0].aqi == pytest.approx(90.0)


def test_rank_ties_break_by_candidate_id():
    report = rank_candidates(uniform_model(), [fv("zeta", 0.5), fv("alfa", 0.5)])
    assert [e.candidate_id for e in report.entries] == ["alfa", "zeta"]


def test_rank_candidates_with_siamese_model():
    net = SiameseNet.init(seed=0, scale=2.0)
    report = rank_candidates(net, [fv("a", 0.1), fv("b", 0.9)])
    assert report.entries[0].candidate_id == "b"
    assert 0.0 <= report.entries[0].aqi <= 100.0


def test_filter_results_attach_to_entries():
    from aqindex.screening import FilterResult
    results = [FilterResult("a", False, ("too few Q1 first-author papers",)),
               FilterResult("b", True, ())]
    report = rank_candidates(uniform_model(), [fv("a", 0.9), fv("b", 0.2)],
                             filter_results=results)
    by_id = {e.candidate_id: e for e in report.entries}
    assert by_id["a"].passed_filter is False
    assert by_id["a"].reasons
    assert by_id["b"].passed_filter is True


def test_caps_mismatch_detected():
    from aqindex.features import NormalizationCaps
    with pytest.raises(CapsMismatch):
        rank_candidates(uniform_model(), [fv("a", 0.5)],
                        candidate_caps=NormalizationCaps(rank_cap=100),
                        model_caps=NormalizationCaps(rank_cap=200))


def test_report_roundtrips_json():
    from aqindex.screening import AQIReport
    report = rank_candidates(uniform_model(), [fv("a", 0.8), fv("b", 0.1)])
    back = AQIReport.from_dict(report.to_dict())
    assert [e.candidate_id for e in back.entries] == ["a", "b"]
    assert back.entries[0].aqi == pytest.approx(report.entries[0].aqi)


def test_report_csv_has_header_and_rows():
    report = rank_candidates(uniform_model(), [fv("a", 0.8)])
    text = report.to_csv()
    lines = text.strip().splitlines()
    assert lines[0].startswith("rank,")
    assert len(lines) == 2
