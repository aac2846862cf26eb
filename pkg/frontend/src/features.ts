/** Canonical feature order used by the service; index i in a ranking
 *  permutation refers to FEATURE_NAMES[i]. The server validates every
 *  submitted permutation against the same order. */
export const FEATURE_NAMES = [
  "q1_rate",
  "h_index_rate",
  "citation_rate",
  "i10_rate",
  "book_rate",
  "award_rate",
  "phd_rank_intl",
  "patent_rate",
  "project_rate",
  "phd_student_rate",
  "q2_rate",
  "phd_rank_natl",
  "bsc_rank_intl",
  "bsc_rank_natl",
  "ms_student_rate",
  "gpa_grad",
  "gpa_undergrad",
  "q3_rate",
  "q4_rate",
  "book_chapter_rate",
  "conference_rate",
] as const;

export const N_FEATURES = FEATURE_NAMES.length;

export type FeatureName = (typeof FEATURE_NAMES)[number];
