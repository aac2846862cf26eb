"""Academic quality index toolkit.

Turns raw academic records into normalized feature vectors, tunes
transparent simplex-weighted scorers or a monotone comparison network on
reference cohorts, and screens and ranks candidates on a 0..100 index.
"""

from .backend import available_backends, backend_name, get_backend
from .cohort import (
    AnchorSpec,
    BadSpec,
    Cohort,
    EmptyClass,
    SyntheticSpec,
    generate,
    import_cohort,
    load_cohort,
    make_pairs,
    make_triplets,
    save_cohort,
)
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    FeatureRanking,
    FeatureVector,
    InvalidRecord,
    NormalizationCaps,
    RawAcademicRecord,
    derive_features,
    normalize,
    validate_record,
)
from .qp import (
    ConstraintSet,
    InfeasibleConstraints,
    OptimizerConfig,
    QuadraticForm,
    SolveResult,
    assemble,
    solve,
    tune,
)
from .regression import M1, M2, AQIScore, ModelWeights, aqi, evaluate, n_weights
from .screening import (
    AQIReport,
    CapsMismatch,
    FilterSpec,
    aggregate_rankings,
    apply_filter,
    rank_candidates,
)
from .siamese import (
    BadArchitecture,
    GradientCheckReport,
    SiameseNet,
    TrainConfig,
    contrastive_loss,
    gradient_check_contrastive,
    gradient_check_triplet,
    train_contrastive,
    train_triplet,
    triplet_loss,
)

__version__ = "0.1.0"
