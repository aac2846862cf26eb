"""Shared fixtures.

Kernel-level tests run against every available backend via the
``kernel_backend`` fixture; everything else uses whatever the
AQINDEX_BACKEND environment variable selects (numba when present).
"""

import numpy as np
import pytest

from aqindex import backend as backend_mod
from aqindex.cohort import Cohort, SyntheticSpec, generate
from aqindex.features import N_FEATURES, FeatureVector


def _available_backend_names():
    names = ["numpy"]
    try:
        backend_mod.get_backend("numba")
        names.append("numba")
    except Exception:
        pass
    return names


@pytest.fixture(params=_available_backend_names())
def kernel_backend(request):
    """One fixture value per installed kernel backend."""
    return backend_mod.get_backend(request.param)


@pytest.fixture
def small_cohort():
    """Deterministic 6+6 synthetic cohort, well separated."""
    return generate(SyntheticSpec(n_pos=6, n_neg=6, rng_seed=7))


def feature_matrix(rng, n, d=N_FEATURES):
    return rng.uniform(0.0, 1.0, size=(n, d))


def cohort_from_matrices(xp, xn, level="AssistProf"):
    pos = [FeatureVector(f"p{i}", x) for i, x in enumerate(xp)]
    neg = [FeatureVector(f"n{i}", x) for i, x in enumerate(xn)]
    return Cohort(positives=pos, negatives=neg, level=level)


def random_simplex(rng, n):
    w = rng.dirichlet(np.ones(n))
    w = np.clip(w, 0.0, 1.0)
    return w / w.sum()
