"""Parameterized scorers that map a normalized feature vector to a quality index.

Two model families share one weight convention: all weights live on the
probability simplex (non-negative, summing to one), so the score is a convex
combination of basis terms in [0, 1] and the index 100 * score stays in
[0, 100].  M1 is linear in the features; M2 adds squares and pairwise
products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .features import N_FEATURES, FeatureVector, NormalizationCaps

__all__ = [
    "M1",
    "M2",
    "n_weights",
    "pair_index",
    "basis",
    "basis_matrix",
    "basis_labels",
    "ModelWeights",
    "AQIScore",
    "evaluate",
    "aqi",
]

M1 = "m1"
M2 = "m2"

SIMPLEX_TOL = 1e-9


def n_weights(kind: str, n_features: int = N_FEATURES) -> int:
    """Weight-vector length: d for M1, d + d + C(d,2) for M2."""
    if kind == M1:
        return n_features
    if kind == M2:
        return 2 * n_features + n_features * (n_features - 1) // 2
    raise ValueError(f"unknown model kind {kind!r}")


def pair_index(n_features: int = N_FEATURES) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the pairwise terms, lexicographic with i < j."""
    return np.triu_indices(n_features, k=1)


def basis(kind: str, x: np.ndarray) -> np.ndarray:
    """Basis vector for one input: [x_i] for M1, [x_i, x_i^2, x_i x_j] for M2.

    Every entry stays in [0, 1] when the input does, which is what keeps
    simplex-weighted scores inside [0, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == M1:
        return x.copy()
    if kind == M2:
        ii, jj = pair_index(x.shape[0])
        return np.concatenate([x, x * x, x[ii] * x[jj]])
    raise ValueError(f"unknown model kind {kind!r}")


def basis_matrix(kind: str, X: np.ndarray) -> np.ndarray:
    """Row-wise basis expansion of a stack of feature vectors, shape (n, n_w)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if kind == M1:
        return X.copy()
    ii, jj = pair_index(X.shape[1])
    return np.hstack([X, X * X, X[:, ii] * X[:, jj]])


def basis_labels(kind: str, n_features: int = N_FEATURES) -> list[str]:
    """Human-readable labels for each weight slot, matching the basis layout."""
    lin = [f"x{i + 1}" for i in range(n_features)]
    if kind == M1:
        return lin
    sq = [f"x{i + 1}^2" for i in range(n_features)]
    ii, jj = pair_index(n_features)
    cross = [f"x{i + 1}*x{j + 1}" for i, j in zip(ii, jj)]
    return lin + sq + cross


@dataclass(frozen=True)
class ModelWeights:
    """A trained weight vector on the probability simplex.

    For M2 the layout is [alpha (linear), beta (squares), theta (pairwise,
    lexicographic i < j)]; the serialization records the same ordering.
    """

    kind: str
    w: np.ndarray
    n_features: int = N_FEATURES

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        expected = n_weights(self.kind, self.n_features)
        if w.shape != (expected,):
            raise ValueError(
                f"{self.kind} expects {expected} weights, got {w.shape}")
        if np.any(w < -SIMPLEX_TOL) or np.any(w > 1 + SIMPLEX_TOL):
            raise ValueError("weights must lie in [0, 1]")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")

    @property
    def alpha(self) -> np.ndarray:
        return self.w[: self.n_features]

    @property
    def beta(self) -> np.ndarray:
        if self.kind != M2:
            raise AttributeError("beta is only defined for M2")
        return self.w[self.n_features: 2 * self.n_features]

    @property
    def theta(self) -> np.ndarray:
        if self.kind != M2:
            raise AttributeError("theta is only defined for M2")
        return self.w[2 * self.n_features:]

    def to_dict(self, caps: NormalizationCaps | None = None) -> dict:
        d = {
            "kind": self.kind,
            "n_features": int(self.n_features),
            "weights": [float(v) for v in self.w],
            "basis": basis_labels(self.kind, self.n_features),
        }
        if caps is not None:
            d["caps"] = caps.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelWeights":
        return cls(kind=d["kind"], w=np.asarray(d["weights"], dtype=np.float64),
                   n_features=int(d.get("n_features", N_FEATURES)))


@dataclass(frozen=True)
class AQIScore:
    """Quality index for one candidate: aqi is always 100 * f_value."""

    candidate_id: str
    f_value: float
    aqi: float


def evaluate(model: ModelWeights, x: Union[FeatureVector, np.ndarray]) -> float:
    """Score one feature vector: w . basis(kind, x), guaranteed in [0, 1].

    The clamp below is defensive; with simplex weights and a [0, 1] basis it
    never fires beyond rounding noise.
    """
    vec = x.x if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    f = float(model.w @ basis(model.kind, vec))
    assert -1e-9 <= f <= 1 + 1e-9, f"score {f} escaped [0, 1]"
    return min(max(f, 0.0), 1.0)


def aqi(model: ModelWeights, x: FeatureVector) -> AQIScore:
    """Evaluate one candidate and express the score on the 0..100 index scale."""
    f = evaluate(model, x)
    return AQIScore(x.candidate_id, f, 100.0 * f)
