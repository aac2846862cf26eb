"""Constrained weight tuning for the regression scorers.

The training signal is a quadratic trade-off over a reference cohort: make
index values of positive-class academics agree with each other while pushing
them away from the negative class.  Written over basis vectors phi, the
objective is

    w^T Q w,   Q = 100^2 * (D_pp - gamma * D_pn)

with D_pp the sum of (phi_i - phi_j)(phi_i - phi_j)^T over ordered
positive/positive pairs and D_pn the same over positive/negative pairs.
Ordered pairs count each unordered pair twice, which scales the objective by
2 and cannot move the minimizer.  Q is indefinite for gamma > 0, so the
solver is a multi-start projected gradient descent; feasibility is handled
by Dykstra alternating projections over the bounded simplex, the rank-order
isotonic cone (linear model only) and the mean-separation halfspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import regression
from .backend import get_backend
from .cohort import EmptyClass
from .features import FeatureRanking

__all__ = [
    "EmptyClass",
    "InfeasibleConstraints",
    "NonConvergence",
    "QuadraticForm",
    "ConstraintSet",
    "OptimizerConfig",
    "SolveResult",
    "default_gamma",
    "assemble",
    "assemble_from_bases",
    "objective",
    "project",
    "check_feasibility",
    "solve",
    "tune",
]

AQI_SCALE = 100.0


class InfeasibleConstraints(ValueError):
    """The requested constraint set has an empty intersection."""


class NonConvergence(RuntimeError):
    """Iteration budget exhausted before reaching stationarity."""


@dataclass(frozen=True)
class QuadraticForm:
    """The assembled objective matrix; symmetric, generally indefinite."""

    Q: np.ndarray
    kind: str
    gamma: float
    n_pos: int
    n_neg: int

    @property
    def n_weights(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class ConstraintSet:
    """Feasible region: box + simplex, optional rank ordering and halfspace.

    ``order`` lists weight indices from most to least important; feasible
    vectors are non-increasing along it.  ``mean_gap`` is the direction
    mean(positive bases) - mean(negative bases); feasible vectors satisfy
    mean_gap . w >= 0, i.e. the positive class scores at least as high on
    average.
    """

    lo: np.ndarray
    hi: np.ndarray
    order: Optional[np.ndarray] = None
    mean_gap: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        if self.order is not None:
            object.__setattr__(self, "order",
                               np.asarray(self.order, dtype=np.int64))
        if self.mean_gap is not None:
            object.__setattr__(self, "mean_gap",
                               np.asarray(self.mean_gap, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    def residuals(self, w: np.ndarray) -> dict[str, float]:
        """Per-constraint absolute violations at w (0 means satisfied)."""
        w = np.asarray(w, dtype=np.float64)
        out = {
            "simplex": abs(float(w.sum()) - 1.0),
            "bounds": max(0.0, float(np.max(self.lo - w)),
                          float(np.max(w - self.hi))),
        }
        if self.order is not None and self.order.shape[0] > 1:
            z = w[self.order]
            out["ordering"] = max(0.0, float(np.max(z[1:] - z[:-1])))
        if self.mean_gap is not None:
            out["mean_halfspace"] = max(0.0, -float(self.mean_gap @ w))
        return out

    def max_residual(self, w: np.ndarray) -> float:
        return max(self.residuals(w).values())


@dataclass(frozen=True)
class OptimizerConfig:
    """Solver knobs; defaults are sized for cohorts of tens of academics."""

    gamma: Optional[float] = None      # None: cohort-balanced heuristic
    max_iters: int = 500
    step_size_init: Optional[float] = None   # None: 1 / spectral_norm(Q)
    backtracking: float = 0.5
    tolerance: float = 1e-10           # stationarity step and feasibility
    n_starts: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.tolerance <= 0 or not 0 < self.backtracking < 1:
            raise ValueError("bad tolerance or backtracking factor")
        if self.max_iters < 1 or self.n_starts < 1:
            raise ValueError("max_iters and n_starts must be >= 1")


@dataclass
class SolveResult:
    weights: regression.ModelWeights
    objective_value: float
    iterations: int
    constraint_residuals: dict[str, float]
    start_index_of_best: int
    converged: bool
    traces: list[np.ndarray] = field(default_factory=list)


def default_gamma(n_pos: int, n_neg: int) -> float:
    """Balance the two objective terms: 0.1 * |Sp x Sp| / |Sp x Sn|."""
    return 0.1 * (n_pos * n_pos) / (n_pos * n_neg)


def assemble_from_bases(phi_pos: np.ndarray, phi_neg: np.ndarray, kind: str,
                        gamma: float) -> QuadraticForm:
    """Build Q from precomputed basis matrices (rows = academics).

    Uses the closed form of the ordered pair sums:
      sum_{i,j} (p_i - p_j)(p_i - p_j)^T = 2n G - 2 s s^T   (within a class)
    and the analogous cross-class expansion.  Tests verify it against the
    explicit pair-by-pair summation.
    """
    P = np.asarray(phi_pos, dtype=np.float64)
    N = np.asarray(phi_neg, dtype=np.float64)
    if P.shape[0] < 1 or N.shape[0] < 1:
        raise EmptyClass("both cohort classes must be non-empty")
    n_p, n_n = P.shape[0], N.shape[0]
    gp = P.T @ P
    gn = N.T @ N
    sp = P.sum(axis=0)
    sn = N.sum(axis=0)
    d_pp = 2.0 * n_p * gp - 2.0 * np.outer(sp, sp)
    d_pn = n_n * gp + n_p * gn - np.outer(sp, sn) - np.outer(sn, sp)
    Q = AQI_SCALE**2 * (d_pp - gamma * d_pn)
    Q = 0.5 * (Q + Q.T)  # kill rounding asymmetry
    return QuadraticForm(Q=Q, kind=kind, gamma=float(gamma), n_pos=n_p,
                         n_neg=n_n)


def _default_bounds(n: int, r_min=None, r_max=None):
    lo = np.zeros(n) if r_min is None else np.broadcast_to(
        np.asarray(r_min, dtype=np.float64), (n,)).copy()
    hi = np.ones(n) if r_max is None else np.broadcast_to(
        np.asarray(r_max, dtype=np.float64), (n,)).copy()
    return lo, hi


def assemble(cohort, kind: str, gamma: Optional[float] = None,
             ranking: Optional[FeatureRanking] = None,
             r_min=None, r_max=None) -> tuple[QuadraticForm, ConstraintSet]:
    """Assemble objective and constraints for a cohort.

    The rank-ordering constraint applies to the linear model only, over its
    21 direct feature weights; the quadratic model keeps box, simplex and
    mean-halfspace constraints.
    """
    if len(cohort.positives) == 0 or len(cohort.negatives) == 0:
        raise EmptyClass("cohort must contain positives and negatives")
    Xp = np.stack([fv.x for fv in cohort.positives])
    Xn = np.stack([fv.x for fv in cohort.negatives])
    phi_p = regression.basis_matrix(kind, Xp)
    phi_n = regression.basis_matrix(kind, Xn)
    if gamma is None:
        gamma = default_gamma(Xp.shape[0], Xn.shape[0])
    form = assemble_from_bases(phi_p, phi_n, kind, gamma)

    n_w = form.n_weights
    lo, hi = _default_bounds(n_w, r_min, r_max)
    order = None
    if kind == regression.M1:
        order = (ranking or FeatureRanking.default()).order()
    mean_gap = phi_p.mean(axis=0) - phi_n.mean(axis=0)
    constraints = ConstraintSet(lo=lo, hi=hi, order=order, mean_gap=mean_gap)
    check_feasibility(constraints)
    return form, constraints


def objective(w: np.ndarray, form: QuadraticForm) -> float:
    """w^T Q w; equals the explicit double pair-sum of squared index gaps."""
    w = np.asarray(w, dtype=np.float64)
    return float(w @ form.Q @ w)


def check_feasibility(constraints: ConstraintSet) -> None:
    """Raise InfeasibleConstraints with a reason, or return quietly.

    With an ordering, the least/greatest feasible non-increasing vectors are
    the suffix-max of lo / prefix-min of hi along the order; feasibility
    needs those to stay consistent and to bracket a unit sum.
    """
    lo, hi = constraints.lo, constraints.hi
    if np.any(lo < 0) or np.any(hi > 1):
        raise InfeasibleConstraints("bounds must lie within [0, 1]")
    bad = np.nonzero(lo > hi)[0]
    if bad.size:
        raise InfeasibleConstraints(
            f"r_min exceeds r_max at weight index {int(bad[0])}")
    if constraints.order is None:
        lo_sum, hi_sum = float(lo.sum()), float(hi.sum())
    else:
        o = constraints.order
        lo_o, hi_o = lo[o], hi[o]
        suffix_max_lo = np.maximum.accumulate(lo_o[::-1])[::-1]
        prefix_min_hi = np.minimum.accumulate(hi_o)
        k = np.nonzero(suffix_max_lo > prefix_min_hi)[0]
        if k.size:
            i = int(k[0])
            raise InfeasibleConstraints(
                "ordering conflicts with bounds: position "
                f"{i} in the importance order needs at least "
                f"{suffix_max_lo[i]:.4g} but is capped at {prefix_min_hi[i]:.4g}")
        lo_sum = float(suffix_max_lo.sum())
        hi_sum = float(prefix_min_hi.sum())
    if lo_sum > 1.0 + 1e-12:
        raise InfeasibleConstraints(
            f"lower bounds sum to {lo_sum:.6g} > 1; no convex combination fits")
    if hi_sum < 1.0 - 1e-12:
        raise InfeasibleConstraints(
            f"upper bounds sum to {hi_sum:.6g} < 1; no convex combination fits")


def project(w: np.ndarray, constraints: ConstraintSet,
            tol: float = 1e-12, max_sweeps: int = 5000,
            backend=None) -> np.ndarray:
    """Project onto the constraint intersection (Dykstra sweeps).

    Sweep order is bounded simplex, isotonic cone, halfspace; iterates until
    every absolute residual is below ``tol``.
    """
    check_feasibility(constraints)
    kb = backend or get_backend()
    w_out, res, _ = kb.dykstra_project(
        np.asarray(w, dtype=np.float64), constraints.lo, constraints.hi,
        constraints.order, constraints.mean_gap, tol, max_sweeps)
    if res > max(tol, 1e-9):
        raise InfeasibleConstraints(
            f"projection stalled with residual {res:.3g}; the constraint "
            "intersection is empty or numerically degenerate")
    return w_out


def _spectral_norm(Q: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(Q))))


def solve(form: QuadraticForm, constraints: ConstraintSet,
          config: OptimizerConfig = OptimizerConfig(),
          backend=None) -> SolveResult:
    """Multi-start projected gradient descent over the feasible polytope.

    Start 0 is the projected uniform vector; the rest are projected Dirichlet
    samples under ``rng_seed``.  Ties between equally good starts resolve to
    the lowest start index, so results are reproducible.
    """
    check_feasibility(constraints)
    kb = backend or get_backend()
    n = form.n_weights
    if constraints.n != n:
        raise ValueError("constraint dimension does not match Q")

    norm = _spectral_norm(form.Q)
    step0 = config.step_size_init or (1.0 / norm if norm > 0 else 1.0)
    dyk_tol = min(config.tolerance, 1e-11)
    rng = np.random.default_rng(config.rng_seed)

    best = None
    traces: list[np.ndarray] = []
    total_iters = 0
    all_converged = True
    for start in range(config.n_starts):
        if start == 0:
            w0 = np.full(n, 1.0 / n)
        else:
            w0 = rng.dirichlet(np.ones(n))
        w0 = project(w0, constraints, tol=dyk_tol, backend=kb)
        w, fval, iters, trace, converged = kb.pgd_minimize(
            form.Q, w0, constraints.lo, constraints.hi, constraints.order,
            constraints.mean_gap, step0, config.backtracking,
            config.max_iters, config.tolerance, dyk_tol, 5000)
        if np.any(np.diff(trace) > 1e-9 * max(1.0, abs(trace[0]))):
            raise AssertionError("line search accepted an ascent step")
        traces.append(trace)
        total_iters += iters
        all_converged = all_converged and converged
        if best is None or fval < best[1]:
            best = (w, fval, start)

    w_best, f_best, start_best = best
    # final polish so residuals meet the reporting tolerance exactly
    w_best = project(w_best, constraints, tol=dyk_tol, backend=kb)
    residuals = constraints.residuals(w_best)
    weights = regression.ModelWeights(
        kind=form.kind, w=_snap_simplex(w_best),
        n_features=_infer_n_features(form.kind, n))
    return SolveResult(
        weights=weights,
        objective_value=objective(w_best, form),
        iterations=total_iters,
        constraint_residuals=residuals,
        start_index_of_best=start_best,
        converged=all_converged,
        traces=traces,
    )


def _infer_n_features(kind: str, n_w: int) -> int:
    if kind == regression.M1:
        return n_w
    # n_w = 2d + d(d-1)/2  =>  d = (-3 + sqrt(9 + 8 n_w)) / 2
    d = int(round((-3 + np.sqrt(9 + 8 * n_w)) / 2))
    if regression.n_weights(kind, d) != n_w:
        raise ValueError(f"no feature count yields {n_w} quadratic weights")
    return d


def _snap_simplex(w: np.ndarray) -> np.ndarray:
    """Remove residual rounding drift so ModelWeights' strict checks pass."""
    w = np.clip(w, 0.0, 1.0)
    return w / w.sum()


def tune(cohort, kind: str, config: OptimizerConfig = OptimizerConfig(),
         ranking: Optional[FeatureRanking] = None, r_min=None, r_max=None,
         backend=None) -> SolveResult:
    """assemble + solve in one call; gamma defaults to the cohort heuristic."""
    form, constraints = assemble(cohort, kind, config.gamma, ranking,
                                 r_min, r_max)
    return solve(form, constraints, config, backend=backend)
