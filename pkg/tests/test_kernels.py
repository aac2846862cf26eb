"""Kernel correctness against independent oracles, on every backend.

Oracles used here are deliberately written with different algorithms than
the kernels: the bounded-simplex projection is checked against a bisection
on the dual variable, isotonic regression against scipy, and the Dykstra
projection against a general-purpose SLSQP solve of the same program.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import isotonic_regression, minimize

from aqindex import backend as backend_mod


def rng_for(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# bounded simplex projection


def simplex_projection_oracle(v, lo, hi):
    """Dual bisection: w(lam) = clip(v - lam, lo, hi) with sum(w) = 1."""
    span = np.abs(v).max() + 2.0
    a, b = -span, span
    for _ in range(200):
        lam = 0.5 * (a + b)
        s = np.clip(v - lam, lo, hi).sum()
        if s > 1.0:
            a = lam
        else:
            b = lam
    return np.clip(v - 0.5 * (a + b), lo, hi)


def test_simplex_projection_example(kernel_backend):
    w = kernel_backend.project_bounded_simplex(
        np.array([0.8, 0.4]), np.zeros(2), np.ones(2))
    np.testing.assert_allclose(w, [0.7, 0.3], atol=1e-12)


def test_simplex_projection_already_feasible(kernel_backend):
    v = np.array([0.2, 0.3, 0.5])
    w = kernel_backend.project_bounded_simplex(v, np.zeros(3), np.ones(3))
    np.testing.assert_allclose(w, v, atol=1e-12)


def test_simplex_projection_respects_bounds(kernel_backend):
    lo = np.array([0.2, 0.0, 0.1])
    hi = np.array([0.5, 0.4, 1.0])
    w = kernel_backend.project_bounded_simplex(np.array([1.0, 0.0, 0.0]), lo, hi)
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)


@pytest.mark.parametrize("seed", range(30))
def test_simplex_projection_matches_dual_bisection(kernel_backend, seed):
    rng = rng_for(seed)
    n = int(rng.integers(2, 12))
    v = rng.normal(0, 2, n)
    lo = rng.uniform(0, 0.08, n)
    hi = lo + rng.uniform(0.1, 1.0, n)
    hi = np.minimum(hi, 1.0)
    if lo.sum() > 1 or hi.sum() < 1:   # keep the instance feasible
        lo = np.zeros(n)
        hi = np.ones(n)
    w = kernel_backend.project_bounded_simplex(v, lo, hi)
    np.testing.assert_allclose(w, simplex_projection_oracle(v, lo, hi),
                               atol=1e-9)


def test_simplex_projection_idempotent(kernel_backend):
    rng = rng_for(3)
    v = rng.normal(0, 1, 8)
    lo, hi = np.zeros(8), np.ones(8)
    w1 = kernel_backend.project_bounded_simplex(v, lo, hi)
    w2 = kernel_backend.project_bounded_simplex(w1, lo, hi)
    np.testing.assert_allclose(w1, w2, atol=1e-12)


# ---------------------------------------------------------------------------
# isotonic regression (non-increasing)


def test_isotonic_pools_violator(kernel_backend):
    out = kernel_backend.isotonic_non_increasing(np.array([0.3, 0.5]))
    np.testing.assert_allclose(out, [0.4, 0.4], atol=1e-12)


def test_isotonic_keeps_sorted_input(kernel_backend):
    a = np.array([0.9, 0.5, 0.5, 0.1])
    np.testing.assert_allclose(
        kernel_backend.isotonic_non_increasing(a), a, atol=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_isotonic_matches_scipy(kernel_backend, seed):
    rng = rng_for(100 + seed)
    a = rng.normal(0, 1, int(rng.integers(1, 40)))
    ours = kernel_backend.isotonic_non_increasing(a)
    ref = isotonic_regression(a, increasing=False).x
    np.testing.assert_allclose(ours, ref, atol=1e-10)
    assert np.all(np.diff(ours) <= 1e-12)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_isotonic_is_monotone_projection(values):
    b = backend_mod.get_backend()
    a = np.array(values)
    out = b.isotonic_non_increasing(a)
    assert np.all(np.diff(out) <= 1e-10)
    # projection: no other monotone vector is closer (spot check vs scipy)
    ref = isotonic_regression(a, increasing=False).x
    assert np.linalg.norm(out - a) <= np.linalg.norm(ref - a) + 1e-8


# ---------------------------------------------------------------------------
# Dykstra projection onto the full constraint intersection


def dykstra_oracle(v, lo, hi, order_idx=None, c=None):
    """SLSQP solve of min ||w - v||^2 over the same constraint set."""
    n = v.size
    cons = [{"type": "eq", "fun": lambda w: w.sum() - 1.0}]
    if order_idx is not None:
        for i in range(len(order_idx) - 1):
            a, b = int(order_idx[i]), int(order_idx[i + 1])
            cons.append({"type": "ineq",
                         "fun": lambda w, a=a, b=b: w[a] - w[b]})
    if c is not None:
        cons.append({"type": "ineq", "fun": lambda w: float(c @ w)})
    res = minimize(lambda w: ((w - v) ** 2).sum(), np.full(n, 1.0 / n),
                   jac=lambda w: 2 * (w - v), method="SLSQP",
                   bounds=list(zip(lo, hi)), constraints=cons,
                   options={"maxiter": 500, "ftol": 1e-14})
    assert res.success, res.message
    return res.x


@pytest.mark.parametrize("seed", range(12))
def test_dykstra_matches_slsqp(kernel_backend, seed):
    rng = rng_for(200 + seed)
    n = int(rng.integers(3, 9))
    v = rng.normal(0, 1.5, n)
    lo = np.zeros(n)
    hi = np.ones(n)
    order_idx = rng.permutation(n) if seed % 2 == 0 else None
    c = np.abs(rng.normal(0, 1, n)) if seed % 3 == 0 else None
    w, res, _ = kernel_backend.dykstra_project(v, lo, hi, order_idx, c)
    assert res <= 1e-9
    ref = dykstra_oracle(v, lo, hi, order_idx, c)
    np.testing.assert_allclose(w, ref, atol=5e-6)


def test_dykstra_residual_reports_violations(kernel_backend):
    w = np.array([0.6, 0.6])
    res = kernel_backend.feasibility_residual(
        w, np.zeros(2), np.ones(2), np.empty(0, np.int64), np.empty(0))
    assert res >= 0.2 - 1e-12   # sum is 1.2


def test_dykstra_fixed_point_on_feasible_input(kernel_backend):
    v = np.array([0.5, 0.3, 0.2])
    order_idx = np.array([0, 1, 2])
    w, res, sweeps = kernel_backend.dykstra_project(
        v, np.zeros(3), np.ones(3), order_idx, np.ones(3))
    np.testing.assert_allclose(w, v, atol=1e-10)
    assert res <= 1e-12


def test_dykstra_backends_agree_on_feasible_instances():
    names = backend_mod.available_backends()
    if len(names) < 2:
        pytest.skip("single backend installed")
    b1, b2 = (backend_mod.get_backend(n) for n in names[:2])
    rng = rng_for(42)
    for _ in range(40):
        n = int(rng.integers(3, 10))
        v = rng.normal(0, 1, n)
        order_idx = rng.permutation(n)
        c = np.abs(rng.normal(0, 1, n))   # nonnegative -> feasible
        w1, r1, _ = b1.dykstra_project(v, np.zeros(n), np.ones(n), order_idx, c)
        w2, r2, _ = b2.dykstra_project(v, np.zeros(n), np.ones(n), order_idx, c)
        assert r1 <= 1e-9 and r2 <= 1e-9
        np.testing.assert_allclose(w1, w2, atol=1e-9)


# ---------------------------------------------------------------------------
# projected gradient descent


def _pgd(backend, Q, w0, **kw):
    n = Q.shape[0]
    args = dict(lo=np.zeros(n), hi=np.ones(n), order_idx=None, c=None,
                step0=None, shrink=0.5, max_iters=500, tol_step=1e-10,
                dyk_tol=1e-12, dyk_max_sweeps=5000)
    args.update(kw)
    if args["step0"] is None:
        evals = np.linalg.eigvalsh(Q)
        args["step0"] = 1.0 / max(np.abs(evals).max(), 1e-12)
    return backend.pgd_minimize(Q, w0, args["lo"], args["hi"],
                                args["order_idx"], args["c"], args["step0"],
                                args["shrink"], args["max_iters"],
                                args["tol_step"], args["dyk_tol"],
                                args["dyk_max_sweeps"])


def test_pgd_trace_is_non_increasing(kernel_backend):
    rng = rng_for(5)
    A = rng.normal(0, 1, (4, 4))
    Q = 0.5 * (A + A.T)
    w0 = np.full(4, 0.25)
    _, _, _, trace, _ = _pgd(kernel_backend, Q, w0)
    assert np.all(np.diff(np.asarray(trace)) <= 1e-12)


def test_pgd_solves_concave_two_feature_instance(kernel_backend):
    # min w' Q w with Q = -10000 d d', d = (1, -1): optimum at a vertex.
    d = np.array([1.0, -1.0])
    Q = -10000.0 * np.outer(d, d)
    best = None
    for seed in range(6):
        w0 = rng_for(seed).dirichlet(np.ones(2))
        w, f, _, _, _ = _pgd(kernel_backend, Q, w0)
        if best is None or f < best[1]:
            best = (w, f)
    w, f = best
    assert f == pytest.approx(-10000.0, rel=1e-6)
    assert sorted(np.round(w, 6).tolist()) == [0.0, 1.0]


def test_pgd_convex_instance_matches_slsqp(kernel_backend):
    rng = rng_for(11)
    A = rng.normal(0, 1, (5, 5))
    Q = A @ A.T + 0.1 * np.eye(5)    # positive definite: unique optimum
    w0 = np.full(5, 0.2)
    w, f, _, _, converged = _pgd(kernel_backend, Q, w0, max_iters=5000)
    ref = minimize(lambda x: x @ Q @ x, w0, method="SLSQP",
                   bounds=[(0, 1)] * 5,
                   constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1}],
                   options={"maxiter": 1000, "ftol": 1e-14})
    assert converged
    assert f <= ref.fun + 1e-8
    np.testing.assert_allclose(w, ref.x, atol=1e-5)


def test_pgd_result_is_feasible(kernel_backend):
    rng = rng_for(13)
    A = rng.normal(0, 1, (6, 6))
    Q = 0.5 * (A + A.T)
    order_idx = np.arange(6)
    c = np.abs(rng.normal(0, 1, 6))
    w, _, _, _, _ = _pgd(kernel_backend, Q, np.full(6, 1 / 6),
                         order_idx=order_idx, c=c)
    res = kernel_backend.feasibility_residual(
        w, np.zeros(6), np.ones(6), order_idx, c)
    assert res <= 1e-9


def test_pgd_backends_agree_on_final_point():
    names = backend_mod.available_backends()
    if len(names) < 2:
        pytest.skip("single backend installed")
    b1, b2 = (backend_mod.get_backend(n) for n in names[:2])
    rng = rng_for(77)
    for _ in range(10):
        A = rng.normal(0, 1, (5, 5))
        Q = A @ A.T + 0.05 * np.eye(5)
        w0 = rng.dirichlet(np.ones(5))
        w1, f1, _, _, _ = _pgd(b1, Q, w0.copy(), max_iters=3000)
        w2, f2, _, _, _ = _pgd(b2, Q, w0.copy(), max_iters=3000)
        # iteration counts may differ between backends; final answers agree
        assert f1 == pytest.approx(f2, abs=1e-9)
        np.testing.assert_allclose(w1, w2, atol=1e-6)


# ---------------------------------------------------------------------------
# network forward pass and loss kernels


def reference_forward(omega, sizes, X):
    """Plain-python forward pass: weights are the squares of omega slices.

    Layer parameters are stored as a (n_out, n_in) matrix row-major,
    followed by the n_out biases.
    """
    H = np.atleast_2d(X)
    k = 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        V = omega[k:k + a * b].reshape(b, a)
        k += a * b
        bias = omega[k:k + b]
        k += b
        H = 1.0 / (1.0 + np.exp(-(H @ (V * V).T + bias)))
    return H[:, 0]


def test_net_forward_matches_reference(kernel_backend):
    rng = rng_for(21)
    sizes = np.array([21, 16, 8, 1])
    n_par = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    omega = rng.normal(0, 0.5, n_par)
    X = rng.uniform(0, 1, (7, 21))
    ours = kernel_backend.net_forward(omega, sizes, X)
    np.testing.assert_allclose(ours, reference_forward(omega, sizes, X),
                               atol=1e-12)
    assert np.all((ours > 0) & (ours < 1))


def test_net_forward_monotone_in_inputs(kernel_backend):
    # squared weights are nonnegative, so raising any input cannot lower
    # the unit's score
    rng = rng_for(22)
    sizes = np.array([21, 8, 1])
    n_par = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    omega = rng.normal(0, 0.7, n_par)
    x = rng.uniform(0, 1, 21)
    base = kernel_backend.net_forward(omega, sizes, x[None, :])[0]
    for i in range(21):
        bumped = x.copy()
        bumped[i] = min(1.0, bumped[i] + 0.3)
        up = kernel_backend.net_forward(omega, sizes, bumped[None, :])[0]
        assert up >= base - 1e-12


def test_contrastive_kernel_value_matches_formula(kernel_backend):
    rng = rng_for(31)
    sizes = np.array([4, 3, 1])
    n_par = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    omega = rng.normal(0, 0.5, n_par)
    Xi = rng.uniform(0, 1, (5, 4))
    Xj = rng.uniform(0, 1, (5, 4))
    y = np.array([1.0, 0.0, 1.0, 0.0, 0.0])
    m = 0.5
    value, grad = kernel_backend.contrastive_value_grad(omega, sizes, Xi, Xj, y, m)
    ui = reference_forward(omega, sizes, Xi)
    uj = reference_forward(omega, sizes, Xj)
    d = np.abs(ui - uj)
    ref = np.mean(y * d ** 2 + (1 - y) * np.maximum(m - d, 0.0) ** 2)
    assert value == pytest.approx(ref, abs=1e-12)
    assert grad.shape == omega.shape


def test_triplet_kernel_value_matches_formula(kernel_backend):
    rng = rng_for(32)
    sizes = np.array([4, 3, 1])
    n_par = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    omega = rng.normal(0, 0.5, n_par)
    Xa = rng.uniform(0, 1, (6, 4))
    Xp = rng.uniform(0, 1, (6, 4))
    Xn = rng.uniform(0, 1, (6, 4))
    m = 0.5
    value, grad = kernel_backend.triplet_value_grad(omega, sizes, Xa, Xp, Xn, m)
    ua = reference_forward(omega, sizes, Xa)
    up = reference_forward(omega, sizes, Xp)
    un = reference_forward(omega, sizes, Xn)
    ref = np.mean(np.maximum(np.abs(ua - up) - np.abs(ua - un) + m, 0.0) ** 2)
    assert value == pytest.approx(ref, abs=1e-12)
    assert grad.shape == omega.shape


def test_loss_kernels_agree_across_backends():
    names = backend_mod.available_backends()
    if len(names) < 2:
        pytest.skip("single backend installed")
    b1, b2 = (backend_mod.get_backend(n) for n in names[:2])
    rng = rng_for(33)
    sizes = np.array([21, 16, 8, 1])
    n_par = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    omega = rng.normal(0, 0.5, n_par)
    Xi = rng.uniform(0, 1, (10, 21))
    Xj = rng.uniform(0, 1, (10, 21))
    y = (rng.uniform(size=10) > 0.5).astype(np.float64)
    v1, g1 = b1.contrastive_value_grad(omega, sizes, Xi, Xj, y, 0.5)
    v2, g2 = b2.contrastive_value_grad(omega, sizes, Xi, Xj, y, 0.5)
    assert v1 == pytest.approx(v2, abs=1e-12)
    np.testing.assert_allclose(g1, g2, atol=1e-10)
