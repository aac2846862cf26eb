"""Pure-numpy kernel implementations (fallback backend).

Same contracts as ``_kernels_numba``; vectorized where numpy allows it,
plain loops where the algorithm is inherently sequential (PAVA).  All
routines are deterministic.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=np.float64)


# ---------------------------------------------------------------------------
# projections


def project_bounded_simplex(v, lo, hi):
    """Euclidean projection onto {w : sum(w) = 1, lo <= w <= hi}.

    Sorted-threshold method: S(tau) = sum(clip(v - tau, lo, hi)) is
    piecewise-linear and non-increasing; walk its breakpoints to find
    S(tau) = 1.  Requires sum(lo) <= 1 <= sum(hi).
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    # +1 events: component detaches from hi; -1 events: it hits lo.
    b = np.concatenate([v - hi, v - lo])
    slope_delta = np.concatenate([np.ones(n), -np.ones(n)])
    order = np.argsort(b, kind="stable")
    b = b[order]
    slope_delta = slope_delta[order]

    active = np.cumsum(slope_delta)            # open components after event k
    seg = np.diff(b)                           # segment lengths
    s_at = float(np.sum(hi)) - np.concatenate(
        [[0.0], np.cumsum(active[:-1] * seg)])  # S at each breakpoint

    tau = b[-1]
    if s_at[0] <= 1.0:
        tau = b[0]
    else:
        # first index where S drops to <= 1; crossing lies in segment k-1 -> k
        idx = np.nonzero(s_at <= 1.0)[0]
        if idx.size == 0:
            tau = b[-1]                        # S stays above 1: land on lo
        else:
            k = int(idx[0])
            a = active[k - 1]
            tau = b[k - 1] + (s_at[k - 1] - 1.0) / a if a > 0 else b[k - 1]
    return np.minimum(np.maximum(v - tau, lo), hi)


def isotonic_non_increasing(a):
    """Project onto non-increasing sequences (pool-adjacent-violators)."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    vals = np.empty(n)
    cnts = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        vals[m] = a[i]
        cnts[m] = 1
        m += 1
        while m > 1 and vals[m - 2] < vals[m - 1]:
            tot = cnts[m - 2] + cnts[m - 1]
            vals[m - 2] = (cnts[m - 2] * vals[m - 2] + cnts[m - 1] * vals[m - 1]) / tot
            cnts[m - 2] = tot
            m -= 1
    return np.repeat(vals[:m], cnts[:m])


def _project_order(x, order_idx):
    out = x.copy()
    out[order_idx] = isotonic_non_increasing(x[order_idx])
    return out


def _project_halfspace(x, c, cc):
    dp = float(c @ x)
    if dp >= 0.0 or cc == 0.0:
        return x.copy()
    return x - (dp / cc) * c


def feasibility_residual(x, lo, hi, order_idx, c):
    """Largest absolute violation across all constraint sets."""
    res = abs(float(np.sum(x)) - 1.0)
    res = max(res, float(np.max(lo - x)), float(np.max(x - hi)))
    if order_idx.shape[0] > 1:
        z = x[order_idx]
        res = max(res, float(np.max(z[1:] - z[:-1])))
    if c.shape[0] > 0:
        res = max(res, max(0.0, -float(c @ x)))
    return res


def dykstra_project(v, lo, hi, order_idx=None, c=None, tol=1e-12,
                    max_sweeps=5000):
    """Project onto the intersection of bounded simplex, isotonic cone
    (optional) and halfspace c.w >= 0 (optional) via Dykstra's corrections.

    Returns (w, residual, sweeps).  Sweep order is fixed: simplex, ordering,
    halfspace.
    """
    v = np.asarray(v, dtype=np.float64)
    order_idx = _EMPTY_I if order_idx is None else np.asarray(order_idx, np.int64)
    c = _EMPTY_F if c is None else np.asarray(c, np.float64)
    has_ord = order_idx.shape[0] > 1
    has_c = c.shape[0] > 0
    cc = float(c @ c) if has_c else 0.0

    x = v.copy()
    p_simplex = np.zeros_like(x)
    p_order = np.zeros_like(x)
    p_half = np.zeros_like(x)
    res = np.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        x_prev = x
        ps_prev, po_prev, ph_prev = p_simplex, p_order, p_half

        z = x + p_simplex
        x = project_bounded_simplex(z, lo, hi)
        p_simplex = z - x
        if has_ord:
            z = x + p_order
            x = _project_order(z, order_idx)
            p_order = z - x
        if has_c:
            z = x + p_half
            x = _project_halfspace(z, c, cc)
            p_half = z - x

        sweeps = sweep + 1
        res = feasibility_residual(x, lo, hi, order_idx, c)
        # the corrections are part of the iteration state: x can sit still
        # for a few sweeps while they keep moving, so watch all of it
        change = float(max(np.max(np.abs(x - x_prev)),
                           np.max(np.abs(p_simplex - ps_prev)),
                           np.max(np.abs(p_order - po_prev)),
                           np.max(np.abs(p_half - ph_prev))))
        if res <= tol and change <= tol:
            break
        if change <= 1e-17 and res > tol:
            break  # stalled: intersection unreachable at this tolerance
    return x, res, sweeps


# ---------------------------------------------------------------------------
# projected gradient descent on w^T Q w


def pgd_minimize(Q, w0, lo, hi, order_idx, c, step0, shrink, max_iters,
                 tol_step, dyk_tol, dyk_max_sweeps):
    """Monotone projected gradient descent with backtracking.

    Accepts a step only if it satisfies the sufficient-decrease condition,
    so the objective trace is non-increasing.  Returns
    (w, f, iterations, trace, converged); trace[k] is the objective after k
    accepted iterations.
    """
    w = np.asarray(w0, dtype=np.float64).copy()
    qw = Q @ w
    f = float(w @ qw)
    trace = np.empty(max_iters + 1)
    trace[0] = f
    converged = False
    it = 0
    t = step0
    for it in range(1, max_iters + 1):
        g = 2.0 * qw
        # regrow from the last accepted step; a fixed 1 / ||Q|| step makes
        # ill-conditioned instances crawl
        t = min(t / shrink, step0 * 32.0)
        accepted = False
        for _ in range(60):
            cand, _, _ = dykstra_project(w - t * g, lo, hi, order_idx, c,
                                         dyk_tol, dyk_max_sweeps)
            step = cand - w
            # exact minimizer along the feasible segment; an overlong
            # projected step otherwise hops between faces without progress
            qd = Q @ step
            a = float(step @ qd)
            b = 2.0 * float(w @ qd)
            if a > 0.0:
                theta = -b / (2.0 * a)
                if theta < 1.0:
                    cand = w + max(theta, 0.0) * step
                    step = cand - w
            fc = float(cand @ (Q @ cand))
            if fc <= f - 1e-4 / t * float(step @ step):
                accepted = True
                break
            t *= shrink
        if not accepted:
            converged = True  # no feasible descent direction left
            it -= 1
            break
        moved = float(np.max(np.abs(cand - w)))
        w = cand
        qw = Q @ w
        f = fc
        trace[it] = f
        # the projected step length is nondecreasing in t, so a tiny move
        # at t >= step0 bounds the fixed-step residual too
        if t >= step0 and moved <= tol_step:
            converged = True
            break
    return w, f, it, trace[: it + 1].copy(), converged


# ---------------------------------------------------------------------------
# monotone feed-forward net: flat parameter vector, squared-weight
# reparameterization, logistic units throughout.


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(omega, sizes, X):
    """Activations per layer; A[0] is the input batch."""
    A = [np.asarray(X, dtype=np.float64)]
    off = 0
    for l in range(len(sizes) - 1):
        nin, nout = int(sizes[l]), int(sizes[l + 1])
        V = omega[off: off + nout * nin].reshape(nout, nin)
        off += nout * nin
        b = omega[off: off + nout]
        off += nout
        Z = A[-1] @ (V * V).T + b
        A.append(_sigmoid(Z))
    return A


def net_forward(omega, sizes, X):
    """Scores in (0, 1) for a batch of inputs, shape (B,)."""
    return _forward_cached(omega, sizes, X)[-1][:, 0].copy()


def _backward(omega, sizes, A, gout, grad):
    """Accumulate d(sum_i gout_i * score_i)/d(omega) into ``grad``."""
    n_layers = len(sizes) - 1
    offs = []
    off = 0
    for l in range(n_layers):
        nin, nout = int(sizes[l]), int(sizes[l + 1])
        offs.append((off, off + nout * nin, nin, nout))
        off += nout * nin + nout
    aL = A[-1]
    delta = gout[:, None] * aL * (1.0 - aL)
    for l in range(n_layers - 1, -1, -1):
        w0, w1, nin, nout = offs[l]
        V = omega[w0:w1].reshape(nout, nin)
        gW = delta.T @ A[l]                      # gradient wrt effective W
        grad[w0:w1] += (gW * 2.0 * V).ravel()    # chain through W = V^2
        grad[w1: w1 + nout] += delta.sum(axis=0)
        if l > 0:
            delta = (delta @ (V * V)) * A[l] * (1.0 - A[l])


def contrastive_value_grad(omega, sizes, Xi, Xj, y, m):
    """Mean contrastive loss over pairs and its gradient wrt omega.

    loss = y * d^2 + (1 - y) * max(m - d, 0)^2 with d = |s_i - s_j|;
    subgradient 0 at the hinge kink and at d = 0.
    """
    B = Xi.shape[0]
    Ai = _forward_cached(omega, sizes, Xi)
    Aj = _forward_cached(omega, sizes, Xj)
    si = Ai[-1][:, 0]
    sj = Aj[-1][:, 0]
    u = si - sj
    d = np.abs(u)
    h = np.maximum(m - d, 0.0)
    loss = np.where(y == 1, u * u, h * h)

    sgn = np.sign(u)
    gi = np.where(y == 1, 2.0 * u, -2.0 * h * sgn) / B
    grad = np.zeros_like(omega)
    _backward(omega, sizes, Ai, gi, grad)
    _backward(omega, sizes, Aj, -gi, grad)
    return float(loss.mean()), grad


def triplet_value_grad(omega, sizes, Xa, Xp, Xn, m):
    """Mean squared-hinge triplet loss over triplets and its gradient.

    loss = max(|s_a - s_p| - |s_a - s_n| + m, 0)^2; subgradient 0 at kinks.
    """
    B = Xa.shape[0]
    Aa = _forward_cached(omega, sizes, Xa)
    Ap = _forward_cached(omega, sizes, Xp)
    An = _forward_cached(omega, sizes, Xn)
    sa = Aa[-1][:, 0]
    sp = Ap[-1][:, 0]
    sn = An[-1][:, 0]
    up = sa - sp
    un = sa - sn
    pre = np.abs(up) - np.abs(un) + m
    act = pre > 0
    loss = np.where(act, pre * pre, 0.0)

    gpre = np.where(act, 2.0 * pre, 0.0) / B
    sgp = np.sign(up)
    sgn_ = np.sign(un)
    grad = np.zeros_like(omega)
    _backward(omega, sizes, Aa, gpre * (sgp - sgn_), grad)
    _backward(omega, sizes, Ap, -gpre * sgp, grad)
    _backward(omega, sizes, An, gpre * sgn_, grad)
    return float(loss.mean()), grad
