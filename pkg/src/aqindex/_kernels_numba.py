"""Numba-jitted kernel implementations (default backend).

Public functions are thin Python wrappers that coerce dtypes and dispatch to
``@njit`` inner loops; semantics match ``_kernels_numpy`` exactly (same
algorithms, same tie and kink conventions).  Compiled artifacts are cached
on disk, so the JIT cost is paid once per machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=np.float64)


@njit(cache=True)
def _project_bounded_simplex(v, lo, hi):
    n = v.shape[0]
    b = np.empty(2 * n)
    delta = np.empty(2 * n)
    for i in range(n):
        b[i] = v[i] - hi[i]          # component detaches from hi
        delta[i] = 1.0
        b[n + i] = v[i] - lo[i]      # component hits lo
        delta[n + i] = -1.0
    order = np.argsort(b, kind="mergesort")

    s_hi = 0.0
    for i in range(n):
        s_hi += hi[i]
    tau = b[order[0]]
    found = s_hi <= 1.0
    if not found:
        s = s_hi
        active = 0.0
        tau_prev = b[order[0]]
        for k in range(2 * n):
            e = order[k]
            seg = b[e] - tau_prev
            s_next = s - active * seg
            if s_next <= 1.0:
                if active > 0.0:
                    tau = tau_prev + (s - 1.0) / active
                else:
                    tau = tau_prev
                found = True
                break
            s = s_next
            tau_prev = b[e]
            active += delta[e]
        if not found:
            tau = b[order[2 * n - 1]]
    w = np.empty(n)
    for i in range(n):
        w[i] = min(max(v[i] - tau, lo[i]), hi[i])
    return w


@njit(cache=True)
def _isotonic_non_increasing(a):
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
    out = np.empty(n)
    pos = 0
    for blk in range(m):
        for _ in range(cnts[blk]):
            out[pos] = vals[blk]
            pos += 1
    return out


@njit(cache=True)
def _feasibility_residual(x, lo, hi, order_idx, c):
    res = abs(x.sum() - 1.0)
    for i in range(x.shape[0]):
        res = max(res, lo[i] - x[i], x[i] - hi[i])
    for k in range(order_idx.shape[0] - 1):
        res = max(res, x[order_idx[k + 1]] - x[order_idx[k]])
    if c.shape[0] > 0:
        dp = 0.0
        for i in range(c.shape[0]):
            dp += c[i] * x[i]
        res = max(res, -dp if dp < 0.0 else 0.0)
    return res


@njit(cache=True)
def _dykstra(v, lo, hi, order_idx, c, tol, max_sweeps):
    n = v.shape[0]
    has_ord = order_idx.shape[0] > 1
    has_c = c.shape[0] > 0
    cc = 0.0
    for i in range(c.shape[0]):
        cc += c[i] * c[i]

    x = v.copy()
    p_simplex = np.zeros(n)
    p_order = np.zeros(n)
    p_half = np.zeros(n)
    res = 1e300
    sweeps = 0
    for sweep in range(max_sweeps):
        x_prev = x.copy()
        ps_prev = p_simplex.copy()
        po_prev = p_order.copy()
        ph_prev = p_half.copy()

        z = x + p_simplex
        x = _project_bounded_simplex(z, lo, hi)
        p_simplex = z - x
        if has_ord:
            z = x + p_order
            y = z.copy()
            fitted = _isotonic_non_increasing(z[order_idx])
            for k in range(order_idx.shape[0]):
                y[order_idx[k]] = fitted[k]
            p_order = z - y
            x = y
        if has_c:
            z = x + p_half
            dp = 0.0
            for i in range(n):
                dp += c[i] * z[i]
            if dp < 0.0 and cc > 0.0:
                y = z - (dp / cc) * c
            else:
                y = z.copy()
            p_half = z - y
            x = y

        sweeps = sweep + 1
        res = _feasibility_residual(x, lo, hi, order_idx, c)
        # the corrections are part of the iteration state: x can sit still
        # for a few sweeps while they keep moving, so watch all of it
        change = 0.0
        for i in range(n):
            change = max(change, abs(x[i] - x_prev[i]))
            change = max(change, abs(p_simplex[i] - ps_prev[i]))
            change = max(change, abs(p_order[i] - po_prev[i]))
            change = max(change, abs(p_half[i] - ph_prev[i]))
        if res <= tol and change <= tol:
            break
        if change <= 1e-17 and res > tol:
            break
    return x, res, sweeps


@njit(cache=True)
def _pgd(Q, w0, lo, hi, order_idx, c, step0, shrink, max_iters, tol_step,
         dyk_tol, dyk_max_sweeps):
    w = w0.copy()
    qw = np.dot(Q, w)
    f = float(np.dot(w, qw))
    trace = np.empty(max_iters + 1)
    trace[0] = f
    converged = False
    it = 0
    t = step0
    for outer in range(1, max_iters + 1):
        it = outer
        g = 2.0 * qw
        # regrow from the last accepted step; a fixed 1 / ||Q|| step makes
        # ill-conditioned instances crawl
        t = t / shrink
        cap = step0 * 32.0
        if t > cap:
            t = cap
        accepted = False
        cand = w
        fc = f
        for _ in range(60):
            cand, _, _ = _dykstra(w - t * g, lo, hi, order_idx, c, dyk_tol,
                                  dyk_max_sweeps)
            d = cand - w
            # exact minimizer along the feasible segment; an overlong
            # projected step otherwise hops between faces without progress
            qd = np.dot(Q, d)
            a = float(np.dot(d, qd))
            b = 2.0 * float(np.dot(w, qd))
            if a > 0.0:
                theta = -b / (2.0 * a)
                if theta < 1.0:
                    if theta < 0.0:
                        theta = 0.0
                    cand = w + theta * d
                    d = cand - w
            fc = float(np.dot(cand, np.dot(Q, cand)))
            ss = 0.0
            for i in range(w.shape[0]):
                ss += d[i] * d[i]
            if fc <= f - 1e-4 / t * ss:
                accepted = True
                break
            t *= shrink
        if not accepted:
            converged = True
            it = outer - 1
            break
        moved = 0.0
        for i in range(w.shape[0]):
            moved = max(moved, abs(cand[i] - w[i]))
        w = cand
        qw = np.dot(Q, w)
        f = fc
        trace[it] = f
        # the projected step length is nondecreasing in t, so a tiny move
        # at t >= step0 bounds the fixed-step residual too
        if t >= step0 and moved <= tol_step:
            converged = True
            break
    return w, f, it, trace[: it + 1].copy(), converged


# ---------------------------------------------------------------------------
# monotone net kernels (flat omega, squared-weight reparameterization)


@njit(cache=True, inline="always")
def _logistic(s):
    if s >= 0.0:
        return 1.0 / (1.0 + np.exp(-s))
    ez = np.exp(s)
    return ez / (1.0 + ez)


@njit(cache=True)
def _fwd_sample(omega, sizes, x, acts):
    n_layers = sizes.shape[0] - 1
    for k in range(x.shape[0]):
        acts[0, k] = x[k]
    off = 0
    for l in range(n_layers):
        nin = sizes[l]
        nout = sizes[l + 1]
        boff = off + nout * nin
        for o in range(nout):
            s = omega[boff + o]
            rowbase = off + o * nin
            for k in range(nin):
                vv = omega[rowbase + k]
                s += vv * vv * acts[l, k]
            acts[l + 1, o] = _logistic(s)
        off = boff + nout
    return acts[n_layers, 0]


@njit(cache=True)
def _bwd_sample(omega, sizes, acts, gout, grad, delta, delta_prev):
    n_layers = sizes.shape[0] - 1
    offs = np.empty(n_layers, dtype=np.int64)
    off = 0
    for l in range(n_layers):
        offs[l] = off
        off += sizes[l + 1] * sizes[l] + sizes[l + 1]

    s_out = acts[n_layers, 0]
    delta[0] = gout * s_out * (1.0 - s_out)
    for l in range(n_layers, 0, -1):
        nin = sizes[l - 1]
        nout = sizes[l]
        base = offs[l - 1]
        boff = base + nout * nin
        for o in range(nout):
            d = delta[o]
            grad[boff + o] += d
            rowbase = base + o * nin
            for k in range(nin):
                vv = omega[rowbase + k]
                grad[rowbase + k] += d * acts[l - 1, k] * 2.0 * vv
        if l > 1:
            for k in range(nin):
                s = 0.0
                for o in range(nout):
                    vv = omega[base + o * nin + k]
                    s += vv * vv * delta[o]
                a = acts[l - 1, k]
                delta_prev[k] = s * a * (1.0 - a)
            for k in range(nin):
                delta[k] = delta_prev[k]


@njit(cache=True)
def _net_forward(omega, sizes, X):
    B = X.shape[0]
    n_layers = sizes.shape[0] - 1
    maxw = 0
    for l in range(sizes.shape[0]):
        maxw = max(maxw, sizes[l])
    acts = np.zeros((n_layers + 1, maxw))
    out = np.empty(B)
    for i in range(B):
        out[i] = _fwd_sample(omega, sizes, X[i], acts)
    return out


@njit(cache=True)
def _contrastive(omega, sizes, Xi, Xj, y, m):
    B = Xi.shape[0]
    n_layers = sizes.shape[0] - 1
    maxw = 0
    for l in range(sizes.shape[0]):
        maxw = max(maxw, sizes[l])
    acts_i = np.zeros((n_layers + 1, maxw))
    acts_j = np.zeros((n_layers + 1, maxw))
    delta = np.zeros(maxw)
    dprev = np.zeros(maxw)
    grad = np.zeros_like(omega)
    total = 0.0
    for i in range(B):
        si = _fwd_sample(omega, sizes, Xi[i], acts_i)
        sj = _fwd_sample(omega, sizes, Xj[i], acts_j)
        u = si - sj
        gi = 0.0
        if y[i] == 1:
            total += u * u
            gi = 2.0 * u / B
        else:
            d = abs(u)
            h = m - d
            if h > 0.0:
                total += h * h
                sgn = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
                gi = -2.0 * h * sgn / B
        if gi != 0.0:
            _bwd_sample(omega, sizes, acts_i, gi, grad, delta, dprev)
            _bwd_sample(omega, sizes, acts_j, -gi, grad, delta, dprev)
    return total / B, grad


@njit(cache=True)
def _triplet(omega, sizes, Xa, Xp, Xn, m):
    B = Xa.shape[0]
    n_layers = sizes.shape[0] - 1
    maxw = 0
    for l in range(sizes.shape[0]):
        maxw = max(maxw, sizes[l])
    acts_a = np.zeros((n_layers + 1, maxw))
    acts_p = np.zeros((n_layers + 1, maxw))
    acts_n = np.zeros((n_layers + 1, maxw))
    delta = np.zeros(maxw)
    dprev = np.zeros(maxw)
    grad = np.zeros_like(omega)
    total = 0.0
    for i in range(B):
        sa = _fwd_sample(omega, sizes, Xa[i], acts_a)
        sp = _fwd_sample(omega, sizes, Xp[i], acts_p)
        sn = _fwd_sample(omega, sizes, Xn[i], acts_n)
        up = sa - sp
        un = sa - sn
        pre = abs(up) - abs(un) + m
        if pre > 0.0:
            total += pre * pre
            gpre = 2.0 * pre / B
            sgp = 1.0 if up > 0.0 else (-1.0 if up < 0.0 else 0.0)
            sgn_ = 1.0 if un > 0.0 else (-1.0 if un < 0.0 else 0.0)
            if sgp != sgn_:
                _bwd_sample(omega, sizes, acts_a, gpre * (sgp - sgn_), grad,
                            delta, dprev)
            if sgp != 0.0:
                _bwd_sample(omega, sizes, acts_p, -gpre * sgp, grad, delta,
                            dprev)
            if sgn_ != 0.0:
                _bwd_sample(omega, sizes, acts_n, gpre * sgn_, grad, delta,
                            dprev)
    return total / B, grad


# ---------------------------------------------------------------------------
# public wrappers (dtype coercion; mirror the numpy backend's signatures)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def project_bounded_simplex(v, lo, hi):
    return _project_bounded_simplex(_f64(v), _f64(lo), _f64(hi))


def isotonic_non_increasing(a):
    return _isotonic_non_increasing(_f64(a))


def feasibility_residual(x, lo, hi, order_idx, c):
    return float(_feasibility_residual(
        _f64(x), _f64(lo), _f64(hi),
        np.ascontiguousarray(order_idx, dtype=np.int64), _f64(c)))


def dykstra_project(v, lo, hi, order_idx=None, c=None, tol=1e-12,
                    max_sweeps=5000):
    order_idx = _EMPTY_I if order_idx is None else np.ascontiguousarray(
        order_idx, dtype=np.int64)
    c = _EMPTY_F if c is None else _f64(c)
    w, res, sweeps = _dykstra(_f64(v), _f64(lo), _f64(hi), order_idx, c,
                              float(tol), int(max_sweeps))
    return w, float(res), int(sweeps)


def pgd_minimize(Q, w0, lo, hi, order_idx, c, step0, shrink, max_iters,
                 tol_step, dyk_tol, dyk_max_sweeps):
    order_idx = _EMPTY_I if order_idx is None else np.ascontiguousarray(
        order_idx, dtype=np.int64)
    c = _EMPTY_F if c is None else _f64(c)
    w, f, it, trace, converged = _pgd(
        _f64(Q), _f64(w0), _f64(lo), _f64(hi), order_idx, c, float(step0),
        float(shrink), int(max_iters), float(tol_step), float(dyk_tol),
        int(dyk_max_sweeps))
    return w, float(f), int(it), trace, bool(converged)


def net_forward(omega, sizes, X):
    return _net_forward(_f64(omega), np.ascontiguousarray(sizes, np.int64),
                        np.atleast_2d(_f64(X)))


def contrastive_value_grad(omega, sizes, Xi, Xj, y, m):
    loss, grad = _contrastive(
        _f64(omega), np.ascontiguousarray(sizes, np.int64),
        np.atleast_2d(_f64(Xi)), np.atleast_2d(_f64(Xj)),
        np.ascontiguousarray(y, np.int64), float(m))
    return float(loss), grad


def triplet_value_grad(omega, sizes, Xa, Xp, Xn, m):
    loss, grad = _triplet(
        _f64(omega), np.ascontiguousarray(sizes, np.int64),
        np.atleast_2d(_f64(Xa)), np.atleast_2d(_f64(Xp)),
        np.atleast_2d(_f64(Xn)), float(m))
    return float(loss), grad
