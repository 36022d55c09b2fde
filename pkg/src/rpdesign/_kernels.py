"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel in this module is written against the numpy subset that numba
compiles, so the exact same source runs in two modes:

* jitted (default) -- ``numba.njit`` with on-disk caching;
* pure python/numpy fallback -- selected by setting the environment variable
  ``RPDESIGN_NO_NUMBA=1`` before import, or automatically when numba is not
  installed.

When jitted, the original python function stays reachable as
``kernel.py_func``; ``py_impl(kernel)`` returns the fallback implementation
either way.  ``benchmarks/bench_kernels.py`` compares the two paths.

Kernels use no global state.  Randomness comes from a small LCG whose state
is threaded through explicitly, so jit and fallback paths produce identical
results bit for bit.
"""

import os

import numpy as np

try:
    import numba
except ImportError:
    numba = None

_ENV_FLAG = "RPDESIGN_NO_NUMBA"

USE_NUMBA = numba is not None and os.environ.get(_ENV_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
)


def maybe_njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""

    def decorate(f):
        if USE_NUMBA:
            return numba.njit(cache=True, **kwargs)(f)
        return f

    if func is not None:
        return decorate(func)
    return decorate


def py_impl(kernel):
    """Return the pure-python implementation of a (possibly jitted) kernel."""
    return getattr(kernel, "py_func", kernel)


# LCG constants (31-bit modulus keeps every intermediate below 2**62 so
# int64 arithmetic never wraps and jit/fallback sequences agree exactly).
_LCG_A = 1103515245
_LCG_C = 12345
_LCG_M = 2147483648


@maybe_njit
def _lcg_next(state):
    x = (_LCG_A * state[0] + _LCG_C) % _LCG_M
    state[0] = x
    return x


@maybe_njit
def _lcg_below(state, k):
    return _lcg_next(state) % k


@maybe_njit
def _clamp_inplace(x, lo, hi):
    for i in range(x.shape[0]):
        if x[i] < lo[i]:
            x[i] = lo[i]
        elif x[i] > hi[i]:
            x[i] = hi[i]


# Objective modes for design_objective / nelder_mead_design.
OBJ_PENALIZED_TARGET = 0
OBJ_WEIGHTED = 1
OBJ_VARIANCE = 2
OBJ_NEG_SNR_NOMINAL = 3
OBJ_NEG_SNR_LARGER = 4
OBJ_NEG_SNR_SMALLER = 5


@maybe_njit
def design_objective(x, beta0, beta1, beta2, beta3, beta4, sigma2, sigma_z, mode, rho, alpha, t):
    """Evaluate one design objective at control setting x.

    mean  = beta0 + x'beta1 + x'beta2 x
    var   = (beta3 + beta4'x)' sigma_z (beta3 + beta4'x) + sigma2

    mode 0: var + rho * (mean - t)^2          (penalty subproblem)
    mode 1: alpha * var + (1-alpha)(mean-t)^2 (weighted trade-off)
    mode 2: var                               (pure variance)
    mode 3: -10 log10(mean^2 / (var + (mean-t)^2))
    mode 4: -(-10 log10(1/mean^2 + 3 var / mean^4))
    mode 5: -(-10 log10(var + mean^2))

    Modes 3-5 are surface versions of the nominal/larger/smaller
    signal-to-noise statistics (negated so that minimizing maximizes the
    ratio); out-of-domain points return +inf.
    """
    s = x.shape[0]
    q = beta3.shape[0]

    mean = beta0
    for i in range(s):
        mean += beta1[i] * x[i]
        acc = 0.0
        for j in range(s):
            acc += beta2[i, j] * x[j]
        mean += x[i] * acc

    var = sigma2
    w = np.empty(q)
    for k in range(q):
        wk = beta3[k]
        for i in range(s):
            wk += beta4[i, k] * x[i]
        w[k] = wk
    for a in range(q):
        acc = 0.0
        for b in range(q):
            acc += sigma_z[a, b] * w[b]
        var += w[a] * acc

    if mode == OBJ_PENALIZED_TARGET:
        dev = mean - t
        return var + rho * dev * dev
    if mode == OBJ_WEIGHTED:
        dev = mean - t
        return alpha * var + (1.0 - alpha) * dev * dev
    if mode == OBJ_VARIANCE:
        return var
    if mode == OBJ_NEG_SNR_NOMINAL:
        dev = mean - t
        denom = var + dev * dev
        if denom <= 0.0 or mean == 0.0:
            return np.inf
        return -10.0 * np.log10(mean * mean / denom)
    if mode == OBJ_NEG_SNR_LARGER:
        m2 = mean * mean
        if m2 <= 0.0:
            return np.inf
        arg = 1.0 / m2 + 3.0 * var / (m2 * m2)
        if arg <= 0.0:
            return np.inf
        return 10.0 * np.log10(arg)
    # OBJ_NEG_SNR_SMALLER
    arg = var + mean * mean
    if arg <= 0.0:
        return np.inf
    return 10.0 * np.log10(arg)


@maybe_njit
def _eval_clamped(x, lo, hi, beta0, beta1, beta2, beta3, beta4, sigma2, sigma_z, mode, rho, alpha, t):
    _clamp_inplace(x, lo, hi)
    f = design_objective(x, beta0, beta1, beta2, beta3, beta4, sigma2, sigma_z, mode, rho, alpha, t)
    if not np.isfinite(f):
        return np.inf
    return f


@maybe_njit
def nelder_mead_design(x0, lo, hi, beta0, beta1, beta2, beta3, beta4, sigma2, sigma_z,
                       mode, rho, alpha, t, max_iter):
    """Nelder-Mead simplex minimization of design_objective over a box.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    Every candidate vertex is clamped into [lo, hi] before evaluation, so
    the returned point respects the box exactly.  Terminates when the
    simplex diameter (max distance of any vertex from the best vertex)
    drops below 1e-8 * (1 + ||best||) or after max_iter iterations.

    Returns (x_best, f_best, iterations, converged).
    """
    s = x0.shape[0]
    m = s + 1

    verts = np.empty((m, s))
    fv = np.empty(m)
    for i in range(s):
        v = x0[i]
        if v < lo[i]:
            v = lo[i]
        elif v > hi[i]:
            v = hi[i]
        verts[0, i] = v
    for vtx in range(1, m):
        for i in range(s):
            verts[vtx, i] = verts[0, i]
        i = vtx - 1
        step = 0.05 * (hi[i] - lo[i])
        if step <= 0.0:
            step = 2.5e-4 * (1.0 + abs(verts[0, i]))
        cand = verts[0, i] + step
        if cand > hi[i]:
            cand = verts[0, i] - step
            if cand < lo[i]:
                cand = lo[i]
        verts[vtx, i] = cand

    xbuf = np.empty(s)
    for vtx in range(m):
        for i in range(s):
            xbuf[i] = verts[vtx, i]
        fv[vtx] = _eval_clamped(xbuf, lo, hi, beta0, beta1, beta2, beta3, beta4,
                                sigma2, sigma_z, mode, rho, alpha, t)
        for i in range(s):
            verts[vtx, i] = xbuf[i]

    cen = np.empty(s)
    xr = np.empty(s)
    x2 = np.empty(s)
    iters = 0
    converged = False

    while iters < max_iter:
        ib = 0
        iw = 0
        for vtx in range(1, m):
            if fv[vtx] < fv[ib]:
                ib = vtx
            if fv[vtx] > fv[iw]:
                iw = vtx
        fsw = -np.inf
        for vtx in range(m):
            if vtx != iw and fv[vtx] > fsw:
                fsw = fv[vtx]

        diam = 0.0
        for vtx in range(m):
            d2 = 0.0
            for i in range(s):
                d = verts[vtx, i] - verts[ib, i]
                d2 += d * d
            d2 = np.sqrt(d2)
            if d2 > diam:
                diam = d2
        xnorm = 0.0
        for i in range(s):
            xnorm += verts[ib, i] * verts[ib, i]
        if diam < 1e-8 * (1.0 + np.sqrt(xnorm)):
            converged = True
            break

        for i in range(s):
            acc = 0.0
            for vtx in range(m):
                if vtx != iw:
                    acc += verts[vtx, i]
            cen[i] = acc / s

        for i in range(s):
            xr[i] = cen[i] + (cen[i] - verts[iw, i])
        fr = _eval_clamped(xr, lo, hi, beta0, beta1, beta2, beta3, beta4,
                           sigma2, sigma_z, mode, rho, alpha, t)

        shrink = False
        if fr < fv[ib]:
            for i in range(s):
                x2[i] = cen[i] + 2.0 * (cen[i] - verts[iw, i])
            fe = _eval_clamped(x2, lo, hi, beta0, beta1, beta2, beta3, beta4,
                               sigma2, sigma_z, mode, rho, alpha, t)
            if fe < fr:
                for i in range(s):
                    verts[iw, i] = x2[i]
                fv[iw] = fe
            else:
                for i in range(s):
                    verts[iw, i] = xr[i]
                fv[iw] = fr
        elif fr < fsw:
            for i in range(s):
                verts[iw, i] = xr[i]
            fv[iw] = fr
        else:
            if fr < fv[iw]:
                for i in range(s):
                    x2[i] = cen[i] + 0.5 * (xr[i] - cen[i])
                fc = _eval_clamped(x2, lo, hi, beta0, beta1, beta2, beta3, beta4,
                                   sigma2, sigma_z, mode, rho, alpha, t)
                if fc <= fr:
                    for i in range(s):
                        verts[iw, i] = x2[i]
                    fv[iw] = fc
                else:
                    shrink = True
            else:
                for i in range(s):
                    x2[i] = cen[i] + 0.5 * (verts[iw, i] - cen[i])
                fc = _eval_clamped(x2, lo, hi, beta0, beta1, beta2, beta3, beta4,
                                   sigma2, sigma_z, mode, rho, alpha, t)
                if fc < fv[iw]:
                    for i in range(s):
                        verts[iw, i] = x2[i]
                    fv[iw] = fc
                else:
                    shrink = True

        if shrink:
            for vtx in range(m):
                if vtx == ib:
                    continue
                for i in range(s):
                    xbuf[i] = verts[ib, i] + 0.5 * (verts[vtx, i] - verts[ib, i])
                fv[vtx] = _eval_clamped(xbuf, lo, hi, beta0, beta1, beta2, beta3, beta4,
                                        sigma2, sigma_z, mode, rho, alpha, t)
                for i in range(s):
                    verts[vtx, i] = xbuf[i]

        iters += 1

    ib = 0
    for vtx in range(1, m):
        if fv[vtx] < fv[ib]:
            ib = vtx
    out = np.empty(s)
    for i in range(s):
        out[i] = verts[ib, i]
    return out, fv[ib], iters, converged


@maybe_njit
def forest_importance(X, y, boot, seeds, max_depth, min_leaf, n_feat_split):
    """Grow a regression forest and accumulate impurity-decrease importances.

    X: (n, L) feature matrix; y: (n,) response.
    boot: (T, n) int64 bootstrap row indices, one row per tree.
    seeds: (T,) int64 LCG seeds for the per-node feature subsampling.

    Splits use the variance-reduction criterion on candidate thresholds at
    midpoints between distinct consecutive sorted values; a split must
    strictly reduce the within-node sum of squares and leave at least
    min_leaf samples on each side.  Returns (importance, split_counts)
    where importance[f] is the total sum-of-squares decrease attributed to
    feature f across all trees (unnormalized) and split_counts[f] the
    number of splits on f.
    """
    n, n_features = X.shape
    n_trees = boot.shape[0]
    importance = np.zeros(n_features)
    split_counts = np.zeros(n_features, dtype=np.int64)

    state = np.empty(1, dtype=np.int64)
    featbuf = np.empty(n_features, dtype=np.int64)
    idx = np.empty(n, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    max_nodes = 4 * n + 4
    stack = np.empty((max_nodes, 3), dtype=np.int64)

    kf = n_feat_split
    if kf > n_features:
        kf = n_features
    if kf < 1:
        kf = 1

    for tree in range(n_trees):
        state[0] = seeds[tree]
        for i in range(n):
            idx[i] = boot[tree, i]
        stack[0, 0] = 0
        stack[0, 1] = n
        stack[0, 2] = 0
        top = 1

        while top > 0:
            top -= 1
            start = stack[top, 0]
            end = stack[top, 1]
            depth = stack[top, 2]
            m = end - start
            if depth >= max_depth or m < 2 * min_leaf:
                continue

            s1 = 0.0
            s2 = 0.0
            for ii in range(start, end):
                yy = y[idx[ii]]
                s1 += yy
                s2 += yy * yy
            ss_parent = s2 - s1 * s1 / m
            if ss_parent <= 0.0:
                continue

            for j in range(n_features):
                featbuf[j] = j

            best_gain = 0.0
            best_f = -1
            best_thr = 0.0
            for jj in range(kf):
                r = _lcg_below(state, n_features - jj)
                pick = featbuf[jj + r]
                featbuf[jj + r] = featbuf[jj]
                featbuf[jj] = pick
                f = pick

                vals = np.empty(m)
                for ii in range(m):
                    vals[ii] = X[idx[start + ii], f]
                order = np.argsort(vals, kind="mergesort")
                sv = np.empty(m)
                sy = np.empty(m)
                for ii in range(m):
                    o = order[ii]
                    sv[ii] = vals[o]
                    sy[ii] = y[idx[start + o]]

                acc1 = 0.0
                acc2 = 0.0
                for cut in range(1, m):
                    yy = sy[cut - 1]
                    acc1 += yy
                    acc2 += yy * yy
                    if cut < min_leaf or (m - cut) < min_leaf:
                        continue
                    if sv[cut] <= sv[cut - 1]:
                        continue
                    nl = cut
                    nr = m - cut
                    sl = acc1
                    sr = s1 - acc1
                    ss_left = acc2 - sl * sl / nl
                    ss_right = (s2 - acc2) - sr * sr / nr
                    gain = ss_parent - ss_left - ss_right
                    if gain > best_gain + 1e-12 * ss_parent and gain > 0.0:
                        best_gain = gain
                        best_f = f
                        best_thr = 0.5 * (sv[cut - 1] + sv[cut])

            if best_f < 0:
                continue

            left_n = 0
            li = start
            ri = start
            for ii in range(start, end):
                if X[idx[ii], best_f] <= best_thr:
                    left_n += 1
            ri = start + left_n
            for ii in range(start, end):
                row = idx[ii]
                if X[row, best_f] <= best_thr:
                    tmp[li] = row
                    li += 1
                else:
                    tmp[ri] = row
                    ri += 1
            for ii in range(start, end):
                idx[ii] = tmp[ii]

            if left_n < min_leaf or (end - start - left_n) < min_leaf:
                continue

            importance[best_f] += best_gain
            split_counts[best_f] += 1

            stack[top, 0] = start
            stack[top, 1] = start + left_n
            stack[top, 2] = depth + 1
            top += 1
            stack[top, 0] = start + left_n
            stack[top, 1] = end
            stack[top, 2] = depth + 1
            top += 1

    return importance, split_counts
