"""Compiled inner loops shared by the losses and every solver.

Data is passed as the tuple ``X = (indptr, indices, values, labels)`` of a CSR
design matrix plus per-row labels (class index stored as float, or the real
target for squared loss).  Parameters are dense vectors of length ``d * k``
stored class-major: coordinate ``(c, f)`` lives at ``c * d + f``.

Every reduction over rows runs left to right in row order, so results are
bitwise reproducible.
"""
import math

import numpy as np
from numba import njit

SQUARED = 0
MULTINOMIAL = 1

_jit = dict(cache=True, nogil=True)


@njit(**_jit)
def row_scores(X, i, w, d, k, scores):
    indptr, indices, values = X[0], X[1], X[2]
    for c in range(k):
        scores[c] = 0.0
    for p in range(indptr[i], indptr[i + 1]):
        f = indices[p]
        v = values[p]
        for c in range(k):
            scores[c] += w[c * d + f] * v


@njit(**_jit)
def sample_loss(kind, k, scores, label, r):
    """Loss value of one sample given its scores; writes d(loss)/d(score) to r."""
    if kind == SQUARED:
        res = scores[0] - label
        r[0] = res
        return 0.5 * res * res
    # multinomial with an implicit reference class of score 0 (index k)
    top = k
    mx = 0.0
    for c in range(k):
        if scores[c] > mx:
            mx = scores[c]
            top = c
    rest = 0.0
    for c in range(k):
        e = math.exp(scores[c] - mx)
        r[c] = e
        if c != top:
            rest += e
    if top != k:
        rest += math.exp(-mx)
    denom = 1.0 + rest
    for c in range(k):
        r[c] = r[c] / denom
    cls = int(label)
    s_cls = 0.0
    if cls < k:
        s_cls = scores[cls]
        # p_top - 1 = -rest/denom without cancellation
        r[cls] = -rest / denom if cls == top else r[cls] - 1.0
    return (mx - s_cls) + math.log1p(rest)


@njit(**_jit)
def _scatter_add(X, i, d, k, coef, out):
    indptr, indices, values = X[0], X[1], X[2]
    for p in range(indptr[i], indptr[i + 1]):
        f = indices[p]
        v = values[p]
        for c in range(k):
            out[c * d + f] += coef[c] * v


@njit(**_jit)
def component_value_grad(X, kind, d, k, i, w, grad):
    scores = np.empty(k)
    r = np.empty(k)
    row_scores(X, i, w, d, k, scores)
    val = sample_loss(kind, k, scores, X[3][i], r)
    grad[:] = 0.0
    _scatter_add(X, i, d, k, r, grad)
    return val


@njit(**_jit)
def full_value_grad(X, kind, d, k, w, grad):
    n = X[0].shape[0] - 1
    scores = np.empty(k)
    r = np.empty(k)
    labels = X[3]
    grad[:] = 0.0
    total = 0.0
    for i in range(n):
        row_scores(X, i, w, d, k, scores)
        total += sample_loss(kind, k, scores, labels[i], r)
        _scatter_add(X, i, d, k, r, grad)
    for j in range(grad.shape[0]):
        grad[j] = grad[j] / n
    return total / n


@njit(**_jit)
def full_value(X, kind, d, k, w):
    n = X[0].shape[0] - 1
    scores = np.empty(k)
    r = np.empty(k)
    labels = X[3]
    total = 0.0
    for i in range(n):
        row_scores(X, i, w, d, k, scores)
        total += sample_loss(kind, k, scores, labels[i], r)
    return total / n


@njit(**_jit)
def vr_gradient_into(X, kind, d, k, i, y, xt, mu, out):
    """out = grad g_i(y) - grad g_i(xt) + mu."""
    s1 = np.empty(k)
    s2 = np.empty(k)
    r1 = np.empty(k)
    r2 = np.empty(k)
    label = X[3][i]
    row_scores(X, i, y, d, k, s1)
    sample_loss(kind, k, s1, label, r1)
    row_scores(X, i, xt, d, k, s2)
    sample_loss(kind, k, s2, label, r2)
    for c in range(k):
        r1[c] -= r2[c]
    out[:] = mu
    _scatter_add(X, i, d, k, r1, out)


@njit(**_jit)
def prox_into(v, t, lam1, lam2, out):
    """argmin_z 0.5||z - v||^2 + t*(lam2/2 ||z||^2 + lam1 ||z||_1)."""
    thr = t * lam1
    shrink = 1.0 + t * lam2
    for j in range(v.shape[0]):
        a = abs(v[j]) - thr
        if a > 0.0:
            out[j] = math.copysign(a, v[j]) / shrink
        else:
            out[j] = 0.0


@njit(**_jit)
def reg_value(x, lam1, lam2):
    sq = 0.0
    ab = 0.0
    for j in range(x.shape[0]):
        sq += x[j] * x[j]
        ab += abs(x[j])
    return 0.5 * lam2 * sq + lam1 * ab


# ---------------------------------------------------------------- solvers


@njit(**_jit)
def vrada_steps(X, kind, d, k, idx, k0, k1, deterministic,
                ca, cb, a_s, q, center, G, B, lam1, lam2,
                xt, mu, z, z_sum, y, g):
    """Inner iterations k0..k1-1 of one epoch; returns the updated B.

    y and g hold the coupling point and gradient estimate of the last step.
    """
    dim = z.shape[0]
    v = np.empty(dim)
    for t in range(k0, k1):
        for j in range(dim):
            y[j] = ca * xt[j] + cb * z[j]
        if deterministic:
            full_value_grad(X, kind, d, k, y, g)
        else:
            vr_gradient_into(X, kind, d, k, idx[t], y, xt, mu, g)
        for j in range(dim):
            G[j] += a_s * g[j]
        B += a_s
        for j in range(dim):
            v[j] = center[j] - G[j] / q
        prox_into(v, B / q, lam1, lam2, z)
        for j in range(dim):
            z_sum[j] += z[j]
    return B


@njit(**_jit)
def svrg_epoch(X, kind, d, k, idx, snap, eta, lam1, lam2, xt, mu, x, x_snap):
    """m proximal SVRG steps from x; x_snap receives the iterate x_snap (0..m-1)."""
    dim = x.shape[0]
    g = np.empty(dim)
    v = np.empty(dim)
    for t in range(idx.shape[0]):
        if t == snap:
            x_snap[:] = x
        vr_gradient_into(X, kind, d, k, idx[t], x, xt, mu, g)
        for j in range(dim):
            v[j] = x[j] - eta * g[j]
        prox_into(v, eta, lam1, lam2, x)


@njit(**_jit)
def katyusha_epoch(X, kind, d, k, idx, tau1, tau2, alpha, Lp, omega_log,
                   lam1, lam2, xt, mu, y, z, avg):
    """One Katyusha epoch (option-I y update); avg receives the weighted y average."""
    dim = z.shape[0]
    m = idx.shape[0]
    xk = np.empty(dim)
    g = np.empty(dim)
    v = np.empty(dim)
    avg[:] = 0.0
    wsum = 0.0
    step_y = 1.0 / (3.0 * Lp)
    for t in range(m):
        for j in range(dim):
            xk[j] = tau1 * z[j] + tau2 * xt[j] + (1.0 - tau1 - tau2) * y[j]
        vr_gradient_into(X, kind, d, k, idx[t], xk, xt, mu, g)
        for j in range(dim):
            v[j] = z[j] - alpha * g[j]
        prox_into(v, alpha, lam1, lam2, z)
        for j in range(dim):
            v[j] = xk[j] - step_y * g[j]
        prox_into(v, step_y, lam1, lam2, y)
        w = math.exp((t - (m - 1)) * omega_log)
        wsum += w
        for j in range(dim):
            avg[j] += w * y[j]
    for j in range(dim):
        avg[j] = avg[j] / wsum


@njit(**_jit)
def mig_epoch(X, kind, d, k, idx, theta, eta, omega_log,
              lam1, lam2, xt, mu, x, avg):
    """One MiG epoch; avg receives the weighted average of the inner x iterates."""
    dim = x.shape[0]
    m = idx.shape[0]
    yk = np.empty(dim)
    g = np.empty(dim)
    v = np.empty(dim)
    avg[:] = 0.0
    wsum = 0.0
    for t in range(m):
        for j in range(dim):
            yk[j] = theta * x[j] + (1.0 - theta) * xt[j]
        vr_gradient_into(X, kind, d, k, idx[t], yk, xt, mu, g)
        for j in range(dim):
            v[j] = x[j] - eta * g[j]
        prox_into(v, eta, lam1, lam2, x)
        w = math.exp((t - (m - 1)) * omega_log)
        wsum += w
        for j in range(dim):
            avg[j] += w * x[j]
    for j in range(dim):
        avg[j] = avg[j] / wsum


@njit(**_jit)
def proximal_gradient(X, kind, d, k, x, step, lam1, lam2, max_iter, rtol):
    """Plain proximal gradient descent with fixed step, in place on x.

    Stops once successive objective values differ by less than
    ``rtol * max(1, |f|)`` on 50 consecutive iterations.  The objective at
    x_t comes from the same pass as its gradient.  Returns (objective, iterations).
    """
    dim = x.shape[0]
    g = np.empty(dim)
    v = np.empty(dim)
    f_prev = np.inf
    quiet = 0
    it = 0
    while it < max_iter:
        f = full_value_grad(X, kind, d, k, x, g) + reg_value(x, lam1, lam2)
        if abs(f_prev - f) <= rtol * max(1.0, abs(f)):
            quiet += 1
            if quiet >= 50:
                return f, it
        else:
            quiet = 0
        f_prev = f
        for j in range(dim):
            v[j] = x[j] - step * g[j]
        prox_into(v, step, lam1, lam2, x)
        it += 1
    return full_value(X, kind, d, k, x) + reg_value(x, lam1, lam2), it
