"""Variance reduction via accelerated dual averaging (VRADA).

The estimation function

    psi(z) = (q/2)||z - center||^2 + <G, z> + B * l(z) + const

is kept in closed form: every update adds a weighted linearization of g plus
a multiple of l, so its minimizer is always prox_{(B/q) l}(center - G/q).
``const`` is only tracked in audit mode, where the value of psi is needed.

Epoch s >= 2 draws m indices from a Philox stream seeded by ``seed``; the
draws for epoch s do not depend on how many epochs are run afterwards.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import AuditError, ConfigError, NumericOverflowError, ScheduleSaturated
from .schedule import EpochSchedule
from .trace import SolverTrace

AUDIT_RTOL = 1e-10
DUAL_RTOL = 1e-12
UNBIASED_RTOL = 1e-12
RESOLUTION = 1e-15


def _leq(lhs, rhs, rtol, *scales):
    scale = max((abs(lhs), abs(rhs)) + tuple(abs(s) for s in scales))
    return lhs <= rhs + rtol * scale


@dataclass
class DualAveragingState:
    q: float
    center: np.ndarray
    G: np.ndarray
    B: float
    const_acc: float = None

    def argmin(self, reg):
        return reg.prox(self.center - self.G / self.q, self.B / self.q) if self.B > 0 \
            else self.center - self.G / self.q

    def value(self, z, reg):
        if self.const_acc is None:
            raise ValueError("psi value needs const_acc (audit mode)")
        diff = z - self.center
        return (0.5 * self.q * float(diff @ diff) + float(self.G @ z)
                + self.B * reg.value(z) + self.const_acc)

    def value_scale(self, z, reg):
        diff = z - self.center
        return (0.5 * self.q * float(diff @ diff) + abs(float(self.G @ z))
                + self.B * reg.value(z) + abs(self.const_acc or 0.0))

    def rescale(self, factor):
        self.q *= factor
        self.G = factor * self.G
        self.B *= factor
        if self.const_acc is not None:
            self.const_acc *= factor


def dual_argmin(dual, reg):
    return dual.argmin(reg)


@dataclass
class VradaConfig:
    m: int = None
    epochs: int = 20
    gap_target: float = None
    seed: int = 0
    deterministic: bool = False
    audit: bool = False
    L: float = None
    x0: np.ndarray = None
    x_star: np.ndarray = None
    f_star: float = None
    probes: int = 3
    divergence_factor: float = 1e6


@dataclass
class VradaState:
    x0: np.ndarray
    x_tilde: np.ndarray
    z: np.ndarray
    mu: np.ndarray
    schedule: EpochSchedule
    dual: DualAveragingState
    rng: np.random.Generator
    m: int
    epoch: int = 1
    z_sum: np.ndarray = None
    idx: np.ndarray = None
    g_anchor: float = None
    y: np.ndarray = None
    g: np.ndarray = None
    audit: bool = False
    first_epoch_bound: tuple = None
    # independently accumulated quantities, audit mode only
    G_scratch_init: np.ndarray = None
    G_scratch: np.ndarray = None
    G_abs: np.ndarray = None
    epoch_grad_sum: np.ndarray = None
    y_next_sum: np.ndarray = None

    @property
    def coupling(self):
        """(A_{s-1}/A_s, a_s/A_s, a_s) of the current epoch."""
        s = self.epoch
        A = self.schedule.A
        return A[s - 1] / A[s], self.schedule.a[s] / A[s], self.schedule.a[s]


def initialize(obj, x0, m, L=None, seed=0, audit=False):
    """Steps 2-4: one proximal gradient step with a_1 = 1/L, then psi <- m psi."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    reg = obj.regularizer
    L = obj.constants.L if L is None else float(L)
    sched = EpochSchedule(m, L, obj.constants.sigma)
    a1 = sched.a[1]
    x0 = obj.check_point(np.array(x0, dtype=np.float64))
    g0, grad0 = obj.full_value_grad(x0)
    dual = DualAveragingState(
        q=1.0, center=x0.copy(), G=a1 * grad0, B=a1,
        const_acc=a1 * (g0 - float(grad0 @ x0)) if audit else None,
    )
    z11 = dual.argmin(reg)
    if not np.all(np.isfinite(z11)):
        raise NumericOverflowError("non-finite first iterate")
    first_epoch_bound = None
    if audit:
        psi = dual.value(z11, reg)
        rhs = sched.A[1] * obj.objective_value(z11)
        first_epoch_bound = (psi, rhs)
        if not _leq(rhs, psi, AUDIT_RTOL, dual.value_scale(z11, reg)):
            raise AuditError("first-epoch dual lower bound (psi_11(z_11) >= A_1 f(x_1))", 1,
                             f"psi={psi:.17g} < A_1 f={rhs:.17g}")
    dual.rescale(float(m))
    state = VradaState(
        x0=x0, x_tilde=z11.copy(), z=z11.copy(), mu=grad0, schedule=sched, dual=dual,
        rng=np.random.Generator(np.random.Philox(seed)), m=m, audit=audit,
        y=np.zeros_like(x0), g=np.zeros_like(x0), first_epoch_bound=first_epoch_bound,
    )
    if audit:
        state.G_scratch_init = m * (a1 * grad0)
        state.G_scratch = state.G_scratch_init.copy()
        state.G_abs = np.abs(state.G_scratch_init)
    return state


def vr_gradient(obj, i, y, x_prev, mu):
    """grad g_i(y) - grad g_i(x_prev) + mu, with mu = grad g(x_prev)."""
    return obj.smooth.vr_gradient(i, obj.check_point(y), obj.check_point(x_prev),
                                  obj.check_point(mu))


def begin_epoch(state, obj, deterministic=False):
    """Step 6 (next A_s) and Step 7 (anchor gradient); draws this epoch's indices."""
    state.schedule.extend()
    state.epoch += 1
    state.g_anchor, state.mu = obj.full_value_grad(state.x_tilde)
    state.idx = (np.zeros(state.m, dtype=np.int64) if deterministic
                 else state.rng.integers(0, obj.n, size=state.m))
    state.z_sum = np.zeros_like(state.z)
    if state.audit:
        state.epoch_grad_sum = np.zeros_like(state.z)
        state.y_next_sum = np.zeros_like(state.z)
    return state


def _steps(state, obj, k0, k1, deterministic):
    sm, reg, dual = obj.smooth, obj.regularizer, state.dual
    ca, cb, a_s = state.coupling
    dual.B = _kernels.vrada_steps(
        sm.X, sm.code, sm.features, sm.blocks, state.idx, k0, k1, deterministic,
        ca, cb, a_s, dual.q, dual.center, dual.G, dual.B, reg.lambda1, reg.lambda2,
        state.x_tilde, state.mu, state.z, state.z_sum, state.y, state.g)


def inner_step(state, obj, k, deterministic=False):
    """Steps 9-12 for inner iteration k (1-based) of the current epoch.

    With ``deterministic`` the sampled estimate is replaced by grad g(y).
    """
    _steps(state, obj, k - 1, k, deterministic)
    if state.audit:
        _, _, a_s = state.coupling
        y, g = state.y, state.g
        state.dual.const_acc += a_s * (obj.smooth_value(y) - float(g @ y))
        state.epoch_grad_sum += g
        state.G_abs += a_s * np.abs(g)
        ca, cb, _ = state.coupling
        state.y_next_sum += ca * state.x_tilde + cb * state.z
    return state


def end_epoch(state):
    """Step 14: x_s = (A_{s-1}/A_s) x_{s-1} + (a_s/(m A_s)) sum_k z_{s,k}."""
    ca, _, a_s = state.coupling
    A_s = state.schedule.A[state.epoch]
    state.x_tilde = ca * state.x_tilde + (a_s / (state.m * A_s)) * state.z_sum
    return state


def variance_probe(obj, y, x_prev, mu=None, L=None):
    """Enumerate every component at (y, x_prev).

    Returns a dict with the variance (1/n) sum_i ||vr_i - grad g(y)||^2, the
    bound 2L (g(x_prev) - g(y) - <grad g(y), x_prev - y>), the unbiasedness
    error ||mean_i vr_i - grad g(y)||_inf and the matching scales.
    """
    L = obj.constants.L if L is None else L
    g_prev, grad_prev = obj.full_value_grad(x_prev)
    mu = grad_prev if mu is None else mu
    g_y, grad_y = obj.full_value_grad(y)
    n = obj.n
    total = np.zeros_like(grad_y)
    var = 0.0
    vmax = 0.0
    for i in range(n):
        v = vr_gradient(obj, i, y, x_prev, mu)
        total += v
        diff = v - grad_y
        var += float(diff @ diff)
        # rounding in the mean is relative to the component gradients that cancel
        gi_y = obj.component_value_grad(i, y)[1]
        gi_x = obj.component_value_grad(i, x_prev)[1]
        vmax = max(vmax, float(np.abs(v).max(initial=0.0)), float(np.abs(gi_y).max(initial=0.0)),
                   float(np.abs(gi_x).max(initial=0.0)))
    var /= n
    mean = total / n
    bregman = g_prev - g_y - float(grad_y @ (x_prev - y))
    return dict(
        variance=var, bound=2.0 * L * bregman,
        bound_scale=2.0 * L * (abs(g_prev) + abs(g_y) + abs(float(grad_y @ (x_prev - y)))),
        bias=float(np.abs(mean - grad_y).max(initial=0.0)),
        bias_scale=max(vmax, float(np.abs(grad_y).max(initial=0.0)),
                       float(np.abs(mu).max(initial=0.0))),
    )


def check_variance_probe(probe, epoch):
    if not _leq(probe["variance"], probe["bound"], AUDIT_RTOL, probe["bound_scale"]):
        raise AuditError("variance bound", epoch,
                         f"variance={probe['variance']:.17g} > bound={probe['bound']:.17g}")
    if probe["bias"] > UNBIASED_RTOL * probe["bias_scale"]:
        raise AuditError("unbiasedness of the variance-reduced gradient", epoch,
                         f"mean error={probe['bias']:.3g} (scale {probe['bias_scale']:.3g})")


def _audit_epoch(state, obj, config, L):
    s, m, reg, dual = state.epoch, state.m, obj.regularizer, state.dual
    A_s = state.schedule.A[s]
    if not abs(dual.B - m * A_s) <= DUAL_RTOL * m * A_s:
        raise AuditError("dual bookkeeping B = m A_s", s, f"B={dual.B:.17g}, m A_s={m * A_s:.17g}")
    # exact recomputation from the stored (q, center, G, B)
    if not np.array_equal(dual.argmin(reg), state.z):
        raise AuditError("dual minimizer identity", s, "stored z differs from argmin psi")
    # independent accumulation order: per-epoch gradient sums, then weights
    _, _, a_s = state.coupling
    state.G_scratch = state.G_scratch + a_s * state.epoch_grad_sum
    ref = DualAveragingState(dual.q, dual.center, state.G_scratch, m * A_s)
    z_ref = ref.argmin(reg)
    shrink = 1.0 + (dual.B / dual.q) * reg.lambda2
    scale = float(((np.abs(dual.center) + state.G_abs / dual.q) / shrink).max(initial=0.0))
    err = float(np.abs(z_ref - state.z).max(initial=0.0))
    if err > DUAL_RTOL * max(scale, 1e-300):
        raise AuditError("dual state consistency", s, f"|z - z_scratch|={err:.3g} (scale {scale:.3g})")
    # uniform average identity: x_s = (1/m) sum_k y_{s,k+1}
    avg = state.y_next_sum / m
    err = float(np.abs(avg - state.x_tilde).max(initial=0.0))
    xs = max(float(np.abs(state.x_tilde).max(initial=0.0)), float(np.abs(avg).max(initial=0.0)))
    if err > DUAL_RTOL * max(xs, 1e-300):
        raise AuditError("uniform averaging identity", s, f"|x_s - mean y|={err:.3g}")
    if config.deterministic and config.f_star is not None and config.x_star is not None:
        D2 = float(np.sum((state.x0 - np.asarray(config.x_star)) ** 2))
        f_s = obj.objective_value(state.x_tilde)
        gap = f_s - config.f_star
        bound = D2 / (2.0 * A_s)
        if not _leq(gap, bound, AUDIT_RTOL, config.f_star, f_s):
            raise AuditError("gap bound", s, f"gap={gap:.17g} > bound={bound:.17g}")
        psi = dual.value(state.z, reg)
        upper = m * A_s * config.f_star + 0.5 * m * D2
        if not _leq(psi, upper, AUDIT_RTOL, dual.value_scale(state.z, reg), m * A_s * config.f_star):
            raise AuditError("dual upper bound", s, f"psi={psi:.17g} > {upper:.17g}")


def _probe_steps(m, count):
    picks = []
    for k in (1, (m + 1) // 2, m):
        if k not in picks:
            picks.append(k)
    return set(picks[:count])


def run(obj, config=None, **overrides):
    """Run VRADA and return a :class:`SolverTrace` with one row per epoch.

    Row 0 is x_0, row 1 the initial proximal gradient point x_1, and row s
    the epoch-s average.  Pass accounting: n evaluations for each anchor
    gradient, 2 per stochastic inner step (n per step in deterministic mode).
    """
    if config is None:
        config = VradaConfig(**overrides)
    elif overrides:
        config = VradaConfig(**{**config.__dict__, **overrides})
    n = obj.n
    m = 2 * n if config.m is None else int(config.m)
    L = obj.constants.L if config.L is None else float(config.L)
    x0 = np.zeros(obj.dim) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    step_cost = float(n) if config.deterministic else 2.0
    trace = SolverTrace("vrada", config.seed, header=dict(
        m=m, L=repr(L), sigma=repr(obj.constants.sigma), deterministic=config.deterministic,
        audit=config.audit, sampling="uniform-with-replacement/philox",
        pass_cost=f"n per anchor gradient + {'n' if config.deterministic else '2'} per inner step",
    ))
    f_star = config.f_star
    target = config.gap_target
    target_status = "target_reached"
    if target is not None and f_star is not None and target < RESOLUTION * max(1.0, abs(f_star)):
        target, target_status = RESOLUTION * max(1.0, abs(f_star)), "precision_limit"

    start = time.perf_counter()

    def record(epoch, passes, x, A):
        try:
            f = obj.objective_value(x)
        except NumericOverflowError:
            f = math.inf
        gap = None if f_star is None else f - f_star
        trace.add(epoch=epoch, passes=passes, elapsed_ms=1e3 * (time.perf_counter() - start),
                  objective=f, gap=gap, A_s=A)
        return f, gap

    f0, _ = record(0, 0.0, x0, 0.0)
    limit = config.divergence_factor * max(abs(f0), 1.0)
    try:
        state = initialize(obj, x0, m, L=L, seed=config.seed, audit=config.audit)
    except NumericOverflowError:
        trace.status = "diverged"
        return trace
    passes = 1.0
    f, gap = record(1, passes, state.x_tilde, state.schedule.A[1])
    trace.status = "completed"
    probes = _probe_steps(m, config.probes) if config.audit else set()
    for s in range(2, config.epochs + 1):
        if target is not None and gap is not None and gap <= target:
            trace.status = target_status
            break
        try:
            begin_epoch(state, obj, config.deterministic)
        except ScheduleSaturated:
            trace.status = "saturated"
            break
        except NumericOverflowError:
            trace.status = "diverged"
            break
        x_prev = state.x_tilde
        if config.audit:
            for k in range(1, m + 1):
                inner_step(state, obj, k, config.deterministic)
                if k in probes:
                    check_variance_probe(variance_probe(obj, state.y.copy(), x_prev, state.mu, L), s)
        else:
            _steps(state, obj, 0, m, config.deterministic)
        end_epoch(state)
        passes += 1.0 + m * step_cost / n
        if not np.all(np.isfinite(state.x_tilde)):
            trace.status = "diverged"
            break
        if config.audit:
            _audit_epoch(state, obj, config, L)
        f, gap = record(s, passes, state.x_tilde, state.schedule.A[s])
        if not math.isfinite(f) or f - f0 > limit:
            trace.status = "diverged"
            break
    else:
        if target is not None and gap is not None and gap <= target:
            trace.status = target_status
    trace.x = state.x_tilde
    trace.state = state
    return trace
