"""Comparison solvers: proximal SVRG, Katyusha and MiG (sc and nsc variants).

All of them share the variance-reduced gradient kernel, the regularizer prox
and the pass accounting of VRADA (n per anchor gradient, 2 per inner step).
Only the Lipschitz parameter ``L_param`` is meant to be tuned; the remaining
constants use the standard defaults:

* SVRG: step 1/(step_factor * L_param), inner loop restarted at the anchor,
  anchor = uniformly random inner iterate (``anchor="random"``) or the last one.
* Katyusha-sc: tau2 = 1/2, tau1 = min(sqrt(m sigma / (3 L)), 1/2),
  alpha = 1/(3 tau1 L), option-I y update, anchor averaged with weights
  (1 + alpha sigma)^j.
* Katyusha-nsc: tau1 = 2/(s + 4) in epoch s = 0, 1, ..., uniform average.
* MiG-sc: theta = min(sqrt(m sigma / (3 L)), 1/2), eta = 1/(3 theta L),
  anchor = theta * weighted average + (1 - theta) * previous anchor.
* MiG-nsc: theta = 2/(s + 4), eta = 1/(4 theta L), uniform average.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericOverflowError
from .trace import SolverTrace

ALGORITHMS = ("svrg", "katyusha-sc", "katyusha-nsc", "mig-sc", "mig-nsc")


@dataclass
class BaselineConfig:
    algorithm: str = "svrg"
    L_param: float = None
    m: int = None
    seed: int = 0
    epochs: int = 20
    x0: np.ndarray = None
    f_star: float = None
    gap_target: float = None
    step_factor: float = 4.0
    anchor: str = "random"
    divergence_factor: float = 1e6

    def validate(self, sigma):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown baseline {self.algorithm!r}")
        if self.algorithm.endswith("-sc") and not sigma > 0:
            raise ConfigError(f"{self.algorithm} requires sigma > 0")
        if self.algorithm.endswith("-nsc") and sigma != 0:
            raise ConfigError(f"{self.algorithm} requires sigma = 0")
        if self.L_param is not None and not self.L_param > 0:
            raise ConfigError("L_param must be positive")
        if self.anchor not in ("random", "last"):
            raise ConfigError("SVRG anchor must be 'random' or 'last'")


def _outer_loop(obj, config, header, epoch_fn):
    n = obj.n
    m = 2 * n if config.m is None else int(config.m)
    x0 = np.zeros(obj.dim) if config.x0 is None else np.array(config.x0, dtype=np.float64)
    trace = SolverTrace(config.algorithm, config.seed, header=dict(m=m, **header))
    rng = np.random.Generator(np.random.Philox(config.seed))
    start = time.perf_counter()

    def record(epoch, passes, x):
        try:
            f = obj.objective_value(x)
        except NumericOverflowError:
            f = math.inf
        gap = None if config.f_star is None else f - config.f_star
        trace.add(epoch=epoch, passes=passes, elapsed_ms=1e3 * (time.perf_counter() - start),
                  objective=f, gap=gap)
        return f, gap

    f0, gap = record(0, 0.0, x0)
    limit = config.divergence_factor * max(abs(f0), 1.0)
    state = {"anchor": x0.copy()}
    passes = 0.0
    trace.status = "completed"
    for s in range(config.epochs):
        if config.gap_target is not None and gap is not None and gap <= config.gap_target:
            trace.status = "target_reached"
            break
        try:
            _, mu = obj.full_value_grad(state["anchor"])
        except NumericOverflowError:
            trace.status = "diverged"
            break
        epoch_fn(s, m, rng, mu, state)
        passes += 1.0 + 2.0 * m / n
        if not np.all(np.isfinite(state["anchor"])):
            trace.status = "diverged"
            break
        f, gap = record(s + 1, passes, state["anchor"])
        if not math.isfinite(f) or f - f0 > limit:
            trace.status = "diverged"
            break
    else:
        if config.gap_target is not None and gap is not None and gap <= config.gap_target:
            trace.status = "target_reached"
    trace.x = state["anchor"]
    return trace


def _prep(obj, config, algorithm):
    config.algorithm = algorithm
    config.validate(obj.constants.sigma)
    L = obj.constants.L if config.L_param is None else float(config.L_param)
    sm, reg = obj.smooth, obj.regularizer
    return L, sm, reg


def run_svrg(obj, config=None, **overrides):
    config = config or BaselineConfig(**overrides)
    L, sm, reg = _prep(obj, config, "svrg")
    eta = 1.0 / (config.step_factor * L)
    header = dict(L_param=repr(L), step=repr(eta), anchor_rule=config.anchor,
                  inner_start="anchor", pass_cost="n per anchor gradient + 2 per inner step")

    def epoch(s, m, rng, mu, st):
        idx = rng.integers(0, sm.n, size=m)
        snap = int(rng.integers(0, m)) if config.anchor == "random" else -1
        x = st["anchor"].copy()
        x_snap = np.empty_like(x)
        _kernels.svrg_epoch(sm.X, sm.code, sm.features, sm.blocks, idx, snap, eta,
                            reg.lambda1, reg.lambda2, st["anchor"], mu, x, x_snap)
        st["anchor"] = x_snap if snap >= 0 else x

    return _outer_loop(obj, config, header, epoch)


def katyusha_parameters(m, L, sigma, variant, s=0):
    """(tau1, tau2, alpha, log of the anchor averaging ratio) for epoch s."""
    tau2 = 0.5
    if variant == "sc":
        tau1 = min(math.sqrt(m * sigma / (3.0 * L)), 0.5)
        alpha = 1.0 / (3.0 * tau1 * L)
        return tau1, tau2, alpha, math.log1p(alpha * sigma)
    tau1 = 2.0 / (s + 4.0)
    return tau1, tau2, 1.0 / (3.0 * tau1 * L), 0.0


def run_katyusha(obj, config=None, variant="sc", **overrides):
    config = config or BaselineConfig(**overrides)
    if variant not in ("sc", "nsc"):
        raise ConfigError(f"unknown Katyusha variant {variant!r}")
    L, sm, reg = _prep(obj, config, f"katyusha-{variant}")
    sigma = obj.constants.sigma
    header = dict(L_param=repr(L), tau2="1/2", y_update="option-I (prox step 1/(3L))",
                  tau1="min(sqrt(m sigma/(3L)),1/2)" if variant == "sc" else "2/(s+4)",
                  averaging="weights (1+alpha sigma)^j" if variant == "sc" else "uniform",
                  pass_cost="n per anchor gradient + 2 per inner step")

    def epoch(s, m, rng, mu, st):
        if "y" not in st:
            st["y"], st["z"] = st["anchor"].copy(), st["anchor"].copy()
        tau1, tau2, alpha, omega_log = katyusha_parameters(m, L, sigma, variant, s)
        idx = rng.integers(0, sm.n, size=m)
        avg = np.empty_like(st["z"])
        _kernels.katyusha_epoch(sm.X, sm.code, sm.features, sm.blocks, idx, tau1, tau2, alpha, L,
                                omega_log, reg.lambda1, reg.lambda2, st["anchor"], mu,
                                st["y"], st["z"], avg)
        st["anchor"] = avg

    return _outer_loop(obj, config, header, epoch)


def mig_parameters(m, L, sigma, variant, s=0):
    """(theta, eta, log of the averaging ratio) for epoch s."""
    if variant == "sc":
        theta = min(math.sqrt(m * sigma / (3.0 * L)), 0.5)
        eta = 1.0 / (3.0 * theta * L)
        return theta, eta, math.log1p(eta * sigma)
    theta = 2.0 / (s + 4.0)
    return theta, 1.0 / (4.0 * theta * L), 0.0


def run_mig(obj, config=None, variant="sc", **overrides):
    config = config or BaselineConfig(**overrides)
    if variant not in ("sc", "nsc"):
        raise ConfigError(f"unknown MiG variant {variant!r}")
    L, sm, reg = _prep(obj, config, f"mig-{variant}")
    sigma = obj.constants.sigma
    header = dict(L_param=repr(L),
                  theta="min(sqrt(m sigma/(3L)),1/2)" if variant == "sc" else "2/(s+4)",
                  eta="1/(3 theta L)" if variant == "sc" else "1/(4 theta L)",
                  averaging="weights (1+eta sigma)^j" if variant == "sc" else "uniform",
                  pass_cost="n per anchor gradient + 2 per inner step")

    def epoch(s, m, rng, mu, st):
        if "x" not in st:
            st["x"] = st["anchor"].copy()
        theta, eta, omega_log = mig_parameters(m, L, sigma, variant, s)
        idx = rng.integers(0, sm.n, size=m)
        avg = np.empty_like(st["x"])
        _kernels.mig_epoch(sm.X, sm.code, sm.features, sm.blocks, idx, theta, eta, omega_log,
                           reg.lambda1, reg.lambda2, st["anchor"], mu, st["x"], avg)
        st["anchor"] = theta * avg + (1.0 - theta) * st["anchor"]

    return _outer_loop(obj, config, header, epoch)


def run_baseline(obj, config):
    """Dispatch on ``config.algorithm``."""
    algo = config.algorithm
    if algo == "svrg":
        return run_svrg(obj, config)
    if algo in ("katyusha-sc", "katyusha-nsc"):
        return run_katyusha(obj, config, variant=algo.split("-")[1])
    if algo in ("mig-sc", "mig-nsc"):
        return run_mig(obj, config, variant=algo.split("-")[1])
    raise ConfigError(f"unknown baseline {algo!r}")
