"""Convex regularizers with closed-form proximal operators."""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError

KINDS = ("zero", "l2", "l1", "elastic")


@dataclass(frozen=True)
class Regularizer:
    """l(x) = (lambda2/2)||x||^2 + lambda1 ||x||_1.

    The strong-convexity modulus handed to the schedule equals ``lambda2``.
    Build instances with :func:`make_regularizer`, which maps all-zero
    weights to the ``zero`` kind.
    """

    kind: str = "zero"
    lambda2: float = 0.0
    lambda1: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown regularizer kind {self.kind!r}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("regularization weights must be nonnegative")
        expected = _kind_for(self.lambda2, self.lambda1)
        if self.kind != expected:
            raise ConfigError(
                f"kind {self.kind!r} inconsistent with lambda2={self.lambda2}, "
                f"lambda1={self.lambda1} (expected {expected!r})"
            )

    def value(self, x):
        return float(_kernels.reg_value(np.asarray(x, dtype=np.float64),
                                        self.lambda1, self.lambda2))

    def prox(self, v, t):
        """argmin_z { 0.5||z - v||^2 + t * l(z) }.

        Soft thresholding maps |v_j| == t*lambda1 to exactly 0.
        """
        if not t > 0:
            raise ValueError("prox step t must be positive")
        v = np.asarray(v, dtype=np.float64)
        out = np.empty_like(v)
        _kernels.prox_into(v, float(t), self.lambda1, self.lambda2, out)
        return out

    def strong_convexity(self):
        return self.lambda2

    def subgradient_residual(self, z, v, t):
        """Distance from (v - z)/t to the subdifferential of l at z (inf-norm).

        Zero exactly when z = prox(v, t).
        """
        z = np.asarray(z, dtype=np.float64)
        u = (np.asarray(v, dtype=np.float64) - z) / t - self.lambda2 * z
        # u must lie in lambda1 * subdiff ||.||_1 at z
        res = np.where(z != 0, np.abs(u - self.lambda1 * np.sign(z)),
                       np.maximum(np.abs(u) - self.lambda1, 0.0))
        return float(res.max(initial=0.0))


def _kind_for(lambda2, lambda1):
    if lambda2 == 0 and lambda1 == 0:
        return "zero"
    if lambda1 == 0:
        return "l2"
    if lambda2 == 0:
        return "l1"
    return "elastic"


def make_regularizer(lambda2=0.0, lambda1=0.0):
    lambda2, lambda1 = float(lambda2), float(lambda1)
    return Regularizer(_kind_for(lambda2, lambda1), lambda2, lambda1)
