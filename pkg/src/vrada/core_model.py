"""Composite finite-sum objectives f(x) = (1/n) sum_i g_i(x) + l(x)."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputShapeError, NumericOverflowError
from .losses import FiniteSumLoss, LossSpec
from .regularizers import Regularizer, make_regularizer


@dataclass(frozen=True)
class ProblemConstants:
    """n components in dimension d; each g_i is L-smooth, l is sigma-strongly convex."""

    n: int
    d: int
    L: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if not self.L > 0 or not math.isfinite(self.L):
            raise ConfigError(f"smoothness L must be positive and finite, got {self.L}")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    @property
    def kappa(self):
        return self.L / self.sigma if self.sigma > 0 else math.inf


class CompositeObjective:
    """Finite-sum smooth part plus a prox-friendly regularizer.

    Immutable after construction; safe to share read-only between threads.
    ``constants.d`` is the parameter dimension (features times weight blocks).
    """

    def __init__(self, smooth: FiniteSumLoss, regularizer: Regularizer, L=None):
        self.smooth = smooth
        self.regularizer = regularizer
        self.constants = ProblemConstants(
            n=smooth.n, d=smooth.dim,
            L=float(smooth.smoothness() if L is None else L),
            sigma=regularizer.strong_convexity(),
        )

    @property
    def n(self):
        return self.constants.n

    @property
    def dim(self):
        return self.constants.d

    def check_point(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InputShapeError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericOverflowError("non-finite query point")
        return x

    def full_value_grad(self, x):
        """g(x) and grad g(x), the mean over components in row order."""
        return self.smooth.value_grad(self.check_point(x))

    def component_value_grad(self, i, x):
        return self.smooth.component_value_grad(i, self.check_point(x))

    def smooth_value(self, x):
        return self.smooth.value(self.check_point(x))

    def objective_value(self, x):
        x = self.check_point(x)
        return self.smooth.value(x) + self.regularizer.value(x)

    def with_L(self, L):
        """Same objective with a different smoothness parameter (e.g. a tuned one)."""
        return CompositeObjective(self.smooth, self.regularizer, L=L)


def make_objective(data, loss, lambda2=0.0, lambda1=0.0, classes=None, L=None):
    """Build an objective from a :class:`SparseDataset` and a loss kind name."""
    if isinstance(loss, str):
        if loss == "squared":
            spec = LossSpec("squared", 1)
        elif loss == "binary":
            spec = LossSpec("binary", 2)
        else:
            spec = LossSpec(loss, classes if classes is not None else max(data.c, 2))
    else:
        spec = loss
    return CompositeObjective(FiniteSumLoss(data, spec), make_regularizer(lambda2, lambda1), L=L)
