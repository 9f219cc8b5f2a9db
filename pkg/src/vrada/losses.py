"""Smooth finite-sum losses over sparse linear models.

Every component has the form g_i(w) = h(W^T x_i; y_i), where W holds ``k``
blocks of ``d`` weights in class-major order (block ``c`` is the slice
``w[c*d:(c+1)*d]``):

* ``squared``: k = 1, h(s; b) = (s - b)^2 / 2 with a real target b;
* ``multinomial``: k = c - 1, h(s; y) = -s_y + log(1 + sum_c exp(s_c)), where
  class c-1 is the reference class with the all-zero indicator vector;
* ``binary``: the c = 2 case of ``multinomial`` (labels {0, 1}).
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, InputShapeError, LabelError, NumericOverflowError

LOSS_KINDS = ("binary", "multinomial", "squared")


@dataclass(frozen=True)
class LossSpec:
    kind: str
    classes: int = 2

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.kind == "binary" and self.classes != 2:
            raise ConfigError("binary loss requires classes == 2")
        if self.kind == "multinomial" and self.classes < 2:
            raise ConfigError("multinomial loss requires classes >= 2")
        if self.kind == "squared" and self.classes != 1:
            object.__setattr__(self, "classes", 1)

    @property
    def blocks(self):
        """Number of weight blocks (c - 1 for logistic kinds, 1 for squared)."""
        return 1 if self.kind == "squared" else self.classes - 1

    @property
    def code(self):
        return _kernels.SQUARED if self.kind == "squared" else _kernels.MULTINOMIAL


@dataclass(frozen=True)
class LabeledSample:
    """One sparse sample. ``label`` is a class index, or the target for squared loss."""

    indices: np.ndarray
    values: np.ndarray
    label: float

    @classmethod
    def from_pairs(cls, pairs, label):
        idx = np.array([p[0] for p in pairs], dtype=np.int64)
        val = np.array([p[1] for p in pairs], dtype=np.float64)
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise InputShapeError("feature indices must be strictly increasing")
        return cls(idx, val, float(label))

    def norm(self):
        return float(np.sqrt(np.dot(self.values, self.values)))


def _single_row(sample):
    return (np.array([0, sample.indices.size], dtype=np.int64),
            np.ascontiguousarray(sample.indices, dtype=np.int64),
            np.ascontiguousarray(sample.values, dtype=np.float64),
            np.array([sample.label], dtype=np.float64))


def _sample_value_grad(w, sample, code, d, k):
    if sample.indices.size and sample.indices[-1] >= d:
        raise InputShapeError(f"feature index {sample.indices[-1]} >= dimension {d}")
    grad = np.empty(d * k)
    val = _kernels.component_value_grad(_single_row(sample), code, d, k, 0,
                                        np.asarray(w, dtype=np.float64), grad)
    return val, grad


def multinomial_value_grad(w, sample, c):
    """Per-sample multinomial logistic term and its gradient.

    ``w`` has length d*(c-1) in class-major layout, so d is inferred from it.
    """
    w = np.asarray(w, dtype=np.float64)
    if c < 2 or w.size % (c - 1):
        raise InputShapeError(f"weight length {w.size} is not a multiple of c-1={c - 1}")
    if not 0 <= sample.label < c or sample.label != int(sample.label):
        raise LabelError(f"label {sample.label} outside 0..{c - 1}")
    return _sample_value_grad(w, sample, _kernels.MULTINOMIAL, w.size // (c - 1), c - 1)


def squared_value_grad(w, sample):
    """(1/2)(<x, w> - b)^2 and its gradient (<x, w> - b) x."""
    w = np.asarray(w, dtype=np.float64)
    return _sample_value_grad(w, sample, _kernels.SQUARED, w.size, 1)


def smoothness_bound(loss, data):
    """A valid smoothness modulus L for every component of ``loss`` on ``data``.

    Binary logistic has curvature at most 1/4 along x_i; for c > 2 the softmax
    Hessian diag(p) - pp^T is only bounded by 1/2.  Squared loss has curvature
    exactly ||x_i||^2.
    """
    max_sq = float(data.row_norms_sq().max(initial=0.0))
    if loss.kind == "squared":
        return max_sq
    norms = np.sqrt(data.row_norms_sq())
    if not data.normalized and np.any(np.abs(norms[norms > 0] - 1.0) > 1e-12):
        warnings.warn("logistic smoothness bound computed on unnormalized rows; "
                      "scaling by the largest squared row norm", stacklevel=2)
    curvature = 0.25 if loss.classes == 2 else 0.5
    return curvature * max_sq


class FiniteSumLoss:
    """g(w) = (1/n) sum_i g_i(w) over the rows of a :class:`SparseDataset`."""

    def __init__(self, data, spec):
        if spec.kind != "squared" and data.classes is None:
            raise ConfigError("classification loss needs class labels")
        if spec.kind != "squared" and data.classes.size and data.classes.max() >= spec.classes:
            raise LabelError(f"dataset has class index >= {spec.classes}")
        labels = data.targets if spec.kind == "squared" else data.classes.astype(np.float64)
        self.spec = spec
        self.data = data
        self.n = data.n
        self.features = data.d
        self.blocks = spec.blocks
        self.dim = data.d * spec.blocks
        self.code = spec.code
        self.X = (data.indptr, data.indices, data.values,
                  np.ascontiguousarray(labels, dtype=np.float64))

    def _check(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise InputShapeError(f"expected parameter of length {self.dim}, got {w.shape}")
        return w

    def component_value_grad(self, i, w):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} outside 0..{self.n - 1}")
        w = self._check(w)
        grad = np.empty(self.dim)
        val = _kernels.component_value_grad(self.X, self.code, self.features,
                                            self.blocks, int(i), w, grad)
        return _finite(val, grad)

    def value_grad(self, w):
        w = self._check(w)
        grad = np.empty(self.dim)
        val = _kernels.full_value_grad(self.X, self.code, self.features, self.blocks, w, grad)
        return _finite(val, grad)

    def value(self, w):
        w = self._check(w)
        val = _kernels.full_value(self.X, self.code, self.features, self.blocks, w)
        if not np.isfinite(val):
            raise NumericOverflowError("non-finite loss value")
        return val

    def vr_gradient(self, i, y, x_prev, mu):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} outside 0..{self.n - 1}")
        y, x_prev, mu = self._check(y), self._check(x_prev), self._check(mu)
        out = np.empty(self.dim)
        _kernels.vr_gradient_into(self.X, self.code, self.features, self.blocks,
                                  int(i), y, x_prev, mu, out)
        return out

    def smoothness(self):
        return smoothness_bound(self.spec, self.data)


def _finite(val, grad):
    if not (np.isfinite(val) and np.all(np.isfinite(grad))):
        raise NumericOverflowError("non-finite loss value or gradient")
    return val, grad
