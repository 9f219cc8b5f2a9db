import math

import mpmath
import numpy as np
import pytest

from vrada.core_model import make_objective
from vrada.data_io import from_arrays, normalize_rows, synth_a9a_like
from vrada.errors import InputShapeError, LabelError, NumericOverflowError
from vrada.losses import (FiniteSumLoss, LabeledSample, LossSpec, multinomial_value_grad,
                          smoothness_bound, squared_value_grad)

RTOL = 1e-10


def sample(pairs, label):
    return LabeledSample.from_pairs(pairs, label)


def test_zero_weights_binary_value():
    val, _ = multinomial_value_grad(np.zeros(3), sample([(0, 1.0), (2, -0.5)], 1), 2)
    assert val == pytest.approx(math.log(2), rel=1e-15)


def test_zero_weights_ten_classes_value():
    val, _ = multinomial_value_grad(np.zeros(9 * 4), sample([(1, 2.0)], 7), 10)
    assert val == pytest.approx(math.log(10), rel=1e-15)


def test_zero_weights_binary_gradient():
    x = [(0, 1.5), (2, -2.0)]
    _, grad = multinomial_value_grad(np.zeros(3), sample(x, 0), 2)
    np.testing.assert_allclose(grad, [-0.75, 0.0, 1.0], rtol=1e-15)


def test_reference_class_gradient_sign():
    # label c-1 has the zero indicator: gradient is +p x
    _, grad = multinomial_value_grad(np.zeros(2), sample([(0, 1.0)], 1), 2)
    np.testing.assert_allclose(grad, [0.5, 0.0])


def test_label_out_of_range():
    with pytest.raises(LabelError):
        multinomial_value_grad(np.zeros(2), sample([(0, 1.0)], 2), 2)
    with pytest.raises(LabelError):
        multinomial_value_grad(np.zeros(2), sample([(0, 1.0)], -1), 2)


def test_weight_length_checked():
    with pytest.raises(InputShapeError):
        multinomial_value_grad(np.zeros(5), sample([(0, 1.0)], 0), 3)


def test_squared_example():
    val, grad = squared_value_grad(np.array([3.0, 7.0, -1.0]), sample([(0, 1.0)], 0.0))
    assert val == 4.5
    np.testing.assert_array_equal(grad, [3.0, 0.0, 0.0])


def test_squared_zero_residual():
    w = np.array([1.0, 2.0])
    val, grad = squared_value_grad(w, sample([(0, 1.0), (1, 1.0)], 3.0))
    assert val == 0.0
    np.testing.assert_array_equal(grad, [0.0, 0.0])


def _dataset(rows, labels, d, normalized=False):
    indptr = np.concatenate([[0], np.cumsum([len(r) for r in rows])])
    idx = [j for r in rows for j, _ in r]
    val = [v for r in rows for _, v in r]
    return from_arrays(indptr, idx, val, labels, d, normalized=normalized)


def test_smoothness_examples():
    unit = _dataset([[(0, 1.0)], [(1, 0.6), (2, 0.8)]], [1.0, -1.0], 3, normalized=True)
    assert smoothness_bound(LossSpec("binary"), unit) == pytest.approx(0.25)
    assert smoothness_bound(LossSpec("squared"), unit) == pytest.approx(1.0)
    wide = _dataset([[(0, 2.0)], [(1, 1.0)]], [1.0, -1.0], 2)
    with pytest.warns(UserWarning, match="unnormalized"):
        assert smoothness_bound(LossSpec("binary"), wide) == pytest.approx(1.0)


def test_multiclass_curvature_exceeds_quarter():
    # two active classes with equal score and the reference class far below:
    # the softmax Hessian has eigenvalue 1/2 along (1, -1), beyond 1/4
    spec = LossSpec("multinomial", 3)
    ds = _dataset([[(0, 1.0)]], [0.0], 1, normalized=True)
    loss = FiniteSumLoss(ds, spec)
    w = np.array([30.0, 30.0])
    u = np.array([1.0, -1.0]) / math.sqrt(2)
    h = 1e-4
    g = lambda t: loss.value(w + t * u)
    curvature = (g(h) - 2 * g(0) + g(-h)) / h ** 2
    assert curvature == pytest.approx(0.5, rel=1e-5)
    assert curvature > 0.25
    assert curvature <= smoothness_bound(spec, ds) * (1 + 1e-6)


def _random_problem(kind, classes, rng, n=12, d=6):
    rows, labels = [], []
    for _ in range(n):
        nnz = rng.integers(1, d + 1)
        idx = np.sort(rng.choice(d, size=nnz, replace=False))
        rows.append(list(zip(idx.tolist(), rng.standard_normal(nnz).tolist())))
        labels.append(float(rng.integers(classes)) if kind != "squared" else rng.standard_normal())
    ds = _dataset(rows, labels, d)
    if kind != "squared":
        ds = normalize_rows(ds)
    spec = LossSpec(kind, classes if kind != "squared" else 1)
    return FiniteSumLoss(ds, spec)


LOSSES = [("squared", 1), ("binary", 2), ("multinomial", 3), ("multinomial", 5)]


@pytest.mark.parametrize("kind, classes", LOSSES)
def test_smoothness_inequalities(kind, classes):
    rng = np.random.default_rng(11)
    loss = _random_problem(kind, classes, rng)
    L = loss.smoothness()
    for _ in range(100):
        x = rng.standard_normal(loss.dim) * 2
        step = rng.standard_normal(loss.dim)
        y = x + step / np.linalg.norm(step) * rng.uniform(0, 1)
        gx, dx = loss.value_grad(x)
        gy, _ = loss.value_grad(y)
        rhs = gx + dx @ (y - x) + 0.5 * L * np.sum((y - x) ** 2)
        assert gy <= rhs + RTOL * max(abs(gy), abs(rhs), 1.0)
        for i in range(loss.n):
            fx, ax = loss.component_value_grad(i, x)
            fy, ay = loss.component_value_grad(i, y)
            lhs = np.sum((ay - ax) ** 2)
            breg = fy - fx - ax @ (y - x)
            assert lhs <= 2 * L * breg + RTOL * max(lhs, 2 * L * (abs(fy) + abs(fx)
                                                               + abs(ax @ (y - x))), 1e-300)


@pytest.mark.parametrize("kind, classes", LOSSES)
def test_finite_differences(kind, classes):
    rng = np.random.default_rng(5)
    loss = _random_problem(kind, classes, rng)
    for _ in range(10):
        x = rng.standard_normal(loss.dim)
        i = int(rng.integers(loss.n))
        _, grad = loss.component_value_grad(i, x)
        fd = np.empty_like(x)
        for j in range(x.size):
            h = 1e-6 * max(1.0, abs(x[j]))
            e = np.zeros_like(x)
            e[j] = h
            fd[j] = (loss.component_value_grad(i, x + e)[0]
                     - loss.component_value_grad(i, x - e)[0]) / (2 * h)
        err = np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-8)
        assert err <= 1e-5


@pytest.mark.parametrize("kind, classes", LOSSES)
def test_convex_along_segments(kind, classes):
    rng = np.random.default_rng(8)
    loss = _random_problem(kind, classes, rng)
    for _ in range(100):
        x, y = rng.standard_normal((2, loss.dim)) * 3
        mid = loss.value(0.5 * (x + y))
        assert mid <= 0.5 * (loss.value(x) + loss.value(y)) + 1e-12


def _mp_multinomial(scores, label, xvals):
    mpmath.mp.dps = 50
    s = [mpmath.mpf(float(v)) for v in scores] + [mpmath.mpf(0)]
    lse = mpmath.log(mpmath.fsum(mpmath.exp(v) for v in s))
    val = lse - (s[int(label)] if label < len(scores) else 0)
    probs = [mpmath.exp(v - lse) for v in s[:-1]]
    grad = []
    for c, p in enumerate(probs):
        coef = p - (1 if c == label else 0)
        grad.extend(float(coef * mpmath.mpf(float(x))) for x in xvals)
    return float(val), np.array(grad)


@pytest.mark.parametrize("c", [2, 3, 6])
def test_log_sum_exp_against_high_precision(c):
    rng = np.random.default_rng(c)
    xvals = np.array([1.0])
    for _ in range(60):
        scores = rng.uniform(-50, 50, size=c - 1)
        for label in range(c):
            val, grad = multinomial_value_grad(scores.copy(), sample([(0, 1.0)], label), c)
            ref_val, ref_grad = _mp_multinomial(scores, label, xvals)
            assert abs(val - ref_val) <= 1e-12 * max(abs(ref_val), 1e-300) + 1e-300 \
                or abs(val - ref_val) <= 1e-15
            np.testing.assert_allclose(grad, ref_grad, rtol=1e-12, atol=1e-300)


def test_extreme_scores_stay_finite():
    for s in (700.0, -700.0, 1e5, -1e5):
        val, grad = multinomial_value_grad(np.array([s, 0.0]), sample([(0, 1.0)], 2), 3)
        assert math.isfinite(val) and np.all(np.isfinite(grad))


def test_finite_sum_matches_per_sample_mean():
    rng = np.random.default_rng(2)
    loss = _random_problem("multinomial", 4, rng)
    w = rng.standard_normal(loss.dim)
    vals, grads = zip(*(multinomial_value_grad(w, loss.data.sample(i), 4) for i in range(loss.n)))
    val, grad = loss.value_grad(w)
    assert val == pytest.approx(np.mean(vals), rel=1e-14)
    np.testing.assert_allclose(grad, np.mean(grads, axis=0), rtol=1e-12, atol=1e-15)
    assert loss.value(w) == val


def test_overflowing_squared_loss_raises():
    ds = _dataset([[(0, 1.0)]], [0.0], 1)
    loss = FiniteSumLoss(ds, LossSpec("squared"))
    with pytest.raises(NumericOverflowError):
        loss.value_grad(np.array([1e200]))


def test_a9a_like_binary_bound():
    ds = normalize_rows(synth_a9a_like(200, seed=0))
    obj = make_objective(ds, "binary", lambda2=1e-4)
    assert obj.constants.L == pytest.approx(0.25, rel=1e-12)
    assert obj.constants.sigma == 1e-4
