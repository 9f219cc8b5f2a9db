import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vrada.errors import ConfigError
from vrada.regularizers import Regularizer, make_regularizer


def test_values():
    assert make_regularizer(1.0).value([2.0, 0.0]) == 2.0
    assert make_regularizer().value([5.0, -3.0]) == 0.0
    assert make_regularizer(0.0, 1.0).value([2.0, -0.5]) == 2.5
    assert make_regularizer(2.0, 1.0).value([2.0, -0.5]) == 2.5 + 0.5 * 2.0 * 4.25


def test_prox_examples():
    np.testing.assert_array_equal(make_regularizer(1.0).prox([3.0, 0.0], 2.0), [1.0, 0.0])
    v = np.array([1.5, -2.0, 0.0])
    np.testing.assert_array_equal(make_regularizer().prox(v, 7.0), v)
    np.testing.assert_array_equal(make_regularizer(0.0, 1.0).prox([2.0, -0.5, 0.0], 1.0),
                                  [1.0, 0.0, 0.0])


def test_soft_threshold_tie_is_zero():
    out = make_regularizer(0.0, 0.5).prox([1.0, -1.0], 2.0)
    assert out.tolist() == [0.0, 0.0]


def test_strong_convexity():
    assert make_regularizer(1e-4).strong_convexity() == 1e-4
    assert make_regularizer().strong_convexity() == 0.0
    assert make_regularizer(0.5, 1.0).strong_convexity() == 0.5


def test_kinds():
    assert make_regularizer().kind == "zero"
    assert make_regularizer(1.0).kind == "l2"
    assert make_regularizer(0.0, 1.0).kind == "l1"
    assert make_regularizer(1.0, 1.0).kind == "elastic"
    with pytest.raises(ConfigError):
        Regularizer("l2", 0.0, 0.0)
    with pytest.raises(ConfigError):
        make_regularizer(-1.0)


def test_prox_requires_positive_step():
    with pytest.raises(ValueError):
        make_regularizer(1.0).prox([1.0], 0.0)


weights = st.tuples(st.sampled_from([0.0, 0.1, 1.0, 3.0]), st.sampled_from([0.0, 0.2, 1.0]))
vectors = arrays(np.float64, 5, elements=st.floats(-100, 100))
steps = st.floats(1e-3, 10.0)


@settings(max_examples=200, deadline=None)
@given(weights, vectors, vectors, steps)
def test_prox_nonexpansive(w, v1, v2, t):
    reg = make_regularizer(*w)
    d = np.linalg.norm(reg.prox(v1, t) - reg.prox(v2, t))
    assert d <= np.linalg.norm(v1 - v2) * (1 + 1e-15) + 1e-300


@settings(max_examples=100, deadline=None)
@given(weights, vectors, steps, st.integers(0, 2 ** 32 - 1))
def test_prox_optimality_under_perturbation(w, v, t, seed):
    reg = make_regularizer(*w)
    z = reg.prox(v, t)
    obj = lambda u: 0.5 * np.sum((u - v) ** 2) + t * reg.value(u)
    base = obj(z)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        delta = rng.standard_normal(v.size)
        delta *= 1e-4 / np.linalg.norm(delta)
        assert base <= obj(z + delta) + 1e-12 * max(1.0, abs(base))
    assert reg.subgradient_residual(z, v, t) <= 1e-12 * max(1.0, np.abs(v).max() / t)


@pytest.mark.parametrize("lambda2, lambda1, v, t", [
    (1.0, 0.0, 1.7, 0.5), (0.0, 1.0, 0.3, 0.5), (0.0, 1.0, -2.4, 1.3),
    (0.7, 0.4, 3.1, 2.0), (0.7, 0.4, -0.2, 2.0), (2.0, 0.0, -4.0, 0.25),
])
def test_prox_matches_grid_search(lambda2, lambda1, v, t):
    reg = make_regularizer(lambda2, lambda1)
    f = lambda u: 0.5 * (u - v) ** 2 + t * (0.5 * lambda2 * u * u + lambda1 * np.abs(u))
    coarse = np.arange(-6.0, 6.0, 1e-3)
    c = coarse[np.argmin(f(coarse))]
    fine = np.arange(c - 2e-3, c + 2e-3, 1e-6)
    best = fine[np.argmin(f(fine))]
    assert abs(reg.prox([v], t)[0] - best) <= 1e-5
