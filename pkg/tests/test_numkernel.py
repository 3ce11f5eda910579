import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lexan.numkernel import logsumexp, matvec, sigmoid, tanh

finite = st.floats(-50, 50, allow_nan=False)


def test_matvec_examples():
    assert matvec(np.eye(3), np.array([1.0, 2, 3])).tolist() == [1, 2, 3]
    assert matvec(np.zeros((2, 4)), np.ones(4)).tolist() == [0, 0]
    assert matvec(np.array([[1.0, 2], [3, 4]]), np.ones(2)).tolist() == [3, 7]
    with pytest.raises(ValueError):
        matvec(np.ones((2, 3)), np.ones(2))


@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, 4, elements=finite),
       arrays(np.float64, 4, elements=finite))
def test_matvec_distributes(m, a, b):
    np.testing.assert_allclose(matvec(m, a + b), matvec(m, a) + matvec(m, b), atol=1e-12, rtol=1e-12)


def test_activations_at_zero():
    assert sigmoid(np.array([0.0])).tolist() == [0.5]
    assert tanh(np.array([0.0])).tolist() == [0.0]


def test_sigmoid_symmetry(rng):
    x = rng.normal(scale=10, size=1000)
    np.testing.assert_allclose(sigmoid(-x), 1 - sigmoid(x), atol=1e-15)


def test_activation_bounds_and_saturation():
    x = np.array([-1e4, -30.0, 0.3, 30.0, 1e4])
    with np.errstate(all="raise"):
        s, t = sigmoid(x), tanh(x)
    assert np.all((s >= 0) & (s <= 1)) and np.all((t >= -1) & (t <= 1))
    mid = sigmoid(np.array([-5.0, 5.0]))
    assert 0 < mid[0] < mid[1] < 1


def test_logsumexp_examples():
    assert logsumexp([3.5]) == 3.5
    assert logsumexp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-12)
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-9)
    assert logsumexp([-np.inf, 0.0]) == 0.0
    assert logsumexp([-np.inf, -np.inf]) == -np.inf
    with pytest.raises(ValueError):
        logsumexp([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
def test_logsumexp_bounds(v):
    r = logsumexp(v)
    assert max(v) - 1e-9 <= r <= max(v) + math.log(len(v)) + 1e-9


def test_logsumexp_axis():
    m = np.array([[0.0, 0.0], [1.0, -np.inf]])
    np.testing.assert_allclose(logsumexp(m, axis=1), [math.log(2), 1.0])
    np.testing.assert_allclose(logsumexp(m, axis=0), [math.log(1 + math.e), 0.0])
