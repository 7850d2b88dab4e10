import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gggp.metrics import MetricReport, UndefinedMetricError, mean_abs_error, r2, rmse


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert math.isclose(rmse([0, 0], [3, 4]), math.sqrt(12.5), rel_tol=1e-12)


def test_mean_predictor_rmse_is_std():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = rng.normal(5, 3, size=50)
        assert math.isclose(rmse(np.full(50, t.mean()), t), t.std(), rel_tol=1e-12)


def test_r2_examples():
    assert r2([1, 2, 3], [1, 2, 3]) == 1.0
    assert r2([2, 2, 2], [1, 2, 3]) == 0.0
    assert math.isclose(r2([1, 2, 4], [1, 2, 3]), 0.5, rel_tol=1e-12)


def test_r2_undefined():
    with pytest.raises(UndefinedMetricError):
        r2([1, 2], [3, 3])
    with pytest.raises(UndefinedMetricError):
        r2([1], [2])


def test_mae_examples():
    assert mean_abs_error([1, 2], [1, 2]) == 0.0
    assert mean_abs_error([0, 0], [3, 4]) == 3.5


@pytest.mark.parametrize("fn", [rmse, mean_abs_error, r2])
def test_shape_errors(fn):
    with pytest.raises(ValueError):
        fn([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        fn([], [])


def test_report():
    rep = MetricReport.compute([0, 0], [3, 4])
    assert rep.n == 2 and rep.avg_error == 3.5
    assert rep.r2 == 1 - 25 / 0.5
    assert math.isnan(MetricReport.compute([1, 1], [2, 2]).r2)
    assert rep.line().startswith("RMSE=3.5355")


finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def pairs(draw):
    n = draw(st.integers(2, 40))
    p = draw(arrays(np.float64, n, elements=finite))
    t = draw(arrays(np.float64, n, elements=finite))
    return p, t


@given(pairs())
@settings(max_examples=300, deadline=None)
def test_mae_le_rmse(pt):
    p, t = pt
    assert mean_abs_error(p, t) <= rmse(p, t) * (1 + 1e-12) + 1e-300


@given(pairs(), st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_rmse_permutation_invariant(pt, rnd):
    p, t = pt
    idx = list(range(len(p)))
    rnd.shuffle(idx)
    assert math.isclose(rmse(p[idx], t[idx]), rmse(p, t), rel_tol=1e-12, abs_tol=1e-12)


@given(pairs(), st.floats(0.01, 100), st.floats(-100, 100))
@settings(max_examples=200, deadline=None)
def test_r2_affine_invariant(pt, scale, shift):
    p, t = pt
    if np.ptp(t) < 1e-3:
        return
    a = r2(p, t)
    b = r2(p * scale + shift, t * scale + shift)
    assert math.isclose(a, b, rel_tol=1e-6, abs_tol=1e-6)


@given(pairs())
@settings(max_examples=200, deadline=None)
def test_zero_rmse_iff_perfect(pt):
    _, t = pt
    if np.ptp(t) < 1e-100:  # squared deviations would underflow to a constant target
        return
    assert rmse(t, t) == 0.0 and r2(t, t) == 1.0
