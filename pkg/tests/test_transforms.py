import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boostcast import transforms as tf
from boostcast.indicators import ema
from boostcast.series import Series, shift_prev

from conftest import random_bars


def s(vals, name="x", warmup=0):
    return Series(name, np.asarray(vals, dtype=float), warmup)


def test_basic_returns():
    assert tf.returns(s([100, 110])).values[1] == pytest.approx(0.1)
    assert tf.log_returns(s([100, 110])).values[1] == pytest.approx(0.0953102, abs=1e-7)
    assert tf.cbrt_returns(s([8, 27])).values[1] == pytest.approx(1.0)
    r = tf.returns(s([0, 1]))
    assert np.isnan(r.values[1])
    assert r.warmup == 2  # nothing defined


def test_log_returns_domain():
    with pytest.raises(tf.NonPositiveError):
        tf.log_returns(s([1.0, -2.0, 3.0]))
    # a nonpositive value outside the fit range is tolerated and becomes undefined
    out = tf.log_returns(s([1.0, 2.0, 3.0, -1.0, 2.0]), fit_range=(0, 3))
    assert np.isnan(out.values[3]) and np.isnan(out.values[4])


def test_ema_ratios():
    cp = s(np.full(20, 10.0))
    x = s(np.arange(20.0))
    r = tf.ema_ratio(x, cp, 3)
    np.testing.assert_allclose(r.values[2:], np.arange(2.0, 20.0) / 10)
    d = tf.ema_diff_ratio(x, cp, 3)
    np.testing.assert_allclose(d.values[2:], 0.1)


# --- outlier compression -----------------------------------------------------

def test_compress_spot_values():
    out = tf.compress(np.array([19.0, 13.0, 5.0, -10.0]), 0.0, 10.0)
    assert out[0] == pytest.approx(12.1623, abs=1e-4)
    assert out[1] == pytest.approx(11.0)
    assert out[2] == 5.0
    # mirrored below the lower fence
    assert out[3] == pytest.approx(-(np.sqrt(11.0) - 1.0))


def test_compress_properties():
    rng = np.random.default_rng(3)
    v = rng.standard_cauchy(100_000) * 5
    lo, hi = -2.0, 3.0
    for root in ("square", "cubic"):
        out = tf.compress(v, lo, hi, root)
        inside = (v >= lo) & (v <= hi)
        np.testing.assert_array_equal(out[inside], v[inside])
        order = np.argsort(v, kind="stable")
        assert np.all(np.diff(out[order]) >= 0)
        eps = 1e-13
        edge = tf.compress(np.array([hi - eps, hi + eps, lo - eps, lo + eps]), lo, hi, root)
        assert abs(edge[1] - hi) < 1e-12 and abs(edge[0] - hi) < 1e-12
        assert abs(edge[2] - lo) < 1e-12 and abs(edge[3] - lo) < 1e-12
        # outside values never leave the same side and never move away from the fence
        assert np.all(out[v > hi] <= v[v > hi]) and np.all(out[v > hi] >= hi)
        assert np.all(out[v < lo] >= v[v < lo]) and np.all(out[v < lo] <= lo)


def test_quartiles_linear():
    assert tf.quartiles(np.array([1.0, 2.0, 3.0, 4.0])) == (1.75, 3.25)


def test_normalize_outliers_fences_from_fit_range():
    x = np.concatenate([np.arange(1.0, 9.0), [100.0]])
    out = tf.normalize_outliers(s(x), tf.OutlierPolicy((1.0,)), fit_range=(0, 8))
    q1, q3 = 2.75, 6.25
    upper = q3 + (q3 - q1)
    assert out.values[8] == pytest.approx(np.sqrt(100 - upper + 1) - 1 + upper)
    np.testing.assert_array_equal(out.values[:8], x[:8])
    two = tf.normalize_outliers(s(x), tf.OutlierPolicy((3.0, 1.5)))
    assert two.values[8] < 100
    with pytest.raises(tf.TransformError):
        tf.OutlierPolicy((0.0,))
    with pytest.raises(tf.TransformError):
        tf.normalize_outliers(s([1.0, 2.0, np.nan]), tf.OutlierPolicy())


# --- standardization ---------------------------------------------------------

def test_standardize_fit_apply():
    x = s([np.nan, 1.0, 2.0, 3.0, 10.0], warmup=1)
    mu, sd = tf.standardize_fit(x, (1, 4))
    assert (mu, sd) == (2.0, 1.0)
    z = tf.standardize_apply(x, (mu, sd))
    assert z.values[4] == 8.0
    with pytest.raises(tf.TransformError):
        tf.standardize_fit(s([3.0, 3.0, 3.0]))


# --- target round trips --------------------------------------------------------

def _price_path(seed, n=300):
    f = shift_prev(random_bars(n, seed=seed))
    return f["close"], f["closeprev"]


@pytest.mark.parametrize("kind", tf.TARGET_METHODS)
def test_invert_round_trip(kind):
    for seed in range(5):
        close, cp = _price_path(seed)
        y, spec = tf.make_target(close, cp, kind, fit_range=(20, 200))
        e = ema(cp, 14).values
        rows = np.arange(max(y.warmup, 14), len(close))
        back = tf.invert_target(y.values[rows], cp.values[rows], e[rows], spec)
        np.testing.assert_allclose(back, close.values[rows], rtol=1e-9, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(tf.TARGET_METHODS))
def test_invert_round_trip_random_paths(seed, kind):
    rng = np.random.default_rng(seed)
    close = 50 * np.exp(np.cumsum(rng.normal(0, 0.03, 120)))
    cp = np.concatenate([[np.nan], close[:-1]])
    y, spec = tf.make_target(s(close, "close"), s(cp, "closeprev", 1), kind, fit_range=(15, 100))
    e = ema(s(cp, "closeprev", 1), 14).values
    rows = np.arange(15, 120)
    back = tf.invert_target(y.values[rows], cp[rows], e[rows], spec)
    np.testing.assert_allclose(back, close[rows], rtol=1e-9)


def test_target_spec_serialization():
    close, cp = _price_path(1)
    _, spec = tf.make_target(close, cp, "std_ema_ratio", fit_range=(20, 200))
    assert tf.TransformSpec.from_dict(spec.to_dict()) == spec
    assert spec.fitted_on == (20, 200)


def test_target_errors():
    close, cp = _price_path(1)
    with pytest.raises(tf.TransformError):
        tf.make_target(close, cp, "bogus")
    _, spec = tf.make_target(close, cp, "ema_ratio")
    with pytest.raises(tf.TransformError):
        tf.invert_target([0.1], [100.0], [np.nan], spec)


def test_more_examples():
    np.testing.assert_allclose(tf.returns(s([100, 110, 99])).values[1:], [0.1, -0.1])
    assert tf.cbrt_returns(s([-8, 8])).values[1] == pytest.approx(4.0)
    assert np.all(tf.log_returns(s(np.full(5, 3.0))).values[1:] == 0)
    x = s([1.0, 2.0, 3.0])
    np.testing.assert_allclose(tf.standardize_apply(x, tf.standardize_fit(x)).values, [-1, 0, 1])
    z = tf.standardize_apply(x, tf.standardize_fit(x))
    np.testing.assert_allclose(tf.standardize_apply(z, tf.standardize_fit(z)).values, z.values, atol=1e-12)
    spec = tf.TransformSpec("returns")
    assert tf.invert_target(0.10, 100.0, np.nan, spec) == pytest.approx(110)
    spec = tf.TransformSpec("ema_ratio")
    assert tf.invert_target(1.02, 100.0, 150.0, spec) == pytest.approx(153)
    step = tf.ema_diff_ratio(s([100.0, 105.0]), s([100.0, 100.0]), 2,
                             ema_values=s([100.0, 100.0]))
    assert step.values[1] == pytest.approx(0.05)
