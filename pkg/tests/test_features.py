import math
import warnings

import numpy as np
import pytest

from boostcast import features as fx
from boostcast import indicators as ind
from boostcast.series import Frame, Series, shift_prev

from conftest import random_bars


def s(vals, name="x", warmup=0):
    return Series(name, np.asarray(vals, dtype=float), warmup)


def _frame(**cols):
    n = len(next(iter(cols.values())))
    idx = np.datetime64("2021-01-04") + np.arange(n)
    return Frame(idx, {k: s(v, k) for k, v in cols.items()})


def test_make_lags():
    f = _frame(open=np.arange(10.0), closeprev=[np.nan, 10, 11, 12, 13, 14, 15, 16, 17, 18],
               typical=np.ones(10))
    out = fx.make_lags(f, (1, 5))
    np.testing.assert_array_equal(out["closeprev_lag1"].values[:4], [np.nan, np.nan, 10, 11])
    assert out["open_lag5"].values[9] == f["open"].values[4]
    assert out["open_lag5"].warmup == 5
    with pytest.warns(UserWarning):
        long = fx.make_lags(_frame(open=np.ones(20), closeprev=np.ones(20), typical=np.ones(20)), (30,))
    assert np.isnan(long["open_lag30"].values).all()
    with pytest.raises(fx.DataError):
        fx.make_lags(_frame(open=np.ones(3)))


def test_cyclical():
    idx = np.array(["2024-01-08", "2024-06-12", "2024-03-08"], dtype="datetime64[D]")  # Mon, Wed, Fri
    f = fx.cyclical_features(idx)
    assert f["sin_dow"].values[0] == 0
    assert abs(f["sin_month"].values[1]) < 1e-12
    assert f["sin_dom"].values[2] == pytest.approx(math.sin(16 * math.pi / 31))
    assert f["sin_dom"].values[2] == pytest.approx(0.9987, abs=1e-4)
    assert f["sin_dow"].values[1] == pytest.approx(math.sin(2 * math.pi * 2 / 5))


def test_cross():
    f = _frame(open=[102.0, 150.0, 100.0], closeprev=[100.0, 100.0, 100.0])
    atr = s([1.0, 3.0, 2.0], "atr14")
    out = fx.cross_features(f, atr)
    assert out["difference_open-closeprev"].values[0] == 2
    assert out["difference_open-closeprev"].values[2] == 0
    assert out["ratio_atr14-open"].values[1] == pytest.approx(0.02)
    assert out["difference_open-closeprev_lag1"].values[1] == 50


def _zslope_ref(x, t, n):
    w = np.asarray(x[t - n:t + 1], dtype=float)
    z = (w - w.mean()) / w.std(ddof=1)
    return (z[-1] - z[0]) / n


def test_slope_diff_fixed_examples():
    v = fx.slope_diff_fixed(s([0.0, 1.0, 2.0]), s([2.0, 1.0, 0.0]), 2)
    assert v.values[2] == pytest.approx(2.0)
    assert v.warmup == 2
    rng = np.random.default_rng(1)
    a = np.cumsum(rng.normal(size=60))
    assert np.all(fx.slope_diff_fixed(s(a), s(a), 5).values[5:] == 0)
    b = np.cumsum(rng.normal(size=60)) + 50
    got = fx.slope_diff_fixed(s(a), s(b), 7).values
    for t in range(7, 60):
        assert got[t] == pytest.approx(_zslope_ref(a, t, 7) - _zslope_ref(b, t, 7), rel=1e-9, abs=1e-12)
    flat = fx.slope_diff_fixed(s(np.ones(10)), s(np.arange(10.0)), 3)
    assert np.all(flat.values[3:] == 0)
    with pytest.raises(ValueError):
        fx.slope_diff_fixed(s([1, 2, 3]), s([1, 2, 3]), 1)


def test_dynamic_periods_and_values():
    piv = ind.ZigZagPivots(0.05, [(3, 1.0, ind.PEAK, 6)])
    p = fx.dynamic_periods(piv, 12)
    assert list(p[:6]) == [-1] * 6
    assert p[7] == 4  # last pivot at t-4
    piv2 = ind.ZigZagPivots(0.05, [(5, 1.0, ind.PEAK, 6)])
    assert fx.dynamic_periods(piv2, 8)[6] == 2  # pivot at t-1 clipped up
    assert fx.dynamic_periods(ind.ZigZagPivots(0.05, [(0, 1.0, ind.PEAK, 1)]), 200)[150] == 90

    rng = np.random.default_rng(2)
    a = 100 + np.cumsum(rng.normal(size=150))
    b = np.cumsum(rng.normal(size=150))
    zz = ind.zigzag(s(a), 0.03)
    same = fx.slope_diff_dynamic(s(a), s(a), zz)
    defined = same.values[same.warmup:]
    assert np.all(defined[np.isfinite(defined)] == 0)
    got = fx.slope_diff_dynamic(s(b), s(a), zz)
    periods = fx.dynamic_periods(zz, 150)
    for t in range(got.warmup, 150):
        n = periods[t]
        assert got.values[t] == pytest.approx(_zslope_ref(b, t, n) - _zslope_ref(a, t, n), rel=1e-9)


@pytest.fixture(scope="module")
def datasets(synthetic_prev_600):
    cfg = fx.FeatureConfig(allow_nonstationary=True)
    return {d: fx.assemble_dataset(synthetic_prev_600, d, cfg) for d in fx.DATASETS}


def test_dataset_relations(datasets):
    ds1, ds2, ds3, ds4 = (datasets[d] for d in fx.DATASETS)
    n1 = set(ds1.feature_names)
    assert len(ds1.feature_names) == len(ds2.feature_names) == 173
    assert set(ds2.feature_names) == n1
    assert set(ds3.feature_names) < n1 and set(ds4.feature_names) == set(ds3.feature_names)
    assert not any(c.endswith("_ema") or c.endswith("_emadiff") for c in ds3.feature_names)
    assert not any(ds3.info[c].novel for c in ds3.feature_names)
    assert "difference_open-closeprev_ema" in n1
    assert "ema14_ema" not in n1
    assert ds1.start == ds3.start
    for name, info in ds1.info.items():
        if info.transform in ("ema_ratio", "ema_diff_ratio"):
            assert info.spec.price_like, name
        if info.spec.outlier_handled:
            assert info.transform == "returns", name
        if info.spec.generator == "cyclical":
            assert info.transform is None


def test_ds2_is_standardized_on_fit_region(datasets):
    ds1, ds2 = datasets["DS1"], datasets["DS2"]
    lo, hi = ds2.start, ds2.fit_end
    for name in ds2.feature_names[:25]:
        v = ds2.frame[name].values[lo:hi]
        v = v[np.isfinite(v)]
        assert abs(v.mean()) < 1e-9 and v.std(ddof=1) == pytest.approx(1.0, rel=1e-9)
        mu, sd = ds2.standardization[name]
        np.testing.assert_allclose(ds2.frame[name].values, (ds1.frame[name].values - mu) / sd, equal_nan=True)


def test_usable_rows_undefined_only_at_zero_predecessors(synthetic_prev_600, datasets):
    ds = datasets["DS1"]
    base = fx.base_features(synthetic_prev_600, fx.FeatureConfig(), ds.fit_end)
    X = ds.frame.matrix(ds.feature_names)[ds.start:]
    for j in np.where(~np.isfinite(X).all(axis=0))[0]:
        name = ds.feature_names[j]
        info = ds.info[name]
        assert info.transform == "returns", name
        src = base.frame[info.spec.base_name].values
        rows = np.where(~np.isfinite(X[:, j]))[0] + ds.start
        assert np.all(src[rows - 1] == 0), name


def test_deterministic(synthetic_prev_600, datasets):
    again = fx.assemble_dataset(synthetic_prev_600, "DS1", fx.FeatureConfig(allow_nonstationary=True))
    a, b = datasets["DS1"], again
    np.testing.assert_array_equal(a.frame.matrix(a.feature_names), b.frame.matrix(b.feature_names))


def test_gate_blocks_by_default(synthetic_prev_600):
    with pytest.raises(fx.NonStationaryError) as err:
        fx.assemble_dataset(synthetic_prev_600, "DS3")
    assert err.value.report.failures


def test_target_compatibility(synthetic_prev_600):
    with pytest.raises(fx.DataError):
        fx.assemble_dataset(synthetic_prev_600, "DS1", fx.FeatureConfig(gate=False), target_kind="std_returns")
    ds = fx.assemble_dataset(synthetic_prev_600, "DS1", fx.FeatureConfig(gate=False), target_kind="returns")
    assert ds.frame.target_name == "close_returns"
    assert ds.target_spec.kind == "returns"


def test_too_short():
    with pytest.raises(fx.DataError):
        fx.assemble_dataset(shift_prev(random_bars(50, seed=1)), "DS1", fx.FeatureConfig(gate=False))


def test_generator_prefix_truncation(synthetic_prev_600):
    """Each generator's columns on a length-k prefix equal the first k rows of the full run.

    Fitted statistics (outlier fences, log domain) use a fixed window [0, 80)
    so that every prefix sees the same fitted values.
    """
    prev = synthetic_prev_600
    cfg = fx.FeatureConfig()
    fit_end = 80
    full_base = fx.base_features(prev, cfg, fit_end)
    full_cols, info = fx.transformed_columns(full_base, cfg, fit_end)
    gens = {spec.generator for spec in full_base.specs.values()}
    assert gens == set(fx.GENERATORS)
    for k in np.linspace(fit_end, len(prev) - 1, 20).astype(int):
        part = Frame(prev.index[:k], {n: Series(n, c.values[:k], min(c.warmup, k))
                                      for n, c in prev.columns.items()})
        base = fx.base_features(part, cfg, fit_end)
        cols, _ = fx.transformed_columns(base, cfg, fit_end)
        assert cols.keys() == full_cols.keys()
        for name, col in base.frame.columns.items():
            np.testing.assert_array_equal(col.values, full_base.frame[name].values[:k], err_msg=f"{name} k={k}")
        for name, col in cols.items():
            np.testing.assert_array_equal(col.values, full_cols[name].values[:k], err_msg=f"{name} k={k}")
