import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boostcast.series import (Bar, DataError, Frame, Series, align, load_bars, read_frame_csv,
                              shift, shift_prev, write_bars)

from conftest import random_bars


def _csv(tmp_path, rows, header="Date,Open,High,Low,Close,Volume"):
    p = tmp_path / "bars.csv"
    p.write_text("\n".join([header, *rows]) + "\n")
    return p


def test_load_parses_row(tmp_path):
    bars = load_bars(_csv(tmp_path, ["2020-01-02,100,101,99,100.5,5000"]))
    assert bars == [Bar(dt.date(2020, 1, 2), 100.0, 101.0, 99.0, 100.5, 5000.0)]


def test_load_rejects_non_monotonic_dates(tmp_path):
    p = _csv(tmp_path, ["2020-01-03,100,101,99,100,1", "2020-01-02,100,101,99,100,1"])
    with pytest.raises(DataError, match="row 3.*non-monotonic"):
        load_bars(p)


def test_load_rejects_duplicate_dates(tmp_path):
    p = _csv(tmp_path, ["2020-01-02,100,101,99,100,1", "2020-01-02,100,101,99,100,1"])
    with pytest.raises(DataError, match="non-monotonic"):
        load_bars(p)


def test_load_rejects_high_below_close(tmp_path):
    with pytest.raises(DataError, match="row 2"):
        load_bars(_csv(tmp_path, ["2020-01-02,100,99,98,100.5,5000"]))


@pytest.mark.parametrize("row", ["2020-01-02,0,1,0,1,5", "2020-01-02,1,1,1,1,-1", "2020-01-02,1,1,x,1,1",
                                 "2020-13-02,1,1,1,1,1", "2020-01-02,1,1,1,1"])
def test_load_rejects_bad_rows(tmp_path, row):
    with pytest.raises(DataError, match="row 2"):
        load_bars(_csv(tmp_path, [row]))


def test_load_rejects_bad_header(tmp_path):
    with pytest.raises(DataError, match="header"):
        load_bars(_csv(tmp_path, ["2020-01-02,1,1,1,1,1"], header="date,open,high,low,close,volume"))


def test_zero_volume_allowed(tmp_path):
    assert load_bars(_csv(tmp_path, ["2020-01-02,1,1,1,1,0"]))[0].volume == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10_000))
def test_write_load_round_trip(tmp_path_factory, n, seed):
    bars = random_bars(n, seed)
    p = tmp_path_factory.mktemp("rt") / "b.csv"
    write_bars(bars, p)
    assert load_bars(p) == bars


def test_shift_prev_columns():
    bars = random_bars(3, 1)
    f = shift_prev(bars)
    closes = [b.close for b in bars]
    assert f.names == ["open", "openprev", "highprev", "lowprev", "closeprev", "volumeprev", "close"]
    assert np.isnan(f["closeprev"].values[0])
    np.testing.assert_array_equal(f["closeprev"].values[1:], closes[:2])
    assert f["closeprev"].warmup == 1 and f["open"].warmup == 0
    np.testing.assert_array_equal(f["open"].values, [b.open for b in bars])
    np.testing.assert_array_equal(f["close"].values, closes)


def test_shift_prev_needs_two_bars():
    with pytest.raises(DataError):
        shift_prev(random_bars(1))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 1000))
def test_shift_composes(n, seed):
    f = shift_prev(random_bars(n, seed))
    two = shift(f["closeprev"], 1)
    direct = shift(f["close"], 2)
    np.testing.assert_array_equal(two.values, direct.values)
    assert two.warmup == direct.warmup == 2


def test_series_forces_leading_nan_and_is_read_only():
    s = Series("x", np.array([np.nan, 1.0, np.inf, 3.0]), warmup=0)
    assert s.warmup == 1
    assert np.isnan(s.values[2])  # interior non-finite kept as undefined
    with pytest.raises(ValueError):
        s.values[1] = 5
    s2 = Series("y", np.arange(5.0), warmup=3)
    assert np.isnan(s2.values[:3]).all() and s2.values[3] == 3


def test_frame_effective_start_and_matrix():
    idx = np.arange(5).astype("datetime64[D]")
    f = Frame(idx, {"a": Series("a", np.arange(5.0), 1), "b": Series("b", np.arange(5.0), 3)})
    assert f.effective_start == 3
    assert f.matrix(["b", "a"]).shape == (5, 2)
    with pytest.raises(KeyError, match="missing column 'c'"):
        f["c"]


def test_align():
    idx = np.arange(4).astype("datetime64[D]")
    a = Frame(idx, {"rsi14": Series("rsi14", np.ones(4))})
    b = Frame(idx, {"cci20": Series("cci20", np.ones(4), 2)})
    m = align([a, b])
    assert m.names == ["rsi14", "cci20"] and m["cci20"].warmup == 2
    with pytest.raises(DataError, match="duplicate"):
        align([a, a])
    with pytest.raises(DataError, match="index"):
        align([a, Frame(idx[:3], {"x": Series("x", np.ones(3))})])


def test_frame_csv_round_trip(tmp_path):
    idx = np.arange(4).astype("datetime64[D]")
    f = Frame(idx, {"a": Series("a", [np.nan, 1.5, 2.25, 1e-17]), "b": Series("b", [1.0, np.nan, 3, 4])})
    f.to_csv(tmp_path / "f.csv")
    text = (tmp_path / "f.csv").read_text().splitlines()
    assert text[1].startswith("1970-01-01,,")
    g = read_frame_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(g.matrix(), f.matrix())


def test_close_is_not_a_feature_input(prev_400):
    # structural check: every prev column equals a shifted raw column
    raw_close = prev_400["close"].values
    np.testing.assert_array_equal(prev_400["closeprev"].values[1:], raw_close[:-1])
