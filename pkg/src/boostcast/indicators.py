"""Technical indicators computed on previous-day (prev-shifted) columns.

Every function is causal: the value at position ``t`` uses inputs at
positions ``<= t`` only. Leading positions without enough history are NaN and
the returned :class:`Series` carries the matching ``warmup``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .series import Series, as_series


@dataclass(frozen=True)
class IndicatorParams:
    rsi_n: int = 14
    cmo_n: int = 14
    atr_n: int = 14
    stoch_k_n: int = 14
    stoch_d_n: int = 3
    cci_n: int = 20
    roc_n: int = 12
    psy_n: int = 12
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    chaikin_ema_n: int = 10
    chaikin_roc_n: int = 10
    ema_n: int = 14
    rolling_n: int = 14
    zigzag_pct: float = 0.05
    slope_n: int = 14

    def __post_init__(self):
        for name in ("rsi_n", "cmo_n", "atr_n", "stoch_k_n", "cci_n", "roc_n", "psy_n",
                     "macd_fast", "macd_slow", "macd_signal", "chaikin_ema_n",
                     "chaikin_roc_n", "ema_n", "rolling_n", "slope_n"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.stoch_d_n < 1:
            raise ValueError("stoch_d_n must be >= 1")
        if self.macd_fast >= self.macd_slow:
            raise ValueError("macd_fast must be < macd_slow")
        if self.zigzag_pct <= 0:
            raise ValueError("zigzag_pct must be > 0")


def _check_aligned(*series: Series) -> None:
    n = len(series[0])
    if any(len(s) != n for s in series):
        raise ValueError("misaligned inputs")


def _windows(x: np.ndarray, n: int) -> np.ndarray:
    """(len-n+1, n) view of trailing windows."""
    return np.lib.stride_tricks.sliding_window_view(x, n)


def typical_price(highprev: Series, lowprev: Series, closeprev: Series, name: str = "typical") -> Series:
    _check_aligned(highprev, lowprev, closeprev)
    vals = (highprev.values + lowprev.values + closeprev.values) / 3.0
    return Series(name, vals, max(highprev.warmup, lowprev.warmup, closeprev.warmup))


def sma(x: Series, n: int, name: str | None = None) -> Series:
    if n < 1:
        raise ValueError("n must be >= 1")
    if x.warmup + n > len(x):
        raise ValueError(f"sma({n}) needs more than {len(x) - x.warmup} defined values")
    out = np.full(len(x), np.nan)
    w = _windows(x.values, n)
    out[n - 1:] = w.mean(axis=1)
    return Series(name or f"sma{n}", out, x.warmup + n - 1)


def _recursive_smooth(x: np.ndarray, start: int, n: int, alpha: float) -> np.ndarray:
    """Seed with the mean of x[start:start+n], then e = a*x + (1-a)*e_prev."""
    out = np.full(len(x), np.nan)
    seed_at = start + n - 1
    if seed_at >= len(x):
        return out
    e = float(np.mean(x[start:start + n]))
    out[seed_at] = e
    for t in range(seed_at + 1, len(x)):
        e = alpha * x[t] + (1.0 - alpha) * e
        out[t] = e
    return out


def ema(x: Series, n: int, name: str | None = None) -> Series:
    if n < 1:
        raise ValueError("n must be >= 1")
    if x.warmup + n > len(x):
        raise ValueError(f"ema({n}) needs more than {len(x) - x.warmup} defined values")
    out = _recursive_smooth(x.values, x.warmup, n, 2.0 / (n + 1))
    return Series(name or f"ema{n}", out, x.warmup + n - 1)


def _wilder(x: np.ndarray, start: int, n: int) -> np.ndarray:
    return _recursive_smooth(x, start, n, 1.0 / n)


def rsi(closeprev: Series, n: int = 14, name: str | None = None) -> Series:
    if n < 2:
        raise ValueError("n must be >= 2")
    c = closeprev.values
    w0 = closeprev.warmup
    if w0 + n + 1 > len(c):
        raise ValueError("insufficient history for rsi")
    delta = np.full(len(c), np.nan)
    delta[1:] = np.diff(c)
    gain = np.where(delta > 0, delta, 0.0)
    loss = np.where(delta < 0, -delta, 0.0)
    avg_g = _wilder(gain, w0 + 1, n)
    avg_l = _wilder(loss, w0 + 1, n)
    out = np.full(len(c), np.nan)
    ok = np.isfinite(avg_g)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 100.0 - 100.0 / (1.0 + avg_g / avg_l)
    val = np.where(avg_l == 0, np.where(avg_g == 0, np.nan, 100.0), val)
    out[ok] = val[ok]
    return Series(name or f"rsi{n}", out, w0 + n)


def macd(closeprev: Series, fast: int = 12, slow: int = 26, signal: int = 9,
         prefix: str = "macd") -> tuple[Series, Series, Series]:
    line_vals = ema(closeprev, fast).values - ema(closeprev, slow).values
    line = Series(prefix, line_vals, closeprev.warmup + slow - 1)
    sig = ema(line, signal, f"{prefix}signal")
    hist = Series(f"{prefix}hist", line.values - sig.values, sig.warmup)
    return line, sig, hist


def cci(typical: Series, n: int = 20, name: str | None = None) -> Series:
    tp = typical.values
    out = np.full(len(tp), np.nan)
    w = _windows(tp, n)
    mean = w.mean(axis=1)
    mad = np.abs(w - mean[:, None]).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (tp[n - 1:] - mean) / (0.015 * mad)
    val[mad == 0] = np.nan
    out[n - 1:] = val
    return Series(name or f"cci{n}", out, typical.warmup + n - 1)


def cmo(closeprev: Series, n: int = 14, name: str | None = None) -> Series:
    c = closeprev.values
    delta = np.full(len(c), np.nan)
    delta[1:] = np.diff(c)
    out = np.full(len(c), np.nan)
    if len(c) > n:
        w = _windows(delta[1:], n)
        su = np.where(w > 0, w, 0.0).sum(axis=1)
        sd = np.where(w < 0, -w, 0.0).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 100.0 * (su - sd) / (su + sd)
        val[(su + sd) == 0] = np.nan
        out[n:] = val
    return Series(name or f"cmo{n}", out, closeprev.warmup + n)


def roc(closeprev: Series, n: int = 12, name: str | None = None) -> Series:
    c = closeprev.values
    out = np.full(len(c), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[n:] = 100.0 * (c[n:] - c[:-n]) / c[:-n]
    return Series(name or f"roc{n}", out, closeprev.warmup + n)


def psy(closeprev: Series, n: int = 12, name: str | None = None) -> Series:
    c = closeprev.values
    out = np.full(len(c), np.nan)
    if len(c) > n:
        up = (np.diff(c) > 0).astype(np.float64)
        up[~np.isfinite(np.diff(c))] = np.nan
        out[n:] = 100.0 * _windows(up, n).sum(axis=1) / n
    return Series(name or f"psy{n}", out, closeprev.warmup + n)


def stochastic(closeprev: Series, highprev: Series, lowprev: Series, k_n: int = 14,
               d_n: int = 3) -> tuple[Series, Series]:
    _check_aligned(closeprev, highprev, lowprev)
    c, h, l = closeprev.values, highprev.values, lowprev.values
    out = np.full(len(c), np.nan)
    hh = _windows(h, k_n).max(axis=1)
    ll = _windows(l, k_n).min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 100.0 * (c[k_n - 1:] - ll) / (hh - ll)
    val[hh == ll] = np.nan
    out[k_n - 1:] = val
    warm = max(closeprev.warmup, highprev.warmup, lowprev.warmup) + k_n - 1
    k = Series(f"stochk{k_n}", out, warm)
    d_vals = np.full(len(c), np.nan)
    if d_n == 1:
        d_vals = out.copy()
    else:
        d_vals[d_n - 1:] = _windows(out, d_n).mean(axis=1)
    d = Series(f"stochd{d_n}", d_vals, warm + d_n - 1)
    return k, d


def true_range(highprev: Series, lowprev: Series, closeprev: Series) -> np.ndarray:
    h, l, c = highprev.values, lowprev.values, closeprev.values
    prev_c = np.concatenate([[np.nan], c[:-1]])
    return np.maximum.reduce([h - l, np.abs(h - prev_c), np.abs(l - prev_c)])


def atr(highprev: Series, lowprev: Series, closeprev: Series, n: int = 14,
        name: str | None = None) -> Series:
    _check_aligned(highprev, lowprev, closeprev)
    start = max(highprev.warmup, lowprev.warmup, closeprev.warmup) + 1
    tr = true_range(highprev, lowprev, closeprev)
    if start + n > len(tr):
        raise ValueError("insufficient history for atr")
    out = _wilder(tr, start, n)
    return Series(name or f"atr{n}", out, start + n - 1)


def chaikin_volatility(highprev: Series, lowprev: Series, ema_n: int = 10, roc_n: int = 10,
                       name: str = "chaikinvol") -> Series:
    _check_aligned(highprev, lowprev)
    rng = Series("range", highprev.values - lowprev.values, max(highprev.warmup, lowprev.warmup))
    e = ema(rng, ema_n).values
    out = np.full(len(e), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[roc_n:] = 100.0 * (e[roc_n:] - e[:-roc_n]) / e[:-roc_n]
    return Series(name, out, rng.warmup + ema_n - 1 + roc_n)


def rolling_stats(x: Series, n: int, prefix: str | None = None) -> tuple[Series, Series, Series, Series]:
    """Trailing mean, sample std, min and max over ``n`` values."""
    prefix = prefix or x.name
    vals = x.values
    out = {k: np.full(len(vals), np.nan) for k in ("mean", "std", "min", "max")}
    if len(vals) >= n:
        w = _windows(vals, n)
        out["mean"][n - 1:] = w.mean(axis=1)
        out["std"][n - 1:] = w.std(axis=1, ddof=1)
        out["min"][n - 1:] = w.min(axis=1)
        out["max"][n - 1:] = w.max(axis=1)
    warm = x.warmup + n - 1
    return tuple(Series(f"{prefix}_roll{k}{n}", out[k], warm) for k in ("mean", "std", "min", "max"))


PEAK = 1
TROUGH = -1


@dataclass(frozen=True)
class ZigZagPivots:
    """Confirmed reversal points: ``(index, price, direction, confirmed_at)``."""

    threshold_pct: float
    pivots: list = field(default_factory=list)

    @property
    def indexes(self) -> np.ndarray:
        return np.array([p[0] for p in self.pivots], dtype=np.int64)

    @property
    def confirmed_at(self) -> np.ndarray:
        return np.array([p[3] for p in self.pivots], dtype=np.int64)

    def last_pivot_index(self, n: int) -> np.ndarray:
        """For each position t < n, index of the last pivot confirmed at or before t (-1 if none)."""
        out = np.full(n, -1, dtype=np.int64)
        for idx, _, _, conf in self.pivots:
            if conf < n:
                out[conf:] = idx
        return out


def zigzag(closeprev: Series, threshold_pct: float = 0.05) -> ZigZagPivots:
    """Online swing detector on relative retracements from the running extreme.

    A peak is confirmed once price falls ``threshold_pct`` below the highest
    close since the previous pivot (troughs symmetrically). The first defined
    point is never a pivot, so a monotone series confirms nothing.
    """
    if threshold_pct <= 0:
        raise ValueError("threshold_pct must be > 0")
    c = closeprev.values
    start = closeprev.warmup
    pivots = []
    if start >= len(c):
        return ZigZagPivots(threshold_pct, pivots)
    direction = 0
    hi_i = lo_i = start
    for t in range(start + 1, len(c)):
        p = c[t]
        if not np.isfinite(p):
            continue
        if direction == 0:
            if p > c[hi_i]:
                hi_i = t
            if p < c[lo_i]:
                lo_i = t
            if p <= c[hi_i] * (1.0 - threshold_pct):
                if hi_i != start:
                    pivots.append((hi_i, float(c[hi_i]), PEAK, t))
                direction, lo_i = TROUGH, t
            elif p >= c[lo_i] * (1.0 + threshold_pct):
                if lo_i != start:
                    pivots.append((lo_i, float(c[lo_i]), TROUGH, t))
                direction, hi_i = PEAK, t
        elif direction == PEAK:
            # rising leg: track the high, confirm it on a retracement
            if p > c[hi_i]:
                hi_i = t
            elif p <= c[hi_i] * (1.0 - threshold_pct):
                pivots.append((hi_i, float(c[hi_i]), PEAK, t))
                direction, lo_i = TROUGH, t
        else:
            if p < c[lo_i]:
                lo_i = t
            elif p >= c[lo_i] * (1.0 + threshold_pct):
                pivots.append((lo_i, float(c[lo_i]), TROUGH, t))
                direction, hi_i = PEAK, t
    return ZigZagPivots(threshold_pct, pivots)


def compute_all(cols: dict, params: IndicatorParams) -> dict:
    """Every indicator from prev-shifted ``highprev/lowprev/closeprev/typical``."""
    hp, lp, cp, tp = cols["highprev"], cols["lowprev"], cols["closeprev"], cols["typical"]
    out = {}
    out[f"ema{params.ema_n}"] = ema(cp, params.ema_n)
    out[f"sma{params.ema_n}"] = sma(cp, params.ema_n)
    out[f"rsi{params.rsi_n}"] = rsi(cp, params.rsi_n)
    out[f"cmo{params.cmo_n}"] = cmo(cp, params.cmo_n)
    out[f"roc{params.roc_n}"] = roc(cp, params.roc_n)
    out[f"psy{params.psy_n}"] = psy(cp, params.psy_n)
    out[f"cci{params.cci_n}"] = cci(tp, params.cci_n)
    k, d = stochastic(cp, hp, lp, params.stoch_k_n, params.stoch_d_n)
    out[k.name], out[d.name] = k, d
    line, sig, hist = macd(cp, params.macd_fast, params.macd_slow, params.macd_signal)
    out[line.name], out[sig.name], out[hist.name] = line, sig, hist
    out[f"atr{params.atr_n}"] = atr(hp, lp, cp, params.atr_n)
    out["chaikinvol"] = chaikin_volatility(hp, lp, params.chaikin_ema_n, params.chaikin_roc_n)
    return {name: s.rename(name) for name, s in out.items()}
