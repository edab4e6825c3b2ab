"""Synthetic daily bars with a known, learnable structure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import Bar, bars_from_arrays


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 1500
    phi: float = 0.5  # AR(1) coefficient of daily log returns
    drift: float = 0.002  # mean daily log return: exponential price trend
    sigma: float = 0.01  # innovation std of the log return
    gap_sigma: float = 0.002  # open vs previous close, independent of the day's move
    wick_sigma: float = 0.004
    start_price: float = 100.0
    start_date: str = "2010-01-04"
    seed: int = 7


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def ar1_log_returns(n: int, phi: float, drift: float, sigma: float, rng) -> np.ndarray:
    eps = rng.normal(0.0, sigma, size=n)
    r = np.empty(n)
    prev = drift
    for t in range(n):
        prev = drift + phi * (prev - drift) + eps[t]
        r[t] = prev
    return r


def generate_bars(spec: SyntheticSpec | None = None) -> list[Bar]:
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    r = ar1_log_returns(spec.n, spec.phi, spec.drift, spec.sigma, rng)
    close = spec.start_price * np.exp(np.cumsum(r))
    prior = np.concatenate([[spec.start_price], close[:-1]])
    open_ = prior * np.exp(rng.normal(0.0, spec.gap_sigma, size=spec.n))
    top = np.maximum(open_, close)
    bottom = np.minimum(open_, close)
    high = top * np.exp(np.abs(rng.normal(0.0, spec.wick_sigma, size=spec.n)))
    low = bottom * np.exp(-np.abs(rng.normal(0.0, spec.wick_sigma, size=spec.n)))
    volume = np.round(np.exp(rng.normal(13.0, 0.3, size=spec.n)))
    return bars_from_arrays(business_days(spec.start_date, spec.n), open_, high, low, close, volume)
