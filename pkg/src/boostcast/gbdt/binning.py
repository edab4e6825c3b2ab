"""Quantile binning of feature columns.

Bin ``i`` of a feature covers the half-open interval ``(bounds[i-1], bounds[i]]``;
values above the last boundary fall in the top bin. NaN goes to a dedicated
missing bin whose code equals the feature's bin count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinMap:
    bounds: tuple  # one ascending float64 array per feature
    max_bin: int

    @property
    def n_features(self) -> int:
        return len(self.bounds)

    @property
    def n_bins(self) -> np.ndarray:
        """Regular (non-missing) bins per feature; also the missing-bin code."""
        return np.array([len(b) + 1 for b in self.bounds], dtype=np.int64)

    def bin_column(self, j: int, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        codes = np.searchsorted(self.bounds[j], values, side="left").astype(np.uint16)
        codes[np.isnan(values)] = len(self.bounds[j]) + 1
        return codes

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        out = np.empty(X.shape, dtype=np.uint16)
        for j in range(self.n_features):
            out[:, j] = self.bin_column(j, X[:, j])
        return out

    def to_list(self) -> list:
        return [[float(v) for v in b] for b in self.bounds]

    @classmethod
    def from_list(cls, bounds: list, max_bin: int) -> "BinMap":
        return cls(tuple(np.asarray(b, dtype=np.float64) for b in bounds), int(max_bin))


def _midpoints(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a + (b - a) / 2.0
    return np.where((a <= m) & (m < b), m, a)


def _midpoint(a: float, b: float) -> float:
    return float(_midpoints(np.array([a]), np.array([b]))[0])


def feature_bounds(values: np.ndarray, max_bin: int) -> np.ndarray:
    """Cut points for one feature: every distinct value gets its own bin when
    they fit, otherwise bins are filled greedily to roughly equal counts."""
    vals = np.asarray(values, dtype=np.float64)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return np.empty(0)
    uniq, counts = np.unique(vals, return_counts=True)
    if len(uniq) <= max_bin:
        return _midpoints(uniq[:-1], uniq[1:])
    cuts = []
    remaining = int(counts.sum())
    target = remaining / max_bin
    acc = 0
    for i, c in enumerate(counts[:-1].tolist()):
        acc += c
        if acc >= target:
            cuts.append(i)
            remaining -= acc
            acc = 0
            left = max_bin - len(cuts)
            if left <= 1:
                break
            target = remaining / left
    cuts = np.array(cuts, dtype=np.int64)
    return _midpoints(uniq[cuts], uniq[cuts + 1])


def build_bins(X: np.ndarray, max_bin: int = 255) -> BinMap:
    if max_bin < 2:
        raise ValueError("max_bin must be >= 2")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if max_bin > np.iinfo(np.uint16).max - 2:
        raise ValueError("max_bin too large")
    return BinMap(tuple(feature_bounds(X[:, j], max_bin) for j in range(X.shape[1])), max_bin)
