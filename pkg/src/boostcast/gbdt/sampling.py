"""Gradient-based one-side sampling."""
from __future__ import annotations

import math

import numpy as np


def goss_counts(n: int, a: float, b: float) -> tuple[int, int]:
    top = min(n, int(math.floor(a * n + 1e-9)))
    other = min(n - top, int(math.floor(b * n + 1e-9)))
    return top, other


def goss_sample(gradients, a: float, b: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``a*N`` largest-|gradient| rows, sample ``b*N`` of the rest.

    Sampled rows get weight ``(1 - a) / b`` so that weighted gradient sums stay
    unbiased. Returns ascending row indexes and their weights. ``rng`` may be a
    seed or a :class:`numpy.random.Generator`.
    """
    if not 0 < a <= 1 or not 0 <= b <= 1 - a + 1e-12:
        raise ValueError("need 0 < a <= 1 and 0 <= b <= 1 - a")
    g = np.abs(np.asarray(gradients, dtype=np.float64))
    n = len(g)
    if a >= 1.0:
        return np.arange(n), np.ones(n)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    top_n, other_n = goss_counts(n, a, b)
    # stable sort: ties resolved by lower row index
    order = np.argsort(-g, kind="stable")
    top = order[:top_n]
    rest = order[top_n:]
    picked = rng.choice(rest, size=other_n, replace=False) if other_n else np.empty(0, dtype=np.int64)
    idx = np.concatenate([top, picked])
    w = np.concatenate([np.ones(top_n), np.full(other_n, (1.0 - a) / b if b > 0 else 0.0)])
    srt = np.argsort(idx, kind="stable")
    return idx[srt].astype(np.int64), w[srt]
