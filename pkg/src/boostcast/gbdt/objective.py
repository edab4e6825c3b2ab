"""Power loss |r|^p / p with r = pred - target. p = 2 is plain squared error;
larger p punishes big misses harder."""
from __future__ import annotations

import numpy as np

HESS_FLOOR = 1e-6


def loss_value(pred, target, p: float = 3.0) -> np.ndarray:
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return np.abs(r) ** p / p


def loss_grad_hess(pred, target, p: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    if p < 2:
        raise ValueError("loss power must be >= 2")
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    a = np.abs(r)
    if p == 2.0:
        return r.copy(), np.ones_like(r)
    g = np.sign(r) * a ** (p - 1.0)
    h = np.maximum((p - 1.0) * a ** (p - 2.0), HESS_FLOOR)
    return g, h
