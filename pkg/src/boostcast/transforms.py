"""Stationarising transforms, IQR root-compression of outliers, standardisation
and the exact inverse used to turn a predicted target back into a price.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .indicators import ema
from .series import Series

BASE_KINDS = ("returns", "log_returns", "cbrt_returns", "ema_ratio", "ema_diff_ratio")

# the seven target methods that are actually evaluated
TARGET_METHODS = (
    "returns",
    "log_returns",
    "ema_ratio",
    "ema_diff_ratio",
    "std_returns",
    "std_log_returns",
    "std_ema_ratio",
)

SUFFIX = {
    "returns": "returns",
    "log_returns": "logreturns",
    "cbrt_returns": "cbrtreturns",
    "ema_ratio": "ema",
    "ema_diff_ratio": "emadiff",
}


class TransformError(ValueError):
    pass


class NonPositiveError(TransformError):
    """Log returns requested on a column with values <= 0; use cube-root returns."""


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    ema_period: int = 14
    std_mean: float | None = None
    std_std: float | None = None
    fitted_on: tuple | None = None

    def __post_init__(self):
        if self.base_kind not in BASE_KINDS:
            raise TransformError(f"unknown transform kind {self.kind!r}")
        if self.ema_period < 2:
            raise TransformError("ema_period must be >= 2")
        if self.standardized and not (self.std_std is not None and self.std_std > 0):
            raise TransformError("standardized spec needs std > 0")

    @property
    def standardized(self) -> bool:
        return self.kind.startswith("std_")

    @property
    def base_kind(self) -> str:
        return self.kind[4:] if self.kind.startswith("std_") else self.kind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fitted_on"] = list(self.fitted_on) if self.fitted_on is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformSpec":
        d = dict(d)
        if d.get("fitted_on") is not None:
            d["fitted_on"] = tuple(d["fitted_on"])
        return cls(**d)


@dataclass(frozen=True)
class OutlierPolicy:
    """``n_iqr`` holds one fence multiplier per pass."""

    n_iqr: tuple = (3.0,)
    root: str = "square"

    def __post_init__(self):
        n = tuple(float(v) for v in np.atleast_1d(self.n_iqr))
        if not n or any(v <= 0 for v in n):
            raise TransformError("n_iqr values must be > 0")
        if self.root not in ("square", "cubic"):
            raise TransformError("root must be 'square' or 'cubic'")
        object.__setattr__(self, "n_iqr", n)

    @property
    def passes(self) -> int:
        return len(self.n_iqr)


def _lagged(x: np.ndarray) -> np.ndarray:
    prev = np.empty_like(x)
    prev[0] = np.nan
    prev[1:] = x[:-1]
    return prev


def returns(x: Series, name: str | None = None) -> Series:
    prev = _lagged(x.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x.values / prev - 1.0
    out[prev == 0] = np.nan
    return Series(name or f"{x.name}_returns", out, x.warmup + 1)


def log_returns(x: Series, name: str | None = None, fit_range: tuple | None = None) -> Series:
    """ln(x_t / x_{t-1}).

    The domain check runs over ``fit_range`` when given (values outside it
    that are <= 0 become NaN) and over every defined value otherwise.
    """
    vals = x.values
    check = vals if fit_range is None else vals[fit_range[0]:fit_range[1]]
    check = check[np.isfinite(check)]
    if np.any(check <= 0):
        raise NonPositiveError(f"{x.name}: log returns need strictly positive values")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), np.nan)
    return Series(name or f"{x.name}_logreturns", logs - _lagged(logs), x.warmup + 1)


def cbrt_returns(x: Series, name: str | None = None) -> Series:
    c = np.cbrt(x.values)
    return Series(name or f"{x.name}_cbrtreturns", c - _lagged(c), x.warmup + 1)


def ema_ratio(x: Series, closeprev: Series, n: int = 14, name: str | None = None,
              ema_values: Series | None = None) -> Series:
    e = ema_values if ema_values is not None else ema(closeprev, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x.values / e.values
    out[e.values == 0] = np.nan
    return Series(name or f"{x.name}_ema", out, max(x.warmup, e.warmup))


def ema_diff_ratio(x: Series, closeprev: Series, n: int = 14, name: str | None = None,
                   ema_values: Series | None = None) -> Series:
    e = ema_values if ema_values is not None else ema(closeprev, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x.values - _lagged(x.values)) / e.values
    out[e.values == 0] = np.nan
    return Series(name or f"{x.name}_emadiff", out, max(x.warmup + 1, e.warmup))


def apply_kind(kind: str, x: Series, closeprev: Series, ema_values: Series | None = None,
               n: int = 14, name: str | None = None, fit_range: tuple | None = None) -> Series:
    if kind == "returns":
        return returns(x, name)
    if kind == "log_returns":
        return log_returns(x, name, fit_range)
    if kind == "cbrt_returns":
        return cbrt_returns(x, name)
    if kind == "ema_ratio":
        return ema_ratio(x, closeprev, n, name, ema_values)
    if kind == "ema_diff_ratio":
        return ema_diff_ratio(x, closeprev, n, name, ema_values)
    raise TransformError(f"unknown transform kind {kind!r}")


def standardize_fit(x: Series, fit_range: tuple | None = None) -> tuple[float, float]:
    lo, hi = fit_range if fit_range is not None else (x.warmup, len(x))
    vals = x.values[lo:hi]
    vals = vals[np.isfinite(vals)]
    if len(vals) < 2:
        raise TransformError(f"{x.name}: not enough values to standardize")
    mu = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1))
    if not sd > 0:
        raise TransformError(f"{x.name}: zero variance")
    return mu, sd


def standardize_apply(x: Series, stats: tuple[float, float], name: str | None = None) -> Series:
    mu, sd = stats
    return Series(name or x.name, (x.values - mu) / sd, x.warmup)


def quartiles(values: np.ndarray) -> tuple[float, float]:
    """Q1, Q3 by linear interpolation between order statistics."""
    q1, q3 = np.percentile(values, [25.0, 75.0], method="linear")
    return float(q1), float(q3)


def compress(v: np.ndarray, lower: float, upper: float, root: str = "square") -> np.ndarray:
    """Pull values beyond [lower, upper] towards the fence with a root of the excess.

    The +1/-1 offset keeps excesses below 1 from being amplified by the root.
    """
    f = np.sqrt if root == "square" else np.cbrt
    out = np.array(v, dtype=np.float64, copy=True)
    above = out > upper
    below = out < lower
    out[above] = f(out[above] - upper + 1.0) - 1.0 + upper
    out[below] = -f(np.abs(out[below] - lower) + 1.0) + 1.0 + lower
    return out


def normalize_outliers(x: Series, policy: OutlierPolicy, fit_range: tuple | None = None,
                       name: str | None = None) -> Series:
    """IQR-fence root compression, one pass per entry of ``policy.n_iqr``.

    Quartiles come from the defined values inside ``fit_range`` (all defined
    values when omitted); the fences are then applied to the whole series.
    """
    vals = np.array(x.values, copy=True)
    lo, hi = fit_range if fit_range is not None else (0, len(vals))
    for n in policy.n_iqr:
        ref = vals[lo:hi]
        ref = ref[np.isfinite(ref)]
        if len(ref) < 4:
            raise TransformError(f"{x.name}: need at least 4 defined values for quartiles")
        q1, q3 = quartiles(ref)
        iqr = q3 - q1
        vals = compress(vals, q1 - n * iqr, q3 + n * iqr, policy.root)
    return Series(name or f"{x.name}_oh", vals, x.warmup)


def make_target(close: Series, closeprev: Series, kind: str, ema_period: int = 14,
                fit_range: tuple | None = None, name: str | None = None) -> tuple[Series, TransformSpec]:
    """Transform same-day close into a target and the spec needed to invert it."""
    base = kind[4:] if kind.startswith("std_") else kind
    if base not in BASE_KINDS:
        raise TransformError(f"unknown target kind {kind!r}")
    name = name or f"close_{SUFFIX[base]}" + ("_std" if kind.startswith("std_") else "")
    y = apply_kind(base, close, closeprev, n=ema_period, name=name)
    # the target's first value would need close_{-1}; align warmup with closeprev
    y = Series(name, y.values, max(y.warmup, closeprev.warmup))
    if kind.startswith("std_"):
        mu, sd = standardize_fit(y, fit_range)
        y = standardize_apply(y, (mu, sd), name)
        spec = TransformSpec(kind, ema_period, mu, sd, tuple(fit_range) if fit_range else None)
    else:
        spec = TransformSpec(kind, ema_period)
    return y, spec


def invert_target(pred, prior_price, ema_value, spec: TransformSpec) -> np.ndarray:
    """Turn transformed predictions back into price forecasts.

    ``prior_price`` is the previous close, ``ema_value`` the EMA of closeprev at
    the forecast row (known before the close prints).
    """
    r = np.asarray(pred, dtype=np.float64)
    prior = np.asarray(prior_price, dtype=np.float64)
    e = np.asarray(ema_value, dtype=np.float64)
    if spec.standardized:
        r = r * spec.std_std + spec.std_mean
    kind = spec.base_kind
    if kind in ("returns", "log_returns", "cbrt_returns", "ema_diff_ratio") and prior.shape != r.shape and prior.ndim:
        raise TransformError("prior_price does not match predictions")
    if kind == "returns":
        return prior * (1.0 + r)
    if kind == "log_returns":
        return prior * np.exp(r)
    if kind == "cbrt_returns":
        return (np.cbrt(prior) + r) ** 3
    if kind in ("ema_ratio", "ema_diff_ratio"):
        if e.shape != r.shape and e.ndim:
            raise TransformError("ema context does not match predictions")
        if np.any(~np.isfinite(e)):
            raise TransformError("ema context undefined")
        return r * e if kind == "ema_ratio" else prior + r * e
    raise TransformError(f"cannot invert {spec.kind!r}")
