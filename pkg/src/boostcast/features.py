"""Feature generation and dataset assembly (DS1-DS4).

Column names follow ``<base>_<transform>``: for instance the overnight gap
``difference_open-closeprev`` becomes ``difference_open-closeprev_ema`` after
the EMA ratio transform. Cyclical columns are bounded and periodic and are
kept untransformed.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import indicators as ind
from . import transforms as tf
from .series import DataError, Frame, Series, shift
from .stationarity import GateReport, gate_frame

logger = logging.getLogger(__name__)

GENERATORS = ("price", "lag", "rolling", "indicator", "cyclical", "cross",
              "slope_diff_fixed", "slope_diff_dynamic", "outlier")
DATASETS = ("DS1", "DS2", "DS3", "DS4")


class NonStationaryError(DataError):
    def __init__(self, report: GateReport):
        self.report = report
        fails = report.failures
        super().__init__(f"{len(fails)} column(s) failed the stationarity gate, first: {fails[0]}")


@dataclass(frozen=True)
class FeatureSpec:
    base_name: str
    generator: str
    params: tuple = ()
    outlier_handled: bool = False
    novel: bool = False
    price_like: bool = False


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    spec: FeatureSpec
    transform: str | None

    @property
    def novel(self) -> bool:
        return self.spec.novel or self.transform in ("ema_ratio", "ema_diff_ratio")


@dataclass(frozen=True)
class FeatureConfig:
    indicators: ind.IndicatorParams = field(default_factory=ind.IndicatorParams)
    lags: tuple = (1, 5, 30)
    lag_columns: tuple = ("open", "closeprev", "typical")
    rolling_columns: tuple = ("volumeprev", "open", "closeprev", "typical")
    dynamic_clip: tuple = (2, 90)
    outlier_policies: tuple = (
        ("open", tf.OutlierPolicy((3.0,), "square")),
        ("closeprev", tf.OutlierPolicy((3.0,), "square")),
        ("typical", tf.OutlierPolicy((3.0,), "square")),
        ("volumeprev", tf.OutlierPolicy((3.0, 1.5), "square")),
        ("macdhist", tf.OutlierPolicy((20.0,), "square")),
    )
    holdout_fraction: float = 0.8
    full_stats: bool = False
    alpha: float = 0.05
    allow_nonstationary: bool = False
    gate: bool = True

    @property
    def ema_n(self) -> int:
        return self.indicators.ema_n


def make_lags(frame: Frame, lags=(1, 5, 30), columns=("open", "closeprev", "typical")) -> Frame:
    missing = [c for c in columns if c not in frame]
    if missing:
        raise DataError(f"make_lags: missing columns {missing}")
    out = []
    for c in columns:
        for k in lags:
            if k >= len(frame):
                warnings.warn(f"lag {k} exceeds frame length {len(frame)}; column is all undefined")
            out.append(shift(frame[c], k, f"{c}_lag{k}"))
    return Frame(frame.index, {s.name: s for s in out})


def cyclical_features(index) -> Frame:
    idx = np.asarray(index, dtype="datetime64[D]")
    # 1970-01-01 was a Thursday; Monday -> 0
    dow = ((idx.astype(np.int64) + 3) % 7).astype(np.float64)
    months = idx.astype("datetime64[M]")
    dom = (idx - months.astype("datetime64[D]")).astype(np.int64) + 1
    month = (months.astype(np.int64) % 12) + 1
    cols = {
        "sin_dow": Series("sin_dow", np.sin(2 * np.pi * dow / 5.0)),
        "sin_dom": Series("sin_dom", np.sin(2 * np.pi * dom / 31.0)),
        "sin_month": Series("sin_month", np.sin(2 * np.pi * month / 12.0)),
    }
    return Frame(idx, cols)


def cross_features(frame: Frame, atr: Series) -> Frame:
    open_, cp = frame["open"], frame["closeprev"]
    cp_lag1 = shift(cp, 1)
    if np.any(open_.values[np.isfinite(open_.values)] == 0):
        raise DataError("open price of zero")
    cols = [
        Series("difference_open-closeprev", open_.values - cp.values, max(open_.warmup, cp.warmup)),
        Series("difference_open-closeprev_lag1", open_.values - cp_lag1.values,
               max(open_.warmup, cp_lag1.warmup)),
        Series(f"ratio_{atr.name}-open", atr.values / open_.values, max(atr.warmup, open_.warmup)),
    ]
    return Frame(frame.index, {s.name: s for s in cols})


def _zslope(x: np.ndarray, t: int, n: int) -> float:
    w = x[t - n:t + 1]
    sd = np.std(w, ddof=1)
    if not sd >= 1e-12:
        return math.nan
    return (x[t] - x[t - n]) / (n * sd)


def _slope_diff_at(ind_v: np.ndarray, price_v: np.ndarray, t: int, n: int) -> float:
    a = ind_v[t - n:t + 1]
    b = price_v[t - n:t + 1]
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return math.nan
    sa = _zslope(ind_v, t, n)
    sb = _zslope(price_v, t, n)
    if math.isnan(sa) or math.isnan(sb):
        return 0.0
    return sa - sb


def slope_diff_fixed(indicator: Series, price: Series, n: int = 14, name: str | None = None) -> Series:
    """Difference of window z-normalised slopes of indicator and price over [t-n, t]."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if len(indicator) != len(price):
        raise ValueError("misaligned inputs")
    a, b = indicator.values, price.values
    warm = max(indicator.warmup, price.warmup) + n
    out = np.full(len(a), np.nan)
    if warm < len(a):
        wa = np.lib.stride_tricks.sliding_window_view(a, n + 1)
        wb = np.lib.stride_tricks.sliding_window_view(b, n + 1)
        sda = wa.std(axis=1, ddof=1)
        sdb = wb.std(axis=1, ddof=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (wa[:, -1] - wa[:, 0]) / (n * sda) - (wb[:, -1] - wb[:, 0]) / (n * sdb)
        flat = (sda < 1e-12) | (sdb < 1e-12)
        val[flat & np.isfinite(sda) & np.isfinite(sdb)] = 0.0
        out[n:] = val
    return Series(name or f"slopediff_{indicator.name}-{price.name}_fixed{n}", out, warm)


def dynamic_periods(pivots: ind.ZigZagPivots, n: int, clip=(2, 90)) -> np.ndarray:
    last = pivots.last_pivot_index(n)
    p = np.arange(n) - last
    p = np.clip(p, clip[0], clip[1])
    p[last < 0] = -1
    return p


def slope_diff_dynamic(indicator: Series, price: Series, pivots: ind.ZigZagPivots,
                       clip=(2, 90), name: str | None = None) -> Series:
    """Slope difference over the current trend leg (since the last confirmed pivot)."""
    if len(indicator) != len(price):
        raise ValueError("misaligned inputs")
    a, b = indicator.values, price.values
    periods = dynamic_periods(pivots, len(a), clip)
    out = np.full(len(a), np.nan)
    for t in range(len(a)):
        n = periods[t]
        if n < 0 or t - n < 0:
            continue
        out[t] = _slope_diff_at(a, b, t, int(n))
    conf = pivots.confirmed_at
    warm = int(conf[0]) if len(conf) else len(a)
    return Series(name or f"slopediff_{indicator.name}-{price.name}_zigzag", out,
                  max(warm, indicator.warmup, price.warmup))


@dataclass
class BaseFeatures:
    frame: Frame
    specs: dict
    closeprev: Series
    ema: Series


def base_features(prev: Frame, config: FeatureConfig, fit_end: int | None = None) -> BaseFeatures:
    """All untransformed feature columns from a :func:`shift_prev` frame."""
    p = config.indicators
    specs: dict[str, FeatureSpec] = {}
    cols: dict[str, Series] = {}

    def add(s: Series, generator: str, params=(), price_like=False, novel=False, oh=False):
        if s.name in cols:
            raise DataError(f"duplicate feature {s.name!r}")
        cols[s.name] = s
        specs[s.name] = FeatureSpec(s.name, generator, tuple(params), oh, novel, price_like)

    for name in ("open", "openprev", "highprev", "lowprev", "closeprev"):
        add(prev[name], "price", price_like=True)
    add(prev["volumeprev"], "price")
    typical = ind.typical_price(prev["highprev"], prev["lowprev"], prev["closeprev"])
    add(typical, "indicator", price_like=True)
    staged = Frame(prev.index, {**prev.columns, "typical": typical})

    for s in make_lags(staged, config.lags, config.lag_columns).columns.values():
        add(s, "lag", (int(s.name.rsplit("lag", 1)[1]),), price_like=True)

    n = p.rolling_n
    for c in config.rolling_columns:
        for s in ind.rolling_stats(staged[c], n):
            stat = s.name.rsplit("_roll", 1)[1]
            price_like = c != "volumeprev" and not stat.startswith("std")
            add(s, "rolling", (n,), price_like=price_like)

    indic = ind.compute_all({**prev.columns, "typical": typical}, p)
    for name, s in indic.items():
        add(s, "indicator", price_like=name in (f"ema{p.ema_n}", f"sma{p.ema_n}"))

    for s in cyclical_features(prev.index).columns.values():
        add(s, "cyclical")

    atr_s = indic[f"atr{p.atr_n}"]
    for s in cross_features(prev, atr_s).columns.values():
        is_ratio = s.name.startswith("ratio_")
        add(s, "cross", price_like=not is_ratio, novel=is_ratio)

    cp = prev["closeprev"]
    pivots = ind.zigzag(cp, p.zigzag_pct)
    for other in (indic[f"roc{p.roc_n}"], prev["volumeprev"], indic[f"psy{p.psy_n}"]):
        add(slope_diff_fixed(other, cp, p.slope_n), "slope_diff_fixed", (p.slope_n,), novel=True)
        add(slope_diff_dynamic(other, cp, pivots, config.dynamic_clip), "slope_diff_dynamic",
            (p.zigzag_pct, *config.dynamic_clip), novel=True)

    fit = (0, fit_end if fit_end is not None else len(prev))
    for base, policy in config.outlier_policies:
        s = tf.normalize_outliers(cols[base], policy, fit, name=f"{base}_oh")
        add(s, "outlier", (policy.n_iqr, policy.root), oh=True)

    frame = Frame(prev.index, cols)
    return BaseFeatures(frame, specs, cp, indic[f"ema{p.ema_n}"])


def transformed_columns(base: BaseFeatures, config: FeatureConfig,
                        fit_end: int | None = None) -> tuple[dict, dict]:
    """Apply the transform applicability rules to every base feature.

    * simple returns: every feature (the only transform for outlier-handled ones)
    * log returns if the column is strictly positive over the fit range, else
      cube-root returns
    * EMA ratio and EMA difference ratio: price-like features only (no EMA
      ratio for the EMA column itself)
    """
    n = config.ema_n
    fit = (0, fit_end if fit_end is not None else len(base.frame))
    cols: dict[str, Series] = {}
    info: dict[str, ColumnInfo] = {}

    def put(s: Series, spec: FeatureSpec, kind):
        cols[s.name] = s
        info[s.name] = ColumnInfo(s.name, spec, kind)

    for name, s in base.frame.columns.items():
        spec = base.specs[name]
        if spec.generator == "cyclical":
            put(s, spec, None)
            continue
        put(tf.returns(s), spec, "returns")
        if spec.outlier_handled:
            continue
        try:
            put(tf.log_returns(s, fit_range=fit), spec, "log_returns")
        except tf.NonPositiveError:
            put(tf.cbrt_returns(s), spec, "cbrt_returns")
        if spec.price_like:
            # the EMA over itself is identically 1
            if name != base.ema.name:
                put(tf.ema_ratio(s, base.closeprev, n, ema_values=base.ema), spec, "ema_ratio")
            put(tf.ema_diff_ratio(s, base.closeprev, n, ema_values=base.ema), spec, "ema_diff_ratio")
    return cols, info


@dataclass
class Dataset:
    """An assembled feature matrix plus everything needed to score forecasts."""

    dataset_id: str
    frame: Frame
    info: dict
    start: int
    fit_end: int
    standardization: dict
    gate: GateReport | None
    close: Series
    closeprev: Series
    ema: Series
    target: Series | None = None
    target_spec: tf.TransformSpec | None = None

    @property
    def feature_names(self) -> list[str]:
        return [n for n in self.frame.names if n != self.frame.target_name]

    @property
    def n_rows(self) -> int:
        return len(self.frame) - self.start


def holdout_boundary(start: int, n: int, fraction: float = 0.8) -> int:
    return start + int(math.floor(fraction * (n - start)))


def _assemble_once(prev: Frame, dataset_id: str, config: FeatureConfig, fit_end: int):
    base = base_features(prev, config, fit_end)
    cols, info = transformed_columns(base, config, fit_end)
    if dataset_id in ("DS3", "DS4"):
        keep = [k for k, v in info.items() if not v.novel]
        cols = {k: cols[k] for k in keep}
        info = {k: info[k] for k in keep}
    return base, Frame(prev.index, cols), info


def effective_start(prev: Frame, config: FeatureConfig) -> int:
    _, frame, _ = _assemble_once(prev, "DS1", config, len(prev))
    return max(frame.effective_start, prev["closeprev"].warmup)


def assemble_dataset(prev: Frame, dataset_id: str, config: FeatureConfig | None = None,
                     target_kind: str | None = None, fit_end: int | None = None) -> Dataset:
    """Materialise DS1-DS4, optionally with a transformed ``close`` target.

    Fitted statistics (outlier fences, standardisation) use rows before
    ``fit_end``; by default that is the end of the training region, or the
    whole frame with ``config.full_stats``.
    """
    config = config or FeatureConfig()
    if dataset_id not in DATASETS:
        raise DataError(f"unknown dataset {dataset_id!r}")
    standardized = dataset_id in ("DS2", "DS4")
    if target_kind is not None:
        if target_kind not in tf.TARGET_METHODS and target_kind not in tf.BASE_KINDS:
            raise DataError(f"unknown target transform {target_kind!r}")
        if target_kind.startswith("std_") != standardized:
            raise DataError(f"target {target_kind!r} is incompatible with {dataset_id}"
                            " (standardized targets need DS2/DS4 and vice versa)")
    n = len(prev)
    start = effective_start(prev, config)
    if start >= n - 20:
        raise DataError(f"only {n - start} usable rows after warmup ({start}); need more data")
    if fit_end is None:
        fit_end = n if config.full_stats else holdout_boundary(start, n, config.holdout_fraction)
    base, frame, info = _assemble_once(prev, dataset_id, config, fit_end)

    std_stats = {}
    if standardized:
        cols = {}
        for name, s in frame.columns.items():
            stats = tf.standardize_fit(s, (start, fit_end))
            std_stats[name] = stats
            cols[name] = tf.standardize_apply(s, stats)
        frame = Frame(frame.index, cols)

    report = None
    if config.gate:
        report = gate_frame(frame, config.alpha, start=start)
        if not report.ok:
            if config.allow_nonstationary:
                logger.warning("stationarity gate: %d failing columns kept", len(report.failures))
            else:
                raise NonStationaryError(report)

    ds = Dataset(dataset_id, frame, info, start, fit_end, std_stats, report,
                 prev["close"], prev["closeprev"], base.ema)
    if target_kind is not None:
        ds = attach_target(ds, target_kind, config.ema_n)
    return ds


def attach_target(ds: Dataset, kind: str, ema_period: int = 14) -> Dataset:
    y, spec = tf.make_target(ds.close, ds.closeprev, kind, ema_period, (ds.start, ds.fit_end))
    frame = ds.frame.with_columns([y]).with_target(y.name)
    return replace(ds, frame=frame, target=y, target_spec=spec)
