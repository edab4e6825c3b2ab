"""Forecast metrics, the random-walk baseline and report files."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import transforms as tf

logger = logging.getLogger(__name__)

# a forecast of "no change" is scored as a coin flip
RW_DA_CONVENTION = 0.5


class EvaluationError(ValueError):
    pass


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise EvaluationError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    ok = np.isfinite(p) & np.isfinite(a)
    if not ok.any():
        raise EvaluationError("no defined (prediction, actual) pairs")
    return p[ok], a[ok]


def mae(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.mean(np.abs(p - a)))


def rmse(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(math.sqrt(np.mean((p - a) ** 2)))


def directional_accuracy(pred_price, actual_price, prior_price) -> float:
    """Share of rows where the forecast moves the same way as the market.

    Signs are taken in {-1, 0, +1}, so a flat forecast only scores on a flat day.
    """
    p = np.asarray(pred_price, dtype=np.float64).ravel()
    a = np.asarray(actual_price, dtype=np.float64).ravel()
    q = np.asarray(prior_price, dtype=np.float64).ravel()
    if not (p.shape == a.shape == q.shape):
        raise EvaluationError("directional_accuracy needs aligned arrays")
    ok = np.isfinite(p) & np.isfinite(a) & np.isfinite(q)
    if not ok.any():
        raise EvaluationError("directional_accuracy of empty input")
    hit = np.sign(p[ok] - q[ok]) == np.sign(a[ok] - q[ok])
    return float(hit.mean())


def random_walk_forecast(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=np.float64)
    out = np.full(p.shape, np.nan)
    out[1:] = p[:-1]
    return out


def relative_improvement(model_metric: float, rw_metric: float, higher_is_better: bool = False) -> float:
    """Percent improvement over the random walk (error metrics shrink, DA grows)."""
    if rw_metric == 0:
        raise EvaluationError("zero random-walk metric")
    if higher_is_better:
        return 100.0 * (model_metric - rw_metric) / rw_metric
    return 100.0 * (rw_metric - model_metric) / rw_metric


def relative_vs_benchmark(model_metric: float, bench_metric: float, rw_metric: float,
                          higher_is_better: bool = False) -> float:
    """How much further from the random walk the model gets than the benchmark does."""
    if higher_is_better:
        dm, db = model_metric - rw_metric, bench_metric - rw_metric
    else:
        dm, db = rw_metric - model_metric, rw_metric - bench_metric
    if db == 0:
        raise EvaluationError("benchmark equals the random walk; ratio undefined")
    return 100.0 * (dm - db) / db


def training_efficiency(mae_value: float, seconds: float) -> float:
    if mae_value < 0 or seconds < 0:
        raise EvaluationError("efficiency inputs must be non-negative")
    return mae_value ** 2 * seconds


def parse_duration(text: str) -> int:
    """'9h 9m' -> 32940 seconds."""
    total = 0
    for part in text.split():
        unit = part[-1]
        if unit not in "hms" or not part[:-1].isdigit():
            raise EvaluationError(f"bad duration {text!r}")
        total += int(part[:-1]) * {"h": 3600, "m": 60, "s": 1}[unit]
    return total


@dataclass
class EvalReport:
    label: str
    n: int
    mae: float
    rmse: float
    da: float
    rw_mae: float
    rw_rmse: float
    rw_da: float = RW_DA_CONVENTION
    rw_da_strict: float = float("nan")
    train_seconds: float | None = None
    relative: dict = field(default_factory=dict)
    efficiency: float | None = None
    dates: np.ndarray | None = None
    actual: np.ndarray | None = None
    predicted: np.ndarray | None = None
    importance: list = field(default_factory=list)

    @property
    def residuals(self) -> np.ndarray:
        return self.actual - self.predicted

    def summary(self) -> dict:
        """Metrics only; wall-clock time is kept out so reports are reproducible."""
        return {
            "label": self.label,
            "n_test": self.n,
            "da": self.da,
            "mae": self.mae,
            "rmse": self.rmse,
            "rw_da": self.rw_da,
            "rw_da_strict": self.rw_da_strict,
            "rw_mae": self.rw_mae,
            "rw_rmse": self.rw_rmse,
            "relative_vs_rw": self.relative,
        }


def score_forecast(label: str, predicted, actual, prior, dates=None, train_seconds=None,
                   importance=None) -> EvalReport:
    """Score price forecasts and the random walk on exactly the same rows."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if not (predicted.shape == actual.shape == prior.shape):
        raise EvaluationError("forecast, actual and prior prices must align")
    rw = prior  # the random walk forecast of row t is the close of t-1
    ok = np.isfinite(predicted) & np.isfinite(actual) & np.isfinite(prior)
    if not ok.all():
        raise EvaluationError(f"{int((~ok).sum())} undefined rows in the scored range")
    m, r = mae(predicted, actual), rmse(predicted, actual)
    da = directional_accuracy(predicted, actual, prior)
    rw_m, rw_r = mae(rw, actual), rmse(rw, actual)
    rel = {
        "da": relative_improvement(da, RW_DA_CONVENTION, higher_is_better=True),
        "mae": relative_improvement(m, rw_m) if rw_m > 0 else float("nan"),
        "rmse": relative_improvement(r, rw_r) if rw_r > 0 else float("nan"),
    }
    eff = training_efficiency(m, train_seconds) if train_seconds is not None else None
    return EvalReport(label, len(actual), m, r, da, rw_m, rw_r, RW_DA_CONVENTION,
                      directional_accuracy(rw, actual, prior), train_seconds, rel, eff,
                      None if dates is None else np.asarray(dates), actual, predicted,
                      list(importance or []))


def forecast_prices(model, dataset, rows: slice) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Model price forecasts, actual closes and prior closes over ``rows``."""
    from .gbdt import predict

    spec = model.target_spec or dataset.target_spec
    if spec is None:
        raise EvaluationError("model has no target transform to invert")
    sub = dataset.frame.select(model.feature_names)
    X = sub.matrix(model.feature_names)[rows]
    raw = predict(model, X)
    prior = dataset.closeprev.values[rows]
    ema = dataset.ema.values[rows]
    price = tf.invert_target(raw, prior, ema, spec)
    return price, dataset.close.values[rows], prior


def write_residuals(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "actual", "predicted", "residual"])
        dates = report.dates if report.dates is not None else np.arange(report.n)
        for d, a, p in zip(dates, report.actual, report.predicted):
            w.writerow([str(d), repr(float(a)), repr(float(p)), repr(float(a - p))])


def write_importance(importance, path) -> None:
    rows = sorted(importance, key=lambda t: (-t[2], -t[1], t[0]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "split_count", "gain"])
        for name, count, gain in rows:
            w.writerow([name, int(count), repr(float(gain))])


def emit_report(report: EvalReport, out_dir) -> dict:
    """Write residuals.csv, importance.csv and report.json; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "residuals": out / "residuals.csv",
        "importance": out / "importance.csv",
        "report": out / "report.json",
    }
    write_residuals(report, paths["residuals"])
    write_importance(report.importance, paths["importance"])
    paths["report"].write_text(json.dumps(report.summary(), sort_keys=True, indent=1) + "\n",
                               encoding="utf-8")
    return paths


TABLE_COLUMNS = ("method", "train_seconds", "da", "mae", "rmse")


def write_table(rows: list[dict], path) -> None:
    """Matrix summary with one line per configuration plus the random walk."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for r in rows:
            w.writerow([r["method"], "" if r.get("train_seconds") is None else f"{r['train_seconds']:.3f}",
                        f"{100 * r['da']:.2f}%", f"{r['mae']:.6f}", f"{r['rmse']:.6f}"])
