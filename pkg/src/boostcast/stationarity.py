"""ADF and KPSS tests and the per-column stationarity gate."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .series import Frame, Series

# MacKinnon (2010) response surface, constant-only regression, one series:
# crit(T) = b0 + b1/T + b2/T^2 + b3/T^3
ADF_CRIT_SURFACE = {
    0.01: (-3.43035, -6.5393, -16.786, -79.433),
    0.05: (-2.86154, -2.8903, -4.234, -40.040),
    0.10: (-2.56677, -1.5384, -2.809, 0.0),
}

# Kwiatkowski et al. (1992), level stationarity
KPSS_CRIT_LEVEL = {0.10: 0.347, 0.05: 0.463, 0.025: 0.574, 0.01: 0.739}

MIN_LENGTH = 25


class StationarityError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    critical_values: dict
    lags_or_bandwidth: int
    reject_null: bool
    alpha: float = 0.05
    nobs: int = 0

    __test__ = False  # not a pytest class


def _defined(x) -> np.ndarray:
    vals = x.values if isinstance(x, Series) else np.asarray(x, dtype=np.float64)
    return vals[np.isfinite(vals)]


def adf_critical_values(nobs: int) -> dict:
    return {a: b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
            for a, (b0, b1, b2, b3) in ADF_CRIT_SURFACE.items()}


def schwert_lag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(x, max_lag: int | None = None, alpha: float = 0.05) -> TestResult:
    """Constant-only augmented Dickey-Fuller test with a fixed lag order.

    Regresses dy_t on (1, y_{t-1}, dy_{t-1}, ..., dy_{t-p}); the statistic is
    the t-value of the y_{t-1} coefficient. Null: unit root.
    """
    y = _defined(x)
    n = len(y)
    if n < MIN_LENGTH:
        raise StationarityError(f"ADF needs at least {MIN_LENGTH} values, got {n}")
    p = schwert_lag(n) if max_lag is None else int(max_lag)
    if p < 0 or p > n // 2 - 2:
        raise StationarityError(f"lag {p} too large for {n} observations")
    dy = np.diff(y)
    nobs = len(dy) - p
    cols = [np.ones(nobs), y[p:-1]]
    for i in range(1, p + 1):
        cols.append(dy[p - i:len(dy) - i])
    X = np.column_stack(cols)
    z = dy[p:]
    xtx = X.T @ X
    try:
        xtx_inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError:
        raise StationarityError("singular ADF regression") from None
    if not np.all(np.isfinite(xtx_inv)) or np.linalg.cond(xtx) > 1e14:
        raise StationarityError("singular ADF regression")
    beta = xtx_inv @ (X.T @ z)
    resid = z - X @ beta
    dof = nobs - X.shape[1]
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 * xtx_inv[1, 1])
    if se == 0:
        raise StationarityError("singular ADF regression (perfect fit)")
    stat = float(beta[1] / se)
    crit = adf_critical_values(nobs)
    return TestResult(stat, crit, p, bool(stat < crit[alpha]), alpha, nobs)


def kpss_bandwidth(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_test(x, bandwidth: int | None = None, alpha: float = 0.05) -> TestResult:
    """Level-stationarity KPSS test with a Bartlett long-run variance. Null: stationary."""
    y = _defined(x)
    n = len(y)
    if n < MIN_LENGTH:
        raise StationarityError(f"KPSS needs at least {MIN_LENGTH} values, got {n}")
    lags = kpss_bandwidth(n) if bandwidth is None else int(bandwidth)
    e = y - y.mean()
    s = np.cumsum(e)
    lrv = float(e @ e)
    for k in range(1, lags + 1):
        lrv += 2.0 * (1.0 - k / (lags + 1.0)) * float(e[k:] @ e[:-k])
    lrv /= n
    if not lrv > 0:
        raise StationarityError("zero long-run variance")
    stat = float(s @ s) / (n * n * lrv)
    return TestResult(stat, dict(KPSS_CRIT_LEVEL), lags, bool(stat > KPSS_CRIT_LEVEL[alpha]), alpha, n)


@dataclass
class GateRow:
    column: str
    adf_stat: float
    kpss_stat: float
    passed: bool
    note: str = ""


@dataclass
class GateReport:
    alpha: float
    rows: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r.column for r in self.rows if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["column", "adf_stat", "kpss_stat", "pass"])
            for r in self.rows:
                w.writerow([r.column, repr(r.adf_stat), repr(r.kpss_stat), str(r.passed).lower()])


def gate_frame(frame: Frame, alpha: float = 0.05, start: int | None = None,
               columns=None) -> GateReport:
    """Pass a column when ADF rejects a unit root and KPSS does not reject stationarity.

    Only rows from ``start`` (default: the frame's effective start) are used.
    """
    start = frame.effective_start if start is None else start
    report = GateReport(alpha)
    for name in (frame.names if columns is None else columns):
        vals = frame[name].values[start:]
        try:
            adf = adf_test(vals, alpha=alpha)
            kpss = kpss_test(vals, alpha=alpha)
        except StationarityError as exc:
            report.rows.append(GateRow(name, float("nan"), float("nan"), False, str(exc)))
            continue
        report.rows.append(GateRow(name, adf.statistic, kpss.statistic,
                                   adf.reject_null and not kpss.reject_null))
    return report
