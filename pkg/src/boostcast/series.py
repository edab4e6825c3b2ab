"""OHLCV ingestion and the aligned column containers used everywhere else.

Undefined values are stored as NaN. Each :class:`Series` also records its
``warmup``, the length of the leading region where its formula lacks history.
Interior NaNs are allowed (zero-denominator positions); they are treated as
missing by the tree engine.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CSV_HEADER = ["Date", "Open", "High", "Low", "Close", "Volume"]


class DataError(ValueError):
    """Raised for malformed or inconsistent market data."""


@dataclass(frozen=True)
class Bar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def validate(self) -> None:
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise DataError(f"{self.date}: prices must be > 0")
        if self.volume < 0:
            raise DataError(f"{self.date}: negative volume")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DataError(f"{self.date}: high/low do not bracket open/close")


def _first_finite(values: np.ndarray) -> int:
    finite = np.flatnonzero(np.isfinite(values))
    return int(finite[0]) if finite.size else len(values)


@dataclass(frozen=True)
class Series:
    name: str
    values: np.ndarray
    warmup: int = -1

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        vals[~np.isfinite(vals)] = np.nan
        # warmup is never shorter than the leading undefined run
        warmup = min(max(int(self.warmup), _first_finite(vals)), len(vals))
        vals[:warmup] = np.nan
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "warmup", warmup)

    def __len__(self) -> int:
        return len(self.values)

    def rename(self, name: str) -> "Series":
        return Series(name, self.values, self.warmup)

    @property
    def defined(self) -> np.ndarray:
        return self.values[np.isfinite(self.values)]


def as_series(name: str, values, warmup: int = 0) -> Series:
    return Series(name, np.asarray(values, dtype=np.float64), warmup)


@dataclass(frozen=True)
class Frame:
    index: np.ndarray
    columns: dict = field(default_factory=dict)
    target_name: str | None = None

    def __post_init__(self):
        idx = np.asarray(self.index, dtype="datetime64[D]").copy()
        idx.flags.writeable = False
        object.__setattr__(self, "index", idx)
        cols = dict(self.columns)
        for name, s in cols.items():
            if len(s) != len(idx):
                raise DataError(f"column {name!r} has length {len(s)}, index has {len(idx)}")
            if s.name != name:
                cols[name] = s.rename(name)
        object.__setattr__(self, "columns", cols)
        if self.target_name is not None and self.target_name not in cols:
            raise DataError(f"target column {self.target_name!r} not in frame")

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, name: str) -> Series:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"missing column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def effective_start(self) -> int:
        if not self.columns:
            return 0
        return max(s.warmup for s in self.columns.values())

    def with_columns(self, series: Iterable[Series], replace: bool = False) -> "Frame":
        cols = dict(self.columns)
        for s in series:
            if s.name in cols and not replace:
                raise DataError(f"duplicate column name {s.name!r}")
            cols[s.name] = s
        return Frame(self.index, cols, self.target_name)

    def select(self, names: Sequence[str], target_name: str | None = None) -> "Frame":
        return Frame(self.index, {n: self[n] for n in names}, target_name)

    def with_target(self, name: str | None) -> "Frame":
        return Frame(self.index, self.columns, name)

    def head(self, k: int) -> "Frame":
        cols = {n: Series(n, s.values[:k], min(s.warmup, k)) for n, s in self.columns.items()}
        return Frame(self.index[:k], cols, self.target_name)

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else names
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self[n].values for n in names])

    def to_csv(self, path, names: Sequence[str] | None = None) -> None:
        names = self.names if names is None else list(names)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["date", *names])
            mat = self.matrix(names)
            for d, row in zip(self.index, mat):
                w.writerow([str(d), *("" if not np.isfinite(v) else repr(float(v)) for v in row)])


def read_frame_csv(path, target_name: str | None = None) -> Frame:
    """Inverse of :meth:`Frame.to_csv` (empty cells become NaN)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "date":
        raise DataError(f"{path}: expected a 'date' index column")
    names = rows[0][1:]
    index = np.array([r[0] for r in rows[1:]], dtype="datetime64[D]")
    data = np.array([[float(v) if v else np.nan for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    data = data.reshape(len(index), len(names))
    cols = {n: Series(n, data[:, j]) for j, n in enumerate(names)}
    return Frame(index, cols, target_name)


def load_bars(path) -> list[Bar]:
    """Read a ``Date,Open,High,Low,Close,Volume`` CSV into validated bars."""
    path = Path(path)
    bars: list[Bar] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DataError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise DataError(f"{path}: row {lineno}: expected 6 fields, got {len(row)}")
            try:
                bar = Bar(dt.date.fromisoformat(row[0].strip()), *(float(c) for c in row[1:]))
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from None
            try:
                bar.validate()
            except DataError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from None
            if bars and bar.date <= bars[-1].date:
                raise DataError(f"{path}: row {lineno}: non-monotonic date {bar.date}")
            bars.append(bar)
    return bars


def write_bars(bars: Sequence[Bar], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for b in bars:
            w.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low),
                        repr(b.close), repr(b.volume)])


def bars_from_arrays(dates, open_, high, low, close, volume) -> list[Bar]:
    bars = []
    for d, o, h, l, c, v in zip(dates, open_, high, low, close, volume):
        if isinstance(d, np.datetime64):
            d = d.astype("datetime64[D]").item()
        bar = Bar(d, float(o), float(h), float(l), float(c), float(v))
        bar.validate()
        bars.append(bar)
    for a, b in zip(bars, bars[1:]):
        if b.date <= a.date:
            raise DataError(f"non-monotonic date {b.date}")
    return bars


def shift(s: Series, k: int, name: str | None = None) -> Series:
    """Delay a series by ``k`` steps; the first ``k`` entries become undefined."""
    out = np.full(len(s), np.nan)
    if k < len(s):
        out[k:] = s.values[: len(s) - k]
    return Series(name or s.name, out, s.warmup + k)


def shift_prev(bars: Sequence[Bar]) -> Frame:
    """Same-day open/close plus previous-day OHLCV columns.

    ``close`` is kept only as the target source; no feature may read it.
    """
    if len(bars) < 2:
        raise DataError("need at least 2 bars")
    index = np.array([b.date for b in bars], dtype="datetime64[D]")
    raw = {
        "open": np.array([b.open for b in bars]),
        "high": np.array([b.high for b in bars]),
        "low": np.array([b.low for b in bars]),
        "close": np.array([b.close for b in bars]),
        "volume": np.array([b.volume for b in bars]),
    }
    cols = {"open": Series("open", raw["open"])}
    for key in ("open", "high", "low", "close", "volume"):
        cols[f"{key}prev"] = shift(Series(key, raw[key]), 1, f"{key}prev")
    cols["close"] = Series("close", raw["close"])
    return Frame(index, cols)


def align(frames: Sequence[Frame]) -> Frame:
    if not frames:
        raise DataError("nothing to align")
    base = frames[0]
    cols: dict[str, Series] = {}
    for f in frames:
        if len(f.index) != len(base.index) or not np.array_equal(f.index, base.index):
            raise DataError("frames do not share the same date index")
        for name, s in f.columns.items():
            if name in cols:
                raise DataError(f"duplicate column name {name!r}")
            cols[name] = s
    return Frame(base.index, cols, base.target_name)
