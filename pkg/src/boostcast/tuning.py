"""Rolling-origin folds and seeded random hyperparameter search."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .gbdt import BoostParams, ModelError, predict, train
from .gbdt.objective import loss_value

logger = logging.getLogger(__name__)

MIN_ROWS = 20


class TuningError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    n_rows: int
    holdout: tuple  # ((0, train_end), (train_end, n_rows))
    folds: tuple  # ((train_lo, train_hi), (valid_lo, valid_hi)) per fold

    @property
    def train_range(self) -> tuple:
        return self.holdout[0]

    @property
    def test_range(self) -> tuple:
        return self.holdout[1]

    def check(self) -> None:
        """Exhaustive leakage check: raise if any validation row is not after every training row."""
        train_end = self.holdout[0][1]
        for (tl, th), (vl, vh) in self.folds:
            tr = np.arange(tl, th)
            va = np.arange(vl, vh)
            if tr.size == 0 or va.size == 0:
                raise TuningError("empty fold")
            if np.intersect1d(tr, va).size:
                raise TuningError("fold train and validation overlap")
            if va.min() <= tr.max():
                raise TuningError("validation row precedes a training row")
            if vh > train_end or th > train_end:
                raise TuningError("fold reaches into the holdout test range")


def make_splits(n_rows: int, holdout_fraction: float = 0.8, n_segments: int = 4) -> SplitPlan:
    """Holdout at floor(0.8 n); the training part is cut into equal segments
    (remainder to the last) and fold k trains on segments 1..k, validates on k+1."""
    if n_rows < MIN_ROWS:
        raise TuningError(f"need at least {MIN_ROWS} rows, got {n_rows}")
    train_end = int(math.floor(holdout_fraction * n_rows))
    seg = train_end // n_segments
    if seg < 1:
        raise TuningError("training region too short for the fold layout")
    bounds = [i * seg for i in range(n_segments)] + [train_end]
    folds = tuple(((0, bounds[k]), (bounds[k], bounds[k + 1])) for k in range(1, n_segments))
    plan = SplitPlan(n_rows, ((0, train_end), (train_end, n_rows)), folds)
    plan.check()
    return plan


# (kind, low, high); ranges of the hyperparameter search
DEFAULT_SPACES = {
    "num_iterations": ("int", 500, 2200),
    "learning_rate": ("log", 1e-5, 0.02),
    "num_leaves": ("int", 10, 80),
    "max_depth": ("int", -1, 30),
    "lambda_l1": ("log", 1e-8, 1e-3),
    "lambda_l2": ("log", 1e-6, 10.0),
    "max_bin": ("int", 125, 750),
}


def sample_params(spaces: dict, rng, base: BoostParams | None = None) -> BoostParams:
    """One draw: integers uniform on inclusive ranges, 'log' spaces log-uniform."""
    base = base or BoostParams()
    draws = {}
    for name in sorted(spaces):
        kind, lo, hi = spaces[name]
        if kind == "int":
            draws[name] = int(rng.integers(lo, hi + 1))
        elif kind == "log":
            draws[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        elif kind == "uniform":
            draws[name] = float(rng.uniform(lo, hi))
        else:
            raise TuningError(f"unknown space kind {kind!r} for {name}")
    return replace(base, **draws)


@dataclass
class Trial:
    index: int
    params: BoostParams
    fold_losses: list = field(default_factory=list)
    fold_iterations: list = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None

    @property
    def mean_loss(self) -> float:
        if self.error or not self.fold_losses:
            return math.inf
        return float(np.mean(self.fold_losses))


def _fold_loss(model, Xv, yv, objective: str) -> float:
    pred = predict(model, Xv)
    if objective == "mae":
        return float(np.mean(np.abs(pred - yv)))
    return float(np.mean(loss_value(pred, yv, model.params.loss_power)))


def run_trial(index: int, params: BoostParams, X, y, plan: SplitPlan, objective: str = "loss") -> Trial:
    trial = Trial(index, params)
    t0 = time.perf_counter()
    try:
        for (tl, th), (vl, vh) in plan.folds:
            model = train(X[tl:th], y[tl:th], params, valid=(X[vl:vh], y[vl:vh]))
            trial.fold_losses.append(_fold_loss(model, X[vl:vh], y[vl:vh], objective))
            trial.fold_iterations.append(model.best_iteration)
    except (ModelError, ValueError) as exc:
        trial.error = str(exc)
        logger.warning("trial %d failed: %s", index, exc)
    trial.seconds = time.perf_counter() - t0
    return trial


def _run_trial_args(args):
    return run_trial(*args)


def draw_trials(n_trials: int, seed: int, spaces: dict | None = None,
                base: BoostParams | None = None) -> list[BoostParams]:
    """The parameter sequence depends only on (seed, spaces, base)."""
    spaces = spaces or DEFAULT_SPACES
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_trials):
        p = sample_params(spaces, rng, base)
        out.append(replace(p, seed=int(rng.integers(0, 2**31 - 1))))
    return out


def run_search(X, y, plan: SplitPlan, n_trials: int = 25, seed: int = 0, spaces: dict | None = None,
               base: BoostParams | None = None, objective: str = "loss", n_jobs: int = 1):
    """Evaluate ``n_trials`` random draws on every fold.

    Only rows of ``plan.train_range`` are ever handed to the learner. Returns
    (best trial, all trials in index order); ties go to the earlier trial.
    """
    if n_trials < 1:
        raise TuningError("n_trials must be >= 1")
    if objective not in ("loss", "mae"):
        raise TuningError(f"unknown objective {objective!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) != plan.n_rows or len(y) != plan.n_rows:
        raise TuningError("data length does not match the split plan")
    plan.check()
    train_end = plan.train_range[1]
    # the holdout rows are cut off before anything reaches the learner
    Xt, yt = X[:train_end], y[:train_end]
    params = draw_trials(n_trials, seed, spaces, base)
    jobs = [(i, p, Xt, yt, plan, objective) for i, p in enumerate(params)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            trials = list(ex.map(_run_trial_args, jobs))
    else:
        trials = [run_trial(*j) for j in jobs]
    best = None
    for t in trials:
        logger.info("trial %d: mean loss %.6g (%.1fs)", t.index, t.mean_loss, t.seconds)
        if t.error is None and (best is None or t.mean_loss < best.mean_loss):
            best = t
    if best is None:
        raise TuningError("all trials failed")
    return best, trials


def final_iterations(trial: Trial) -> int:
    """Rounds for the refit on the whole training region: mean of the fold optima."""
    its = [i for i in trial.fold_iterations]
    return max(1, int(round(float(np.mean(its))))) if its else trial.params.num_iterations


LEDGER_PARAMS = tuple(DEFAULT_SPACES) + ("seed",)


def ledger_rows(trials: list[Trial]) -> list[dict]:
    rows = []
    best = math.inf
    for t in trials:
        best = min(best, t.mean_loss)
        row = {"trial": t.index}
        for k in LEDGER_PARAMS:
            row[k] = getattr(t.params, k)
        for j in range(3):
            row[f"fold{j + 1}_loss"] = t.fold_losses[j] if j < len(t.fold_losses) else ""
            row[f"fold{j + 1}_iterations"] = t.fold_iterations[j] if j < len(t.fold_iterations) else ""
        row["mean_loss"] = t.mean_loss
        row["best_so_far"] = best
        row["error"] = t.error or ""
        row["seconds"] = round(t.seconds, 3)
        rows.append(row)
    return rows


def write_ledger(trials: list[Trial], path) -> None:
    rows = ledger_rows(trials)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
