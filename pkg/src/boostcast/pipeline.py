"""End-to-end runs: features, tuning, final fit, holdout scoring, files."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import gbdt
from .config import MATRIX, RunConfig
from .features import Dataset, assemble_dataset
from .series import Frame, load_bars, shift_prev
from .tuning import SplitPlan, Trial, final_iterations, make_splits, run_search, write_ledger

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    config: RunConfig
    dataset: Dataset
    plan: SplitPlan
    best: Trial
    trials: list
    model: gbdt.BoostedModel
    report: ev.EvalReport
    train_seconds: float
    tune_seconds: float
    paths: dict


def load_prev(path) -> Frame:
    return shift_prev(load_bars(path))


def build_dataset(prev: Frame, cfg: RunConfig) -> Dataset:
    return assemble_dataset(prev, cfg.dataset, cfg.feature_config(), target_kind=cfg.target_transform)


def design(ds: Dataset) -> tuple[np.ndarray, np.ndarray, list]:
    """Feature matrix and target over the usable rows (from ``ds.start``)."""
    names = ds.feature_names
    X = ds.frame.matrix(names)[ds.start:]
    y = ds.target.values[ds.start:]
    if not np.all(np.isfinite(y)):
        raise ValueError("target undefined inside the usable range")
    return X, y, names


def plan_for(ds: Dataset, cfg: RunConfig) -> SplitPlan:
    plan = make_splits(ds.n_rows, cfg.holdout_fraction)
    # feature statistics were fitted on exactly the tuning region
    if not cfg.full_stats and ds.start + plan.train_range[1] != ds.fit_end:
        raise AssertionError("feature fit range and split plan disagree")
    return plan


def tune(ds: Dataset, cfg: RunConfig, plan: SplitPlan | None = None):
    X, y, _ = design(ds)
    plan = plan or plan_for(ds, cfg)
    return run_search(X, y, plan, cfg.trials, cfg.seed, base=cfg.boost, objective=cfg.objective,
                      n_jobs=cfg.n_jobs)


def fit_final(ds: Dataset, params: gbdt.BoostParams, plan: SplitPlan) -> tuple[gbdt.BoostedModel, float]:
    """Refit on the whole training region; returns the model and the train-call seconds."""
    X, y, names = design(ds)
    hi = plan.train_range[1]
    t0 = time.perf_counter()
    model = gbdt.train(X[:hi], y[:hi], params, feature_names=names, target_spec=ds.target_spec)
    return model, time.perf_counter() - t0


def final_params(best: Trial) -> gbdt.BoostParams:
    return replace(best.params, num_iterations=final_iterations(best))


def score_holdout(model: gbdt.BoostedModel, ds: Dataset, plan: SplitPlan, label: str,
                  train_seconds: float | None = None) -> ev.EvalReport:
    lo, hi = plan.test_range
    rows = slice(ds.start + lo, ds.start + hi)
    price, actual, prior = ev.forecast_prices(model, ds, rows)
    return ev.score_forecast(label, price, actual, prior, dates=ds.frame.index[rows],
                             train_seconds=train_seconds, importance=gbdt.feature_importance(model))


def label_for(cfg: RunConfig) -> str:
    for d, t, label in MATRIX:
        if d == cfg.dataset and t == cfg.target_transform:
            return label
    return f"{cfg.dataset} {cfg.target_transform}"


def run(prev: Frame, cfg: RunConfig, out_dir=None) -> RunResult:
    """Tune, refit and score one (dataset, target) configuration."""
    ds = build_dataset(prev, cfg)
    plan = plan_for(ds, cfg)
    t0 = time.perf_counter()
    best, trials = tune(ds, cfg, plan)
    tune_seconds = time.perf_counter() - t0
    params = final_params(best)
    model, seconds = fit_final(ds, params, plan)
    report = score_holdout(model, ds, plan, label_for(cfg), seconds)
    paths = {}
    if out_dir is not None:
        paths = write_outputs(Path(out_dir), ds, trials, best, params, model, report, seconds, tune_seconds)
    logger.info("%s: MAE %.6g (RW %.6g), DA %.4f", report.label, report.mae, report.rw_mae, report.da)
    return RunResult(cfg, ds, plan, best, trials, model, report, seconds, tune_seconds, paths)


def write_outputs(out: Path, ds: Dataset, trials, best: Trial, params, model, report, seconds,
                  tune_seconds) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    paths = {"model": out / "model.json", "ledger": out / "ledger.csv",
             "best_params": out / "best_params.json", "timing": out / "timing.json"}
    gbdt.save(model, paths["model"])
    write_ledger(trials, paths["ledger"])
    best_doc = {"trial": best.index, "mean_loss": best.mean_loss, "fold_losses": best.fold_losses,
                "fold_iterations": best.fold_iterations, "params": params.to_dict()}
    paths["best_params"].write_text(json.dumps(best_doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    # wall-clock numbers live apart from the reproducible artifacts
    paths["timing"].write_text(json.dumps({"train_seconds": seconds, "tune_seconds": tune_seconds},
                                          sort_keys=True, indent=1) + "\n", encoding="utf-8")
    paths.update(ev.emit_report(report, out))
    if ds.gate is not None:
        paths["gate"] = out / "stationarity.csv"
        ds.gate.to_csv(paths["gate"])
    return paths


def run_matrix(prev: Frame, cfg: RunConfig, out_dir) -> list[dict]:
    """All nine configurations plus the random-walk row, Table-4 style."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    rw = None
    for dataset, target, label in MATRIX:
        sub = replace(cfg, dataset=dataset, target_transform=target)
        res = run(prev, sub, out / f"{dataset}_{target}")
        r = res.report
        rows.append({"method": label, "train_seconds": r.train_seconds, "da": r.da, "mae": r.mae,
                     "rmse": r.rmse})
        rw = rw or {"method": "Random Walk", "train_seconds": None, "da": r.rw_da, "mae": r.rw_mae,
                    "rmse": r.rw_rmse}
        if (r.rw_mae, r.rw_rmse) != (rw["mae"], rw["rmse"]):
            raise AssertionError("matrix rows were scored on different test ranges")
    rows.append(rw)
    ev.write_table(rows, out / "summary.csv")
    return rows
