"""Command line entry point.

Every failure prints one line ``error[<kind>]: <message>`` to stderr and exits
with a nonzero status.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, gbdt, pipeline
from .config import ENV_PREFIX, ConfigError, RunConfig, resolve
from .features import NonStationaryError
from .series import DataError, load_bars, shift_prev, write_bars
from .stationarity import StationarityError
from .synthetic import SyntheticSpec, generate_bars
from .transforms import TransformError
from .tuning import TuningError, write_ledger

logger = logging.getLogger("boostcast")

EXIT = {"config": 2, "data": 3, "stationarity": 4, "model": 5, "tuning": 6, "io": 7}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _config(args) -> RunConfig:
    flags = {
        "data": getattr(args, "data", None),
        "dataset": getattr(args, "dataset", None),
        "target_transform": getattr(args, "target_transform", None),
        "trials": getattr(args, "trials", None),
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "n_jobs": getattr(args, "jobs", None),
        "objective": getattr(args, "objective", None),
    }
    if getattr(args, "full_stats", False):
        flags["full_stats"] = True
    if getattr(args, "allow_nonstationary", False):
        flags["allow_nonstationary"] = True
    return resolve(args.config, overrides=flags)


def _prev(cfg: RunConfig):
    if not cfg.data:
        raise CliError("config", "no input data; pass --data or set 'data' in the config")
    return pipeline.load_prev(cfg.data)


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_ingest(args) -> int:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    if args.synthetic:
        bars = generate_bars(SyntheticSpec(n=args.synthetic, seed=args.seed if args.seed is not None else 7))
    else:
        if not args.data:
            raise CliError("config", "ingest needs --data or --synthetic N")
        bars = load_bars(args.data)
    shift_prev(bars)
    path = out / "bars.csv"
    write_bars(bars, path)
    print(f"ingested {len(bars)} bars {bars[0].date} .. {bars[-1].date} -> {path}")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    prev = _prev(cfg)
    out = _out(cfg)
    try:
        ds = pipeline.build_dataset(prev, cfg)
    except NonStationaryError as exc:
        exc.report.to_csv(out / "stationarity.csv")
        raise
    names = ds.feature_names + [ds.frame.target_name]
    ds.frame.to_csv(out / "features.csv", names)
    if ds.gate is not None:
        ds.gate.to_csv(out / "stationarity.csv")
    print(f"{cfg.dataset}: {len(ds.feature_names)} features, rows {ds.start}..{len(ds.frame)} -> {out / 'features.csv'}")
    return 0


def cmd_stationarity(args) -> int:
    cfg = replace(_config(args), allow_nonstationary=True)
    prev = _prev(cfg)
    out = _out(cfg)
    ds = pipeline.build_dataset(prev, cfg)
    ds.gate.to_csv(out / "stationarity.csv")
    fails = ds.gate.failures
    print(f"{len(ds.gate.rows) - len(fails)}/{len(ds.gate.rows)} columns pass"
          + (f"; failing: {', '.join(fails)}" if fails else ""))
    return 0


def cmd_tune(args) -> int:
    cfg = _config(args)
    prev = _prev(cfg)
    out = _out(cfg)
    ds = pipeline.build_dataset(prev, cfg)
    best, trials = pipeline.tune(ds, cfg)
    write_ledger(trials, out / "ledger.csv")
    params = pipeline.final_params(best)
    doc = {"trial": best.index, "mean_loss": best.mean_loss, "fold_losses": best.fold_losses,
           "fold_iterations": best.fold_iterations, "params": params.to_dict()}
    (out / "best_params.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"best trial {best.index}: mean loss {best.mean_loss:.6g} -> {out / 'best_params.json'}")
    return 0


def _read_params(path) -> gbdt.BoostParams:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("io", f"cannot read params file {path}: {exc}") from None
    return gbdt.BoostParams.from_dict(d.get("params", d))


def cmd_train(args) -> int:
    cfg = _config(args)
    prev = _prev(cfg)
    out = _out(cfg)
    ds = pipeline.build_dataset(prev, cfg)
    plan = pipeline.plan_for(ds, cfg)
    if args.params:
        params = _read_params(args.params)
    else:
        best, trials = pipeline.tune(ds, cfg, plan)
        write_ledger(trials, out / "ledger.csv")
        params = pipeline.final_params(best)
    model, seconds = pipeline.fit_final(ds, params, plan)
    gbdt.save(model, out / "model.json")
    (out / "timing.json").write_text(json.dumps({"train_seconds": seconds}, indent=1) + "\n", encoding="utf-8")
    print(f"trained {model.n_trees} trees in {seconds:.2f}s -> {out / 'model.json'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    prev = _prev(cfg)
    model = gbdt.load(args.model)
    out = _out(cfg)
    ds = pipeline.build_dataset(prev, cfg)
    if model.target_spec is not None and model.target_spec.kind != cfg.target_transform:
        raise CliError("model", f"model was trained on target {model.target_spec.kind}, "
                                f"config asks for {cfg.target_transform}")
    missing = [n for n in model.feature_names if n not in ds.frame]
    if missing:
        raise CliError("model", f"missing feature column: {missing[0]}")
    plan = pipeline.plan_for(ds, cfg)
    seconds = None
    timing = Path(args.model).with_name("timing.json")
    if timing.exists():
        seconds = json.loads(timing.read_text(encoding="utf-8")).get("train_seconds")
    report = pipeline.score_holdout(model, ds, plan, pipeline.label_for(cfg), seconds)
    from .evaluation import emit_report
    emit_report(report, out)
    print(f"{report.label}: MAE {report.mae:.6g} RMSE {report.rmse:.6g} DA {100 * report.da:.2f}% "
          f"(RW MAE {report.rw_mae:.6g} RMSE {report.rw_rmse:.6g})")
    return 0


def cmd_matrix(args) -> int:
    cfg = _config(args)
    prev = _prev(cfg)
    rows = pipeline.run_matrix(prev, cfg, _out(cfg))
    for r in rows:
        print(f"{r['method']:<40} DA {100 * r['da']:6.2f}%  MAE {r['mae']:.6g}  RMSE {r['rmse']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run config")
    common.add_argument("--data", help="OHLCV CSV (Date,Open,High,Low,Close,Volume)")
    common.add_argument("--dataset", choices=("DS1", "DS2", "DS3", "DS4"))
    common.add_argument("--target-transform", dest="target_transform")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel tuning trials")
    common.add_argument("--objective", choices=("loss", "mae"))
    common.add_argument("--full-stats", action="store_true", help="fit feature statistics on all rows")
    common.add_argument("--allow-nonstationary", action="store_true",
                        help="keep columns that fail the ADF/KPSS gate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="boostcast",
        description=f"Daily close forecasting with boosted trees. Environment overrides use the {ENV_PREFIX} prefix.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("ingest", parents=[common], help="validate a bar file (or make a synthetic one)")
    p.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic bars instead")
    p.set_defaults(func=cmd_ingest)
    sub.add_parser("features", parents=[common], help="write the feature matrix").set_defaults(func=cmd_features)
    sub.add_parser("stationarity", parents=[common], help="ADF/KPSS gate report").set_defaults(func=cmd_stationarity)
    sub.add_parser("tune", parents=[common], help="random search over the fold plan").set_defaults(func=cmd_tune)
    p = sub.add_parser("train", parents=[common], help="fit the final model")
    p.add_argument("--params", help="best_params.json from 'tune' (otherwise tunes first)")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("evaluate", parents=[common], help="score a model on the holdout")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_evaluate)
    sub.add_parser("matrix", parents=[common], help="run all nine configurations").set_defaults(func=cmd_matrix)
    return parser


def _kind(exc: Exception) -> str:
    if isinstance(exc, CliError):
        return exc.kind
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, NonStationaryError):
        return "stationarity"
    if isinstance(exc, gbdt.ModelError):
        return "model"
    if isinstance(exc, TuningError):
        return "tuning"
    if isinstance(exc, (DataError, TransformError, StationarityError)):
        return "data"
    if isinstance(exc, OSError):
        return "io"
    return "data"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError, OSError) as exc:
        kind = _kind(exc)
        msg = " ".join(str(exc).split())
        print(f"error[{kind}]: {msg}", file=sys.stderr)
        return EXIT.get(kind, 1)


if __name__ == "__main__":
    sys.exit(main())
