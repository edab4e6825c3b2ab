"""Training loop, prediction, importances and the model file format."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..transforms import TransformSpec
from . import _kernels as K
from .binning import BinMap, build_bins
from .objective import loss_grad_hess, loss_value
from .sampling import goss_sample

logger = logging.getLogger(__name__)

FORMAT_NAME = "boostcast-model"
FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class BoostParams:
    num_iterations: int = 1000
    learning_rate: float = 0.01
    num_leaves: int = 31
    max_depth: int = -1
    lambda_l1: float = 1e-6
    lambda_l2: float = 1e-3
    max_bin: int = 255
    min_data_in_leaf: int = 20
    goss_top_rate: float = 0.2
    goss_other_rate: float = 0.1
    loss_power: float = 3.0
    early_stopping_rounds: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.num_iterations < 0:
            raise ValueError("num_iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.lambda_l1 < 0 or self.lambda_l2 < 0:
            raise ValueError("regularisation must be >= 0")
        if self.max_bin < 2:
            raise ValueError("max_bin must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        a, b = self.goss_top_rate, self.goss_other_rate
        if not (0 < a <= 1 and 0 <= b and a + b <= 1 + 1e-12):
            raise ValueError("GOSS rates need 0 < a <= 1, b >= 0, a + b <= 1")
        if self.loss_power < 2:
            raise ValueError("loss_power must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BoostParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class Tree:
    feature: np.ndarray
    threshold_bin: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray
    depth: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        return K.predict_raw(np.ascontiguousarray(X, dtype=np.float64), self.feature, self.threshold,
                             self.missing_left, self.left, self.right, self.value)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold_bin": self.threshold_bin.tolist(),
            "threshold": [float(v) if np.isfinite(v) else None for v in self.threshold],
            "missing_left": [bool(v) for v in self.missing_left],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "gain": [float(v) for v in self.gain],
            "count": self.count.tolist(),
            "depth": self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold_bin"], dtype=np.int64),
            np.array([np.inf if v is None else v for v in d["threshold"]], dtype=np.float64),
            np.asarray(d["missing_left"], dtype=np.bool_),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["gain"], dtype=np.float64),
            np.asarray(d["count"], dtype=np.int64),
            np.asarray(d["depth"], dtype=np.int64),
        )


@dataclass
class BoostedModel:
    base_score: float
    learning_rate: float
    trees: list
    bins: BinMap
    feature_names: list
    params: BoostParams
    target_spec: TransformSpec | None = None
    best_iteration: int = 0
    valid_history: list = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def feature_importance(self) -> list[tuple[str, int, float]]:
        return feature_importance(self)


def split_gain(G_L, H_L, G_R, H_R, l1=0.0, l2=0.0) -> float:
    return float(K.split_gain(float(G_L), float(H_L), float(G_R), float(H_R), float(l1), float(l2)))


def leaf_value(G, H, l1=0.0, l2=0.0) -> float:
    return float(K.leaf_output(float(G), float(H), float(l1), float(l2)))


def _as_matrix(X, names=None) -> tuple[np.ndarray, list]:
    if hasattr(X, "matrix") and hasattr(X, "names"):
        names = list(names) if names is not None else [n for n in X.names if n != X.target_name]
        return np.ascontiguousarray(X.matrix(names), dtype=np.float64), names
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X, list(names) if names is not None else [f"f{j}" for j in range(X.shape[1])]


def _make_tree(raw, bins: BinMap) -> Tree:
    feat, thr, ml, left, right, value, gain, count, depth = raw
    thr_value = np.zeros(len(feat))
    for k in range(len(feat)):
        if feat[k] >= 0:
            b = bins.bounds[feat[k]]
            thr_value[k] = b[thr[k]] if thr[k] < len(b) else np.inf
    return Tree(feat.copy(), thr.copy(), thr_value, ml.copy(), left.copy(), right.copy(),
                value.copy(), gain.copy(), count.copy(), depth.copy())


def _sampling_active(params: BoostParams) -> bool:
    return params.goss_top_rate < 1.0


def train(X, y, params: BoostParams | None = None, valid=None, feature_names=None,
          target_spec: TransformSpec | None = None) -> BoostedModel:
    """Fit a boosted ensemble.

    ``X`` is a 2-D array or a Frame; ``valid`` an optional ``(X_valid, y_valid)``
    pair (strictly later rows) that drives early stopping. The returned model
    is truncated to the round with the lowest validation loss.
    """
    params = params or BoostParams()
    X, names = _as_matrix(X, feature_names)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0 or X.shape[0] == 0:
        raise ModelError("empty training set")
    if len(y) != X.shape[0]:
        raise ModelError("X and y lengths differ")
    if not np.all(np.isfinite(y)):
        raise ModelError("non-finite target")
    p = params.loss_power
    bins = build_bins(X, params.max_bin)
    nbins = bins.n_bins
    xb = bins.transform(X)
    base = float(np.mean(y))
    pred = np.full(len(y), base)
    global_order = K.presort(xb)
    xbt = np.ascontiguousarray(xb.T)

    has_valid = valid is not None
    if has_valid:
        Xv, _ = _as_matrix(valid[0], names)
        yv = np.asarray(valid[1], dtype=np.float64)
        if not np.all(np.isfinite(yv)):
            raise ModelError("non-finite validation target")
        xvb = bins.transform(Xv)
        pv = np.full(len(yv), base)
        best_loss = float(np.mean(loss_value(pv, yv, p)))
        history = [best_loss]
    else:
        history = []
    best_iter = 0

    rng = np.random.default_rng(params.seed)
    use_goss = _sampling_active(params)
    n = len(y)
    trees: list[Tree] = []
    lr = params.learning_rate
    for it in range(params.num_iterations):
        g, h = loss_grad_hess(pred, y, p)
        if use_goss:
            idx, w = goss_sample(g, params.goss_top_rate, params.goss_other_rate, rng)
            pos = np.full(n, -1, dtype=np.int64)
            pos[idx] = np.arange(len(idx))
            order = K.restrict_order(global_order, pos)
            xt = np.ascontiguousarray(xbt[:, idx])
            gs, hs = g[idx] * w, h[idx] * w
        else:
            order = global_order.copy()
            xt, gs, hs = xbt, g, h
        raw = K.grow_tree(xt, order, gs, hs, nbins, params.num_leaves, params.max_depth,
                          params.min_data_in_leaf, params.lambda_l1, params.lambda_l2)
        if len(raw[0]) == 1:
            logger.debug("round %d: no split with positive gain, stopping", it)
            break
        tree = _make_tree(raw, bins)
        trees.append(tree)
        pred += lr * K.predict_binned(xb, nbins, tree.feature, tree.threshold_bin,
                                      tree.missing_left, tree.left, tree.right, tree.value)
        if has_valid:
            pv += lr * K.predict_binned(xvb, nbins, tree.feature, tree.threshold_bin,
                                        tree.missing_left, tree.left, tree.right, tree.value)
            loss = float(np.mean(loss_value(pv, yv, p)))
            history.append(loss)
            if loss < best_loss:
                best_loss = loss
                best_iter = len(trees)
            elif len(trees) - best_iter >= params.early_stopping_rounds:
                break
    if has_valid:
        trees = trees[:best_iter]
    else:
        best_iter = len(trees)
    return BoostedModel(base, lr, trees, bins, names, params, target_spec, best_iter, history)


def predict(model: BoostedModel, X, feature_names=None) -> np.ndarray:
    if hasattr(X, "matrix") and hasattr(X, "names"):
        missing = [n for n in model.feature_names if n not in X]
        if missing:
            raise ModelError(f"missing feature column: {missing[0]}")
        Xm = np.ascontiguousarray(X.matrix(model.feature_names), dtype=np.float64)
    else:
        Xm, _ = _as_matrix(X)
        if feature_names is not None and list(feature_names) != list(model.feature_names):
            raise ModelError("feature names do not match the model")
        if Xm.shape[1] != len(model.feature_names):
            raise ModelError(f"expected {len(model.feature_names)} features, got {Xm.shape[1]}")
    out = np.full(Xm.shape[0], model.base_score)
    for t in model.trees:
        out += model.learning_rate * t.predict(Xm)
    return out


def feature_importance(model: BoostedModel) -> list[tuple[str, int, float]]:
    """(feature, split_count, total_gain) for every feature, in model column order."""
    splits = np.zeros(len(model.feature_names), dtype=np.int64)
    gains = np.zeros(len(model.feature_names))
    for t in model.trees:
        for f, gval in zip(t.feature, t.gain):
            if f >= 0:
                splits[f] += 1
                gains[f] += gval
    return [(n, int(s), float(gv)) for n, s, gv in zip(model.feature_names, splits, gains)]


def model_to_dict(model: BoostedModel) -> dict:
    imp = feature_importance(model)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "base_score": float(model.base_score),
        "learning_rate": float(model.learning_rate),
        "best_iteration": int(model.best_iteration),
        "feature_names": list(model.feature_names),
        "bins": {"max_bin": model.bins.max_bin, "bounds": model.bins.to_list()},
        "params": model.params.to_dict(),
        "target_transform": model.target_spec.to_dict() if model.target_spec else None,
        "importance": [{"feature": n, "split_count": s, "gain": g} for n, s, g in imp],
        "valid_history": [float(v) for v in model.valid_history],
        "trees": [t.to_dict() for t in model.trees],
    }


def model_from_dict(d: dict) -> BoostedModel:
    if d.get("format") != FORMAT_NAME:
        raise ModelError("not a boostcast model file")
    if d.get("version") != FORMAT_VERSION:
        raise ModelError(f"model format version {d.get('version')} != supported {FORMAT_VERSION}")
    bins = BinMap.from_list(d["bins"]["bounds"], d["bins"]["max_bin"])
    spec = TransformSpec.from_dict(d["target_transform"]) if d.get("target_transform") else None
    return BoostedModel(
        d["base_score"], d["learning_rate"], [Tree.from_dict(t) for t in d["trees"]], bins,
        list(d["feature_names"]), BoostParams.from_dict(d["params"]), spec,
        d.get("best_iteration", len(d["trees"])), list(d.get("valid_history", [])),
    )


def dumps(model: BoostedModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1, allow_nan=False) + "\n"


def save(model: BoostedModel, path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load(path) -> BoostedModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: unreadable model file ({exc})") from None
    return model_from_dict(d)
