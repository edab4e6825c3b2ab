"""Histogram-binned gradient-boosted trees with GOSS and leaf-wise growth."""
from .binning import BinMap, build_bins
from .booster import (
    BoostedModel,
    BoostParams,
    ModelError,
    Tree,
    feature_importance,
    leaf_value,
    load,
    predict,
    save,
    split_gain,
    train,
)
from .objective import loss_grad_hess, loss_value
from .sampling import goss_sample

__all__ = [
    "BinMap", "BoostedModel", "BoostParams", "ModelError", "Tree", "build_bins",
    "feature_importance", "goss_sample", "leaf_value", "load", "loss_grad_hess",
    "loss_value", "predict", "save", "split_gain", "train",
]
