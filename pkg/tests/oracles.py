"""Slow reference implementations used only by the tests."""
import math

import numpy as np


def power_grad_hess(r, p):
    g = np.array([math.copysign(abs(v) ** (p - 1), v) for v in r])
    h = np.array([max((p - 1) * abs(v) ** (p - 2), 1e-6) for v in r])
    return g, h


def _soft(g, l1):
    return math.copysign(max(abs(g) - l1, 0.0), g)


def _term(g, h, l1, l2):
    t = _soft(g, l1)
    return t * t / (h + l2)


def best_split_exact(X, g, h, rows, min_data, l1, l2):
    """Exhaustive search over every feature and every gap between distinct values."""
    G, H = g[rows].sum(), h[rows].sum()
    parent = _term(G, H, l1, l2)
    best = (0.0, None)
    for f in range(X.shape[1]):
        vals = X[rows, f]
        uniq = np.unique(vals)
        for a, b in zip(uniq[:-1], uniq[1:]):
            thr = a + (b - a) / 2.0
            left = vals <= thr
            nl = int(left.sum())
            if nl < min_data or len(rows) - nl < min_data:
                continue
            gl, hl = g[rows][left].sum(), h[rows][left].sum()
            gain = 0.5 * (_term(gl, hl, l1, l2) + _term(G - gl, H - hl, l1, l2) - parent)
            if gain > best[0]:
                best = (gain, (f, thr))
    return best


def exact_greedy_tree(X, g, h, num_leaves, max_depth, min_data, l1, l2):
    """Leaf-wise exact greedy tree; nodes numbered in creation order like the engine.

    Returns a list of dicts: split nodes carry feature/threshold/gain, leaves a value.
    """
    nodes = [{"rows": np.arange(len(g)), "depth": 0}]
    nodes[0]["best"] = best_split_exact(X, g, h, nodes[0]["rows"], min_data, l1, l2)
    leaves = 1
    while leaves < num_leaves:
        pick, pg = None, 0.0
        for k, nd in enumerate(nodes):
            if "feature" in nd or nd["best"][1] is None:
                continue
            if max_depth >= 0 and nd["depth"] >= max_depth:
                continue
            if nd["best"][0] > pg:
                pick, pg = k, nd["best"][0]
        if pick is None:
            break
        nd = nodes[pick]
        f, thr = nd["best"][1]
        nd.update(feature=f, threshold=thr, gain=nd["best"][0])
        for mask in (X[nd["rows"], f] <= thr, X[nd["rows"], f] > thr):
            rows = nd["rows"][mask]
            child = {"rows": rows, "depth": nd["depth"] + 1}
            child["best"] = best_split_exact(X, g, h, rows, min_data, l1, l2)
            nodes.append(child)
        leaves += 1
    for nd in nodes:
        if "feature" not in nd:
            nd["value"] = -_soft(g[nd["rows"]].sum(), l1) / (h[nd["rows"]].sum() + l2)
    return nodes


def compare_first_tree(tree, nodes, X, tol=1e-9):
    """Return a list of mismatch descriptions between an engine tree and the oracle.

    Engine thresholds are global bin boundaries, so a threshold matches when it
    sends the node's rows the same way as the oracle's local midpoint.
    """
    problems = []
    if len(tree.feature) != len(nodes):
        return [f"node count {len(tree.feature)} != {len(nodes)}"]
    for k, nd in enumerate(nodes):
        if "feature" in nd:
            if tree.feature[k] != nd["feature"]:
                problems.append(f"node {k}: feature {tree.feature[k]} != {nd['feature']}")
            elif not np.array_equal(X[nd["rows"], nd["feature"]] <= tree.threshold[k],
                                    X[nd["rows"], nd["feature"]] <= nd["threshold"]):
                problems.append(f"node {k}: threshold {tree.threshold[k]} partitions differently")
            elif abs(tree.gain[k] - nd["gain"]) > tol * max(1.0, nd["gain"]):
                problems.append(f"node {k}: gain {tree.gain[k]} != {nd['gain']}")
        else:
            if tree.feature[k] != -1:
                problems.append(f"node {k}: engine split where oracle has a leaf")
            elif abs(tree.value[k] - nd["value"]) > tol * max(1.0, abs(nd["value"])):
                problems.append(f"node {k}: value {tree.value[k]} != {nd['value']}")
    return problems


def random_fixture(rng):
    n = int(rng.integers(8, 65))
    F = int(rng.integers(1, 4))
    X = rng.normal(size=(n, F))
    if rng.random() < 0.5:
        # coarse values exercise runs of equal codes
        X = np.round(X * 2) / 2
    y = X @ rng.normal(size=F) + rng.normal(0, 0.5, n)
    params = dict(num_leaves=int(rng.integers(2, 9)), max_depth=int(rng.choice([-1, 1, 2, 3, 5])),
                  min_data_in_leaf=int(rng.integers(1, 6)), lambda_l1=float(rng.choice([0.0, 0.01])),
                  lambda_l2=float(rng.choice([0.0, 0.1, 1.0])), loss_power=float(rng.choice([2.0, 3.0])))
    return X, y, params
