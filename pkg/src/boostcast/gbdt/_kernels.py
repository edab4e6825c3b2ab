"""Compiled inner loops of the tree learner.

Each node keeps, for every feature, its sample positions sorted by bin code
(ties by position). Walking that list accumulates the node's per-bin gradient
histogram run by run, so empty bins cost nothing and candidate thresholds are
exactly the bin boundaries. Splitting a node stable-partitions every list.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def soft_threshold(g, l1):
    if g > l1:
        return g - l1
    if g < -l1:
        return g + l1
    return 0.0


@njit(cache=True)
def leaf_output(g, h, l1, l2):
    return -soft_threshold(g, l1) / (h + l2)


@njit(cache=True)
def _term(g, h, l1, l2):
    t = soft_threshold(g, l1)
    return t * t / (h + l2)


@njit(cache=True)
def split_gain(gl, hl, gr, hr, l1, l2):
    return 0.5 * (_term(gl, hl, l1, l2) + _term(gr, hr, l1, l2) - _term(gl + gr, hl + hr, l1, l2))


@njit(cache=True)
def presort(xb):
    """Per-feature positions sorted by bin code (stable)."""
    n, nf = xb.shape
    order = np.empty((nf, n), dtype=np.int32)
    for f in range(nf):
        order[f, :] = np.argsort(xb[:, f], kind="mergesort").astype(np.int32)
    return order


@njit(cache=True)
def restrict_order(global_order, selected_pos):
    """Keep only selected rows; ``selected_pos[row]`` is the row's sample position or -1."""
    nf, n = global_order.shape
    m = 0
    for r in range(n):
        if selected_pos[r] >= 0:
            m += 1
    out = np.empty((nf, m + 1), dtype=np.int32)
    for f in range(nf):
        k = 0
        for i in range(n):
            p = selected_pos[global_order[f, i]]
            # branchless: the slot is overwritten unless p is kept
            out[f, k] = p
            k += p >= 0
    return out[:, :m]


@njit(cache=True)
def _best_split(xt, order, g, h, nbins, begin, end, min_data, l1, l2):
    """Best (gain, feature, bin, missing_left, n_left) for node rows order[:, begin:end].

    ``xt`` is the feature-major (n_features, n_samples) matrix of bin codes.
    Candidates are ranked by the children's score; the parent term is constant.
    """
    nf = xt.shape[0]
    G = 0.0
    H = 0.0
    for i in range(begin, end):
        p = order[0, i]
        G += g[p]
        H += h[p]
    C = end - begin
    parent = _term(G, H, l1, l2)
    best_score = parent
    best_f = -1
    best_b = -1
    best_ml = False
    best_nl = 0
    if C < 2 * min_data:
        return 0.0, best_f, best_b, best_ml, best_nl, G, H
    for f in range(nf):
        miss = nbins[f]
        if miss <= 1:
            continue
        row = xt[f]
        ordf = order[f]
        # missing rows sit at the tail of the sorted list
        gm = 0.0
        hm = 0.0
        cm = 0
        stop = end
        while stop > begin and row[ordf[stop - 1]] == miss:
            stop -= 1
            p = ordf[stop]
            gm += g[p]
            hm += h[p]
            cm += 1
        if stop - begin < min_data:
            continue
        gl = 0.0
        hl = 0.0
        cl = 0
        b = row[ordf[begin]]
        for i in range(begin, stop):
            p = ordf[i]
            nb = row[p]
            if nb != b:
                # threshold after bin b: bin <= b goes left
                cr = C - cl
                if cr < min_data:
                    break
                if cl >= min_data:
                    sc = _term(gl, hl, l1, l2) + _term(G - gl, H - hl, l1, l2)
                    if sc > best_score:
                        best_score = sc
                        best_f = f
                        best_b = b
                        best_ml = False
                        best_nl = cl
                if cm > 0 and cl + cm >= min_data and cr - cm >= min_data:
                    sc = _term(gl + gm, hl + hm, l1, l2) + _term(G - gl - gm, H - hl - hm, l1, l2)
                    if sc > best_score:
                        best_score = sc
                        best_f = f
                        best_b = b
                        best_ml = True
                        best_nl = cl + cm
                b = nb
            gl += g[p]
            hl += h[p]
            cl += 1
        # last present bin: only a split when missing rows go right
        if cm > 0 and cl >= min_data and cm >= min_data:
            sc = _term(gl, hl, l1, l2) + _term(gm, hm, l1, l2)
            if sc > best_score:
                best_score = sc
                best_f = f
                best_b = b
                best_ml = False
                best_nl = cl
    gain = 0.5 * (best_score - parent) if best_f >= 0 else 0.0
    return gain, best_f, best_b, best_ml, best_nl, G, H


@njit(cache=True)
def grow_tree(xt, order, g, h, nbins, num_leaves, max_depth, min_data, l1, l2):
    """Leaf-wise growth: always split the leaf with the largest positive gain.

    ``order`` is consumed (partitioned in place). Returns node arrays; a node is
    a leaf when its feature is -1.
    """
    nf = xt.shape[0]
    max_nodes = 2 * num_leaves - 1
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thr = np.zeros(max_nodes, dtype=np.int64)
    mleft = np.zeros(max_nodes, dtype=np.bool_)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    gain = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    depth = np.zeros(max_nodes, dtype=np.int64)
    sum_g = np.zeros(max_nodes)
    sum_h = np.zeros(max_nodes)
    nbegin = np.zeros(max_nodes, dtype=np.int64)
    nend = np.zeros(max_nodes, dtype=np.int64)
    # pending split per node
    bgain = np.zeros(max_nodes)
    bfeat = np.full(max_nodes, -1, dtype=np.int64)
    bbin = np.zeros(max_nodes, dtype=np.int64)
    bml = np.zeros(max_nodes, dtype=np.bool_)
    bnl = np.zeros(max_nodes, dtype=np.int64)
    is_leaf = np.zeros(max_nodes, dtype=np.bool_)

    n = order.shape[1]
    n_nodes = 1
    nbegin[0] = 0
    nend[0] = n
    count[0] = n
    is_leaf[0] = True
    res = _best_split(xt, order, g, h, nbins, 0, n, min_data, l1, l2)
    bgain[0], bfeat[0], bbin[0], bml[0], bnl[0], sum_g[0], sum_h[0] = res
    n_leaves = 1
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int32)

    while n_leaves < num_leaves:
        pick = -1
        pg = 0.0
        for k in range(n_nodes):
            if is_leaf[k] and bfeat[k] >= 0 and (max_depth < 0 or depth[k] < max_depth):
                if bgain[k] > pg:
                    pg = bgain[k]
                    pick = k
        if pick < 0:
            break
        f = bfeat[pick]
        b = bbin[pick]
        ml = bml[pick]
        lo = nbegin[pick]
        hi = nend[pick]
        miss = nbins[f]
        for i in range(lo, hi):
            p = order[0, i]
            code = xt[f, p]
            goes_left[p] = ml if code == miss else code <= b
        mid = lo + bnl[pick]
        for ff in range(nf):
            ordf = order[ff]
            kl = lo
            kr = 0
            for i in range(lo, hi):
                p = ordf[i]
                gl = goes_left[p]
                # branchless stable partition: left in place, right via buffer
                ordf[kl] = p
                buf[kr] = p
                kl += gl
                kr += 1 - gl
            for i in range(kr):
                ordf[mid + i] = buf[i]
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feat[pick] = f
        thr[pick] = b
        mleft[pick] = ml
        left[pick] = lc
        right[pick] = rc
        gain[pick] = bgain[pick]
        is_leaf[pick] = False
        for c, cb, ce in ((lc, lo, mid), (rc, mid, hi)):
            nbegin[c] = cb
            nend[c] = ce
            count[c] = ce - cb
            depth[c] = depth[pick] + 1
            is_leaf[c] = True
            res = _best_split(xt, order, g, h, nbins, cb, ce, min_data, l1, l2)
            bgain[c], bfeat[c], bbin[c], bml[c], bnl[c], sum_g[c], sum_h[c] = res
        n_leaves += 1

    for k in range(n_nodes):
        if is_leaf[k]:
            value[k] = leaf_output(sum_g[k], sum_h[k], l1, l2)
    return (feat[:n_nodes], thr[:n_nodes], mleft[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], gain[:n_nodes], count[:n_nodes], depth[:n_nodes])


@njit(cache=True)
def predict_binned(xb, nbins, feat, thr, mleft, left, right, value):
    n = xb.shape[0]
    out = np.empty(n)
    for i in range(n):
        k = 0
        while feat[k] >= 0:
            f = feat[k]
            code = xb[i, f]
            if code == nbins[f]:
                k = left[k] if mleft[k] else right[k]
            elif code <= thr[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = value[k]
    return out


@njit(cache=True)
def predict_raw(x, feat, thr_value, mleft, left, right, value):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        k = 0
        while feat[k] >= 0:
            v = x[i, feat[k]]
            if np.isnan(v):
                k = left[k] if mleft[k] else right[k]
            elif v <= thr_value[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = value[k]
    return out
