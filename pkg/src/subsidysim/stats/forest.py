"""Bagged regression trees with variance-reduction splits.

Trees are grown on bootstrap samples with a random feature subset at each
split. All randomness flows through a small counter-based generator keyed by
(seed, tree index), so results are identical no matter how trees would be
scheduled; training is sequential and prediction averages over trees.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

_LCG_MULT = np.uint64(6364136223846793005)
_LCG_INC = np.uint64(1442695040888963407)


@njit(cache=True, inline="always")
def _lcg_next(state):
    return state * _LCG_MULT + _LCG_INC


@njit(cache=True, inline="always")
def _lcg_below(state, bound):
    # next state and a draw in [0, bound)
    state = _lcg_next(state)
    return state, np.int64((state >> np.uint64(33)) % np.uint64(bound))


@njit(cache=True)
def _build_tree(X, y, sample_idx, min_leaf, max_depth, mtry, seed,
                feature, threshold, left, right, value):
    n, k = X.shape
    m = sample_idx.shape[0]
    idx = sample_idx.copy()
    buf = np.empty(m, dtype=np.int64)
    feat_pool = np.empty(k, dtype=np.int64)
    state = np.uint64(seed) * _LCG_MULT + _LCG_INC

    # stack of (node, start, end, depth)
    stack = np.empty((2 * m + 2, 4), dtype=np.int64)
    n_nodes = 1
    top = 0
    stack[top, 0] = 0
    stack[top, 1] = 0
    stack[top, 2] = m
    stack[top, 3] = 0
    top += 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        cnt = end - start

        total = 0.0
        for i in range(start, end):
            total += y[idx[i]]
        mean = total / cnt
        value[node] = mean

        if cnt < 2 * min_leaf or depth >= max_depth:
            feature[node] = -1
            continue
        sse = 0.0
        for i in range(start, end):
            d = y[idx[i]] - mean
            sse += d * d
        if sse <= 1e-14 * cnt:
            feature[node] = -1
            continue

        # draw mtry distinct features by partial Fisher-Yates
        for j in range(k):
            feat_pool[j] = j
        n_try = mtry if mtry < k else k
        for j in range(n_try):
            state, r = _lcg_below(state, k - j)
            t = feat_pool[j + r]
            feat_pool[j + r] = feat_pool[j]
            feat_pool[j] = t

        best_gain = 0.0
        best_feat = -1
        best_thresh = 0.0
        base = total * total / cnt
        vals = np.empty(cnt)
        for j in range(n_try):
            f = feat_pool[j]
            for i in range(cnt):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            left_sum = 0.0
            for pos in range(cnt - min_leaf):
                vi = vals[order[pos]]
                left_sum += y[idx[start + order[pos]]]
                if pos + 1 < min_leaf:
                    continue
                vnext = vals[order[pos + 1]]
                if vnext <= vi:
                    continue
                nl = pos + 1
                nr = cnt - nl
                right_sum = total - left_sum
                gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best_feat = f
                    best_thresh = 0.5 * (vi + vnext)

        if best_feat < 0:
            feature[node] = -1
            continue

        # stable partition around the threshold
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_feat] <= best_thresh:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(start, end):
            if X[idx[i], best_feat] > best_thresh:
                buf[nr] = idx[i]
                nr += 1
        for i in range(cnt):
            idx[start + i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thresh
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1

    return n_nodes


@njit(cache=True)
def _bootstrap(n, seed):
    out = np.empty(n, dtype=np.int64)
    state = np.uint64(seed) * _LCG_MULT + _LCG_INC
    state = _lcg_next(state)
    for i in range(n):
        state, r = _lcg_below(state, n)
        out[i] = r
    return out


@njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


@dataclass
class ForestModel:
    trees: List[tuple] = field(repr=False)
    n_trees: int
    min_leaf: int
    max_depth: Optional[int]
    mtry: int
    seed: int
    constant: Optional[float] = None  # set when the target had zero variance
    n_features: int = 0


def forest_fit(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 200,
    min_leaf: int = 5,
    max_depth: Optional[int] = None,
    mtry: Optional[int] = None,
    seed: int = 0,
) -> ForestModel:
    """Train a bagged forest; deterministic in ``seed``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, k = X.shape
    if n < 2 * min_leaf:
        raise ValueError(f"need at least {2 * min_leaf} rows, got {n}")
    if mtry is None:
        mtry = int(np.ceil(np.sqrt(k)))
    depth = max_depth if max_depth is not None else np.int64(10 ** 9)

    model = ForestModel(
        trees=[], n_trees=n_trees, min_leaf=min_leaf, max_depth=max_depth,
        mtry=mtry, seed=seed, n_features=k,
    )
    if float(np.var(y)) == 0.0:
        # zero-variance target: constant predictor, flagged not raised
        model.constant = float(y[0]) if n else 0.0
        return model

    for t in range(n_trees):
        tree_seed = np.uint64(
            (int(seed) * 0x9E3779B97F4A7C15 + (t + 1) * 0xBF58476D1CE4E5B9)
            & 0xFFFFFFFFFFFFFFFF
        )
        sample = _bootstrap(n, tree_seed)
        cap = 2 * n + 2
        feat = np.full(cap, -1, dtype=np.int64)
        thr = np.zeros(cap)
        lf = np.zeros(cap, dtype=np.int64)
        rt = np.zeros(cap, dtype=np.int64)
        val = np.zeros(cap)
        split_seed = np.uint64(int(tree_seed) ^ 0xD1B54A32D192ED03)
        n_nodes = _build_tree(
            X, y, sample, np.int64(min_leaf), np.int64(depth), np.int64(mtry),
            split_seed, feat, thr, lf, rt, val,
        )
        model.trees.append(
            (feat[:n_nodes].copy(), thr[:n_nodes].copy(),
             lf[:n_nodes].copy(), rt[:n_nodes].copy(), val[:n_nodes].copy())
        )
    return model


def forest_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model trained on {model.n_features} features, got {X.shape[1]}"
        )
    if model.constant is not None:
        return np.full(X.shape[0], model.constant)
    out = np.zeros(X.shape[0])
    for feat, thr, lf, rt, val in model.trees:
        _predict_tree(X, feat, thr, lf, rt, val, out)
    return out / len(model.trees)
