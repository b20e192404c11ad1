"""From-scratch tree ensembles on numeric matrices.

Both ensembles share one axis-aligned regression-tree grower, compiled with
numba.  Split search scans candidate features in ascending index order and
thresholds in ascending value order, accepting only strict improvements, so
ties resolve to the lowest feature index and then the lowest threshold.  That
rule plus explicit per-tree seeding makes refits bitwise reproducible.

For binary 0/1 targets the variance criterion used here selects the same
split as gini impurity (both reduce to p.(1-p) per side up to a constant
factor), so the forest is gini-split in behavior while the same grower can
fit real-valued boosting residuals.
"""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "fit_forest",
    "forest_predict",
    "fit_boosted",
    "boosted_raw_predict",
]

_IMPURITY_EPS = 1e-12


@njit(cache=True)
def _grow_tree(
    X,
    y,
    idx,
    start0,
    end0,
    max_depth,
    min_leaf,
    max_features,
    feature,
    threshold,
    left,
    right,
    value,
    nstart,
    nend,
):
    """Grow one tree over idx[start0:end0]; returns the node count.

    idx is permuted in place so each node's rows end up contiguous in
    [nstart[node], nend[node]).  max_depth < 0 means no cap.
    """
    n_node_rows = end0 - start0
    p = X.shape[1]
    stack_node = np.empty(2 * n_node_rows + 2, np.int64)
    stack_depth = np.empty(2 * n_node_rows + 2, np.int64)
    tmp = np.empty(n_node_rows, np.int64)
    feats = np.empty(p, np.int64)

    node_count = 1
    nstart[0] = start0
    nend[0] = end0
    sp = 0
    stack_node[sp] = 0
    stack_depth[sp] = 0
    sp += 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        depth = stack_depth[sp]
        start = nstart[node]
        end = nend[node]
        m = end - start

        s = 0.0
        s2 = 0.0
        for i in range(start, end):
            v = y[idx[i]]
            s += v
            s2 += v * v
        value[node] = s / m
        feature[node] = -1

        impurity = s2 - s * s / m
        if impurity <= _IMPURITY_EPS or m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        if max_features < p:
            for i in range(p):
                feats[i] = i
            for i in range(max_features):
                j = np.random.randint(i, p)
                t = feats[i]
                feats[i] = feats[j]
                feats[j] = t
            cand = np.sort(feats[:max_features])
        else:
            cand = np.arange(p)

        best_score = -1.0e308
        best_f = -1
        best_t = 0.0
        vals = np.empty(m, np.float64)
        for ci in range(cand.shape[0]):
            f = cand[ci]
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals)
            s_l = 0.0
            for i in range(m - 1):
                o = order[i]
                s_l += y[idx[start + o]]
                cur = vals[o]
                nxt = vals[order[i + 1]]
                if cur < nxt:
                    n_l = i + 1
                    n_r = m - n_l
                    if n_l < min_leaf or n_r < min_leaf:
                        continue
                    s_r = s - s_l
                    score = s_l * s_l / n_l + s_r * s_r / n_r
                    if score > best_score:
                        best_score = score
                        best_f = f
                        t = 0.5 * (cur + nxt)
                        if t <= cur:
                            t = nxt  # midpoint rounded down to cur; keep split valid
                        best_t = t

        if best_f < 0:
            continue

        n_l = 0
        for i in range(start, end):
            if X[idx[i], best_f] < best_t:
                n_l += 1
        a = 0
        b = n_l
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] < best_t:
                tmp[a] = r
                a += 1
            else:
                tmp[b] = r
                b += 1
        for i in range(m):
            idx[start + i] = tmp[i]

        lnode = node_count
        rnode = node_count + 1
        node_count += 2
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lnode
        right[node] = rnode
        nstart[lnode] = start
        nend[lnode] = start + n_l
        nstart[rnode] = start + n_l
        nend[rnode] = end
        stack_node[sp] = lnode
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = rnode
        stack_depth[sp] = depth + 1
        sp += 1

    return node_count


@njit(cache=True)
def _leaf_of(X, row, feature, threshold, left, right, tree):
    node = 0
    while feature[tree, node] >= 0:
        if X[row, feature[tree, node]] < threshold[tree, node]:
            node = left[tree, node]
        else:
            node = right[tree, node]
    return node


@njit(cache=True)
def fit_forest(X, y, n_trees, max_depth, min_leaf, max_features, bootstrap, tree_seeds):
    """Bagged regression/probability trees; returns stacked node arrays."""
    n = X.shape[0]
    cap = 2 * n + 1
    feature = np.full((n_trees, cap), -1, np.int64)
    threshold = np.zeros((n_trees, cap), np.float64)
    left = np.full((n_trees, cap), -1, np.int64)
    right = np.full((n_trees, cap), -1, np.int64)
    value = np.zeros((n_trees, cap), np.float64)
    node_counts = np.zeros(n_trees, np.int64)
    nstart = np.empty(cap, np.int64)
    nend = np.empty(cap, np.int64)

    for t in range(n_trees):
        np.random.seed(tree_seeds[t])
        if bootstrap:
            idx = np.random.randint(0, n, n).astype(np.int64)
        else:
            idx = np.arange(n)
        node_counts[t] = _grow_tree(
            X, y, idx, 0, n, max_depth, min_leaf, max_features,
            feature[t], threshold[t], left[t], right[t], value[t], nstart, nend,
        )
    return feature, threshold, left, right, value, node_counts


@njit(cache=True)
def forest_predict(X, feature, threshold, left, right, value):
    """Mean leaf value across trees for each row."""
    n = X.shape[0]
    n_trees = feature.shape[0]
    out = np.zeros(n, np.float64)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            acc += value[t, _leaf_of(X, i, feature, threshold, left, right, t)]
        out[i] = acc / n_trees
    return out


@njit(cache=True)
def fit_boosted(X, y, n_stages, learning_rate, max_depth, min_leaf, f0):
    """Gradient boosting for logistic loss with per-leaf Newton updates."""
    n = X.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1
    feature = np.full((n_stages, cap), -1, np.int64)
    threshold = np.zeros((n_stages, cap), np.float64)
    left = np.full((n_stages, cap), -1, np.int64)
    right = np.full((n_stages, cap), -1, np.int64)
    value = np.zeros((n_stages, cap), np.float64)
    node_counts = np.zeros(n_stages, np.int64)
    nstart = np.empty(cap, np.int64)
    nend = np.empty(cap, np.int64)

    F = np.full(n, f0, np.float64)
    resid = np.empty(n, np.float64)
    hess = np.empty(n, np.float64)
    idx = np.empty(n, np.int64)

    for stage in range(n_stages):
        for i in range(n):
            prob = 1.0 / (1.0 + np.exp(-F[i]))
            resid[i] = y[i] - prob
            hess[i] = prob * (1.0 - prob)
        for i in range(n):
            idx[i] = i
        count = _grow_tree(
            X, resid, idx, 0, n, max_depth, min_leaf, p,
            feature[stage], threshold[stage], left[stage], right[stage],
            value[stage], nstart, nend,
        )
        node_counts[stage] = count
        # Replace leaf means of the residual fit by Newton steps for log-loss.
        for node in range(count):
            if feature[stage, node] >= 0:
                continue
            num = 0.0
            den = 0.0
            for i in range(nstart[node], nend[node]):
                num += resid[idx[i]]
                den += hess[idx[i]]
            if den < 1e-12:
                den = 1e-12
            gamma = num / den
            value[stage, node] = gamma
            for i in range(nstart[node], nend[node]):
                F[idx[i]] += learning_rate * gamma
    return feature, threshold, left, right, value, node_counts


@njit(cache=True)
def boosted_raw_predict(X, feature, threshold, left, right, value, f0, learning_rate):
    """Additive raw score f0 + lr * sum of leaf values; caller applies sigmoid."""
    n = X.shape[0]
    n_stages = feature.shape[0]
    out = np.full(n, f0, np.float64)
    for i in range(n):
        for t in range(n_stages):
            out[i] += learning_rate * value[t, _leaf_of(X, i, feature, threshold, left, right, t)]
    return out
