"""Variance decomposition of a metric over a decision grid.

Two estimators of the same quantity: how much of the variance of a metric,
taken uniformly over the grid, is attributable to each decision subset.

- exact_fanova marginalizes the complete grid directly.  Effects are defined
  recursively: the effect of subset U is its marginal mean minus the summed
  effects of every proper subset; its importance is the population variance
  of that effect divided by the total variance.  Over all orders the
  importances sum to exactly 1.
- forest_fanova fits bootstrapped regression trees on (decision levels ->
  metric) rows, reads each tree as a piecewise-constant function over the
  grid (a leaf covers the cross product of the level sets not excluded on
  its path, weighted by cell fractions), decomposes each tree exactly, and
  reports mean and standard deviation across trees.  It works on incomplete
  or subsampled grids where the exact method refuses.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from . import decision_space as ds
from .errors import AnalysisError, ConfigError, IncompleteGridError

__all__ = [
    "MetricTable",
    "ImportanceEntry",
    "ImportanceReport",
    "table_from_rows",
    "exact_fanova",
    "forest_fanova",
    "rank",
    "report_to_csv",
]

FOREST_TREES = 100
FOREST_MIN_ROWS = 30
_VAR_EPS = 1e-300


@dataclass(frozen=True)
class MetricTable:
    """Rows of (decision level codes, metric value) plus the level universe."""

    names: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    codes: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return len(self.names)

    def take(self, idx: np.ndarray) -> "MetricTable":
        idx = np.asarray(idx, dtype=np.int64)
        return MetricTable(self.names, self.levels, self.codes[idx], self.values[idx])


def table_from_rows(
    rows: Iterable[tuple[Mapping[str, str], float]], space: ds.DecisionSpace
) -> MetricTable:
    """Code assignment rows against a space's option order."""
    names = space.names
    lookup = [
        {opt: i for i, opt in enumerate(d.options)} for d in space.decisions
    ]
    codes = []
    values = []
    for assignments, value in rows:
        row = np.empty(len(names), dtype=np.int64)
        for j, name in enumerate(names):
            if name not in assignments:
                raise ConfigError(f"row is missing decision {name!r}")
            opt = assignments[name]
            if opt not in lookup[j]:
                raise ConfigError(f"decision {name!r}: unknown option {opt!r}")
            row[j] = lookup[j][opt]
        codes.append(row)
        values.append(float(value))
    if not codes:
        raise AnalysisError("metric table has no rows")
    return MetricTable(
        names=names,
        levels=tuple(d.options for d in space.decisions),
        codes=np.vstack(codes),
        values=np.asarray(values, dtype=np.float64),
    )


@dataclass(frozen=True)
class ImportanceEntry:
    subset: tuple[str, ...]
    order: int
    importance: float
    std_dev: float


@dataclass(frozen=True)
class ImportanceReport:
    method: str
    entries: tuple[ImportanceEntry, ...]
    total_variance: float
    max_order: int
    zero_variance: bool = False


def _resolve_max_order(d: int, max_order: int | None) -> int:
    if max_order is None:
        return d if d <= 10 else 3
    if max_order < 1:
        raise ConfigError(f"max_order must be >= 1, got {max_order}")
    return min(max_order, d)


def _subsets(d: int, max_order: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for k in range(1, max_order + 1):
        out.extend(itertools.combinations(range(d), k))
    return out


def _proper_subsets(u: tuple[int, ...]) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for k in range(1, len(u)):
        out.extend(itertools.combinations(u, k))
    return out


def _effect_variances(
    marginals: Mapping[tuple[int, ...], np.ndarray],
    subsets: Sequence[tuple[int, ...]],
    grand_mean: float,
) -> dict[tuple[int, ...], float]:
    """Inclusion-exclusion over marginal means; returns Var(effect) per subset."""
    effects: dict[tuple[int, ...], np.ndarray] = {}
    variances: dict[tuple[int, ...], float] = {}
    for u in subsets:  # subsets arrive ordered by increasing size
        arr = np.asarray(marginals[u], dtype=np.float64) - grand_mean
        for w in _proper_subsets(u):
            ix = tuple(slice(None) if dec in w else None for dec in u)
            arr = arr - effects[w][ix]
        effects[u] = arr
        variances[u] = max(float(np.mean(arr * arr) - np.mean(arr) ** 2), 0.0)
    return variances


# -- exact decomposition -----------------------------------------------------------


def exact_fanova(table: MetricTable, max_order: int | None = None) -> ImportanceReport:
    """Exact decomposition; requires exactly one row per grid cell."""
    counts = tuple(len(lv) for lv in table.levels)
    grid_size = math.prod(counts)
    flat = np.zeros(table.n, dtype=np.int64)
    for j, c in enumerate(counts):
        flat = flat * c + table.codes[:, j]
    unique, first_idx, seen = np.unique(flat, return_index=True, return_counts=True)
    if np.any(seen > 1):
        dup = int(unique[np.argmax(seen > 1)])
        raise IncompleteGridError(
            f"duplicate rows for the same universe (e.g. flat cell {dup}); "
            "the exact method needs exactly one row per grid cell"
        )
    if len(unique) != grid_size or table.n != grid_size:
        raise IncompleteGridError(
            f"grid has {grid_size} cells but the table covers {len(unique)} "
            f"with {table.n} rows; use the forest estimator on partial grids"
        )
    grid = np.empty(grid_size, dtype=np.float64)
    grid[flat] = table.values
    grid = grid.reshape(counts)

    total_var = float(np.var(grid))
    max_order = _resolve_max_order(table.d, max_order)
    subsets = _subsets(table.d, max_order)
    zero_variance = total_var <= _VAR_EPS

    if zero_variance:
        variances = {u: 0.0 for u in subsets}
        total_var = 0.0
    else:
        axes = tuple(range(table.d))
        marginals = {
            u: grid.mean(axis=tuple(a for a in axes if a not in u)) for u in subsets
        }
        variances = _effect_variances(marginals, subsets, float(grid.mean()))

    entries = tuple(
        ImportanceEntry(
            subset=tuple(table.names[j] for j in u),
            order=len(u),
            importance=0.0 if zero_variance else variances[u] / total_var,
            std_dev=0.0,
        )
        for u in subsets
    )
    return ImportanceReport(
        method="exact",
        entries=entries,
        total_variance=total_var,
        max_order=max_order,
        zero_variance=zero_variance,
    )


# -- forest estimator ---------------------------------------------------------------


@njit(cache=True)
def _grow_cat_tree(
    X, y, idx, n_rows, max_depth, min_leaf, max_features, n_levels,
    feature, level, left, right, value, nstart, nend,
):
    """One regression tree with one-level-vs-rest categorical splits."""
    p = X.shape[1]
    max_k = 0
    for j in range(p):
        if n_levels[j] > max_k:
            max_k = n_levels[j]
    cnt = np.empty(max_k, np.int64)
    sm = np.empty(max_k, np.float64)
    tmp = np.empty(n_rows, np.int64)
    feats = np.empty(p, np.int64)
    stack_node = np.empty(2 * n_rows + 2, np.int64)
    stack_depth = np.empty(2 * n_rows + 2, np.int64)

    node_count = 1
    nstart[0] = 0
    nend[0] = n_rows
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

        if s2 - s * s / m <= 1e-12 or m < 2 * min_leaf:
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
        best_lev = -1
        for ci in range(cand.shape[0]):
            f = cand[ci]
            k = n_levels[f]
            for lev in range(k):
                cnt[lev] = 0
                sm[lev] = 0.0
            for i in range(start, end):
                lev = X[idx[i], f]
                cnt[lev] += 1
                sm[lev] += y[idx[i]]
            for lev in range(k):
                n_l = cnt[lev]
                n_r = m - n_l
                if n_l < min_leaf or n_r < min_leaf or n_l == 0 or n_r == 0:
                    continue
                s_l = sm[lev]
                s_r = s - s_l
                score = s_l * s_l / n_l + s_r * s_r / n_r
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_lev = lev

        if best_f < 0:
            continue

        n_l = 0
        for i in range(start, end):
            if X[idx[i], best_f] == best_lev:
                n_l += 1
        a = 0
        b = n_l
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] == best_lev:
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
        level[node] = best_lev
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
def _fit_cat_forest(X, y, n_trees, min_leaf, max_features, n_levels, tree_seeds):
    n = X.shape[0]
    cap = 2 * n + 1
    feature = np.full((n_trees, cap), -1, np.int64)
    level = np.full((n_trees, cap), -1, np.int64)
    left = np.full((n_trees, cap), -1, np.int64)
    right = np.full((n_trees, cap), -1, np.int64)
    value = np.zeros((n_trees, cap), np.float64)
    node_counts = np.zeros(n_trees, np.int64)
    nstart = np.empty(cap, np.int64)
    nend = np.empty(cap, np.int64)
    for t in range(n_trees):
        np.random.seed(tree_seeds[t])
        boot = np.random.randint(0, n, n).astype(np.int64)
        node_counts[t] = _grow_cat_tree(
            X, y, boot, n, -1, min_leaf, max_features, n_levels,
            feature[t], level[t], left[t], right[t], value[t], nstart, nend,
        )
    return feature, level, left, right, value, node_counts


def _tree_leaves(feature, level, left, right, value, counts, tree, k_list):
    """(leaf value, per-decision level bitmask) for every leaf of one tree."""
    full = [(1 << k) - 1 for k in k_list]
    leaves = []
    stack = [(0, list(full))]
    while stack:
        node, masks = stack.pop()
        f = int(feature[tree, node])
        if f < 0:
            leaves.append((float(value[tree, node]), masks))
            continue
        lev = int(level[tree, node])
        left_masks = list(masks)
        left_masks[f] = 1 << lev
        right_masks = list(masks)
        right_masks[f] = masks[f] & ~(1 << lev)
        stack.append((int(right[tree, node]), right_masks))
        stack.append((int(left[tree, node]), left_masks))
    return leaves


def _mask_levels(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def _tree_importances(leaves, k_list, subsets):
    """Decompose one tree's piecewise-constant grid function."""
    d = len(k_list)
    cells = [
        (v, [_mask_levels(m) for m in masks], [len(_mask_levels(m)) for m in masks])
        for v, masks in leaves
    ]
    mean = 0.0
    mean_sq = 0.0
    for v, _levels, sizes in cells:
        w = 1.0
        for j in range(d):
            w *= sizes[j] / k_list[j]
        mean += w * v
        mean_sq += w * v * v
    total_var = max(mean_sq - mean * mean, 0.0)

    marginals: dict[tuple[int, ...], np.ndarray] = {}
    for u in subsets:
        arr = np.zeros(tuple(k_list[j] for j in u))
        for v, levels, sizes in cells:
            w = v
            for j in range(d):
                if j not in u:
                    w *= sizes[j] / k_list[j]
            if len(u) == 1:
                arr[levels[u[0]]] += w
            else:
                arr[np.ix_(*(levels[j] for j in u))] += w
        marginals[u] = arr
    variances = _effect_variances(marginals, subsets, mean)
    return variances, total_var


def forest_fanova(
    table: MetricTable,
    trees: int = FOREST_TREES,
    seed: int = 0,
    max_order: int | None = None,
    split_candidates: int | None = None,
    min_rows: int = FOREST_MIN_ROWS,
) -> ImportanceReport:
    """Forest-based importance estimate with per-tree spread.

    Works on incomplete grids and subsamples.  Deterministic given the seed.
    """
    if trees < 1:
        raise ConfigError(f"forest needs at least 1 tree, got {trees}")
    if table.n < min_rows:
        raise AnalysisError(
            f"forest estimator needs at least {min_rows} rows, got {table.n}"
        )
    if float(np.var(table.values)) <= _VAR_EPS:
        raise AnalysisError("zero-variance response; importances are undefined")

    d = table.d
    k_list = [len(lv) for lv in table.levels]
    max_order = _resolve_max_order(d, max_order)
    subsets = _subsets(d, max_order)
    if split_candidates is None:
        split_candidates = max(1, int(math.ceil(5 * d / 6)))
    split_candidates = min(split_candidates, d)

    seeds = np.random.SeedSequence(seed).generate_state(trees).astype(np.int64)
    feature, level, left, right, value, counts = _fit_cat_forest(
        np.ascontiguousarray(table.codes, dtype=np.int64),
        np.ascontiguousarray(table.values, dtype=np.float64),
        trees,
        1,
        split_candidates,
        np.asarray(k_list, dtype=np.int64),
        seeds,
    )

    per_tree = np.zeros((trees, len(subsets)))
    for t in range(trees):
        leaves = _tree_leaves(feature, level, left, right, value, counts, t, k_list)
        variances, total_var = _tree_importances(leaves, k_list, subsets)
        if total_var <= _VAR_EPS:
            continue  # constant bootstrap response; contributes zeros
        for i, u in enumerate(subsets):
            per_tree[t, i] = variances[u] / total_var

    means = per_tree.mean(axis=0)
    stds = per_tree.std(axis=0)  # population convention; 1 tree -> 0
    entries = tuple(
        ImportanceEntry(
            subset=tuple(table.names[j] for j in u),
            order=len(u),
            importance=float(means[i]),
            std_dev=float(stds[i]),
        )
        for i, u in enumerate(subsets)
    )
    return ImportanceReport(
        method="forest",
        entries=entries,
        total_variance=float(np.var(table.values)),
        max_order=max_order,
    )


# -- presentation --------------------------------------------------------------------


def rank(report: ImportanceReport, top_k: int | None = None) -> list[ImportanceEntry]:
    """Entries by importance descending; ties by order then subset names."""
    ordered = sorted(
        report.entries, key=lambda e: (-e.importance, e.order, e.subset)
    )
    return ordered if top_k is None else ordered[:top_k]


def report_to_csv(report: ImportanceReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["effect_type", "subset", "importance", "std_dev"])
        for entry in rank(report):
            effect_type = "main" if entry.order == 1 else f"{entry.order}-way interaction"
            writer.writerow(
                [effect_type, " × ".join(entry.subset), repr(entry.importance),
                 repr(entry.std_dev)]
            )
