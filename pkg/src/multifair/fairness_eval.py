"""Group confusion rates, equalized-odds spread, and evaluation strategies.

The headline metric is the equalized odds difference: the larger of the TPR
spread and the FPR spread across protected groups, where each spread is the
max minus min over groups whose rate is defined.  A full evaluation strategy
additionally fixes how groups are formed (separate vs majority/minority),
whether groups dropped from training are also dropped from evaluation, and
which sub-population the test set is restricted to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import decision_space as ds
from . import pipeline
from .data_model import RowPredicate, TabularFrame, predicate_mask
from .errors import ConfigError, DataError, MetricUndefinedError

__all__ = [
    "GROUPING_OPTIONS",
    "EXCLUDE_EVAL_OPTIONS",
    "MAJORITY_TOKEN",
    "MINORITY_TOKEN",
    "REFERENCE_STRATEGY",
    "GroupRates",
    "MetricBundle",
    "EvalStrategy",
    "StrategyResult",
    "group_rates",
    "equalized_odds_difference",
    "performance_metrics",
    "regroup_majority_minority",
    "majority_category",
    "enumerate_eval_strategies",
    "evaluate",
    "spread_stats",
]

GROUPING_OPTIONS = ("separate", "majority-minority")
EXCLUDE_EVAL_OPTIONS = ("keep-in-eval", "exclude-in-eval")
MAJORITY_TOKEN = "majority"
MINORITY_TOKEN = "minority"
FULL_SUBSET = "full"

# Decision names an evaluation space uses to populate a strategy.  A space
# may declare any subset; missing decisions take the identity default.
GROUPING_DECISION = "eval_grouping"
EXCLUDE_DECISION = "eval_exclude_subgroups"
SUBSET_DECISION = "eval_subset"

STATUS_OK = "ok"
ERR_EMPTY_EVAL = "empty-eval-set"
ERR_METRIC_UNDEFINED = "metric-undefined"


@dataclass(frozen=True)
class GroupRates:
    """Confusion counts and rates for one group; undefined rates are None."""

    group: str
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float | None
    fpr: float | None


@dataclass(frozen=True)
class MetricBundle:
    eq_odds_diff: float
    f1: float
    accuracy: float
    balanced_accuracy: float | None
    rates: tuple[GroupRates, ...]
    n_rows: int


@dataclass(frozen=True)
class EvalStrategy:
    """One evaluation universe: grouping, training-group handling, subset."""

    grouping: str = "separate"
    exclude_trained_out_groups: str = "keep-in-eval"
    subset: str = FULL_SUBSET
    assignments: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.grouping not in GROUPING_OPTIONS:
            raise ConfigError(f"unknown grouping option {self.grouping!r}")
        if self.exclude_trained_out_groups not in EXCLUDE_EVAL_OPTIONS:
            raise ConfigError(
                f"unknown eval exclusion option {self.exclude_trained_out_groups!r}"
            )


REFERENCE_STRATEGY = EvalStrategy(
    grouping="separate",
    exclude_trained_out_groups="keep-in-eval",
    subset=FULL_SUBSET,
    assignments={
        GROUPING_DECISION: "separate",
        EXCLUDE_DECISION: "keep-in-eval",
        SUBSET_DECISION: FULL_SUBSET,
    },
)


@dataclass(frozen=True)
class StrategyResult:
    strategy: EvalStrategy
    status: str
    bundle: MetricBundle | None
    warnings: tuple[str, ...] = ()


# -- rates and metrics -----------------------------------------------------------


def group_rates(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    groups: np.ndarray,
    categories: Sequence[str],
) -> tuple[GroupRates, ...]:
    """Per-group confusion table over the full category set.

    Zero-count groups appear with undefined rates; a rate whose denominator
    is zero is None, never a fabricated number.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    groups = np.asarray(groups)
    if not (len(y_true) == len(y_pred) == len(groups)):
        raise DataError("y_true, y_pred, and groups must have equal length")
    out = []
    for cat in categories:
        sel = groups == cat
        t = y_true[sel]
        p = y_pred[sel]
        tp = int(np.sum((t == 1) & (p == 1)))
        fp = int(np.sum((t == 0) & (p == 1)))
        tn = int(np.sum((t == 0) & (p == 0)))
        fn = int(np.sum((t == 1) & (p == 0)))
        tpr = tp / (tp + fn) if (tp + fn) > 0 else None
        fpr = fp / (fp + tn) if (fp + tn) > 0 else None
        out.append(GroupRates(str(cat), tp, fp, tn, fn, tpr, fpr))
    return tuple(out)


def _spread(values: list[float]) -> float | None:
    if len(values) < 2:
        return None
    return max(values) - min(values)


def equalized_odds_difference(rates: Sequence[GroupRates]) -> float:
    """max of (TPR spread, FPR spread) over groups with defined rates.

    Equals the largest absolute pairwise difference of either rate.  Raises
    MetricUndefinedError when neither component has two defined groups.
    """
    tpr_spread = _spread([r.tpr for r in rates if r.tpr is not None])
    fpr_spread = _spread([r.fpr for r in rates if r.fpr is not None])
    parts = [v for v in (tpr_spread, fpr_spread) if v is not None]
    if not parts:
        raise MetricUndefinedError(
            "equalized odds difference needs at least 2 groups with a defined "
            "TPR or 2 groups with a defined FPR"
        )
    return max(parts)


def undefined_rate_warnings(rates: Sequence[GroupRates]) -> tuple[str, ...]:
    out = []
    for r in rates:
        if r.tpr is None:
            out.append(f"group {r.group!r}: TPR undefined (no positives)")
        if r.fpr is None:
            out.append(f"group {r.group!r}: FPR undefined (no negatives)")
    return tuple(out)


def performance_metrics(
    y_true: np.ndarray, y_pred: np.ndarray
) -> tuple[float, float, float | None]:
    """(f1, accuracy, balanced_accuracy); balanced is None when a class is absent."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) == 0:
        raise DataError("cannot compute performance metrics on zero rows")
    tp = float(np.sum((y_true == 1) & (y_pred == 1)))
    fp = float(np.sum((y_true == 0) & (y_pred == 1)))
    tn = float(np.sum((y_true == 0) & (y_pred == 0)))
    fn = float(np.sum((y_true == 1) & (y_pred == 0)))
    accuracy = (tp + tn) / len(y_true)
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 0.0
    tpr = tp / (tp + fn) if (tp + fn) > 0 else None
    tnr = tn / (tn + fp) if (tn + fp) > 0 else None
    balanced = (tpr + tnr) / 2 if tpr is not None and tnr is not None else None
    return f1, accuracy, balanced


# -- grouping -----------------------------------------------------------------


def majority_category(labels: np.ndarray) -> str:
    """Most frequent category; frequency ties break by name ascending."""
    values, counts = np.unique(np.asarray(labels, dtype=np.str_), return_counts=True)
    order = sorted(range(len(values)), key=lambda i: (-counts[i], values[i]))
    return str(values[order[0]])


def regroup_majority_minority(labels: np.ndarray, majority: str) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.str_)
    return np.where(labels == majority, MAJORITY_TOKEN, MINORITY_TOKEN)


# -- strategy enumeration ------------------------------------------------------


def strategy_from_assignments(assignments: Mapping[str, str]) -> EvalStrategy:
    return EvalStrategy(
        grouping=assignments.get(GROUPING_DECISION, "separate"),
        exclude_trained_out_groups=assignments.get(EXCLUDE_DECISION, "keep-in-eval"),
        subset=assignments.get(SUBSET_DECISION, FULL_SUBSET),
        assignments=dict(assignments),
    )


def enumerate_eval_strategies(eval_space: ds.DecisionSpace) -> list[EvalStrategy]:
    """Cartesian product of the evaluation decisions, in grid order."""
    if eval_space.kind != "evaluation":
        raise ConfigError("strategy enumeration needs a space of kind 'evaluation'")
    universes = ds.enumerate_universes(eval_space, global_seed=0)
    return [strategy_from_assignments(u.assignments) for u in universes]


# -- full evaluation -------------------------------------------------------------


def evaluate(
    test: TabularFrame,
    scores: np.ndarray,
    cutoff_option: str,
    strategy: EvalStrategy,
    *,
    majority_label: str,
    subset_bundles: Mapping[str, Sequence[RowPredicate]] | None = None,
    train_excluded_groups: Sequence[str] = (),
    freeze_cutoff_on_full_test: bool = False,
) -> StrategyResult:
    """Apply one evaluation strategy to a scored test partition.

    Order: subset filter, then eval-side group exclusion, then the cutoff on
    the surviving scores (unless frozen on the full test scores), then
    grouping, then metrics.  Strategy-level failures come back as status
    codes so one bad cell never aborts a sweep.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (test.n,):
        raise DataError("scores length does not match the test frame")
    bundles = subset_bundles or {}
    if strategy.subset == FULL_SUBSET and strategy.subset not in bundles:
        predicates: Sequence[RowPredicate] = ()
    else:
        try:
            predicates = bundles[strategy.subset]
        except KeyError:
            raise ConfigError(
                f"no subset bundle named {strategy.subset!r} in the manifest"
            ) from None

    keep = predicate_mask(test, predicates)
    if strategy.exclude_trained_out_groups == "exclude-in-eval" and train_excluded_groups:
        keep &= ~np.isin(
            test.column(test.protected_name),
            np.asarray(list(train_excluded_groups), dtype=np.str_),
        )
    if not keep.any():
        return StrategyResult(strategy, ERR_EMPTY_EVAL, None)

    surviving = scores[keep]
    threshold = pipeline.cutoff_threshold(
        scores if freeze_cutoff_on_full_test else surviving, cutoff_option
    )
    y_pred = pipeline.apply_cutoff(surviving, cutoff_option, threshold=threshold)
    y_true = test.column(test.target_name)[keep].astype(np.int64)

    labels = test.column(test.protected_name)[keep]
    if strategy.grouping == "majority-minority":
        labels = regroup_majority_minority(labels, majority_label)
        categories: Sequence[str] = (MAJORITY_TOKEN, MINORITY_TOKEN)
    else:
        categories = test.categories[test.protected_name]

    rates = group_rates(y_true, y_pred, labels, categories)
    warnings = undefined_rate_warnings(rates)
    try:
        eq_odds = equalized_odds_difference(rates)
    except MetricUndefinedError:
        return StrategyResult(strategy, ERR_METRIC_UNDEFINED, None, warnings)
    f1, accuracy, balanced = performance_metrics(y_true, y_pred)
    bundle = MetricBundle(
        eq_odds_diff=eq_odds,
        f1=f1,
        accuracy=accuracy,
        balanced_accuracy=balanced,
        rates=rates,
        n_rows=int(np.sum(keep)),
    )
    return StrategyResult(strategy, STATUS_OK, bundle, warnings)


# -- spread over strategies -------------------------------------------------------


@dataclass(frozen=True)
class SpreadStats:
    delta: float
    minimum: float
    maximum: float
    defined: int
    undefined: int


def spread_stats(values: Sequence[float | None]) -> SpreadStats:
    """Max minus min over defined values; errors with fewer than 2 defined."""
    defined = [float(v) for v in values if v is not None]
    undefined = len(values) - len(defined)
    if len(defined) < 2:
        raise MetricUndefinedError(
            f"spread needs at least 2 defined values, got {len(defined)}"
        )
    return SpreadStats(
        delta=max(defined) - min(defined),
        minimum=min(defined),
        maximum=max(defined),
        defined=len(defined),
        undefined=undefined,
    )
