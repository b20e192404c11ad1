"""Summary statistics over a results store and the explorer data bundle.

Everything here is recomputable from the persisted records alone; no state
from the run survives into the summary, so summarize/export can run on any
machine that holds the store and the two space definitions.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

from . import decision_space as ds
from . import importance as imp
from . import robustness as rb
from .errors import AnalysisError

__all__ = ["summarize", "export_explorer_bundle", "HISTOGRAM_BINS"]

HISTOGRAM_BINS = 20

_METRIC = "eq_odds_diff"
_PERF_METRICS = ("f1", "accuracy", "balanced_accuracy")
_FULL_SPREAD = 1.0 - 1e-9


def _histogram(values: Sequence[float]) -> list[int]:
    """Fixed 20-bin histogram over [0, 1]; the right edge lands in the last bin."""
    counts = [0] * HISTOGRAM_BINS
    for v in values:
        i = int(v * HISTOGRAM_BINS)
        if i >= HISTOGRAM_BINS:
            i = HISTOGRAM_BINS - 1
        elif i < 0:
            i = 0
        counts[i] += 1
    return counts


def _strategy_spread(record: Mapping) -> float | None:
    """Max minus min of the fairness metric over a model's ok strategies."""
    values = [
        row[_METRIC]
        for row in record.get("strategies", [])
        if row.get("status") == "ok" and row.get(_METRIC) is not None
    ]
    if len(values) < 2:
        return None
    return max(values) - min(values)


def summarize(records: Sequence[Mapping]) -> dict:
    """Aggregate statistics over a store's records.

    Histogram and extrema cover the primary fairness metric of ok universes;
    correlations pair each performance metric with it; the spread fractions
    count models whose metric varies across evaluation strategies by a full
    unit (or at least 0.9).
    """
    ok = [r for r in records if r.get("status") == "ok" and r.get(_METRIC) is not None]
    errors_by_code: dict[str, int] = {}
    for r in records:
        if r.get("status") != "ok":
            code = (r.get("error") or {}).get("code", "unknown")
            errors_by_code[code] = errors_by_code.get(code, 0) + 1

    metric_values = [float(r[_METRIC]) for r in ok]
    if metric_values:
        metric_stats = {
            "min": min(metric_values),
            "max": max(metric_values),
            "mean": sum(metric_values) / len(metric_values),
        }
    else:
        metric_stats = {"min": None, "max": None, "mean": None}

    correlations: dict[str, float | None] = {}
    for perf in _PERF_METRICS:
        pairs = [
            (float(r[perf]), float(r[_METRIC]))
            for r in ok
            if r.get(perf) is not None
        ]
        if len(pairs) < 2:
            correlations[perf] = None
            continue
        correlations[perf] = rb.pearson([p for p, _ in pairs], [m for _, m in pairs])

    spreads = [s for s in (_strategy_spread(r) for r in ok) if s is not None]
    if spreads:
        spread_stats = {
            "models_with_spread": len(spreads),
            "fraction_delta_full": sum(1 for s in spreads if s >= _FULL_SPREAD) / len(spreads),
            "fraction_delta_ge_0_9": sum(1 for s in spreads if s >= 0.9) / len(spreads),
            "max_delta": max(spreads),
        }
    else:
        spread_stats = {
            "models_with_spread": 0,
            "fraction_delta_full": None,
            "fraction_delta_ge_0_9": None,
            "max_delta": None,
        }

    return {
        "universes": len(records),
        "ok": len(ok),
        "errors": len(records) - len(ok),
        "errors_by_code": dict(sorted(errors_by_code.items())),
        "metric": metric_stats,
        "histogram": {
            "bins": HISTOGRAM_BINS,
            "range": [0.0, 1.0],
            "counts": _histogram(metric_values),
        },
        "performance_fairness_correlation": correlations,
        "spread": spread_stats,
    }


def _space_entries(space: ds.DecisionSpace) -> list[dict]:
    return [
        {"name": d.name, "options": list(d.options)}
        for d in space.decisions
    ]


def _importance_entries(report: imp.ImportanceReport | None) -> list[dict]:
    if report is None:
        return []
    return [
        {
            "subset": list(entry.subset),
            "order": entry.order,
            "importance": entry.importance,
            "std_dev": entry.std_dev,
        }
        for entry in imp.rank(report)
    ]


def export_explorer_bundle(
    records: Sequence[Mapping],
    design_space: ds.DecisionSpace,
    eval_space: ds.DecisionSpace,
    importance_report: imp.ImportanceReport | None,
    out_path: str | Path,
) -> Path:
    """Write the single JSON file the explorer consumes.

    Universes are ordered by id and strategies stay in evaluation-grid
    order, so exporting the same store twice produces identical bytes.
    """
    eval_names = list(eval_space.names)
    universes = []
    for record in sorted(records, key=lambda r: r["universe_id"]):
        evals = []
        for row in record.get("strategies", []):
            evals.append({
                "strategy": {name: row["options"].get(name) for name in eval_names},
                "eq_odds_diff": row.get(_METRIC),
                "status": row.get("status"),
            })
        universes.append({
            "id": record["universe_id"],
            "options": dict(record["options"]),
            "metrics": {
                "status": record.get("status"),
                "eq_odds_diff": record.get(_METRIC),
                "f1": record.get("f1"),
                "accuracy": record.get("accuracy"),
                "balanced_accuracy": record.get("balanced_accuracy"),
            },
            "evals": evals,
        })

    expected = {name for name in (r["universe_id"] for r in records)}
    if len(expected) != len(universes):
        raise AnalysisError("store contains duplicate universe ids")

    bundle = {
        "decisions": _space_entries(design_space),
        "eval_decisions": _space_entries(eval_space),
        "universes": universes,
        "importance": _importance_entries(importance_report),
        "summary": summarize(records),
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(bundle, sort_keys=True, separators=(",", ":"), allow_nan=False)
    out_path.write_text(text + "\n", encoding="utf-8")
    return out_path
