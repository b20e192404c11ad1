"""Stability of importance rankings under subsampling and replication.

Correlations here compare importance vectors aligned by decision subset.
Pearson uses raw importances, Spearman uses average ranks for ties.  An
undefined correlation (a constant vector) is reported as None, never as a
fabricated number.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import AnalysisError
from .importance import ImportanceReport, MetricTable, forest_fanova

__all__ = [
    "CorrelationStat",
    "pearson",
    "spearman",
    "importance_vector",
    "align_reports",
    "subsample_stability",
    "StabilityRow",
    "StabilityReport",
    "stability_to_csv",
    "replication_agreement",
]


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson r; None when either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise AnalysisError("correlation inputs must have equal length")
    if x.size < 2:
        raise AnalysisError("correlation needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return None
    r = float(np.sum(dx * dy) / (sx * sy))
    return max(-1.0, min(1.0, r))  # rounding must not break |r| <= 1


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman rho: Pearson on average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise AnalysisError("correlation inputs must have equal length")
    if x.size < 2:
        raise AnalysisError("correlation needs at least 2 points")
    return pearson(_average_ranks(x), _average_ranks(y))


@dataclass(frozen=True)
class CorrelationStat:
    pearson: float | None
    spearman: float | None


def correlation(x: Sequence[float], y: Sequence[float]) -> CorrelationStat:
    return CorrelationStat(pearson=pearson(x, y), spearman=spearman(x, y))


# -- alignment -----------------------------------------------------------------


def importance_vector(report: ImportanceReport) -> dict[tuple[str, ...], float]:
    return {e.subset: e.importance for e in report.entries}


def align_reports(
    a: ImportanceReport | Mapping[tuple[str, ...], float],
    b: ImportanceReport | Mapping[tuple[str, ...], float],
) -> tuple[np.ndarray, np.ndarray]:
    """Vectors over the union of subset keys; absent subsets count as zero."""
    va = importance_vector(a) if isinstance(a, ImportanceReport) else dict(a)
    vb = importance_vector(b) if isinstance(b, ImportanceReport) else dict(b)
    keys = sorted(set(va) | set(vb))
    return (
        np.asarray([va.get(k, 0.0) for k in keys]),
        np.asarray([vb.get(k, 0.0) for k in keys]),
    )


# -- subsample stability ----------------------------------------------------------


@dataclass(frozen=True)
class StabilityRow:
    fraction: float
    rows_per_draw: int
    repetitions_ok: int
    repetitions_failed: int
    mean_pearson: float | None
    sd_pearson: float | None
    mean_spearman: float | None
    sd_spearman: float | None


@dataclass(frozen=True)
class StabilityReport:
    rows: tuple[StabilityRow, ...]
    repetitions: int
    trees: int
    max_order: int | None
    failures: tuple[str, ...] = ()


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())


def subsample_stability(
    table: MetricTable,
    fractions: Sequence[float],
    repetitions: int,
    seed: int,
    *,
    trees: int = 100,
    max_order: int | None = None,
    split_candidates: int | None = None,
) -> StabilityReport:
    """Correlate subsample importance estimates against the full-table estimate.

    For each fraction, `repetitions` subsamples are drawn without replacement
    and scored with the forest estimator; each draw's importance vector is
    correlated against the full-table reference.  Failed draws (too few rows
    or a constant response) are excluded and counted.
    """
    if repetitions < 1:
        raise AnalysisError("need at least 1 repetition")
    for f in fractions:
        if not (0.0 < f <= 1.0):
            raise AnalysisError(f"subsample fraction {f} outside (0, 1]")

    seq = np.random.SeedSequence(seed)
    ref_seed, draw_seed = (int(s) for s in seq.generate_state(2))
    reference = forest_fanova(
        table, trees=trees, seed=ref_seed, max_order=max_order,
        split_candidates=split_candidates,
    )

    rng = np.random.default_rng(draw_seed)
    rows = []
    failures: list[str] = []
    for fraction in fractions:
        k = int(math.floor(fraction * table.n + 0.5))
        pearsons: list[float] = []
        spearmans: list[float] = []
        failed = 0
        for rep in range(repetitions):
            idx = rng.choice(table.n, size=min(k, table.n), replace=False)
            sub = table.take(idx)
            try:
                est = forest_fanova(
                    sub, trees=trees, seed=ref_seed, max_order=max_order,
                    split_candidates=split_candidates,
                )
            except AnalysisError as exc:
                failed += 1
                failures.append(f"fraction {fraction} rep {rep}: {exc}")
                continue
            va, vb = align_reports(reference, est)
            r = pearson(va, vb)
            rho = spearman(va, vb)
            if r is None or rho is None:
                failed += 1
                failures.append(f"fraction {fraction} rep {rep}: constant importance vector")
                continue
            pearsons.append(r)
            spearmans.append(rho)
        mean_r, sd_r = _mean_sd(pearsons)
        mean_rho, sd_rho = _mean_sd(spearmans)
        rows.append(
            StabilityRow(
                fraction=float(fraction),
                rows_per_draw=min(k, table.n),
                repetitions_ok=len(pearsons),
                repetitions_failed=failed,
                mean_pearson=mean_r,
                sd_pearson=sd_r,
                mean_spearman=mean_rho,
                sd_spearman=sd_rho,
            )
        )
    return StabilityReport(
        rows=tuple(rows),
        repetitions=repetitions,
        trees=trees,
        max_order=max_order,
        failures=tuple(failures),
    )


def stability_to_csv(report: StabilityReport, path) -> None:
    def cell(v):
        return "" if v is None else repr(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["fraction", "repetitions_ok", "mean_pearson", "sd_pearson",
             "mean_spearman", "sd_spearman"]
        )
        for row in report.rows:
            writer.writerow(
                [repr(row.fraction), row.repetitions_ok,
                 cell(row.mean_pearson), cell(row.sd_pearson),
                 cell(row.mean_spearman), cell(row.sd_spearman)]
            )


# -- replication agreement ----------------------------------------------------------


def replication_agreement(
    reports: Sequence[ImportanceReport],
) -> list[list[CorrelationStat | None]]:
    """Pairwise correlation matrix across replication importance reports.

    All reports must cover the same subset keys; the diagonal is None.
    """
    if len(reports) < 2:
        raise AnalysisError("replication agreement needs at least 2 reports")
    keys = {frozenset(importance_vector(r)) for r in reports}
    if len(keys) != 1:
        raise AnalysisError("replication reports cover different decision subsets")
    k = len(reports)
    matrix: list[list[CorrelationStat | None]] = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            va, vb = align_reports(reports[i], reports[j])
            stat = correlation(va, vb)
            matrix[i][j] = stat
            matrix[j][i] = stat
    return matrix
