"""Pipeline stages parameterized by design-decision option tokens.

Every fit happens on the training partition only; the fitted parameters are
then applied unchanged to both partitions.  Quantiles throughout use linear
interpolation (h = (n - 1) * q), matching numpy's default, and standard
deviations use the population convention (denominator n).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data_model import ColumnSchema, TabularFrame
from .errors import ConfigError, DataError

__all__ = [
    "PipelineConfig",
    "ScalerParams",
    "BinningSpec",
    "EncoderSpec",
    "exclude_features",
    "exclude_subgroup_rows",
    "split_frame",
    "fit_scaler",
    "apply_scaler",
    "fit_binning",
    "apply_binning",
    "fit_encoder",
    "apply_encoder",
    "cutoff_threshold",
    "apply_cutoff",
]

EXCLUDE_FEATURE_OPTIONS = ("none", "race", "sex", "race-sex")
EXCLUDE_SUBGROUP_OPTIONS = (
    "keep-all",
    "drop-smallest-1",
    "drop-smallest-2",
    "keep-largest-2",
    "drop-other",
)
SCALE_OPTIONS = ("do-not-scale", "scale")
ENCODE_OPTIONS = ("one-hot", "ordinal")
STRATIFY_OPTIONS = ("none", "target", "protected-attribute", "both")

_BINS_RE = re.compile(r"^bins-(\d+(\.\d+)?)$")
_QUANTILES_RE = re.compile(r"^quantiles-(\d+)$")
_QCUT_RE = re.compile(r"^quantile-(0?\.\d+|1(\.0+)?)$")

MIN_TRAIN_ROWS_AFTER_DROP = 10


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def quantile_linear(values: np.ndarray, q: float) -> float:
    """Quantile with linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q, method="linear"))


def _parse_binning_option(option: str) -> tuple[str, float] | None:
    if option == "none":
        return None
    m = _BINS_RE.match(option)
    if m:
        width = float(m.group(1))
        if width <= 0:
            raise ConfigError(f"binning option {option!r}: width must be positive")
        return ("fixed-width", width)
    m = _QUANTILES_RE.match(option)
    if m:
        k = int(m.group(1))
        if k < 2:
            raise ConfigError(f"binning option {option!r}: need at least 2 bins")
        return ("quantile", float(k))
    raise ConfigError(f"unknown binning option {option!r}")


def parse_cutoff_option(option: str) -> tuple[str, float]:
    if option == "raw-0.5":
        return ("raw", 0.5)
    m = _QCUT_RE.match(option)
    if m:
        q = float(m.group(1))
        if not (0.0 < q < 1.0):
            raise ConfigError(f"cutoff option {option!r}: quantile must be in (0, 1)")
        return ("quantile", q)
    raise ConfigError(f"unknown cutoff option {option!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Validated option tokens for one universe's pipeline."""

    exclude_features: str = "none"
    exclude_subgroups: str = "keep-all"
    scale: str = "do-not-scale"
    preprocess_age: str = "none"
    preprocess_income: str = "none"
    encode_categorical: str = "one-hot"
    model: str = "logreg"
    stratify_split: str = "none"
    cutoff: str = "raw-0.5"
    test_fraction: float = 0.3

    def __post_init__(self):
        if self.exclude_features not in EXCLUDE_FEATURE_OPTIONS:
            raise ConfigError(f"unknown exclude_features option {self.exclude_features!r}")
        if self.exclude_subgroups not in EXCLUDE_SUBGROUP_OPTIONS:
            raise ConfigError(f"unknown exclude_subgroups option {self.exclude_subgroups!r}")
        if self.scale not in SCALE_OPTIONS:
            raise ConfigError(f"unknown scale option {self.scale!r}")
        if self.encode_categorical not in ENCODE_OPTIONS:
            raise ConfigError(f"unknown encode option {self.encode_categorical!r}")
        if self.stratify_split not in STRATIFY_OPTIONS:
            raise ConfigError(f"unknown stratify option {self.stratify_split!r}")
        _parse_binning_option(self.preprocess_age)
        _parse_binning_option(self.preprocess_income)
        parse_cutoff_option(self.cutoff)
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError(f"test fraction must be in (0, 1), got {self.test_fraction}")

    @classmethod
    def from_assignments(
        cls, assignments: Mapping[str, str], test_fraction: float = 0.3
    ) -> "PipelineConfig":
        """Build a config from a universe's assignment map.

        Decisions absent from the map keep their identity default, so reduced
        design spaces (a subset of the nine decisions) run unchanged.
        """
        known = {
            "exclude_features",
            "exclude_subgroups",
            "scale",
            "preprocess_age",
            "preprocess_income",
            "encode_categorical",
            "model",
            "stratify_split",
            "cutoff",
        }
        kwargs = {k: v for k, v in assignments.items() if k in known}
        return cls(test_fraction=test_fraction, **kwargs)


# -- feature exclusion ---------------------------------------------------------


def exclude_features(
    feature_cols: Sequence[str],
    option: str,
    race_col: str | None,
    sex_col: str | None,
) -> tuple[str, ...]:
    """Remove the bound sensitive columns from the model's feature list."""
    if option not in EXCLUDE_FEATURE_OPTIONS:
        raise ConfigError(f"unknown exclude_features option {option!r}")
    drop = set()
    if option in ("race", "race-sex"):
        if not race_col or race_col not in feature_cols:
            raise DataError(f"exclude_features={option!r}: race column not bound or absent")
        drop.add(race_col)
    if option in ("sex", "race-sex"):
        if not sex_col or sex_col not in feature_cols:
            raise DataError(f"exclude_features={option!r}: sex column not bound or absent")
        drop.add(sex_col)
    return tuple(c for c in feature_cols if c not in drop)


# -- training-row subgroup exclusion --------------------------------------------


def exclude_subgroup_rows(
    train: TabularFrame,
    option: str,
    protected_col: str,
    other_category: str | None = None,
) -> tuple[TabularFrame, float, tuple[str, ...]]:
    """Drop whole protected groups from the training partition.

    Group sizes are counted on the training partition over the frozen
    category set; size ties break by category name ascending.  Returns the
    reduced frame, the dropped row fraction, and the dropped group names.
    """
    if option not in EXCLUDE_SUBGROUP_OPTIONS:
        raise ConfigError(f"unknown exclude_subgroups option {option!r}")
    labels = train.column(protected_col)
    cats = train.categories[protected_col]
    if option == "keep-all":
        return train, 0.0, ()

    sizes = {c: int(np.sum(labels == c)) for c in cats}
    by_size = sorted(cats, key=lambda c: (sizes[c], c))
    if option == "drop-smallest-1":
        dropped = tuple(by_size[:1])
    elif option == "drop-smallest-2":
        dropped = tuple(by_size[:2])
    elif option == "keep-largest-2":
        dropped = tuple(by_size[:-2]) if len(by_size) > 2 else ()
    else:  # drop-other
        if not other_category:
            raise ConfigError("exclude_subgroups=drop-other needs a bound category name")
        if other_category not in cats:
            raise DataError(
                f"drop-other category {other_category!r} not in the protected "
                f"category set {list(cats)}"
            )
        dropped = (other_category,)

    keep = ~np.isin(labels, np.asarray(dropped, dtype=np.str_))
    reduced = train.mask(keep)
    remaining_groups = np.unique(reduced.column(protected_col))
    if len(remaining_groups) < 2 or reduced.n < MIN_TRAIN_ROWS_AFTER_DROP:
        raise DataError(
            f"exclude_subgroups={option!r} leaves {len(remaining_groups)} group(s) "
            f"and {reduced.n} row(s); need at least 2 groups and "
            f"{MIN_TRAIN_ROWS_AFTER_DROP} rows"
        )
    dropped_fraction = 1.0 - reduced.n / train.n if train.n else 0.0
    return reduced, dropped_fraction, dropped


# -- train/test split ------------------------------------------------------------


def split_frame(
    frame: TabularFrame,
    test_fraction: float,
    stratify_option: str,
    seed: int,
    *,
    target_col: str | None = None,
    protected_col: str | None = None,
) -> tuple[TabularFrame, TabularFrame, tuple[str, ...]]:
    """Deterministic (per seed) stratified train/test split.

    Each stratum contributes round(test_fraction * size) rows to test.
    Single-row strata go wholly to train and are reported as warnings.
    """
    if stratify_option not in STRATIFY_OPTIONS:
        raise ConfigError(f"unknown stratify option {stratify_option!r}")
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError(f"test fraction must be in (0, 1), got {test_fraction}")
    target_col = target_col or frame.target_name
    protected_col = protected_col or frame.protected_name

    if stratify_option == "none":
        keys = np.zeros(frame.n, dtype=np.str_)
    elif stratify_option == "target":
        keys = frame.column(target_col).astype(np.int64).astype(np.str_)
    elif stratify_option == "protected-attribute":
        keys = frame.column(protected_col)
    else:
        y = frame.column(target_col).astype(np.int64).astype(np.str_)
        g = frame.column(protected_col)
        keys = np.asarray([f"{a}\x1f{b}" for a, b in zip(y.tolist(), g.tolist())])

    rng = np.random.default_rng(seed)
    warnings: list[str] = []
    test_idx: list[np.ndarray] = []
    train_idx: list[np.ndarray] = []
    for key in sorted(np.unique(keys).tolist()):
        members = np.flatnonzero(keys == key)
        if members.size == 1:
            warnings.append(f"singleton stratum {key!r} assigned to train")
            train_idx.append(members)
            continue
        n_test = _round_half_up(test_fraction * members.size)
        perm = rng.permutation(members.size)
        test_idx.append(members[perm[:n_test]])
        train_idx.append(members[perm[n_test:]])

    train_rows = np.sort(np.concatenate(train_idx)) if train_idx else np.empty(0, np.int64)
    test_rows = np.sort(np.concatenate(test_idx)) if test_idx else np.empty(0, np.int64)
    return frame.take(train_rows), frame.take(test_rows), tuple(warnings)


# -- scaling ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScalerParams:
    """Per-column centering and spread fitted on train."""

    stats: Mapping[str, tuple[float, float]]
    constant_columns: tuple[str, ...] = ()


def fit_scaler(train: TabularFrame, columns: Sequence[str]) -> ScalerParams:
    stats: dict[str, tuple[float, float]] = {}
    constant = []
    for name in columns:
        if train.schema_for(name).dtype != "numeric":
            raise DataError(f"cannot scale non-numeric column {name!r}")
        values = train.column(name)
        mu = float(np.mean(values))
        sigma = float(np.std(values))  # population sd, denominator n
        if sigma == 0.0:
            constant.append(name)
        stats[name] = (mu, sigma)
    return ScalerParams(stats=stats, constant_columns=tuple(constant))


def apply_scaler(params: ScalerParams, frame: TabularFrame) -> TabularFrame:
    out = frame
    for name, (mu, sigma) in params.stats.items():
        values = out.column(name)
        scaled = np.zeros_like(values) if sigma == 0.0 else (values - mu) / sigma
        out = out.replace_column(name, scaled)
    return out


# -- binning ---------------------------------------------------------------------


@dataclass(frozen=True)
class BinningSpec:
    """Interior cut points turning one numeric column into an ordinal one."""

    column: str
    mode: str
    edges: tuple[float, ...]
    labels: tuple[str, ...]
    warnings: tuple[str, ...] = ()


def fit_binning(train: TabularFrame, column: str, option: str) -> BinningSpec | None:
    """Fit bin edges on the training column; option 'none' fits nothing."""
    parsed = _parse_binning_option(option)
    if parsed is None:
        return None
    mode, param = parsed
    values = train.column(column)
    if train.schema_for(column).dtype != "numeric":
        raise DataError(f"cannot bin non-numeric column {column!r}")
    warnings: list[str] = []
    if mode == "fixed-width":
        width = param
        lo = math.floor(float(np.min(values)) / width)
        hi = math.floor(float(np.max(values)) / width)
        edges = tuple(m * width for m in range(lo + 1, hi + 1))
    else:
        k = int(param)
        qs = [i / k for i in range(1, k)]
        raw = [quantile_linear(values, q) for q in qs]
        edges = tuple(sorted(set(raw)))
        if len(edges) < len(raw):
            warnings.append(
                f"column {column!r}: duplicate quantile edges collapsed "
                f"({len(raw)} -> {len(edges)})"
            )
    if len(edges) < 1:
        warnings.append(f"column {column!r}: degenerate binning, single bin")
    labels = tuple(f"bin-{i}" for i in range(len(edges) + 1))
    return BinningSpec(column=column, mode=mode, edges=edges, labels=labels,
                       warnings=tuple(warnings))


def apply_binning(spec: BinningSpec, frame: TabularFrame) -> TabularFrame:
    """Assign rows to half-open [edge_i, edge_i+1) bins; out-of-range clamps."""
    values = frame.column(spec.column)
    idx = np.digitize(values, np.asarray(spec.edges)) if spec.edges else np.zeros(
        frame.n, dtype=np.int64
    )
    binned = np.asarray([spec.labels[i] for i in idx], dtype=np.str_)
    old = frame.schema_for(spec.column)
    entry = ColumnSchema(spec.column, "ordinal", old.role, order=spec.labels)
    return frame.replace_column(spec.column, binned, entry)


# -- encoding --------------------------------------------------------------------


@dataclass(frozen=True)
class EncodedColumn:
    source: str
    mode: str  # "one-hot" | "ordinal" | "numeric"
    categories: tuple[str, ...] = ()

    def output_names(self) -> tuple[str, ...]:
        if self.mode == "one-hot":
            return tuple(f"{self.source}={cat}" for cat in self.categories)
        if self.mode == "ordinal":
            return (f"{self.source}#ord",)
        return (self.source,)


@dataclass(frozen=True)
class EncoderSpec:
    """How each feature column maps into the numeric model matrix."""

    columns: tuple[EncodedColumn, ...]

    @property
    def output_feature_names(self) -> tuple[str, ...]:
        out: list[str] = []
        for col in self.columns:
            out.extend(col.output_names())
        return tuple(out)


def fit_encoder(
    train: TabularFrame, feature_cols: Sequence[str], option: str
) -> EncoderSpec:
    """Bind each feature column to an encoding against its frozen categories.

    Under the 'ordinal' option only columns with a declared order are integer
    coded; columns without a natural ordering are always one-hot.
    """
    if option not in ENCODE_OPTIONS:
        raise ConfigError(f"unknown encode option {option!r}")
    encoded = []
    for name in feature_cols:
        entry = train.schema_for(name)
        if entry.dtype == "numeric":
            encoded.append(EncodedColumn(name, "numeric"))
        elif entry.dtype == "ordinal" and option == "ordinal":
            encoded.append(EncodedColumn(name, "ordinal", train.categories[name]))
        else:
            encoded.append(EncodedColumn(name, "one-hot", train.categories[name]))
    return EncoderSpec(columns=tuple(encoded))


def apply_encoder(spec: EncoderSpec, frame: TabularFrame) -> TabularFrame:
    """Add the encoded numeric columns to the frame.

    Source columns stay in place (the protected column keeps serving
    evaluation); the model matrix is read off spec.output_feature_names.
    """
    new_entries: list[ColumnSchema] = []
    new_columns: dict[str, np.ndarray] = {}
    for col in spec.columns:
        if col.mode == "numeric":
            continue
        values = frame.column(col.source)
        index = {cat: i for i, cat in enumerate(col.categories)}
        codes = np.empty(frame.n, dtype=np.int64)
        for row, v in enumerate(values.tolist()):
            if v not in index:
                raise DataError(
                    f"column {col.source!r}: unseen category {v!r} at apply time"
                )
            codes[row] = index[v]
        if col.mode == "ordinal":
            name = col.output_names()[0]
            new_entries.append(ColumnSchema(name, "numeric", "feature"))
            new_columns[name] = codes.astype(np.float64) + 1.0  # integer codes 1..K
        else:
            for i, name in enumerate(col.output_names()):
                new_entries.append(ColumnSchema(name, "numeric", "feature"))
                new_columns[name] = (codes == i).astype(np.float64)
    if not new_entries:
        return frame
    return frame.add_columns(new_entries, new_columns)


def model_matrix(frame: TabularFrame, feature_names: Sequence[str]) -> np.ndarray:
    """Stack encoded feature columns into the model's design matrix."""
    return np.column_stack([frame.column(name) for name in feature_names]) if feature_names \
        else np.empty((frame.n, 0))


# -- score cutoffs ----------------------------------------------------------------


def cutoff_threshold(scores: np.ndarray, option: str) -> float:
    """Threshold implied by a cutoff option for the given score sample."""
    mode, param = parse_cutoff_option(option)
    if mode == "raw":
        return param
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise DataError("cannot take a score quantile of an empty score set")
    return quantile_linear(scores, param)


def apply_cutoff(
    scores: np.ndarray, option: str, threshold: float | None = None
) -> np.ndarray:
    """Binarize scores: predict 0 iff score < threshold.

    When threshold is None it is derived from these scores (quantile cutoffs
    recompute on whatever score sample they are given).
    """
    scores = np.asarray(scores, dtype=np.float64)
    t = cutoff_threshold(scores, option) if threshold is None else threshold
    return (~(scores < t)).astype(np.int64)
