"""Tabular frames: schema-validated CSV I/O, row filtering, synthetic data.

A frame is a fixed set of named columns over the same rows.  Category sets
for categorical and ordinal columns are frozen when the frame is created and
are carried unchanged through every row-level operation, so downstream
encoders and group metrics always see the full category universe even after
rows of some category were filtered away.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "DTYPES",
    "ROLES",
    "ColumnSchema",
    "TabularFrame",
    "RowPredicate",
    "parse_schema",
    "parse_predicates",
    "predicate_mask",
    "filter_rows",
    "load_csv",
    "write_csv",
    "synthesize",
]

DTYPES = ("numeric", "categorical", "ordinal")
ROLES = ("feature", "target", "protected", "auxiliary")
PREDICATE_OPS = ("equals", "not-equals", "in-set", "less-than", "at-least")

# Strict numeric literal: decimal digits with optional sign, fraction, and
# exponent.  Rejects locale separators, inf, and nan.
_NUMERIC_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class ColumnSchema:
    """Declared name, dtype, and role of one column."""

    name: str
    dtype: str
    role: str
    order: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise ConfigError("column name must be non-empty")
        if self.dtype not in DTYPES:
            raise ConfigError(f"column {self.name!r}: unknown dtype {self.dtype!r}")
        if self.role not in ROLES:
            raise ConfigError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.dtype == "ordinal":
            if not self.order:
                raise ConfigError(f"ordinal column {self.name!r} needs a category order")
            if len(set(self.order)) != len(self.order):
                raise ConfigError(f"ordinal column {self.name!r}: duplicate categories")
        elif self.order is not None:
            raise ConfigError(f"column {self.name!r}: only ordinal columns take an order")


def _validate_schema(columns: Sequence[ColumnSchema]) -> None:
    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate column names in schema")
    targets = [c for c in columns if c.role == "target"]
    if len(targets) != 1:
        raise ConfigError(f"schema needs exactly one target column, found {len(targets)}")
    if targets[0].dtype != "numeric":
        raise ConfigError("target column must be numeric with values in {0, 1}")
    protected = [c for c in columns if c.role == "protected"]
    if len(protected) != 1:
        raise ConfigError(
            f"schema needs exactly one protected column, found {len(protected)}"
        )
    if protected[0].dtype != "categorical":
        raise ConfigError("protected column must be categorical")


def parse_schema(doc: str | Mapping) -> tuple[ColumnSchema, ...]:
    """Parse a schema sidecar document (JSON text or decoded mapping)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schema document is not valid JSON: {exc}") from exc
    raw = doc.get("columns") if isinstance(doc, Mapping) else None
    if not isinstance(raw, Sequence) or not raw:
        raise ConfigError("schema document needs a non-empty 'columns' list")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, Mapping):
            raise ConfigError(f"schema column #{i} is not an object")
        missing = {"name", "dtype", "role"} - set(entry)
        if missing:
            raise ConfigError(f"schema column #{i}: missing fields {sorted(missing)}")
        order = entry.get("order")
        out.append(
            ColumnSchema(
                name=str(entry["name"]),
                dtype=str(entry["dtype"]),
                role=str(entry["role"]),
                order=tuple(str(v) for v in order) if order is not None else None,
            )
        )
    cols = tuple(out)
    _validate_schema(cols)
    return cols


class TabularFrame:
    """Immutable-by-convention column store with frozen category sets."""

    __slots__ = ("schema", "_columns", "categories", "n")

    def __init__(
        self,
        schema: Sequence[ColumnSchema],
        columns: Mapping[str, np.ndarray],
        categories: Mapping[str, tuple[str, ...]] | None = None,
    ):
        schema = tuple(schema)
        _validate_schema(schema)
        if set(columns) != {c.name for c in schema}:
            raise DataError("column data does not match schema names")
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")
        n = lengths.pop() if lengths else 0

        cats: dict[str, tuple[str, ...]] = {}
        cols: dict[str, np.ndarray] = {}
        for c in schema:
            raw = columns[c.name]
            if c.dtype == "numeric":
                arr = np.asarray(raw, dtype=np.float64)
                if not np.all(np.isfinite(arr)):
                    raise DataError(f"column {c.name!r}: non-finite numeric value")
                if c.role == "target":
                    bad = ~np.isin(arr, (0.0, 1.0))
                    if bad.any():
                        raise DataError(
                            f"target column {c.name!r}: values outside {{0, 1}} "
                            f"at row {int(np.argmax(bad))}"
                        )
            else:
                arr = np.asarray(raw, dtype=np.str_)
                if c.dtype == "ordinal":
                    declared = c.order or ()
                    unknown = set(np.unique(arr)) - set(declared)
                    if unknown:
                        raise DataError(
                            f"ordinal column {c.name!r}: values {sorted(unknown)} "
                            "missing from declared order"
                        )
                    cats[c.name] = tuple(declared)
                else:
                    given = categories.get(c.name) if categories else None
                    if given is not None:
                        unknown = set(np.unique(arr)) - set(given)
                        if unknown:
                            raise DataError(
                                f"column {c.name!r}: values {sorted(unknown)} outside "
                                "the frozen category set"
                            )
                        cats[c.name] = tuple(given)
                    else:
                        cats[c.name] = tuple(sorted(np.unique(arr).tolist()))
            arr.setflags(write=False)
            cols[c.name] = arr

        self.schema = schema
        self._columns = cols
        self.categories = cats
        self.n = n

    # -- accessors ---------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def column(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise DataError(f"no column named {name!r}") from None

    def schema_for(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise DataError(f"no column named {name!r}")

    @property
    def target_name(self) -> str:
        return next(c.name for c in self.schema if c.role == "target")

    @property
    def protected_name(self) -> str:
        return next(c.name for c in self.schema if c.role == "protected")

    def feature_names(self, include_protected: bool = True) -> tuple[str, ...]:
        roles = ("feature", "protected") if include_protected else ("feature",)
        return tuple(c.name for c in self.schema if c.role in roles)

    # -- row-level derivations (category sets preserved) --------------------

    def mask(self, keep: np.ndarray) -> "TabularFrame":
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.n,):
            raise DataError("mask length does not match row count")
        return TabularFrame(
            self.schema,
            {name: arr[keep] for name, arr in self._columns.items()},
            self.categories,
        )

    def take(self, idx: np.ndarray) -> "TabularFrame":
        idx = np.asarray(idx, dtype=np.int64)
        return TabularFrame(
            self.schema,
            {name: arr[idx] for name, arr in self._columns.items()},
            self.categories,
        )

    def replace_column(
        self,
        name: str,
        values: np.ndarray,
        new_schema: ColumnSchema | None = None,
    ) -> "TabularFrame":
        """Return a frame with one column's data (and optionally schema) swapped."""
        entry = new_schema or self.schema_for(name)
        if entry.name != name:
            raise DataError("replacement schema entry must keep the column name")
        schema = tuple(entry if c.name == name else c for c in self.schema)
        cols = dict(self._columns)
        cols[name] = values
        cats = {k: v for k, v in self.categories.items() if k != name}
        return TabularFrame(schema, cols, cats)

    def add_columns(
        self, entries: Sequence[ColumnSchema], columns: Mapping[str, np.ndarray]
    ) -> "TabularFrame":
        schema = self.schema + tuple(entries)
        cols = dict(self._columns)
        cols.update(columns)
        return TabularFrame(schema, cols, self.categories)

    def equals(self, other: "TabularFrame") -> bool:
        if self.schema != other.schema or self.n != other.n:
            return False
        if self.categories != other.categories:
            return False
        return all(
            np.array_equal(self._columns[name], other._columns[name])
            for name in self.names
        )


# -- filtering ---------------------------------------------------------------


@dataclass(frozen=True)
class RowPredicate:
    """One column-level condition; a filter is a conjunction of these."""

    column: str
    op: str
    value: object

    def __post_init__(self):
        if self.op not in PREDICATE_OPS:
            raise ConfigError(f"unknown predicate op {self.op!r}")


def parse_predicates(raw: Sequence[Mapping]) -> tuple[RowPredicate, ...]:
    out = []
    for i, entry in enumerate(raw):
        missing = {"column", "op", "value"} - set(entry)
        if missing:
            raise ConfigError(f"predicate #{i}: missing fields {sorted(missing)}")
        value = entry["value"]
        if entry["op"] == "in-set":
            if not isinstance(value, Sequence) or isinstance(value, str):
                raise ConfigError(f"predicate #{i}: in-set value must be a list")
            value = tuple(str(v) for v in value)
        out.append(RowPredicate(str(entry["column"]), str(entry["op"]), value))
    return tuple(out)


def _single_mask(frame: TabularFrame, pred: RowPredicate) -> np.ndarray:
    col = frame.schema_for(pred.column)
    values = frame.column(pred.column)
    if pred.op in ("less-than", "at-least"):
        if col.dtype == "numeric":
            ref = float(pred.value)  # type: ignore[arg-type]
            keys = values
        elif col.dtype == "ordinal":
            order = list(col.order or ())
            if pred.value not in order:
                raise DataError(
                    f"predicate value {pred.value!r} not a category of {col.name!r}"
                )
            ref = float(order.index(pred.value))
            lookup = {cat: float(i) for i, cat in enumerate(order)}
            keys = np.asarray([lookup[v] for v in values.tolist()])
        else:
            raise DataError(
                f"op {pred.op!r} needs a numeric or ordinal column, "
                f"{col.name!r} is {col.dtype}"
            )
        return keys < ref if pred.op == "less-than" else keys >= ref
    if col.dtype == "numeric":
        ref_values = (
            [float(v) for v in pred.value]  # type: ignore[union-attr]
            if pred.op == "in-set"
            else [float(pred.value)]  # type: ignore[arg-type]
        )
        hit = np.isin(values, np.asarray(ref_values, dtype=np.float64))
    else:
        ref_strs = (
            [str(v) for v in pred.value]  # type: ignore[union-attr]
            if pred.op == "in-set"
            else [str(pred.value)]
        )
        hit = np.isin(values, np.asarray(ref_strs, dtype=np.str_))
    return ~hit if pred.op == "not-equals" else hit


def predicate_mask(frame: TabularFrame, predicates: Iterable[RowPredicate]) -> np.ndarray:
    """Boolean keep-mask for the conjunction of the given predicates."""
    keep = np.ones(frame.n, dtype=bool)
    for pred in predicates:
        keep &= _single_mask(frame, pred)
    return keep


def filter_rows(frame: TabularFrame, predicates: Iterable[RowPredicate]) -> TabularFrame:
    return frame.mask(predicate_mask(frame, predicates))


# -- CSV I/O -----------------------------------------------------------------


def _parse_numeric(text: str, column: str, row: int) -> float:
    if not _NUMERIC_RE.match(text):
        raise DataError(
            f"column {column!r}, row {row}: {text!r} is not a plain decimal number"
        )
    return float(text)


def load_csv(path, schema: Sequence[ColumnSchema]) -> TabularFrame:
    """Load an RFC-4180 CSV with a header row against a declared schema."""
    schema = tuple(schema)
    _validate_schema(schema)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = {c.name for c in schema}
        got = set(header)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise DataError(
                f"{path}: header does not match schema "
                f"(missing {missing}, unexpected {extra})"
            )
        if len(header) != len(set(header)):
            raise DataError(f"{path}: duplicate header names")
        pos = {name: header.index(name) for name in expected}
        raw: dict[str, list] = {c.name: [] for c in schema}
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} fields, "
                                f"expected {len(header)}")
            for c in schema:
                text = row[pos[c.name]]
                if text == "":
                    raise DataError(
                        f"{path}: column {c.name!r}, row {rownum}: missing value"
                    )
                if c.dtype == "numeric":
                    raw[c.name].append(_parse_numeric(text, c.name, rownum))
                else:
                    raw[c.name].append(text)
    columns = {
        c.name: np.asarray(raw[c.name], dtype=np.float64 if c.dtype == "numeric" else np.str_)
        for c in schema
    }
    return TabularFrame(schema, columns)


def write_csv(frame: TabularFrame, path) -> None:
    """Write a frame as CSV; numeric cells use shortest round-trip formatting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(frame.names)
        cols = []
        for c in frame.schema:
            arr = frame.column(c.name)
            if c.dtype == "numeric":
                cols.append([repr(float(v)) for v in arr])
            else:
                cols.append([str(v) for v in arr])
        for row in zip(*cols):
            writer.writerow(row)


# -- synthetic data ------------------------------------------------------------


def _check_proportions(what: str, props: Mapping[str, float]) -> None:
    total = math.fsum(float(v) for v in props.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"{what}: proportions sum to {total}, expected 1")
    if any(float(v) < 0 for v in props.values()):
        raise ConfigError(f"{what}: negative proportion")


def _draw_categorical(rng, levels: Sequence[str], props: Sequence[float], n: int):
    return rng.choice(np.asarray(levels, dtype=np.str_), size=n, p=np.asarray(props))


def _draw_numeric(rng, spec: Mapping, name: str, n: int) -> np.ndarray:
    dist = spec.get("dist")
    if dist == "uniform":
        return rng.uniform(float(spec["low"]), float(spec["high"]), size=n)
    if dist == "normal":
        return rng.normal(float(spec["mean"]), float(spec["sd"]), size=n)
    if dist == "lognormal":
        return rng.lognormal(float(spec["mean"]), float(spec["sigma"]), size=n)
    raise ConfigError(f"numeric feature {name!r}: unknown dist {dist!r}")


def synthesize(gen_spec: Mapping, seed: int) -> TabularFrame:
    """Generate a synthetic frame from a declarative generator spec.

    The spec gives the row count, protected-group proportions (at least 3
    groups), per-group target base rates, numeric feature distributions, and
    at least 2 auxiliary categorical columns.  Optional keys:

    - ``categorical_features``: extra categorical predictor columns.
    - ``signal``: per-feature logistic-ish weights; each row's positive rate
      becomes its group base rate shifted by the weighted z-scored features,
      clipped to [0.001, 0.999], so models have structure to learn while the
      per-group base rate is preserved on average.
    """
    n = int(gen_spec.get("n", 0))
    if n < 1:
        raise ConfigError("generator spec needs n >= 1")

    protected = gen_spec.get("protected")
    if not isinstance(protected, Mapping) or "groups" not in protected:
        raise ConfigError("generator spec needs protected.groups")
    prot_name = str(protected.get("name", "group"))
    groups = {str(k): float(v) for k, v in protected["groups"].items()}
    if len(groups) < 3:
        raise ConfigError("generator spec needs at least 3 protected groups")
    _check_proportions("protected groups", groups)

    base_rates = {str(k): float(v) for k, v in gen_spec.get("base_rates", {}).items()}
    if set(base_rates) != set(groups):
        raise ConfigError("base_rates must cover exactly the protected groups")
    for g, r in base_rates.items():
        if not (0.0 <= r <= 1.0):
            raise ConfigError(f"base rate for group {g!r} outside [0, 1]")

    numeric_features = gen_spec.get("numeric_features", {})
    categorical_features = gen_spec.get("categorical_features", {})
    auxiliary = gen_spec.get("auxiliary", {})
    if len(auxiliary) < 2:
        raise ConfigError("generator spec needs at least 2 auxiliary columns")
    target_name = str(gen_spec.get("target_column", "outcome"))

    rng = np.random.default_rng(seed)
    schema: list[ColumnSchema] = []
    columns: dict[str, np.ndarray] = {}

    group_levels = list(groups)
    labels = _draw_categorical(rng, group_levels, [groups[g] for g in group_levels], n)
    schema.append(ColumnSchema(prot_name, "categorical", "protected"))
    columns[prot_name] = labels

    for name, spec in numeric_features.items():
        schema.append(ColumnSchema(str(name), "numeric", "feature"))
        columns[str(name)] = _draw_numeric(rng, spec, str(name), n)

    for name, levels in categorical_features.items():
        props = {str(k): float(v) for k, v in levels.items()}
        _check_proportions(f"categorical feature {name!r}", props)
        keys = list(props)
        schema.append(ColumnSchema(str(name), "categorical", "feature"))
        columns[str(name)] = _draw_categorical(rng, keys, [props[k] for k in keys], n)

    for name, levels in auxiliary.items():
        props = {str(k): float(v) for k, v in levels.items()}
        _check_proportions(f"auxiliary column {name!r}", props)
        keys = list(props)
        schema.append(ColumnSchema(str(name), "categorical", "auxiliary"))
        columns[str(name)] = _draw_categorical(rng, keys, [props[k] for k in keys], n)

    rate = np.asarray([base_rates[g] for g in labels.tolist()])
    signal = gen_spec.get("signal", {})
    for fname, weight in signal.items():
        if str(fname) not in columns:
            raise ConfigError(f"signal refers to unknown feature {fname!r}")
        x = columns[str(fname)]
        if x.dtype != np.float64:
            raise ConfigError(f"signal feature {fname!r} must be numeric")
        sd = float(np.std(x))
        if sd > 0:
            rate = rate + float(weight) * (x - float(np.mean(x))) / sd
    rate = np.clip(rate, 0.001, 0.999) if signal else rate
    y = (rng.random(n) < rate).astype(np.float64)
    schema.append(ColumnSchema(target_name, "numeric", "target"))
    columns[target_name] = y

    return TabularFrame(schema, columns)
