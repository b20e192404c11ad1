"""Multiverse execution: manifests, per-universe pipelines, results store.

One universe runs as: bind pipeline options, split, drop training subgroups,
fit and apply preprocessing on train only, train the model, score the held
out rows, then evaluate the score vector under every evaluation strategy.
Universe results are pure functions of (manifest, universe), so reruns and
different worker counts produce identical stores.

Store layout (inside the manifest's output directory):

- progress.jsonl   append-only, one record per completed universe, resume source
- results.jsonl    canonical records sorted by universe id
- results.csv      one row per (universe, strategy) projection
- timings.jsonl    wall times, completion order; explicitly not canonical
- run_meta.json    manifest fingerprint guarding against mixed resumes
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import decision_space as ds
from . import fairness_eval as fe
from . import importance as imp
from . import pipeline as pl
from . import robustness as rb
from .data_model import (
    RowPredicate,
    TabularFrame,
    load_csv,
    parse_predicates,
    parse_schema,
    synthesize,
    write_csv,
)
from .errors import ConfigError, DataError, IncompleteGridError, MetricUndefinedError, MultifairError
from .models import ModelSpec, predict_scores, train

__all__ = [
    "ColumnBindings",
    "RunManifest",
    "RunContext",
    "RunSummary",
    "build_context",
    "run_universe",
    "run_multiverse",
    "replicate",
    "read_records",
    "metric_table_from_records",
    "record_to_json",
]

STATUS_OK = "ok"
STATUS_ERROR = "error"
ERR_DEGENERATE_LABELS = "degenerate-labels"
ERR_STAGE_FAILURE = "stage-failure"

PROGRESS_FILE = "progress.jsonl"
RESULTS_FILE = "results.jsonl"
CSV_FILE = "results.csv"
TIMINGS_FILE = "timings.jsonl"
META_FILE = "run_meta.json"


@dataclass(frozen=True)
class ColumnBindings:
    """Names tying design-decision semantics to dataset columns."""

    race: str | None = None
    sex: str | None = None
    age: str | None = None
    income: str | None = None
    drop_other_category: str | None = None
    subsets: Mapping[str, tuple[RowPredicate, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class RunManifest:
    dataset_csv: str
    dataset_schema: str
    design_space: str
    evaluation_space: str
    output_dir: str
    global_seed: int = 0
    test_fraction: float = 0.3
    generator_spec: str | None = None
    sample_fraction: float | None = None
    sample_seed: int | None = None
    workers: int = 1
    replication_seeds: tuple[int, ...] = ()
    freeze_cutoff_on_full_test: bool = False
    model_hyperparameters: Mapping[str, Mapping[str, object]] = field(default_factory=dict)
    bindings: ColumnBindings = field(default_factory=ColumnBindings)
    grid_cap: int = ds.DEFAULT_GRID_CAP

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: str | Path = ".") -> "RunManifest":
        base = Path(base_dir)

        def path_of(key: str, required: bool = True) -> str | None:
            raw = doc.get(key)
            if raw is None:
                if required:
                    raise ConfigError(f"manifest is missing {key!r}")
                return None
            p = Path(str(raw))
            return str(p if p.is_absolute() else base / p)

        raw_bindings = doc.get("bindings", {})
        if not isinstance(raw_bindings, Mapping):
            raise ConfigError("manifest 'bindings' must be an object")
        subsets: dict[str, tuple[RowPredicate, ...]] = {}
        for name, preds in raw_bindings.get("subsets", {}).items():
            subsets[str(name)] = parse_predicates(preds)
        bindings = ColumnBindings(
            race=raw_bindings.get("race"),
            sex=raw_bindings.get("sex"),
            age=raw_bindings.get("age"),
            income=raw_bindings.get("income"),
            drop_other_category=raw_bindings.get("drop_other_category"),
            subsets=subsets,
        )
        test_fraction = float(doc.get("test_fraction", 0.3))
        if not (0.0 < test_fraction < 1.0):
            raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
        sample_fraction = doc.get("sample_fraction")
        model_hp = doc.get("model_hyperparameters", {})
        if not isinstance(model_hp, Mapping):
            raise ConfigError("manifest 'model_hyperparameters' must be an object")
        return cls(
            dataset_csv=path_of("dataset_csv"),
            dataset_schema=path_of("dataset_schema"),
            design_space=path_of("design_space"),
            evaluation_space=path_of("evaluation_space"),
            output_dir=path_of("output_dir"),
            global_seed=int(doc.get("global_seed", 0)),
            test_fraction=test_fraction,
            generator_spec=path_of("generator_spec", required=False),
            sample_fraction=None if sample_fraction is None else float(sample_fraction),
            sample_seed=None if doc.get("sample_seed") is None else int(doc["sample_seed"]),
            workers=int(doc.get("workers", 1)),
            replication_seeds=tuple(int(s) for s in doc.get("replication_seeds", [])),
            freeze_cutoff_on_full_test=bool(doc.get("freeze_cutoff_on_full_test", False)),
            model_hyperparameters={
                str(k): dict(v) for k, v in model_hp.items()
            },
            bindings=bindings,
            grid_cap=int(doc.get("grid_cap", ds.DEFAULT_GRID_CAP)),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"manifest file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["bindings"]["subsets"] = {
            name: [dataclasses.asdict(p) for p in preds]
            for name, preds in self.bindings.subsets.items()
        }
        out["replication_seeds"] = list(self.replication_seeds)
        return out

    def fingerprint(self) -> str:
        """Hash of everything that determines record content (not placement).

        Referenced files are folded in by content, so moving a manifest
        between directories keeps its fingerprint while editing a space
        or schema changes it.
        """
        doc = self.to_dict()
        doc.pop("output_dir")
        doc.pop("workers")
        for key in ("dataset_csv", "dataset_schema", "design_space",
                    "evaluation_space", "generator_spec"):
            path = doc[key]
            if path is None:
                continue
            p = Path(path)
            if p.exists():
                digest = hashlib.sha256(p.read_bytes()).hexdigest()[:16]
            else:
                digest = "absent"
            doc[key] = f"{os.path.basename(path)}:{digest}"
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest()[:16]


@dataclass(frozen=True)
class RunContext:
    """Everything run_universe needs, resolved once per process."""

    frame: TabularFrame
    design_space: ds.DecisionSpace
    eval_space: ds.DecisionSpace
    strategies: tuple[fe.EvalStrategy, ...]
    majority_label: str
    test_fraction: float
    bindings: ColumnBindings
    model_hyperparameters: Mapping[str, Mapping[str, object]]
    freeze_cutoff_on_full_test: bool


def _load_space(path: str, expected_kind: str) -> ds.DecisionSpace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"space file not found: {path}") from None
    space = ds.parse_space(text)
    if space.kind != expected_kind:
        raise ConfigError(f"{path}: expected a {expected_kind!r} space, got {space.kind!r}")
    return space


def ensure_dataset(manifest: RunManifest) -> None:
    """Synthesize the dataset file if the manifest names a generator."""
    csv_path = Path(manifest.dataset_csv)
    if csv_path.exists():
        return
    if manifest.generator_spec is None:
        raise DataError(f"dataset file not found: {csv_path}")
    gen = json.loads(Path(manifest.generator_spec).read_text(encoding="utf-8"))
    seed = int(gen.get("seed", 0))
    frame = synthesize(gen, seed)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(frame, csv_path)


def build_context(manifest: RunManifest) -> RunContext:
    ensure_dataset(manifest)
    schema = parse_schema(Path(manifest.dataset_schema).read_text(encoding="utf-8"))
    frame = load_csv(manifest.dataset_csv, schema)

    design = _load_space(manifest.design_space, "design")
    evaluation = _load_space(manifest.evaluation_space, "evaluation")
    strategies = tuple(fe.enumerate_eval_strategies(evaluation))

    bindings = manifest.bindings
    protected = frame.protected_name
    if bindings.race is not None and bindings.race != protected:
        raise ConfigError(
            f"race binding {bindings.race!r} does not name the protected column "
            f"{protected!r}"
        )
    for label, name in (("sex", bindings.sex), ("age", bindings.age),
                        ("income", bindings.income)):
        if name is not None and name not in frame.names:
            raise ConfigError(f"{label} binding {name!r} is not a dataset column")

    names = set(frame.names)
    for bundle, preds in bindings.subsets.items():
        for pred in preds:
            if pred.column not in names:
                raise ConfigError(
                    f"subset {bundle!r}: predicate column {pred.column!r} "
                    "is not a dataset column"
                )
    if fe.FULL_SUBSET in bindings.subsets and bindings.subsets[fe.FULL_SUBSET]:
        raise ConfigError("the 'full' subset is reserved and must not filter rows")

    # Every subset option the evaluation grid can pick must be resolvable.
    for decision in evaluation.decisions:
        if decision.name == fe.SUBSET_DECISION:
            for option in decision.options:
                if option != fe.FULL_SUBSET and option not in bindings.subsets:
                    raise ConfigError(
                        f"evaluation subset option {option!r} has no predicate "
                        "bundle in the manifest"
                    )

    # Design-space options that need bindings fail fast, not per universe.
    for decision in design.decisions:
        if decision.name == "exclude_features":
            if any(o in ("sex", "race-sex") for o in decision.options) and not bindings.sex:
                raise ConfigError("design space excludes 'sex' but no sex binding given")
        if decision.name == "exclude_subgroups":
            if "drop-other" in decision.options and not bindings.drop_other_category:
                raise ConfigError(
                    "design space uses drop-other but no drop_other_category binding"
                )
        if decision.name == "preprocess_age" and decision.options != ("none",):
            if not bindings.age:
                raise ConfigError("design space bins age but no age binding given")
        if decision.name == "preprocess_income" and decision.options != ("none",):
            if not bindings.income:
                raise ConfigError("design space bins income but no income binding given")

    majority = fe.majority_category(frame.column(protected))
    return RunContext(
        frame=frame,
        design_space=design,
        eval_space=evaluation,
        strategies=strategies,
        majority_label=majority,
        test_fraction=manifest.test_fraction,
        bindings=bindings,
        model_hyperparameters=manifest.model_hyperparameters,
        freeze_cutoff_on_full_test=manifest.freeze_cutoff_on_full_test,
    )


# -- one universe ------------------------------------------------------------------


def _bundle_fields(bundle: fe.MetricBundle | None) -> dict:
    if bundle is None:
        return {"eq_odds_diff": None, "f1": None, "accuracy": None,
                "balanced_accuracy": None}
    return {
        "eq_odds_diff": bundle.eq_odds_diff,
        "f1": bundle.f1,
        "accuracy": bundle.accuracy,
        "balanced_accuracy": bundle.balanced_accuracy,
    }


def _error_record(universe: ds.Universe, code: str, stage: str, message: str,
                  warnings: list[str], dropped_fraction=None, dropped_groups=()):
    return {
        "universe_id": universe.id,
        "options": dict(universe.assignments),
        "seed": universe.seed,
        "status": STATUS_ERROR,
        "error": {"code": code, "stage": stage, "message": message},
        "eq_odds_diff": None,
        "f1": None,
        "accuracy": None,
        "balanced_accuracy": None,
        "dropped_train_fraction": dropped_fraction,
        "dropped_train_groups": list(dropped_groups),
        "strategies": [],
        "warnings": warnings,
    }


def run_universe(ctx: RunContext, universe: ds.Universe) -> tuple[dict, float]:
    """Execute one universe; returns (record, wall_time_ms).

    The record never contains the wall time: records must be byte-identical
    across reruns, and timing is not part of the result.
    """
    t0 = time.perf_counter()
    warnings: list[str] = []
    stage = "configure"
    dropped_fraction: float | None = None
    dropped_groups: tuple[str, ...] = ()
    try:
        cfg = pl.PipelineConfig.from_assignments(
            universe.assignments, test_fraction=ctx.test_fraction
        )
        frame = ctx.frame
        protected = frame.protected_name
        bindings = ctx.bindings

        stage = "exclude-features"
        features = list(frame.feature_names(include_protected=True))
        features = list(pl.exclude_features(
            features, cfg.exclude_features,
            bindings.race or protected, bindings.sex,
        ))

        stage = "split"
        train_frame, test_frame, split_warnings = pl.split_frame(
            frame, cfg.test_fraction, cfg.stratify_split, universe.seed ^ 1,
        )
        warnings.extend(split_warnings)

        stage = "exclude-subgroups"
        train_frame, dropped_fraction, dropped_groups = pl.exclude_subgroup_rows(
            train_frame, cfg.exclude_subgroups, protected,
            bindings.drop_other_category,
        )

        stage = "scale"
        work_train, work_test = train_frame, test_frame
        if cfg.scale == "scale":
            numeric = [
                name for name in features
                if work_train.schema_for(name).dtype == "numeric"
            ]
            scaler = pl.fit_scaler(work_train, numeric)
            for name in scaler.constant_columns:
                warnings.append(f"column {name!r} constant on train; scaled to zeros")
            work_train = pl.apply_scaler(scaler, work_train)
            work_test = pl.apply_scaler(scaler, work_test)

        stage = "binning"
        for column, option in ((bindings.age, cfg.preprocess_age),
                               (bindings.income, cfg.preprocess_income)):
            if option == "none":
                continue
            if not column:
                raise ConfigError(f"binning option {option!r} has no bound column")
            spec = pl.fit_binning(work_train, column, option)
            warnings.extend(spec.warnings)
            work_train = pl.apply_binning(spec, work_train)
            work_test = pl.apply_binning(spec, work_test)

        stage = "encode"
        encoder = pl.fit_encoder(work_train, features, cfg.encode_categorical)
        work_train = pl.apply_encoder(encoder, work_train)
        work_test = pl.apply_encoder(encoder, work_test)
        model_features = encoder.output_feature_names

        stage = "train"
        if work_train.n < 10:
            raise DataError(
                f"training partition has {work_train.n} rows after exclusions"
            )
        y_train = work_train.column(frame.target_name)
        x_train = pl.model_matrix(work_train, model_features)
        spec = ModelSpec.resolve(
            cfg.model, ctx.model_hyperparameters.get(cfg.model)
        )
        model = train(spec, x_train, y_train, universe.seed ^ 2, model_features)
        warnings.extend(model.warnings)

        stage = "score"
        scores = predict_scores(
            model, pl.model_matrix(work_test, model_features), model_features
        )

        stage = "evaluate"
        reference = fe.evaluate(
            test_frame, scores, cfg.cutoff, fe.REFERENCE_STRATEGY,
            majority_label=ctx.majority_label,
            subset_bundles=bindings.subsets,
            train_excluded_groups=dropped_groups,
            freeze_cutoff_on_full_test=ctx.freeze_cutoff_on_full_test,
        )
        strategy_rows = []
        for strategy in ctx.strategies:
            result = fe.evaluate(
                test_frame, scores, cfg.cutoff, strategy,
                majority_label=ctx.majority_label,
                subset_bundles=bindings.subsets,
                train_excluded_groups=dropped_groups,
                freeze_cutoff_on_full_test=ctx.freeze_cutoff_on_full_test,
            )
            strategy_rows.append({
                "options": dict(strategy.assignments),
                "status": result.status,
                **_bundle_fields(result.bundle),
            })

        if reference.status != fe.STATUS_OK:
            warnings.extend(reference.warnings)
            record = _error_record(
                universe, reference.status, "evaluate",
                "reference evaluation failed", warnings,
                dropped_fraction, dropped_groups,
            )
            record["strategies"] = strategy_rows
            return record, (time.perf_counter() - t0) * 1000.0

        warnings.extend(reference.warnings)
        record = {
            "universe_id": universe.id,
            "options": dict(universe.assignments),
            "seed": universe.seed,
            "status": STATUS_OK,
            "error": None,
            **_bundle_fields(reference.bundle),
            "dropped_train_fraction": dropped_fraction,
            "dropped_train_groups": list(dropped_groups),
            "strategies": strategy_rows,
            "warnings": warnings,
        }
        return record, (time.perf_counter() - t0) * 1000.0
    except MetricUndefinedError as exc:
        record = _error_record(universe, fe.ERR_METRIC_UNDEFINED, stage, str(exc),
                               warnings, dropped_fraction, dropped_groups)
    except DataError as exc:
        code = ERR_DEGENERATE_LABELS if stage == "train" else ERR_STAGE_FAILURE
        record = _error_record(universe, code, stage, str(exc), warnings,
                               dropped_fraction, dropped_groups)
    except MultifairError as exc:
        record = _error_record(universe, ERR_STAGE_FAILURE, stage, str(exc),
                               warnings, dropped_fraction, dropped_groups)
    return record, (time.perf_counter() - t0) * 1000.0


# -- store -------------------------------------------------------------------------


def record_to_json(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def read_records(path: str | Path) -> list[dict]:
    """Read a JSON-lines store, deduplicating on universe id (first wins)."""
    out: dict[str, dict] = {}
    path = Path(path)
    if not path.exists():
        return []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            out.setdefault(record["universe_id"], record)
    return list(out.values())


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_canonical_outputs(records: Sequence[Mapping], ctx: RunContext,
                            out_dir: str | Path) -> tuple[Path, Path]:
    """results.jsonl and results.csv, sorted by universe id."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: r["universe_id"])

    jsonl_path = out_dir / RESULTS_FILE
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for record in ordered:
            fh.write(record_to_json(record))
            fh.write("\n")

    design_names = list(ctx.design_space.names)
    eval_names = list(ctx.eval_space.names)
    csv_path = out_dir / CSV_FILE
    import csv as _csv

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            ["universe_id"] + design_names + eval_names
            + ["eq_odds_diff", "f1", "accuracy", "balanced_accuracy", "status"]
        )
        for record in ordered:
            base = [record["universe_id"]]
            base += [record["options"].get(name, "") for name in design_names]
            if record["strategies"]:
                for row in record["strategies"]:
                    writer.writerow(
                        base
                        + [row["options"].get(name, "") for name in eval_names]
                        + [_csv_cell(row[k]) for k in
                           ("eq_odds_diff", "f1", "accuracy", "balanced_accuracy")]
                        + [row["status"]]
                    )
            else:
                code = record["error"]["code"] if record.get("error") else record["status"]
                writer.writerow(base + [""] * len(eval_names) + ["", "", "", "", code])
    return jsonl_path, csv_path


# -- whole-grid execution --------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    universes_total: int
    universes_run: int
    universes_skipped: int
    ok: int
    errors: int
    output_dir: str
    results_jsonl: str
    results_csv: str


_WORKER_CTX: RunContext | None = None


def _worker_init(manifest_dict: dict) -> None:
    global _WORKER_CTX
    _WORKER_CTX = build_context(RunManifest.from_dict(manifest_dict))


def _worker_run(universe: ds.Universe) -> tuple[dict, float]:
    assert _WORKER_CTX is not None
    return run_universe(_WORKER_CTX, universe)


def _universe_list(manifest: RunManifest, space: ds.DecisionSpace) -> list[ds.Universe]:
    if manifest.sample_fraction is not None:
        sample_seed = (
            manifest.sample_seed if manifest.sample_seed is not None
            else manifest.global_seed
        )
        return ds.sample_universes(
            space, manifest.sample_fraction, sample_seed, manifest.global_seed
        )
    return ds.enumerate_universes(space, manifest.global_seed, cap=manifest.grid_cap)


def run_multiverse(manifest: RunManifest, workers: int | None = None) -> RunSummary:
    """Run (or resume) every universe of the manifest's design grid."""
    ctx = build_context(manifest)
    universes = _universe_list(manifest, ctx.design_space)
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    meta_path = out_dir / META_FILE
    fingerprint = manifest.fingerprint()
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("fingerprint") != fingerprint:
            raise ConfigError(
                f"output dir {out_dir} holds results for a different manifest "
                f"(fingerprint {meta.get('fingerprint')} != {fingerprint})"
            )
    else:
        meta_path.write_text(
            json.dumps(
                {
                    "fingerprint": fingerprint,
                    "global_seed": manifest.global_seed,
                    "universes": len(universes),
                    "eval_strategies": len(ctx.strategies),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )

    done = {r["universe_id"]: r for r in read_records(out_dir / PROGRESS_FILE)}
    todo = [u for u in universes if u.id not in done]

    n_workers = manifest.workers if workers is None else workers
    progress_path = out_dir / PROGRESS_FILE
    timings_path = out_dir / TIMINGS_FILE
    with open(progress_path, "a", encoding="utf-8") as progress, \
            open(timings_path, "a", encoding="utf-8") as timings:

        def persist(record: dict, ms: float) -> None:
            progress.write(record_to_json(record))
            progress.write("\n")
            progress.flush()
            timings.write(json.dumps(
                {"universe_id": record["universe_id"], "wall_time_ms": ms}
            ))
            timings.write("\n")
            done[record["universe_id"]] = record

        if todo:
            if n_workers <= 1:
                for universe in todo:
                    record, ms = run_universe(ctx, universe)
                    persist(record, ms)
            else:
                chunk = max(1, len(todo) // (n_workers * 8))
                with ProcessPoolExecutor(
                    max_workers=n_workers,
                    initializer=_worker_init,
                    initargs=(manifest.to_dict(),),
                ) as pool:
                    for record, ms in pool.map(_worker_run, todo, chunksize=chunk):
                        persist(record, ms)

    ordered_ids = [u.id for u in universes]
    records = [done[uid] for uid in ordered_ids if uid in done]
    jsonl_path, csv_path = write_canonical_outputs(records, ctx, out_dir)
    ok = sum(1 for r in records if r["status"] == STATUS_OK)
    return RunSummary(
        universes_total=len(universes),
        universes_run=len(todo),
        universes_skipped=len(universes) - len(todo),
        ok=ok,
        errors=len(records) - ok,
        output_dir=str(out_dir),
        results_jsonl=str(jsonl_path),
        results_csv=str(csv_path),
    )


# -- analysis glue ---------------------------------------------------------------------


def metric_table_from_records(
    records: Iterable[Mapping],
    space: ds.DecisionSpace,
    metric: str = "eq_odds_diff",
) -> tuple[imp.MetricTable, int]:
    """Metric table over ok universes; returns (table, excluded_error_rows)."""
    rows = []
    excluded = 0
    for record in records:
        if record.get("status") != STATUS_OK or record.get(metric) is None:
            excluded += 1
            continue
        rows.append((record["options"], float(record[metric])))
    return imp.table_from_rows(rows, space), excluded


def replicate(
    manifest: RunManifest,
    seeds: Sequence[int] | None = None,
    workers: int | None = None,
) -> dict:
    """Independent full runs differing only in global seed, plus agreement.

    Each replication writes its own store under replication-<seed>/; the
    report correlates per-replication importance vectors pairwise.
    """
    chosen = tuple(seeds) if seeds else manifest.replication_seeds
    if len(chosen) < 2:
        raise ConfigError("replication needs at least 2 seeds")
    if len(set(chosen)) != len(chosen):
        raise ConfigError("replication seeds must be distinct")

    base_out = Path(manifest.output_dir)
    summaries = []
    reports = []
    methods = []
    for seed in chosen:
        sub = dataclasses.replace(
            manifest,
            global_seed=int(seed),
            output_dir=str(base_out / f"replication-{seed}"),
        )
        summary = run_multiverse(sub, workers=workers)
        summaries.append(summary)
        records = read_records(Path(summary.results_jsonl))
        space = _load_space(manifest.design_space, "design")
        table, _excluded = metric_table_from_records(records, space)
        try:
            report = imp.exact_fanova(table)
            methods.append("exact")
        except IncompleteGridError:
            report = imp.forest_fanova(table, seed=int(seed))
            methods.append("forest")
        reports.append(report)

    matrix = rb.replication_agreement(reports)
    pairs = []
    for i in range(len(chosen)):
        for j in range(i + 1, len(chosen)):
            stat = matrix[i][j]
            pairs.append({
                "seed_a": chosen[i],
                "seed_b": chosen[j],
                "pearson": stat.pearson,
                "spearman": stat.spearman,
            })
    report_doc = {
        "seeds": list(chosen),
        "importance_methods": methods,
        "pairs": pairs,
        "stores": [s.output_dir for s in summaries],
    }
    report_path = base_out / "replication_report.json"
    base_out.mkdir(parents=True, exist_ok=True)
    report_path.write_text(
        json.dumps(report_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    report_doc["report_path"] = str(report_path)
    return report_doc
