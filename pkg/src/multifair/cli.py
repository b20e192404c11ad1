"""Command-line entry point.

All subcommands print a single JSON document to stdout; anything meant for
a human (progress, warnings) goes to stderr.  Exit codes: 0 ok, 2 usage or
configuration, 3 data, 4 analysis.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import importance as imp
from . import robustness as rb
from . import runner as rn
from .decision_space import parse_space
from .errors import (
    AnalysisError,
    ConfigError,
    DataError,
    IncompleteGridError,
    MultifairError,
)
from .report import export_explorer_bundle, summarize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ANALYSIS = 4


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": {"type": kind, "message": message}}), file=sys.stderr)
    return code


# -- scaffold ------------------------------------------------------------------------

_SCHEMA = {
    "columns": [
        {"name": "race", "dtype": "categorical", "role": "protected"},
        {"name": "sex", "dtype": "categorical", "role": "feature"},
        {"name": "age", "dtype": "numeric", "role": "feature"},
        {"name": "income", "dtype": "numeric", "role": "feature"},
        {"name": "score1", "dtype": "numeric", "role": "feature"},
        {"name": "score2", "dtype": "numeric", "role": "feature"},
        {"name": "region", "dtype": "categorical", "role": "auxiliary"},
        {"name": "service", "dtype": "categorical", "role": "auxiliary"},
        {"name": "citizen", "dtype": "categorical", "role": "auxiliary"},
        {"name": "outcome", "dtype": "numeric", "role": "target"},
    ]
}

_GENERATOR = {
    "n": 5000,
    "seed": 20240601,
    "target_column": "outcome",
    "protected": {
        "name": "race",
        "groups": {"alpha": 0.6, "beta": 0.3, "gamma": 0.1},
    },
    "base_rates": {"alpha": 0.45, "beta": 0.3, "gamma": 0.2},
    "numeric_features": {
        "age": {"dist": "uniform", "low": 18, "high": 64},
        "income": {"dist": "lognormal", "mean": 10.5, "sigma": 0.6},
        "score1": {"dist": "normal", "mean": 0.0, "sd": 1.0},
        "score2": {"dist": "normal", "mean": 0.0, "sd": 1.0},
    },
    "categorical_features": {"sex": {"female": 0.5, "male": 0.5}},
    "auxiliary": {
        "region": {"east": 0.4, "south": 0.35, "west": 0.25},
        "service": {"civilian": 0.9, "military": 0.1},
        "citizen": {"yes": 0.85, "no": 0.15},
    },
    "signal": {"score1": 0.25, "score2": 0.15, "age": 0.05},
}

_MODEL_OPTIONS = ["logreg", "elasticnet", "rf", "gbm"]
_CUTOFF_OPTIONS = ["raw-0.5", "quantile-0.1", "quantile-0.25"]

_DESIGN_96 = {
    "kind": "design",
    "decisions": [
        {"name": "scale", "category": "preprocessing",
         "options": ["do-not-scale", "scale"]},
        {"name": "model", "category": "modeling", "options": _MODEL_OPTIONS},
        {"name": "stratify_split", "category": "modeling",
         "options": ["none", "target", "protected-attribute", "both"]},
        {"name": "cutoff", "category": "post-hoc", "options": _CUTOFF_OPTIONS},
    ],
}

_DESIGN_24 = {
    "kind": "design",
    "decisions": [
        {"name": "scale", "category": "preprocessing",
         "options": ["do-not-scale", "scale"]},
        {"name": "model", "category": "modeling", "options": _MODEL_OPTIONS},
        {"name": "cutoff", "category": "post-hoc", "options": _CUTOFF_OPTIONS},
    ],
}

# Full nine-decision grid; option counts 4*5*2*4*4*2*4*4*3 = 61440.
_DESIGN_FULL = {
    "kind": "design",
    "decisions": [
        {"name": "exclude_features", "category": "data-selection",
         "options": ["none", "race", "sex", "race-sex"]},
        {"name": "exclude_subgroups", "category": "data-selection",
         "options": ["keep-all", "drop-smallest-1", "drop-smallest-2",
                     "keep-largest-2", "drop-other"]},
        {"name": "scale", "category": "preprocessing",
         "options": ["do-not-scale", "scale"]},
        {"name": "preprocess_age", "category": "preprocessing",
         "options": ["none", "bins-10", "quantiles-3", "quantiles-4"]},
        {"name": "preprocess_income", "category": "preprocessing",
         "options": ["none", "bins-10000", "quantiles-3", "quantiles-4"]},
        {"name": "encode_categorical", "category": "preprocessing",
         "options": ["one-hot", "ordinal"]},
        {"name": "model", "category": "modeling", "options": _MODEL_OPTIONS},
        {"name": "stratify_split", "category": "modeling",
         "options": ["none", "target", "protected-attribute", "both"]},
        {"name": "cutoff", "category": "post-hoc", "options": _CUTOFF_OPTIONS},
    ],
}

_EVALUATION = {
    "kind": "evaluation",
    "decisions": [
        {"name": "eval_grouping", "category": "evaluation",
         "options": ["separate", "majority-minority"]},
        {"name": "eval_exclude_subgroups", "category": "evaluation",
         "options": ["keep-in-eval", "exclude-in-eval"]},
        {"name": "eval_subset", "category": "evaluation",
         "options": ["full", "largest-region", "most-privileged-region",
                     "locality-east", "locality-south", "exclude-military",
                     "exclude-non-citizens"]},
    ],
}

_SUBSET_BINDINGS = {
    "largest-region": [{"column": "region", "op": "equals", "value": "east"}],
    "most-privileged-region": [{"column": "region", "op": "equals", "value": "west"}],
    "locality-east": [{"column": "region", "op": "equals", "value": "east"}],
    "locality-south": [{"column": "region", "op": "equals", "value": "south"}],
    "exclude-military": [{"column": "service", "op": "not-equals", "value": "military"}],
    "exclude-non-citizens": [{"column": "citizen", "op": "equals", "value": "yes"}],
}


def _manifest_doc(design_file: str, out_dir: str) -> dict:
    return {
        "dataset_csv": "data/synthetic.csv",
        "dataset_schema": "schema.json",
        "generator_spec": "generator.json",
        "design_space": design_file,
        "evaluation_space": "evaluation_space.json",
        "output_dir": out_dir,
        "global_seed": 7,
        "test_fraction": 0.3,
        "workers": 1,
        "freeze_cutoff_on_full_test": False,
        "replication_seeds": [7, 11],
        "bindings": {
            "race": "race",
            "sex": "sex",
            "age": "age",
            "income": "income",
            "drop_other_category": "gamma",
            "subsets": _SUBSET_BINDINGS,
        },
    }


def _cmd_init(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "schema.json": _SCHEMA,
        "generator.json": _GENERATOR,
        "design_space.json": _DESIGN_96,
        "design_space_24.json": _DESIGN_24,
        "design_space_full.json": _DESIGN_FULL,
        "evaluation_space.json": _EVALUATION,
        "manifest.json": _manifest_doc("design_space.json", "out"),
        "manifest_24.json": _manifest_doc("design_space_24.json", "out-24"),
    }
    written = []
    for name, doc in files.items():
        path = out / name
        if path.exists() and not args.force:
            return _fail("ConfigError",
                         f"{path} exists; pass --force to overwrite", EXIT_USAGE)
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        written.append(str(path))
    _emit({"written": written})
    return EXIT_OK


# -- store plumbing shared by analysis commands ------------------------------------


def _load_manifest(args) -> rn.RunManifest:
    manifest = rn.RunManifest.from_json(args.manifest)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["global_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "sample_fraction", None) is not None:
        updates["sample_fraction"] = args.sample_fraction
    return dataclasses.replace(manifest, **updates) if updates else manifest


def _store_records(manifest: rn.RunManifest, args) -> list[dict]:
    store = Path(getattr(args, "store", None) or manifest.output_dir)
    results = store / rn.RESULTS_FILE
    progress = store / rn.PROGRESS_FILE
    path = results if results.exists() else progress
    records = rn.read_records(path)
    if not records:
        raise DataError(f"no records found under {store}")
    return records


def _importance_report(manifest: rn.RunManifest, records, args):
    space = parse_space(Path(manifest.design_space).read_text(encoding="utf-8"))
    table, excluded = rn.metric_table_from_records(records, space)
    method = getattr(args, "method", "auto")
    trees = getattr(args, "trees", None)
    trees = imp.FOREST_TREES if trees is None else trees
    seed = getattr(args, "seed", None)
    seed = manifest.global_seed if seed is None else seed
    max_order = getattr(args, "max_order", None)
    if method in ("auto", "exact"):
        try:
            return imp.exact_fanova(table, max_order=max_order), excluded
        except IncompleteGridError:
            if method == "exact":
                raise
    return (
        imp.forest_fanova(table, trees=trees, seed=seed, max_order=max_order),
        excluded,
    )


def _report_doc(report: imp.ImportanceReport, excluded: int) -> dict:
    return {
        "method": report.method,
        "total_variance": report.total_variance,
        "max_order": report.max_order,
        "zero_variance": report.zero_variance,
        "excluded_rows": excluded,
        "entries": [
            {
                "subset": list(e.subset),
                "order": e.order,
                "importance": e.importance,
                "std_dev": e.std_dev,
            }
            for e in imp.rank(report)
        ],
    }


# -- subcommands -----------------------------------------------------------------------


def _cmd_enumerate(args) -> int:
    if args.manifest:
        manifest = rn.RunManifest.from_json(args.manifest)
        design_path, eval_path = manifest.design_space, manifest.evaluation_space
    else:
        design_path, eval_path = args.design_space, args.evaluation_space
    if not design_path or not eval_path:
        return _fail("ConfigError",
                     "enumerate needs --manifest or both space paths", EXIT_USAGE)
    design = parse_space(Path(design_path).read_text(encoding="utf-8"))
    evaluation = parse_space(Path(eval_path).read_text(encoding="utf-8"))
    _emit({
        "design_universes": design.grid_size,
        "eval_strategies": evaluation.grid_size,
        "product": design.grid_size * evaluation.grid_size,
    })
    return EXIT_OK


def _cmd_run(args) -> int:
    manifest = _load_manifest(args)
    if args.out:
        manifest = dataclasses.replace(manifest, output_dir=args.out)
    summary = rn.run_multiverse(manifest)
    _emit(dataclasses.asdict(summary))
    return EXIT_OK


def _cmd_importance(args) -> int:
    manifest = _load_manifest(args)
    records = _store_records(manifest, args)
    report, excluded = _importance_report(manifest, records, args)
    if args.out:
        imp.report_to_csv(report, args.out)
        _log(f"wrote {args.out}")
    _emit(_report_doc(report, excluded))
    return EXIT_OK


def _cmd_stability(args) -> int:
    manifest = _load_manifest(args)
    records = _store_records(manifest, args)
    space = parse_space(Path(manifest.design_space).read_text(encoding="utf-8"))
    table, _ = rn.metric_table_from_records(records, space)
    fractions = tuple(float(f) for f in args.fractions.split(","))
    seed = manifest.global_seed if args.seed is None else args.seed
    report = rb.subsample_stability(
        table,
        fractions,
        args.repetitions,
        seed,
        trees=imp.FOREST_TREES if args.trees is None else args.trees,
        max_order=args.max_order,
    )
    if args.out:
        rb.stability_to_csv(report, args.out)
        _log(f"wrote {args.out}")
    _emit({
        "repetitions": report.repetitions,
        "trees": report.trees,
        "max_order": report.max_order,
        "failures": report.failures,
        "rows": [dataclasses.asdict(row) for row in report.rows],
    })
    return EXIT_OK


def _cmd_replicate(args) -> int:
    manifest = _load_manifest(args)
    seeds = None
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    doc = rn.replicate(manifest, seeds=seeds, workers=args.workers)
    _emit(doc)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    manifest = _load_manifest(args)
    records = _store_records(manifest, args)
    _emit(summarize(records))
    return EXIT_OK


def _cmd_export(args) -> int:
    manifest = _load_manifest(args)
    records = _store_records(manifest, args)
    design = parse_space(Path(manifest.design_space).read_text(encoding="utf-8"))
    evaluation = parse_space(Path(manifest.evaluation_space).read_text(encoding="utf-8"))
    try:
        report, _ = _importance_report(manifest, records, args)
    except (AnalysisError, ConfigError) as exc:
        _log(f"importance skipped: {exc}")
        report = None
    out = args.out or str(Path(manifest.output_dir) / "explorer_bundle.json")
    path = export_explorer_bundle(records, design, evaluation, report, out)
    _emit({"bundle": str(path), "universes": len(records)})
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_store_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--store", help="results directory (default: manifest output_dir)")


def _add_fanova_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multifair",
        description="Multiverse analysis of fairness-relevant pipeline decisions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="scaffold example manifest, spaces, and generator")
    p.add_argument("--out", default=".", help="directory to scaffold into")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_init)

    p = sub.add_parser("enumerate", help="print grid sizes without running")
    p.add_argument("--manifest")
    p.add_argument("--design-space")
    p.add_argument("--evaluation-space")
    p.set_defaults(fn=_cmd_enumerate)

    p = sub.add_parser("run", help="run or resume the multiverse")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--sample-fraction", type=float, default=None)
    p.add_argument("--out", default=None, help="override the manifest output_dir")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("importance", help="variance decomposition over a store")
    p.add_argument("--manifest", required=True)
    _add_store_arg(p)
    p.add_argument("--method", choices=("auto", "exact", "forest"), default="auto")
    _add_fanova_args(p)
    p.add_argument("--out", default=None, help="also write the report as CSV")
    p.set_defaults(fn=_cmd_importance)

    p = sub.add_parser("stability", help="importance stability under subsampling")
    p.add_argument("--manifest", required=True)
    _add_store_arg(p)
    p.add_argument("--fractions", default="0.01,0.05,0.1,0.2")
    p.add_argument("--repetitions", type=int, default=50)
    _add_fanova_args(p)
    p.add_argument("--out", default=None, help="also write rows as CSV")
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("replicate", help="full reruns under different seeds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seeds", default=None, help="comma-separated global seeds")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_replicate)

    p = sub.add_parser("summarize", help="summary statistics for a store")
    p.add_argument("--manifest", required=True)
    _add_store_arg(p)
    p.set_defaults(fn=_cmd_summarize)

    p = sub.add_parser("export", help="write the explorer data bundle")
    p.add_argument("--manifest", required=True)
    _add_store_arg(p)
    p.add_argument("--method", choices=("auto", "exact", "forest"), default="auto")
    _add_fanova_args(p)
    p.add_argument("--out", default=None, help="bundle path")
    p.set_defaults(fn=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)
    except DataError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_DATA)
    except AnalysisError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_ANALYSIS)
    except MultifairError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_ANALYSIS)
    except FileNotFoundError as exc:
        return _fail("DataError", str(exc), EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
