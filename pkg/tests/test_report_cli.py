import json
from pathlib import Path

import pytest

from multifair import cli
from multifair import decision_space as ds
from multifair import report as rp
from multifair.errors import AnalysisError
from test_runner import write_workspace


def ok_record(uid, options, metric, strategies=None, f1=0.5, accuracy=0.5):
    return {
        "universe_id": uid,
        "options": options,
        "seed": 1,
        "status": "ok",
        "error": None,
        "eq_odds_diff": metric,
        "f1": f1,
        "accuracy": accuracy,
        "balanced_accuracy": None,
        "dropped_train_fraction": None,
        "dropped_train_groups": [],
        "strategies": strategies or [],
        "warnings": [],
    }


def error_record(uid, code):
    return {
        "universe_id": uid,
        "options": {},
        "seed": 1,
        "status": "error",
        "error": {"code": code, "stage": "train", "message": "boom"},
        "eq_odds_diff": None,
        "f1": None,
        "accuracy": None,
        "balanced_accuracy": None,
        "dropped_train_fraction": None,
        "dropped_train_groups": [],
        "strategies": [],
        "warnings": [],
    }


def strategy_row(metric, status="ok", subset="full"):
    return {
        "options": {"eval_grouping": "separate",
                    "eval_exclude_subgroups": "keep-in-eval",
                    "eval_subset": subset},
        "status": status,
        "eq_odds_diff": metric,
        "f1": 0.5,
        "accuracy": 0.5,
        "balanced_accuracy": None,
    }


# -- summarize -------------------------------------------------------------------


def test_summarize_counts_and_error_codes():
    records = [
        ok_record("u1", {}, 0.2),
        ok_record("u2", {}, 0.4),
        error_record("u3", "degenerate-labels"),
        error_record("u4", "stage-failure"),
        error_record("u5", "degenerate-labels"),
    ]
    doc = rp.summarize(records)
    assert doc["universes"] == 5
    assert doc["ok"] == 2
    assert doc["errors"] == 3
    assert doc["errors_by_code"] == {"degenerate-labels": 2, "stage-failure": 1}
    assert doc["metric"]["min"] == 0.2
    assert doc["metric"]["max"] == 0.4
    assert doc["metric"]["mean"] == pytest.approx(0.3)


def test_summarize_histogram_bins_and_right_edge():
    records = [
        ok_record("u1", {}, 0.0),
        ok_record("u2", {}, 0.025),  # same first bin
        ok_record("u3", {}, 0.5),    # bin 10
        ok_record("u4", {}, 1.0),    # clamps into bin 19
    ]
    hist = rp.summarize(records)["histogram"]
    assert hist["bins"] == 20
    assert hist["range"] == [0.0, 1.0]
    assert sum(hist["counts"]) == 4
    assert hist["counts"][0] == 2
    assert hist["counts"][10] == 1
    assert hist["counts"][19] == 1


def test_summarize_constant_store_occupies_one_bin():
    records = [ok_record(f"u{i}", {}, 0.42) for i in range(6)]
    doc = rp.summarize(records)
    counts = doc["histogram"]["counts"]
    assert sum(counts) == 6
    assert max(counts) == 6
    assert doc["metric"]["min"] == doc["metric"]["max"] == 0.42
    # constant metric has no defined correlation with anything
    assert doc["performance_fairness_correlation"]["f1"] is None


def test_summarize_performance_correlation_sign():
    records = [
        ok_record("u1", {}, 0.1, f1=0.9),
        ok_record("u2", {}, 0.5, f1=0.5),
        ok_record("u3", {}, 0.9, f1=0.1),
    ]
    corr = rp.summarize(records)["performance_fairness_correlation"]
    assert corr["f1"] == pytest.approx(-1.0, abs=1e-12)
    assert corr["balanced_accuracy"] is None  # all None above


def test_summarize_strategy_spread_fractions():
    records = [
        ok_record("u1", {}, 0.5, strategies=[strategy_row(0.0), strategy_row(1.0)]),
        ok_record("u2", {}, 0.5, strategies=[strategy_row(0.05), strategy_row(0.97)]),
        ok_record("u3", {}, 0.5, strategies=[strategy_row(0.4), strategy_row(0.6)]),
        # a single ok strategy has no spread; the undefined row is skipped
        ok_record("u4", {}, 0.5, strategies=[
            strategy_row(0.4), strategy_row(None, status="metric-undefined"),
        ]),
    ]
    spread = rp.summarize(records)["spread"]
    assert spread["models_with_spread"] == 3
    assert spread["fraction_delta_full"] == pytest.approx(1 / 3)
    assert spread["fraction_delta_ge_0_9"] == pytest.approx(2 / 3)
    assert spread["max_delta"] == 1.0


def test_summarize_empty_store():
    doc = rp.summarize([])
    assert doc["universes"] == 0
    assert doc["metric"]["mean"] is None
    assert doc["spread"]["models_with_spread"] == 0


# -- explorer bundle -------------------------------------------------------------------


def two_spaces():
    design = ds.parse_space({
        "kind": "design",
        "decisions": [
            {"name": "model", "category": "modeling", "options": ["logreg", "rf"]},
        ],
    })
    evaluation = ds.parse_space({
        "kind": "evaluation",
        "decisions": [
            {"name": "eval_grouping", "category": "evaluation",
             "options": ["separate", "majority-minority"]},
        ],
    })
    return design, evaluation


def test_export_bundle_structure_and_determinism(tmp_path):
    design, evaluation = two_spaces()
    records = [
        ok_record("bbb", {"model": "rf"}, 0.3, strategies=[strategy_row(0.3)]),
        ok_record("aaa", {"model": "logreg"}, 0.1, strategies=[strategy_row(0.1)]),
    ]
    out = tmp_path / "bundle.json"
    rp.export_explorer_bundle(records, design, evaluation, None, out)
    bundle = json.loads(out.read_text(encoding="utf-8"))

    assert [d["name"] for d in bundle["decisions"]] == ["model"]
    assert [d["name"] for d in bundle["eval_decisions"]] == ["eval_grouping"]
    assert [u["id"] for u in bundle["universes"]] == ["aaa", "bbb"]
    assert bundle["universes"][0]["metrics"]["eq_odds_diff"] == 0.1
    assert bundle["universes"][0]["evals"][0]["strategy"] == {
        "eval_grouping": "separate"
    }
    assert bundle["importance"] == []
    assert bundle["summary"]["universes"] == 2

    first = out.read_bytes()
    rp.export_explorer_bundle(records, design, evaluation, None, out)
    assert out.read_bytes() == first


def test_export_bundle_rejects_duplicate_ids(tmp_path):
    design, evaluation = two_spaces()
    records = [
        ok_record("aaa", {"model": "rf"}, 0.3),
        ok_record("aaa", {"model": "logreg"}, 0.1),
    ]
    with pytest.raises(AnalysisError, match="duplicate"):
        rp.export_explorer_bundle(
            records, design, evaluation, None, tmp_path / "bundle.json"
        )


# -- cli ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    ws = write_workspace(tmp_path_factory.mktemp("cliws"))
    code = cli.main(["run", "--manifest", str(ws / "manifest.json")])
    assert code == cli.EXIT_OK
    return ws


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_cli_init_scaffolds_and_enumerates(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "init", "--out", str(tmp_path))
    assert code == cli.EXIT_OK
    written = json.loads(out)["written"]
    assert any(name.endswith("manifest.json") for name in written)

    # the full nine-decision grid and the evaluation grid have known sizes
    code, out, _ = run_cli(
        capsys, "enumerate",
        "--design-space", str(tmp_path / "design_space_full.json"),
        "--evaluation-space", str(tmp_path / "evaluation_space.json"),
    )
    assert code == cli.EXIT_OK
    doc = json.loads(out)
    assert doc["design_universes"] == 61440
    assert doc["eval_strategies"] == 28
    assert doc["product"] == 1720320

    code, out, _ = run_cli(
        capsys, "enumerate",
        "--design-space", str(tmp_path / "design_space.json"),
        "--evaluation-space", str(tmp_path / "evaluation_space.json"),
    )
    assert json.loads(out)["design_universes"] == 96


def test_cli_init_refuses_overwrite(tmp_path, capsys):
    assert run_cli(capsys, "init", "--out", str(tmp_path))[0] == cli.EXIT_OK
    code, out, err = run_cli(capsys, "init", "--out", str(tmp_path))
    assert code == cli.EXIT_USAGE
    assert out == ""
    assert "--force" in json.loads(err)["error"]["message"]
    assert run_cli(capsys, "init", "--out", str(tmp_path), "--force")[0] == cli.EXIT_OK


def test_cli_run_emits_summary_and_resumes(cli_workspace, capsys):
    code, out, _ = run_cli(
        capsys, "run", "--manifest", str(cli_workspace / "manifest.json")
    )
    assert code == cli.EXIT_OK
    doc = json.loads(out)
    assert doc["universes_total"] == 8
    assert doc["universes_run"] == 0  # fixture already ran the grid
    assert doc["universes_skipped"] == 8
    assert Path(doc["results_csv"]).exists()


def test_cli_importance_exact_on_full_grid(cli_workspace, capsys):
    code, out, _ = run_cli(
        capsys, "importance", "--manifest", str(cli_workspace / "manifest.json")
    )
    assert code == cli.EXIT_OK
    doc = json.loads(out)
    assert doc["method"] == "exact"
    assert doc["excluded_rows"] == 0
    total = sum(e["importance"] for e in doc["entries"])
    assert total == pytest.approx(1.0, abs=1e-9)
    assert len(doc["entries"]) == 7  # all subsets of 3 decisions


def test_cli_summarize_and_export(cli_workspace, tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "summarize", "--manifest", str(cli_workspace / "manifest.json")
    )
    assert code == cli.EXIT_OK
    assert json.loads(out)["universes"] == 8

    bundle_path = tmp_path / "bundle.json"
    code, out, _ = run_cli(
        capsys, "export", "--manifest", str(cli_workspace / "manifest.json"),
        "--out", str(bundle_path),
    )
    assert code == cli.EXIT_OK
    assert json.loads(out)["universes"] == 8
    bundle = json.loads(bundle_path.read_text(encoding="utf-8"))
    assert len(bundle["universes"]) == 8
    assert len(bundle["importance"]) == 7
    assert all(len(u["evals"]) == 12 for u in bundle["universes"])


def test_cli_sampled_run_and_exact_refusal(cli_workspace, tmp_path, capsys):
    out_dir = tmp_path / "sampled"
    code, out, _ = run_cli(
        capsys, "run", "--manifest", str(cli_workspace / "manifest.json"),
        "--sample-fraction", "0.5", "--out", str(out_dir),
    )
    assert code == cli.EXIT_OK
    assert json.loads(out)["universes_total"] == 4

    # half a grid cannot be decomposed exactly; the exit code class is analysis
    code, out, err = run_cli(
        capsys, "importance", "--manifest", str(cli_workspace / "manifest.json"),
        "--store", str(out_dir), "--method", "exact",
    )
    assert code == cli.EXIT_ANALYSIS
    assert out == ""
    assert json.loads(err)["error"]["type"] == "IncompleteGridError"


def test_cli_missing_manifest_is_usage_error(capsys, tmp_path):
    code, out, err = run_cli(
        capsys, "run", "--manifest", str(tmp_path / "no-such-manifest.json")
    )
    assert code == cli.EXIT_USAGE
    assert out == ""
    assert "not found" in json.loads(err)["error"]["message"]


def test_cli_empty_store_is_data_error(cli_workspace, tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "summarize", "--manifest", str(cli_workspace / "manifest.json"),
        "--store", str(tmp_path / "empty"),
    )
    assert code == cli.EXIT_DATA
    assert json.loads(err)["error"]["type"] == "DataError"
