import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multifair import pipeline as pl
from multifair.data_model import ColumnSchema, TabularFrame
from multifair.errors import ConfigError, DataError


def frame_of(groups, y, extra=None):
    schema = [
        ColumnSchema("grp", "categorical", "protected"),
        ColumnSchema("y", "numeric", "target"),
    ]
    columns = {"grp": np.asarray(groups, dtype=np.str_), "y": np.asarray(y, dtype=np.float64)}
    for name, values in (extra or {}).items():
        values = np.asarray(values)
        dtype = "numeric" if values.dtype == np.float64 else "categorical"
        schema.append(ColumnSchema(name, dtype, "feature"))
        columns[name] = values
    return TabularFrame(schema, columns)


# -- config ------------------------------------------------------------------------


def test_from_assignments_defaults_to_identity():
    cfg = pl.PipelineConfig.from_assignments({})
    assert cfg.exclude_features == "none"
    assert cfg.exclude_subgroups == "keep-all"
    assert cfg.scale == "do-not-scale"
    assert cfg.preprocess_age == "none"
    assert cfg.preprocess_income == "none"
    assert cfg.encode_categorical == "one-hot"
    assert cfg.model == "logreg"
    assert cfg.stratify_split == "none"
    assert cfg.cutoff == "raw-0.5"
    assert cfg.test_fraction == 0.3


def test_from_assignments_ignores_evaluation_decisions():
    cfg = pl.PipelineConfig.from_assignments(
        {"model": "rf", "eval_grouping": "separate"}
    )
    assert cfg.model == "rf"


def test_config_rejects_unknown_tokens():
    with pytest.raises(ConfigError):
        pl.PipelineConfig.from_assignments({"scale": "zscore"})
    with pytest.raises(ConfigError):
        pl.PipelineConfig.from_assignments({"cutoff": "quantile-1.5"})
    with pytest.raises(ConfigError):
        pl.PipelineConfig.from_assignments({"preprocess_age": "bins-0"})


# -- feature exclusion -------------------------------------------------------------


def test_exclude_features_tokens():
    cols = ["race", "sex", "age"]
    assert pl.exclude_features(cols, "none", "race", "sex") == ("race", "sex", "age")
    assert pl.exclude_features(cols, "race", "race", "sex") == ("sex", "age")
    assert pl.exclude_features(cols, "sex", "race", "sex") == ("race", "age")
    assert pl.exclude_features(cols, "race-sex", "race", "sex") == ("age",)
    with pytest.raises(DataError):
        pl.exclude_features(cols, "sex", "race", None)
    with pytest.raises(ConfigError):
        pl.exclude_features(cols, "both", "race", "sex")


# -- subgroup exclusion -------------------------------------------------------------


def subgroup_frame():
    # sizes: a=10, b=6, c=4, d=8
    groups = ["a"] * 10 + ["b"] * 6 + ["c"] * 4 + ["d"] * 8
    return frame_of(groups, [0, 1] * 14, extra={"x": np.arange(28, dtype=np.float64)})


def test_exclude_subgroups_frozen_cases():
    frame = subgroup_frame()
    kept, frac, dropped = pl.exclude_subgroup_rows(frame, "keep-all", "grp")
    assert (kept.n, frac, dropped) == (28, 0.0, ())

    kept, frac, dropped = pl.exclude_subgroup_rows(frame, "drop-smallest-1", "grp")
    assert dropped == ("c",)
    assert kept.n == 24 and abs(frac - 4 / 28) < 1e-12

    kept, frac, dropped = pl.exclude_subgroup_rows(frame, "drop-smallest-2", "grp")
    assert dropped == ("c", "b")
    assert kept.n == 18

    kept, frac, dropped = pl.exclude_subgroup_rows(frame, "keep-largest-2", "grp")
    assert set(dropped) == {"b", "c"}
    assert kept.n == 18

    kept, frac, dropped = pl.exclude_subgroup_rows(frame, "drop-other", "grp", "d")
    assert dropped == ("d",)
    assert kept.n == 20


def test_exclude_subgroups_size_ties_break_by_name():
    groups = ["a"] * 3 + ["b"] * 3 + ["c"] * 5 + ["d"] * 5
    frame = frame_of(groups, [0, 1] * 8)
    _, _, dropped = pl.exclude_subgroup_rows(frame, "drop-smallest-1", "grp")
    assert dropped == ("a",)
    _, _, dropped = pl.exclude_subgroup_rows(frame, "keep-largest-2", "grp")
    assert dropped == ("a", "b")


def test_exclude_subgroups_guards():
    frame = subgroup_frame()
    with pytest.raises(ConfigError):
        pl.exclude_subgroup_rows(frame, "drop-other", "grp")  # no category bound
    with pytest.raises(DataError):
        pl.exclude_subgroup_rows(frame, "drop-other", "grp", "zzz")
    # dropping too much: only two groups, drop-smallest-2 leaves one
    small = frame_of(["a"] * 8 + ["b"] * 8 + ["c"] * 2, [0, 1] * 9)
    with pytest.raises(DataError):
        pl.exclude_subgroup_rows(small, "drop-smallest-2", "grp")


# -- split -------------------------------------------------------------------------


def test_split_sizes_round_half_up():
    frame = frame_of(["a"] * 5 + ["b"] * 5, [0, 1] * 5)
    train, test, _ = pl.split_frame(frame, 0.25, "none", seed=1)
    # one stratum of 10 rows: round(2.5) -> 3
    assert (train.n, test.n) == (7, 3)


def test_split_is_deterministic_and_partitions():
    frame = frame_of(
        ["a"] * 30 + ["b"] * 20, [0, 1] * 25,
        extra={"x": np.arange(50, dtype=np.float64)},
    )
    t1, s1, _ = pl.split_frame(frame, 0.3, "both", seed=9)
    t2, s2, _ = pl.split_frame(frame, 0.3, "both", seed=9)
    assert t1.equals(t2) and s1.equals(s2)
    t3, s3, _ = pl.split_frame(frame, 0.3, "both", seed=10)
    assert not s1.equals(s3)
    got = sorted(t1.column("x").tolist() + s1.column("x").tolist())
    assert got == list(range(50))


def test_split_stratified_target_is_exact_when_divisible():
    frame = frame_of(["a"] * 40, [0, 1] * 20)
    _, test, _ = pl.split_frame(frame, 0.5, "target", seed=4)
    assert test.n == 20
    assert float(np.sum(test.column("y"))) == 10.0


def test_split_singleton_stratum_goes_to_train_with_warning():
    frame = frame_of(["a"] * 9 + ["b"], [0, 1] * 4 + [0, 1])
    train, test, warnings = pl.split_frame(frame, 0.3, "protected-attribute", seed=2)
    assert any("stratum" in w for w in warnings)
    assert "b" in train.column("grp").tolist()
    assert "b" not in test.column("grp").tolist()


# -- scaling -----------------------------------------------------------------------


def test_scaler_uses_population_sd():
    frame = frame_of(["a", "b"] * 2, [0, 1, 0, 1],
                     extra={"x": np.array([1.0, 2.0, 3.0, 4.0])})
    params = pl.fit_scaler(frame, ["x"])
    # mean 2.5; population variance ((1.5^2+0.5^2)*2)/4 = 1.25
    scaled = pl.apply_scaler(params, frame).column("x")
    assert scaled.tolist() == pytest.approx(
        [(v - 2.5) / 1.118033988749895 for v in [1.0, 2.0, 3.0, 4.0]], abs=1e-15
    )
    assert abs(float(np.mean(scaled))) < 1e-15
    assert abs(float(np.std(scaled)) - 1.0) < 1e-12


def test_scaler_constant_column_maps_to_zero():
    frame = frame_of(["a", "b"], [0, 1], extra={"x": np.array([5.0, 5.0])})
    params = pl.fit_scaler(frame, ["x"])
    assert params.constant_columns == ("x",)
    assert pl.apply_scaler(params, frame).column("x").tolist() == [0.0, 0.0]


def test_scaler_fits_on_train_only():
    train = frame_of(["a", "b"], [0, 1], extra={"x": np.array([0.0, 2.0])})
    test = frame_of(["a", "b"], [0, 1], extra={"x": np.array([4.0, -4.0])})
    params = pl.fit_scaler(train, ["x"])
    out = pl.apply_scaler(params, test).column("x")
    assert out.tolist() == [3.0, -5.0]  # (4-1)/1, (-4-1)/1


# -- binning -----------------------------------------------------------------------


def test_fixed_width_bins_use_absolute_anchors():
    frame = frame_of(["a"] * 3, [0, 1, 0], extra={"x": np.array([5.0, 12.0, 25.0])})
    spec = pl.fit_binning(frame, "x", "bins-10")
    assert spec.edges == (10.0, 20.0)
    binned = pl.apply_binning(spec, frame)
    assert binned.column("x").tolist() == ["bin-0", "bin-1", "bin-2"]
    assert binned.schema_for("x").dtype == "ordinal"
    assert binned.schema_for("x").order == ("bin-0", "bin-1", "bin-2")


def test_quantile_bins_type7_edges():
    frame = frame_of(["a"] * 100, [0, 1] * 50,
                     extra={"x": np.arange(1.0, 101.0)})
    spec = pl.fit_binning(frame, "x", "quantiles-4")
    assert spec.edges == (25.75, 50.5, 75.25)
    binned = pl.apply_binning(spec, frame).column("x")
    # interior membership is half-open [edge_i, edge_i+1)
    assert binned[24] == "bin-0"   # 25.0 < 25.75
    assert binned[25] == "bin-1"   # 26.0 >= 25.75
    counts = {lab: int(np.sum(binned == lab)) for lab in spec.labels}
    assert counts == {"bin-0": 25, "bin-1": 25, "bin-2": 25, "bin-3": 25}


def test_binning_test_rows_clamp_to_outer_bins():
    train = frame_of(["a"] * 3, [0, 1, 0], extra={"x": np.array([5.0, 12.0, 25.0])})
    test = frame_of(["a"] * 2, [0, 1], extra={"x": np.array([-100.0, 100.0])})
    spec = pl.fit_binning(train, "x", "bins-10")
    out = pl.apply_binning(spec, test).column("x")
    assert out.tolist() == ["bin-0", "bin-2"]


def test_degenerate_binning_single_bin_warns():
    frame = frame_of(["a"] * 3, [0, 1, 0], extra={"x": np.array([1.0, 2.0, 3.0])})
    spec = pl.fit_binning(frame, "x", "bins-10000")
    assert spec.edges == ()
    assert any("single bin" in w for w in spec.warnings)
    assert pl.apply_binning(spec, frame).column("x").tolist() == ["bin-0"] * 3


def test_duplicate_quantile_edges_collapse_with_warning():
    frame = frame_of(["a"] * 8, [0, 1] * 4,
                     extra={"x": np.array([1.0] * 6 + [2.0, 3.0])})
    spec = pl.fit_binning(frame, "x", "quantiles-4")
    assert len(spec.edges) < 3
    assert any("quantile" in w for w in spec.warnings)


# -- encoding ----------------------------------------------------------------------


def encoder_frame():
    schema = [
        ColumnSchema("grp", "categorical", "protected"),
        ColumnSchema("color", "categorical", "feature"),
        ColumnSchema("size", "ordinal", "feature", order=("s", "m", "l")),
        ColumnSchema("x", "numeric", "feature"),
        ColumnSchema("y", "numeric", "target"),
    ]
    return TabularFrame(schema, {
        "grp": np.array(["a", "b", "a"]),
        "color": np.array(["red", "blue", "red"]),
        "size": np.array(["m", "s", "l"]),
        "x": np.array([1.0, 2.0, 3.0]),
        "y": np.array([0.0, 1.0, 0.0]),
    })


def test_one_hot_encoding_names_and_values():
    frame = encoder_frame()
    spec = pl.fit_encoder(frame, ["color", "size", "x"], "one-hot")
    names = spec.output_feature_names
    assert names == ("color=blue", "color=red", "size=s", "size=m", "size=l", "x")
    encoded = pl.apply_encoder(spec, frame)
    assert encoded.column("color=red").tolist() == [1.0, 0.0, 1.0]
    assert encoded.column("size=m").tolist() == [1.0, 0.0, 0.0]
    X = pl.model_matrix(encoded, names)
    assert X.shape == (3, 6)


def test_ordinal_encoding_only_for_ordered_columns():
    frame = encoder_frame()
    spec = pl.fit_encoder(frame, ["color", "size", "x"], "ordinal")
    names = spec.output_feature_names
    # categorical without declared order stays one-hot even under 'ordinal'
    assert names == ("color=blue", "color=red", "size#ord", "x")
    encoded = pl.apply_encoder(spec, frame)
    assert encoded.column("size#ord").tolist() == [2.0, 1.0, 3.0]  # codes 1..K


def test_encoder_rejects_unseen_categories():
    frame = encoder_frame()
    spec = pl.fit_encoder(frame, ["color"], "one-hot")
    other = TabularFrame(
        [
            ColumnSchema("grp", "categorical", "protected"),
            ColumnSchema("color", "categorical", "feature"),
            ColumnSchema("y", "numeric", "target"),
        ],
        {
            "grp": np.array(["a"]),
            "color": np.array(["green"]),
            "y": np.array([1.0]),
        },
    )
    with pytest.raises(DataError):
        pl.apply_encoder(spec, other)


# -- cutoffs -----------------------------------------------------------------------


def test_raw_cutoff_is_one_half():
    scores = np.arange(0.1, 1.05, 0.1)
    preds = pl.apply_cutoff(scores, "raw-0.5")
    assert int(np.sum(preds == 0)) == 4  # 0.1, 0.2, 0.3, 0.4


def test_quantile_cutoff_frozen_threshold():
    scores = np.arange(0.1, 1.05, 0.1)
    assert pl.cutoff_threshold(scores, "quantile-0.25") == pytest.approx(0.325)
    preds = pl.apply_cutoff(scores, "quantile-0.25")
    assert int(np.sum(preds == 0)) == 3  # 0.1, 0.2, 0.3 below 0.325


def test_cutoff_rule_is_strictly_less_than():
    preds = pl.apply_cutoff(np.array([0.4999, 0.5, 0.5001]), "raw-0.5")
    assert preds.tolist() == [0.0, 1.0, 1.0]


def test_cutoff_with_explicit_threshold_skips_recompute():
    scores = np.array([0.1, 0.6, 0.9])
    preds = pl.apply_cutoff(scores, "quantile-0.25", threshold=0.8)
    assert preds.tolist() == [0.0, 0.0, 1.0]


@given(
    # coarse grid keeps the transforms injective in float space, which the
    # rank-preservation argument needs
    st.lists(st.integers(min_value=-500, max_value=500), min_size=3, max_size=60),
    st.sampled_from(["quantile-0.1", "quantile-0.25", "quantile-0.5"]),
)
@settings(max_examples=150, deadline=None)
def test_quantile_predictions_invariant_to_monotone_transforms(raw, option):
    scores = np.asarray(raw, dtype=np.float64) / 100.0
    base = pl.apply_cutoff(scores, option)
    for transform in (lambda v: 2.0 * v + 1.0, np.exp, lambda v: v**3):
        same = pl.apply_cutoff(transform(scores), option)
        assert same.tolist() == base.tolist()


def test_cutoff_option_validation():
    with pytest.raises(ConfigError):
        pl.parse_cutoff_option("quantile-0")
    with pytest.raises(ConfigError):
        pl.parse_cutoff_option("raw-0.7")
    mode, value = pl.parse_cutoff_option("quantile-0.1")
    assert (mode, value) == ("quantile", 0.1)
    mode, value = pl.parse_cutoff_option("raw-0.5")
    assert (mode, value) == ("raw", 0.5)
