from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macrohpi.dataset import from_arrays
from macrohpi.errors import ConfigError
from macrohpi.models import MeanModel, TreeBagLearner, fit_knn
from macrohpi.scenario import (
    Axis, REFERENCE_LINES, ScenarioGrid, build_grid, default_axes, predict_grid, predict_rows,
    resolve_columns,
)


def test_default_grid_has_160000_rows():
    grid = build_grid(default_axes())
    assert len(grid) == 160_000
    assert grid.names == ("GDP", "CPI", "ECB", "TR10Y")
    rows = grid.materialize()
    assert rows.shape == (160_000, 4)
    assert len({tuple(r) for r in rows[::97]}) == len(rows[::97])


def test_single_axis_endpoints():
    rows = build_grid([Axis("A", 0.0, 1.0, 2)]).materialize()
    np.testing.assert_array_equal(rows, [[0.0], [1.0]])


def test_equal_spacing():
    np.testing.assert_array_equal(Axis("A", 0.0, 4.0, 3).values, [0.0, 2.0, 4.0])


def test_last_axis_fastest():
    rows = build_grid([Axis("A", 0, 1, 2), Axis("B", 0, 2, 3)]).materialize()
    np.testing.assert_array_equal(rows[:, 1], [0, 1, 2, 0, 1, 2])
    np.testing.assert_array_equal(rows[:, 0], [0, 0, 0, 1, 1, 1])


def test_axis_validation_and_parse():
    with pytest.raises(ValueError):
        Axis("A", 1.0, 1.0, 3)
    with pytest.raises(ValueError):
        Axis("A", 0.0, 1.0, 1)
    assert Axis.parse("TR:0:4:3") == Axis("TR", 0.0, 4.0, 3)
    with pytest.raises(ValueError):
        Axis.parse("TR:0:4")


def test_row_cap():
    with pytest.raises(OverflowError):
        build_grid([Axis("A", 0, 1, 1000), Axis("B", 0, 1, 1000)], cap=10_000)


def test_chunks_cover_grid():
    grid = build_grid([Axis("A", 0, 1, 7), Axis("B", 0, 1, 5)])
    joined = np.vstack(list(grid.chunks(4)))
    np.testing.assert_array_equal(joined, grid.materialize())


def test_constant_model_constant_predictions():
    model = MeanModel(4.2, ("GDP", "CPI", "ECB", "TR10Y"))
    rep = predict_grid(model, build_grid(default_axes()))
    assert rep.size == 160_000
    s = rep.summary()
    assert all(s[k] == 4.2 for k in ("min", "max", "q5", "q25", "q50", "q75", "q95"))


def test_knn_memorization_on_grid():
    X = np.array([[0.0, 0.0], [0.0, 4.0], [2.0, 0.0], [2.0, 4.0], [1.0, 1.0]])
    y = np.array([1.0, 2.0, 3.0, 4.0, 99.0])
    model = fit_knn(X, y, 1, feature_names=("GDP", "TR10Y"))
    grid = build_grid([Axis("GDP", 0.0, 2.0, 3), Axis("TR", 0.0, 4.0, 5)])
    rep = predict_grid(model, grid)
    assert 99.0 in rep.predictions


def test_axes_reordered_by_name_and_fixed_features():
    model = fit_knn(np.random.default_rng(0).normal(size=(30, 3)), np.arange(30.0), 1,
                    feature_names=("A", "B", "C"))
    grid = build_grid([Axis("C", 0, 1, 3), Axis("A", -1, 1, 4)])
    rep = predict_grid(model, grid, fixed={"B": 0.5})
    rows = grid.materialize()
    direct = model.predict(np.column_stack([rows[:, 1], np.full(len(rows), 0.5), rows[:, 0]]))
    np.testing.assert_array_equal(rep.predictions, direct)


def test_name_mismatch_is_error():
    model = MeanModel(1.0, ("GDP", "TR10Y"))
    with pytest.raises(ConfigError, match="GDP, TR10Y"):
        predict_grid(model, build_grid([Axis("FOO", 0, 1, 2)]))
    with pytest.raises(ConfigError, match="neither on the grid"):
        predict_grid(model, build_grid([Axis("GDP", 0, 1, 2)]))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_prediction_commutes_with_row_permutation(seed):
    rng = np.random.default_rng(seed)
    data = from_arrays(rng.normal(size=(50, 2)), rng.normal(size=50), ["A", "B"])
    model = TreeBagLearner(n_bags=5).fit(data, seed)
    grid = build_grid([Axis("A", -2, 2, 9), Axis("B", -2, 2, 7)])
    rows = grid.materialize()
    plan = resolve_columns(model.feature_names, grid.names)
    perm = rng.permutation(len(rows))
    full = predict_rows(model, rows, plan)
    np.testing.assert_array_equal(predict_rows(model, rows[perm], plan), full[perm])


def test_treebag_grid_piecewise_constant():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 4))
    data = from_arrays(X, X[:, 0] + rng.normal(size=80) * 0.1, ["GDP", "CPI", "ECB", "TR10Y"])
    model = TreeBagLearner().fit(data, 0)
    axes = [Axis(n, -2, 2, 12) for n in data.feature_names]
    rep = predict_grid(model, build_grid(axes))
    assert len(np.unique(rep.predictions)) < rep.size


def test_report_summary_and_csvs():
    rep = predict_grid(MeanModel(1.0, ("A",)), build_grid([Axis("A", 0, 1, 4)]), country="CH",
                       model_id="m", current_value=8.7)
    p = np.arange(100.0)
    rep = type(rep)("CH", "m", rep.axes, p, 8.7)
    s = rep.summary()
    assert s["min"] <= s["q5"] <= s["q25"] <= s["q50"] <= s["q75"] <= s["q95"] <= s["max"]
    assert s["q50"] == pytest.approx(49.5)
    lines = rep.histogram_csv().splitlines()
    assert len(lines) == 51
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 100
    summary = rep.summary_csv()
    assert "current_value" in summary and "8.7" in summary
    for code, v in REFERENCE_LINES.items():
        assert f"# reference {code},{v}" in summary


def test_reference_lines_values():
    assert REFERENCE_LINES == {"FR": 12.4, "UK": 13.2, "US": 4.3, "CH": 8.7}


def test_predictions_csv_row_count():
    grid = build_grid([Axis("A", 0, 1, 3), Axis("B", 0, 1, 2)])
    rep = predict_grid(MeanModel(0.0, ("A", "B")), grid)
    assert len(rep.predictions_csv(grid).splitlines()) == 7
    assert isinstance(grid, ScenarioGrid)
