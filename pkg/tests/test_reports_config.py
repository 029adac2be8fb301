from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eps2.config import ConfigError, bundled, from_dict, load_config
from eps2.reports import dini_partial_sums, emit_plotdata, jsonable, read_csv, tables, write_csv, write_json
from eps2.suites import task_seed


def test_empty_report_header_only(tmp_path):
    files = emit_plotdata({"columns": ["r", "eps"]}, tmp_path, "empty")
    assert [f.name for f in files] == ["empty.csv"]
    assert files[0].read_text() == "r,eps\n"


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_round_trip(values):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        p = write_csv(Path(d) / "t.csv", ["v"], [{"v": v} for v in values])
        back = [float(row["v"]) for row in read_csv(p)]
    assert back == values


def test_json_round_trip(tmp_path):
    obj = {"b": np.float64(0.1), "a": [np.int64(3), True], "c": np.arange(3.0)}
    write_json(tmp_path / "r.json", obj)
    assert json.loads((tmp_path / "r.json").read_text()) == jsonable(obj)
    assert list(json.loads((tmp_path / "r.json").read_text())) == ["a", "b", "c"]


def test_nested_tables():
    rep = {"rows": [{"r": 1.0, "eps": 0.1, "nested": {"x": 1}}], "inner": {"per_scale": [{"r": 2.0}]}}
    t = tables(rep)
    assert t["rows"] == (["r", "eps"], [{"r": 1.0, "eps": 0.1}])
    assert "inner.per_scale" in t


def test_partial_sums_match_log_trapezoid():
    r = np.geomspace(0.1, 1.0, 50)
    rows = dini_partial_sums(list(zip(r, np.ones_like(r))))
    assert rows[-1]["partial"] == pytest.approx(math.log(10.0))


def test_gap_strip_coeff_table(tmp_path):
    from eps2.geometry import load_scene
    from eps2.tasks import run_coeff

    cfg = load_config(bundled("gap_strip_coeff.yaml"))
    rep = run_coeff(cfg.params["coeff"], load_scene(cfg.scene_path()), 0)
    files = emit_plotdata(rep, tmp_path, "coeff")
    header = files[0].read_text().splitlines()[0].split(",")
    assert {"r", "eps", "a_sym", "gamma_sym"} <= set(header)


def test_corona_plotdata(tmp_path):
    from eps2.corona import CoronaConfig, corona
    from eps2.flatness import WeightedCloud
    from eps2.geometry import Ball
    from eps2.suites import desk_graph

    res = corona(WeightedCloud(desk_graph(1500)), Ball(np.zeros(2), 1.0), 0.01, 0.1, cfg=CoronaConfig(pairs=200))
    names = sorted(f.name for f in emit_plotdata(res, tmp_path, "corona"))
    assert names == ["corona.graph.csv", "corona.points.csv", "corona.whitney.csv"]
    header = (tmp_path / "corona.points.csv").read_text().splitlines()[0].split(",")
    assert {"x1", "x2", "label", "graph_height"} <= set(header)


def test_config_defaults_and_overrides():
    cfg = from_dict({"tasks": ["capacity"], "jobs": 3, "out": "a"}, env={"EPS2_JOBS": "2", "EPS2_OUT": "b"})
    assert cfg.jobs == 2 and cfg.out == "b"
    cfg = from_dict({"tasks": ["capacity"]}, jobs=4, out="c", env={"EPS2_JOBS": "2"})
    assert cfg.jobs == 4 and cfg.out == "c"
    assert cfg.params["capacity"]["s"] == [0.5, 1.0, 1.5]


@pytest.mark.parametrize("doc, path", [
    ({"tasks": ["coeff"], "scene": "x.yaml", "extra": 1}, "config.extra"),
    ({"tasks": ["nope"]}, "config.tasks[0]"),
    ({"tasks": ["coeff"]}, "config.scene"),
    ({"tasks": ["coeff"], "scene": "x", "params": {"coeff": {"mode": "guess"}}}, "config.params.coeff.mode"),
    ({"tasks": ["slice"], "params": {"slice": {"K": {"centre": [0, 0, 0]}}}}, "config.params.slice.K.centre"),
    ({"tasks": ["slice"], "params": {"slice": {"s": "big"}}}, "config.params.slice.s"),
    ({"tasks": ["verify"], "params": {"verify": {"suites": ["bogus"]}}}, "config.params.verify.suites"),
    ({"tasks": ["verify"], "seed": -1}, "config.seed"),
    ({"tasks": ["verify"], "jobs": 0}, "config.jobs"),
])
def test_config_errors(doc, path):
    with pytest.raises(ConfigError) as e:
        from_dict(doc, env={})
    assert e.value.path == path


def test_task_seeds_stable_and_distinct():
    assert task_seed(7, 0) == task_seed(7, 0)
    assert len({task_seed(7, i) for i in range(50)}) == 50
    assert task_seed(7, 1) != task_seed(8, 1)
