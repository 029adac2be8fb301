from __future__ import annotations

import json

import pytest

from eps2.cli import main
from eps2.config import bundled


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_verify_half_plane(tmp_path, capsys):
    assert main(["run", "--config", str(bundled("verify_half_plane.yaml")), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "verify.scene.coefficients.csv").read_text().splitlines()
    header = rows[0].split(",")
    for line in rows[1:]:
        rec = dict(zip(header, line.split(",")))
        for key in ("eps", "a_sym", "gamma_sym", "g_ball"):
            assert float(rec[key]) == 0.0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["tasks"] == ["verify", "coeff"] and "version" in man


def test_corrupted_scene_exit_2(tmp_path, capsys):
    (tmp_path / "scene.yaml").write_text("dim: 2\nplus:\n  op: union\n  children:\n    - primitive: disk\n")
    (tmp_path / "c.yaml").write_text("scene: scene.yaml\ntasks: [coeff]\n")
    assert main(["coeff", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "scene.plus.children[0].primitive" in err


def test_unparseable_scene_exit_2(tmp_path, capsys):
    (tmp_path / "scene.yaml").write_text("dim: [2\n")
    (tmp_path / "c.yaml").write_text("scene: scene.yaml\ntasks: [coeff]\n")
    assert main(["coeff", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o")]) == 2


def test_config_error_exit_2(tmp_path, capsys):
    (tmp_path / "c.yaml").write_text("tasks: [slice]\nparams:\n  slice: {radius: 1}\n")
    assert main(["slice", "--config", str(tmp_path / "c.yaml")]) == 2
    assert "config.params.slice.radius" in capsys.readouterr().err


def test_task_failure_exit_1(tmp_path, capsys):
    (tmp_path / "c.yaml").write_text("tasks: [beta]\nparams:\n  beta: {cloud: {kind: csv}}\n")
    assert main(["beta", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o")]) == 1


def test_same_seed_byte_identical(tmp_path):
    cfg = str(bundled("gap_strip_coeff.yaml"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a), "--seed", "5"]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--seed", "5"]) == 0
    assert _files(a) == _files(b)


def test_jobs_do_not_change_reports(tmp_path, monkeypatch):
    (tmp_path / "c.yaml").write_text(
        "scene: %s\ntasks: [coeff]\nparams:\n  coeff: {mode: stratified-random, m: 512, count: 6}\n"
        % bundled("gap_strip.yaml"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["coeff", "--config", str(tmp_path / "c.yaml"), "--out", str(a), "--jobs", "1"]) == 0
    monkeypatch.setenv("EPS2_JOBS", "2")
    assert main(["coeff", "--config", str(tmp_path / "c.yaml"), "--out", str(b)]) == 0
    fa, fb = _files(a), _files(b)
    assert fa.pop("manifest.json") != fb.pop("manifest.json")
    assert fa == fb


def test_suite_flag_only_for_verify(capsys):
    assert main(["coeff", "--suite", "chain"]) == 2


def test_slicing_config(tmp_path):
    assert main(["run", "--config", str(bundled("slicing.yaml")), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "slice.csv").read_text().splitlines()
    assert text[0].startswith("task,") and len(text) == 2


@pytest.mark.parametrize("suite", ["akn"])
def test_verify_suite(tmp_path, suite):
    assert main(["verify", "--suite", suite, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "verify.json").exists()
