from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eps2.geometry import (Ball, Cone, Label, SceneError, arc_decomposition, classify, cone_empty, empty_pair,
                           gap_strip, half_plane_pair, load_scene, random_scene, sample_sphere, scene_from_dict)


def test_classify_half_spaces():
    R = half_plane_pair(2)
    assert classify((0.0, 1.0), R) == Label.PLUS
    assert classify((0.0, 0.0), R) == Label.FREE
    assert classify((0.0, 0.0, -1.0), half_plane_pair(3)) == Label.MINUS


def test_lattice_weights():
    q = sample_sphere((0.0, 0.0), 1.0, "lattice", 360)
    assert len(q.weights) == 360
    assert np.allclose(q.weights, 2 * math.pi / 360)
    assert sample_sphere((0.0, 0.0), 2.0, "lattice", 360).weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert sample_sphere((0.0, 0.0, 0.0), 1.0, "lattice", 1000).weights.sum() == pytest.approx(4 * math.pi, abs=1e-9)


def test_sample_sphere_rejects_small_budget():
    with pytest.raises(ValueError):
        sample_sphere((0.0, 0.0), 1.0, "lattice", 4)


def test_stratified_reproducible():
    a = sample_sphere((0.0, 0.0), 1.0, "stratified-random", 100, seed=3)
    b = sample_sphere((0.0, 0.0), 1.0, "stratified-random", 100, seed=3)
    assert np.array_equal(a.nodes, b.nodes)


def test_arcs_half_plane():
    d = arc_decomposition(half_plane_pair(2), (0.0, 0.0), 1.0)
    assert d.measure(1) == pytest.approx(math.pi)
    assert d.measure(-1) == pytest.approx(math.pi)
    assert d.measure(0) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("ratio", [0.05, 0.1, 0.2, 0.7])
def test_arcs_gap_strip(ratio):
    d = arc_decomposition(gap_strip(0.1), (0.0, 0.0), 0.1 / ratio)
    assert d.measure(0) == pytest.approx(2 * math.asin(ratio), abs=1e-12)
    assert d.measure(0) + d.measure(1) + d.measure(-1) == pytest.approx(2 * math.pi, abs=1e-12)


def test_arcs_empty():
    d = arc_decomposition(empty_pair(2), (0.3, 0.1), 1.0)
    assert d.measure(0) == pytest.approx(2 * math.pi)


@given(st.integers(0, 10_000), st.floats(0.05, 2.0))
def test_arcs_partition_random_scenes(seed, r):
    R = random_scene(np.random.default_rng(seed), 5)
    d = arc_decomposition(R, (0.0, 0.0), r)
    total = sum(d.measure(k) for k in (1, -1, 0))
    assert total == pytest.approx(2 * math.pi, abs=1e-10)
    t = np.linspace(0, 2 * math.pi, 97, endpoint=False) + 1e-3
    pts = r * np.column_stack([np.cos(t), np.sin(t)])
    assert np.array_equal(d.label_at(t), R.classify(pts))


def test_cone_empty_examples():
    R = half_plane_pair(2)
    assert cone_empty(R, Cone((0.0, 0.0), (0.0, 1.0), 0.5), 1.0)[0]
    assert not cone_empty(R, Cone((0.0, 0.0), (1.0, 0.0), 0.1), 1.0)[0]


def test_scene_errors_carry_path():
    with pytest.raises(SceneError) as e:
        scene_from_dict({"dim": 2, "plus": {"primitive": "ball", "params": {"center": [0, 0], "radius": -1}}})
    assert e.value.path == "scene.plus.params.radius"
    with pytest.raises(SceneError) as e:
        scene_from_dict({"dim": 2, "plus": {"op": "union", "children": [{"primitive": "blob"}]}})
    assert e.value.path == "scene.plus.children[0].primitive"
    with pytest.raises(SceneError):
        scene_from_dict({"dim": 2, "colour": "red"})


def test_overlapping_phases_rejected():
    doc = {"dim": 2, "plus": {"primitive": "ball", "params": {"center": [0, 0], "radius": 1}},
           "minus": {"primitive": "ball", "params": {"center": [0.5, 0], "radius": 1}}}
    with pytest.raises(SceneError):
        scene_from_dict(doc)


def test_bundled_scenes_load():
    from eps2.config import bundled

    assert load_scene(bundled("half_plane.yaml")).dim == 2
    assert load_scene(bundled("half_space.yaml")).dim == 3
    R = load_scene(bundled("gap_strip.yaml"))
    assert arc_decomposition(R, (0.0, 0.0), 1.0).measure(0) == pytest.approx(2 * math.asin(0.1))


def test_scene_round_trip():
    R = random_scene(np.random.default_rng(5), 5)
    S = scene_from_dict(R.to_dict())
    pts = np.random.default_rng(1).uniform(-1, 1, (500, 2))
    assert np.array_equal(R.classify(pts), S.classify(pts))


def test_ball_requires_positive_radius():
    with pytest.raises(ValueError):
        Ball((0.0, 0.0), 0.0)
