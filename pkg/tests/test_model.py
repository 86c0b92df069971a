import json

import numpy as np
import pytest

from coriolis_kit import ModelError, load_model, save_model
from coriolis_kit.model import (
    ConfigState,
    check_config,
    config_rate,
    integrate_config,
    model_from_dict,
    normalize_config,
)
from coriolis_kit.oracles import balanced_binary_tree, random_open_chain, random_tree

SHAPES = {
    "arm6": (6, 6, 6),
    "belt_pair": (4, 4, 3),
    "free_tree": (14, 12, 5),
    "geared_pair": (3, 3, 3),
    "pendulum": (1, 1, 1),
    "planar_2r": (2, 2, 2),
    "point_mass": (3, 3, 1),
    "tree_p0113": (4, 4, 4),
}


def body(parent, kind="revolute", **extra):
    return {"parent": parent, "joint": {"kind": kind, "axis": [0, 0, 1], **extra},
            "inertia": {"theta": [1, 0, 0, 0, 0.1, 0.1, 0.1, 0, 0, 0]}}


def test_bundled_shapes(models):
    assert set(models) == set(SHAPES)
    for name, m in models.items():
        assert (m.nq, m.nv, len(m.nodes)) == SHAPES[name], name


def test_coordinate_flags(models):
    assert not models["free_tree"].is_coordinate()
    assert models["geared_pair"].is_coordinate() and models["geared_pair"].has_ring()
    assert not models["arm6"].has_ring()


def test_save_load_roundtrip(models, tmp_path):
    for name, m in models.items():
        path = tmp_path / f"{name}.json"
        save_model(m, path)
        again = load_model(path)
        assert again.to_dict() == m.to_dict()
        assert np.array_equal(again.theta(), m.theta())


def test_predecessors_frozen(models):
    assert models["tree_p0113"].predecessors() == [0, 1, 1, 3]


def test_parent_must_precede_child():
    with pytest.raises(ModelError, match="parents must precede"):
        model_from_dict({"bodies": [body(0), body(3)]})


def test_bad_inertia_and_empty():
    bad = body(0)
    bad["inertia"]["theta"] = [1, 0, 0]
    with pytest.raises(ModelError):
        model_from_dict({"bodies": [bad]})
    with pytest.raises(ModelError):
        model_from_dict({"bodies": []})


def test_unknown_joint_kind():
    with pytest.raises(ModelError):
        model_from_dict({"bodies": [body(0, kind="wobble")]})


def test_cluster_must_be_consecutive():
    spec = {"bodies": [body(0), body(1), body(0), body(1)], "clusters": [{"kind": "geared_pair", "bodies": [2, 4], "ratio": 2}]}
    with pytest.raises(ModelError, match="consecutive"):
        model_from_dict(spec)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ModelError):
        load_model(bad)


def test_check_config(models):
    m = models["free_tree"]
    q = m.neutral_config()
    check_config(m, q)
    q[0] = 3.0
    with pytest.raises(ModelError, match="unit norm"):
        check_config(m, q)
    assert np.isclose(np.linalg.norm(normalize_config(m, q)[:4]), 1.0)
    with pytest.raises(ModelError):
        check_config(m, np.zeros(3))


def test_integrate_keeps_unit_quaternions(models, rng):
    m = models["free_tree"]
    q = m.random_config(rng)
    for _ in range(50):
        q = integrate_config(m, q, rng.normal(size=m.nv), 0.1)
    check_config(m, q, tol=1e-12)


def test_config_rate_matches_flow(models, rng):
    for m in models.values():
        q, v = m.random_config(rng), rng.normal(size=m.nv)
        h = 1e-6
        fd = (integrate_config(m, q, v, h) - integrate_config(m, q, v, -h)) / (2 * h)
        assert np.allclose(fd, config_rate(m, q, v), atol=1e-7)


def test_spanning_tree_speed_map(models):
    tree, G = models["geared_pair"].spanning_tree()
    assert tree.nv == 4 and not tree.has_ring()
    assert np.array_equal(G, [[1, 0, 0], [0, 1, 0], [0, 2, 0], [0, 0, 1]])
    q = models["geared_pair"].neutral_config() + 0.3
    assert np.allclose(models["geared_pair"].spanning_config(q), G @ q)


def test_config_state(models):
    st = ConfigState.zero(models["arm6"])
    assert st.to_dict() == {"q": [0.0] * 6, "v": [0.0] * 6}


def test_with_theta_and_gravity(models):
    m = models["pendulum"]
    m2 = m.with_theta(2 * m.theta())
    assert np.allclose(m2.theta(), 2 * m.theta())
    assert np.allclose(m.with_gravity(np.zeros(6)).gravity, 0)


def test_generators_are_deterministic_and_valid():
    a, b = random_open_chain(5, seed=3), random_open_chain(5, seed=3)
    assert a.to_dict() == b.to_dict()
    assert all(body.inertia.is_physical() for body in a.bodies)
    t = balanced_binary_tree(15)
    assert t.predecessors() == [i // 2 for i in range(1, 16)]
    mixed = random_tree([0, 1, 1, 2], seed=1, kinds=("revolute", "prismatic", "helical"))
    assert mixed.nv == 4
