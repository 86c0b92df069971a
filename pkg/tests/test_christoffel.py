import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coriolis_kit import christoffel as ch
from coriolis_kit.dynamics import coriolis_star, mass_matrix
from coriolis_kit.oracles import fd_christoffel_coordinates, fd_mass_matrix_rate, free_body, random_tree
from coriolis_kit.spatial import SpatialInertia

from conftest import random_states
from sym2r import christoffel as sym_christoffel


def test_fast_equals_sweep(models):
    for name, m in models.items():
        for q, _ in random_states(m, 3):
            assert np.abs(ch.christoffel_fast(m, q) - ch.christoffel_sweep(m, q)).max() <= 1e-11, name


def test_coordinate_models_match_fd(models):
    for name, m in models.items():
        if not m.is_coordinate():
            continue
        q, _ = next(random_states(m, 1, seed=4))
        assert np.abs(ch.christoffel_fast(m, q) - fd_christoffel_coordinates(m, q)).max() <= 1e-5, name


def test_planar_2r_symbolic(models):
    m = models["planar_2r"]
    for q, _ in random_states(m, 5):
        assert np.allclose(ch.christoffel_fast(m, q), sym_christoffel(q), atol=1e-12)


def test_point_mass_symbols_vanish(models):
    m = models["point_mass"]
    assert np.array_equal(ch.christoffel_fast(m, m.neutral_config()), np.zeros((3, 3, 3)))


def test_contraction_gives_coriolis(models):
    for m in models.values():
        q, v = next(random_states(m, 1, seed=8))
        assert np.allclose(ch.contract(ch.christoffel_fast(m, q), v), coriolis_star(m, q, v).C, atol=1e-12)


def test_symmetric_in_last_two_for_coordinates(models):
    m = models["arm6"]
    q, _ = next(random_states(m, 1))
    G = ch.christoffel_fast(m, q)
    assert np.allclose(G, ch.tensor_transpose(G, 23), atol=1e-12)


def test_free_body_antisymmetric_part_is_bracket():
    m = free_body(seed=1)
    q = m.random_config(np.random.default_rng(0))
    G = ch.christoffel_fast(m, q)
    H = mass_matrix(m, q)
    s = ch.free_body_structure_constants()
    assert np.abs(G - ch.tensor_transpose(G, 23) - ch.lowered_structure_constants(H, s)).max() <= 1e-10
    assert np.abs(G - ch.tensor_transpose(G, 23)).max() > 0.1


def test_structure_constants_sign():
    s = ch.free_body_structure_constants()
    # e_wx x e_wy = e_wz
    assert s[2, 0, 1] == 1.0 and s[2, 1, 0] == -1.0
    assert np.allclose(s, -ch.tensor_transpose(s, 23))


def test_metric_rate_matches_flow_derivative(models):
    for m in (models["free_tree"], models["belt_pair"]):
        q, _ = next(random_states(m, 1, seed=6))
        dH = ch.metric_rate(ch.christoffel_fast(m, q))
        for k in range(m.nv):
            e = np.zeros(m.nv)
            e[k] = 1.0
            assert np.allclose(dH[:, :, k], fd_mass_matrix_rate(m, q, e), atol=1e-7)


def test_b_tensor_identities(rng):
    I = SpatialInertia.from_params([1.3, 0.1, -0.2, 0.05, 0.3, 0.4, 0.2, 0.01, -0.02, 0.03]).matrix()
    V, W = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    r1, r2 = ch.b_tensor_identities(I, V, W)
    assert r1 < 1e-12 and r2 < 1e-12


def test_tensor_helpers(rng):
    T = rng.normal(size=(2, 3, 4))
    assert ch.tensor_transpose(T, 13).shape == (4, 3, 2)
    assert np.array_equal(ch.tensor_transpose(ch.tensor_transpose(T, 12), 12), T)
    with pytest.raises(ValueError):
        ch.tensor_transpose(T, 11)
    with pytest.raises(ValueError):
        ch.mat_tensor(np.eye(3), T)
    with pytest.raises(ValueError):
        ch.tensor_mat(T, np.eye(2))
    X = rng.normal(size=(2, 2))
    S = rng.normal(size=(2, 2, 3))
    assert np.allclose(ch.congruence(X, S)[:, :, 1], X.T @ S[:, :, 1] @ X)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.sampled_from(["revolute", "prismatic", "helical"]), min_size=1, max_size=3))
def test_fast_equals_sweep_on_random_trees(seed, kinds):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    parents = [int(rng.integers(0, i + 1)) for i in range(n)]
    m = random_tree(parents, seed, tuple(kinds))
    q = m.random_config(rng)
    assert np.abs(ch.christoffel_fast(m, q) - ch.christoffel_sweep(m, q)).max() <= 1e-11
