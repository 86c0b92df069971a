import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coriolis_kit import oracles as orc
from coriolis_kit.dynamics import coriolis_star
from coriolis_kit.model import validate_model


def test_fd_rate_trivial_cases(models, rng):
    m = models["arm6"]
    q = m.random_config(rng)
    assert np.array_equal(orc.fd_mass_matrix_rate(m, q, np.zeros(6)), np.zeros((6, 6)))
    for name in ("point_mass", "pendulum"):
        mm = models[name]
        assert np.allclose(orc.fd_mass_matrix_rate(mm, mm.random_config(rng), rng.normal(size=mm.nv)), 0, atol=1e-9)


def test_fd_christoffel_structure(models, rng):
    assert np.allclose(orc.fd_christoffel_coordinates(models["point_mass"], np.zeros(3)), 0)
    G = orc.fd_christoffel_coordinates(models["planar_2r"], np.array([0.2, 0.7]))
    assert np.allclose(G, np.transpose(G, (0, 2, 1)))
    # only q2 enters the mass matrix, so every symbol with q1 differentiation drops out
    assert np.isclose(G[0, 1, 1], -0.5 * np.sin(0.7), atol=1e-8)
    with pytest.raises(ValueError):
        orc.fd_christoffel_coordinates(models["free_tree"], models["free_tree"].neutral_config())


def test_skew_check(rng):
    assert orc.skew_check(np.zeros((3, 3))) == 0.0
    A = rng.normal(size=(4, 4))
    assert orc.skew_check(A - A.T) == 0.0
    assert orc.skew_check(np.eye(2)) == 1.0
    assert orc.skew_check(np.zeros((0, 0))) == 0.0


def test_passivity_residual_detects_wrong_factorization(models, rng):
    m = models["arm6"]
    q, v = m.random_config(rng), rng.normal(size=6)
    C = coriolis_star(m, q, v).C
    good, scale = orc.passivity_residual(m, q, v, C)
    bad, _ = orc.passivity_residual(m, q, v, C + np.diag(v))
    assert good < 1e-8 * (1 + scale) and bad > 1e-2


def test_richardson_is_more_accurate(models, rng):
    m = models["arm6"]
    q, v = m.random_config(rng), rng.normal(size=6)
    C = coriolis_star(m, q, v).C
    plain = np.abs(orc.fd_mass_matrix_rate(m, q, v, 1e-3) - C - C.T).max()
    rich = np.abs(orc.fd_mass_matrix_rate(m, q, v, 1e-3, richardson=True) - C - C.T).max()
    assert rich < 0.1 * plain


def test_seeded_generators_bit_identical():
    a, b = orc.random_state(orc.random_open_chain(4, 7), 3), orc.random_state(orc.random_open_chain(4, 7), 3)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.v, b.v)
    assert np.array_equal(orc.random_velocity(orc.free_body(), 2), orc.random_velocity(orc.free_body(), 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_generated_inertias_physical(seed):
    from coriolis_kit.spatial import SpatialInertia

    rng = np.random.default_rng(seed)
    assert SpatialInertia.from_params(orc.random_inertia_params(rng)).is_physical()
    R = orc.random_rotation(rng)
    assert np.allclose(R @ R.T, np.eye(3)) and np.isclose(np.linalg.det(R), 1.0)


@pytest.mark.parametrize("make", [lambda: orc.random_open_chain(6, 1), lambda: orc.balanced_binary_tree(9, 2), orc.free_body])
def test_generated_models_validate(make):
    validate_model(make())


def test_flow_perturbation(models, rng):
    m = models["free_tree"]
    q, v = m.random_config(rng), rng.normal(size=m.nv)
    fp = orc.FlowPerturbation(q, v, 1e-3)
    back = orc.FlowPerturbation(fp.forward(m), v, 1e-3).backward(m)
    assert np.allclose(back, q, atol=1e-12)
