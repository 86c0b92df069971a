import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coriolis_kit.spatial import (
    SpatialInertia,
    SpatialTransform,
    bar_cross_sharp,
    body_coriolis_B,
    body_coriolis_star,
    cluster_B,
    cross_force,
    cross_motion,
    inertia_transform,
    rotation_about,
    skew,
    unskew,
)
from coriolis_kit.oracles import random_inertia_params, random_rotation

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
six = arrays(np.float64, 6, elements=finite)


def test_cross_motion_frozen():
    e_wx = np.array([1.0, 0, 0, 0, 0, 0])
    e_wy = np.array([0, 1.0, 0, 0, 0, 0])
    assert np.array_equal(cross_motion(e_wx) @ e_wy, [0, 0, 1, 0, 0, 0])
    lin_y = np.array([0, 0, 0, 0, 1.0, 0])
    assert np.array_equal(cross_motion(e_wx) @ lin_y, [0, 0, 0, 0, 0, 1])


def test_skew_roundtrip(rng):
    a = rng.normal(size=3)
    assert np.allclose(skew(a) @ [1, 2, 3], np.cross(a, [1, 2, 3]))
    assert np.allclose(unskew(skew(a)), a)


@settings(max_examples=50, deadline=None)
@given(six, six, six)
def test_motion_cross_is_lie_bracket(u, v, w):
    assert np.allclose(cross_motion(u) @ v, -cross_motion(v) @ u, atol=1e-9)
    jacobi = (
        cross_motion(u) @ cross_motion(v) @ w
        + cross_motion(v) @ cross_motion(w) @ u
        + cross_motion(w) @ cross_motion(u) @ v
    )
    assert np.abs(jacobi).max() <= 1e-9 * (1 + np.abs(u).max() * np.abs(v).max() * np.abs(w).max())


@settings(max_examples=50, deadline=None)
@given(six, six)
def test_bar_cross_sharp_defining_relation(f, w):
    assert np.allclose(bar_cross_sharp(f) @ w, cross_force(w) @ f, atol=1e-9)
    assert np.allclose(cross_force(w), -cross_motion(w).T)


def test_body_factorization_properties(rng):
    for _ in range(20):
        I = SpatialInertia.from_params(random_inertia_params(rng)).matrix()
        v = rng.normal(size=6)
        C = body_coriolis_star(I, v)
        assert np.allclose(C @ v, cross_force(v) @ I @ v, atol=1e-12)
        # body-frame inertia is constant, so the factorization is skew
        assert np.allclose(C + C.T, 0, atol=1e-12)
        assert np.allclose(bar_cross_sharp(I @ v), -bar_cross_sharp(I @ v).T)
        B = body_coriolis_B(I, v)
        assert np.allclose(B.T @ v, 0, atol=1e-12)
        assert np.allclose(B, C - I @ cross_motion(v))
        assert np.allclose(cluster_B(I, v), B)


def test_stacked_B_is_blockwise(rng):
    Is = [SpatialInertia.from_params(random_inertia_params(rng)).matrix() for _ in range(2)]
    I = np.zeros((12, 12))
    I[:6, :6], I[6:, 6:] = Is
    v = rng.normal(size=12)
    B = cluster_B(I, v)
    assert np.allclose(B[:6, :6], body_coriolis_B(Is[0], v[:6]))
    assert np.allclose(B[6:, 6:], body_coriolis_B(Is[1], v[6:]))
    assert np.allclose(B[:6, 6:], 0)


def test_transform_compose_inverse(rng):
    X1 = SpatialTransform.from_pose(random_rotation(rng), rng.normal(size=3))
    X2 = SpatialTransform.from_pose(random_rotation(rng), rng.normal(size=3))
    assert np.allclose((X2 @ X1).matrix(), X2.matrix() @ X1.matrix())
    assert np.allclose((X1 @ X1.inverse()).matrix(), np.eye(6), atol=1e-12)
    assert np.allclose(X1.force_matrix(), np.linalg.inv(X1.matrix()).T)


def test_transform_preserves_power(rng):
    X = SpatialTransform.from_pose(random_rotation(rng), rng.normal(size=3))
    v, f = rng.normal(size=6), rng.normal(size=6)
    assert np.isclose(X.apply_motion(v) @ X.apply_force(f), v @ f)
    assert np.allclose(X.transpose_apply(f), X.matrix().T @ f)


def test_cross_motion_is_equivariant(rng):
    X = SpatialTransform.from_pose(random_rotation(rng), rng.normal(size=3)).matrix()
    v = rng.normal(size=6)
    assert np.allclose(X @ cross_motion(v) @ np.linalg.inv(X), cross_motion(X @ v), atol=1e-12)


def test_rotation_about_quarter_turn():
    R = rotation_about([0, 0, 2.0], np.pi / 2)
    assert np.allclose(R @ [1, 0, 0], [0, 1, 0])


def test_inertia_params_roundtrip(rng):
    theta = np.array(random_inertia_params(rng))
    I = SpatialInertia.from_params(theta)
    assert np.allclose(I.params(), theta)
    assert np.allclose(SpatialInertia.from_matrix(I.matrix()).params(), theta)
    assert I.is_physical()


def test_inertia_from_mass_com():
    I = SpatialInertia.from_mass_com(2.0, [0, 0, -0.5], np.diag([0.1, 0.1, 0.05]))
    assert np.allclose(I.h, [0, 0, -1.0])
    assert np.allclose(np.diag(I.Ibar), [0.6, 0.6, 0.05])


def test_inertia_transform_is_congruence(rng):
    I = SpatialInertia.from_params(random_inertia_params(rng))
    X = SpatialTransform.from_pose(random_rotation(rng), rng.normal(size=3))
    J = inertia_transform(X, I)
    assert np.allclose(J.matrix(), X.matrix().T @ I.matrix() @ X.matrix())
    assert np.isclose(J.mass, I.mass)
    assert J.is_physical()


def test_unphysical_inertia_detected():
    I = SpatialInertia.from_params([1.0, 0, 0, 0, 1.0, 0.1, 0.1, 0, 0, 0])
    assert not I.is_physical()


def test_bad_parameter_length():
    with pytest.raises(ValueError):
        SpatialInertia.from_params(np.zeros(9))
