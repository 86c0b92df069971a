"""Randomized structural properties over generated trees."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from coriolis_kit import adaptive, dynamics, oracles

kinds = st.lists(st.sampled_from(["revolute", "prismatic", "helical"]), min_size=1, max_size=3).map(tuple)


@st.composite
def trees(draw):
    n = draw(st.integers(1, 6))
    parents = [draw(st.integers(0, i)) for i in range(n)]
    return oracles.random_tree(parents, draw(st.integers(0, 999)), draw(kinds))


@settings(max_examples=30, deadline=None)
@given(trees(), st.integers(0, 999))
def test_passivity_and_bias(m, seed):
    st_ = oracles.random_state(m, seed)
    C = dynamics.coriolis_star(m, st_.q, st_.v).C
    res, scale = oracles.passivity_residual(m, st_.q, st_.v, C)
    assert res <= 1e-6 * (1 + scale)
    bias = dynamics.rnea(m, st_.q, st_.v, np.zeros(m.nv), False)
    assert np.abs(C @ st_.v - bias).max() <= 1e-10 * (1 + np.abs(bias).max())


@settings(max_examples=30, deadline=None)
@given(trees(), st.integers(0, 999), st.floats(-3, 3))
def test_coriolis_is_linear_in_speed(m, seed, a):
    st_ = oracles.random_state(m, seed)
    w = oracles.random_velocity(m, seed + 1)
    C = lambda v: dynamics.coriolis_star(m, st_.q, v).C
    assert np.allclose(C(a * st_.v + w), a * C(st_.v) + C(w), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(trees(), st.integers(0, 999))
def test_torque_regressor_is_linear_in_parameters(m, seed):
    st_ = oracles.random_state(m, seed)
    Y = adaptive.regressor_bundle(m, st_.q, st_.v).Y
    th = m.theta()
    assert np.allclose(Y @ th, dynamics.rnea(m, st_.q, st_.v, np.zeros(m.nv)), atol=1e-10 * (1 + np.abs(Y @ th).max()))
