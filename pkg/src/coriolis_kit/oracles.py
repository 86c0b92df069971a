"""Brute-force reference computations and seeded generators for tests.

Nothing here calls the Coriolis or Christoffel recursions; derivatives come
from central differences of the mass matrix along the motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import mass_matrix
from .model import ConfigState, integrate_config, model_from_dict
from .spatial import rotation_about


@dataclass(frozen=True)
class FlowPerturbation:
    """Configurations ``q (+) h v`` and ``q (-) h v`` reached through each joint's exponential map."""

    q: np.ndarray
    v: np.ndarray
    h: float = 1e-6

    def forward(self, model):
        return integrate_config(model, self.q, self.v, self.h)

    def backward(self, model):
        return integrate_config(model, self.q, self.v, -self.h)


def fd_mass_matrix_rate(model, q, v, h=1e-6, richardson=False):
    """``dH/dt`` along speeds ``v`` by central differences (optionally Richardson-extrapolated)."""
    def central(step):
        fp = FlowPerturbation(np.asarray(q, dtype=float), np.asarray(v, dtype=float), step)
        return (mass_matrix(model, fp.forward(model)) - mass_matrix(model, fp.backward(model))) / (2 * step)

    if not richardson:
        return central(h)
    return (4 * central(h / 2) - central(h)) / 3


def _require_coordinates(model):
    if not model.is_coordinate():
        raise ValueError("coordinate Christoffel symbols need a model whose speeds are coordinate rates")


def fd_mass_matrix_gradient(model, q, h=1e-6):
    """``dH[:, :, k] = dH/dq_k`` by central differences in the coordinates."""
    _require_coordinates(model)
    q = np.asarray(q, dtype=float)
    m = model.nv
    dH = np.zeros((m, m, m))
    for k in range(m):
        e = np.zeros(model.nq)
        e[k] = h
        dH[:, :, k] = (mass_matrix(model, q + e) - mass_matrix(model, q - e)) / (2 * h)
    return dH


def fd_christoffel_coordinates(model, q, h=1e-6):
    """First-kind symbols ``1/2 (dH_ij/dq_k + dH_ik/dq_j - dH_jk/dq_i)`` from mass-matrix differences."""
    dH = fd_mass_matrix_gradient(model, q, h)
    # dH[a, b, c] = dH_ab / dq_c
    return 0.5 * (dH + np.einsum("ikj->ijk", dH) - np.einsum("jki->ijk", dH))


def skew_check(M):
    """Largest entry of the symmetric part of ``M``."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.abs(0.5 * (M + M.T)).max())


def passivity_residual(model, q, v, C, h=1e-6):
    """``(||Hdot - C - C^T||_inf, ||Hdot||_inf)`` with a flow-difference ``Hdot``.

    Falls back to Richardson extrapolation when the plain estimate is not
    clearly separated from zero.
    """
    Hd = fd_mass_matrix_rate(model, q, v, h)
    res = np.abs(Hd - C - C.T).max(initial=0.0)
    scale = np.abs(Hd).max(initial=0.0)
    if res > 1e-5 * (1 + scale):
        Hd = fd_mass_matrix_rate(model, q, v, h, richardson=True)
        res = np.abs(Hd - C - C.T).max(initial=0.0)
        scale = np.abs(Hd).max(initial=0.0)
    return res, scale


# -- generators ------------------------------------------------------------------


def random_rotation(rng):
    axis = rng.normal(size=3)
    return rotation_about(axis, rng.uniform(-np.pi, np.pi))


def random_inertia_params(rng, scale=1.0):
    """Physically valid parameter vector (positive-definite pseudo-inertia)."""
    m = scale * rng.uniform(0.5, 2.0)
    c = 0.2 * rng.normal(size=3)
    second = m * rng.uniform(0.01, 0.1, size=3)  # principal second moments about the COM
    R = random_rotation(rng)
    I_com = R @ (np.sum(second) * np.eye(3) - np.diag(second)) @ R.T
    Ib = I_com + m * (c @ c * np.eye(3) - np.outer(c, c))
    return [m, *(m * c), Ib[0, 0], Ib[1, 1], Ib[2, 2], Ib[0, 1], Ib[0, 2], Ib[1, 2]]


def _offset(rng, length=0.3):
    return {"rotation": random_rotation(rng).tolist(), "translation": (length * rng.normal(size=3)).tolist()}


def random_tree(parents, seed=0, kinds=("revolute",), name="random_tree"):
    """Model with the given 1-based parent array, random joint axes, offsets and inertias."""
    rng = np.random.default_rng(seed)
    bodies = []
    for i, p in enumerate(parents):
        kind = kinds[rng.integers(len(kinds))]
        joint = {"kind": kind, "axis": (rng.normal(size=3)).tolist(), "offset": _offset(rng)}
        if kind == "helical":
            joint["pitch"] = float(rng.uniform(-0.1, 0.1))
        bodies.append({"name": f"b{i + 1}", "parent": int(p), "joint": joint, "inertia": {"theta": [float(x) for x in random_inertia_params(rng)]}})
    return model_from_dict({"name": name, "bodies": bodies, "clusters": []})


def random_open_chain(N, seed=0, kinds=("revolute", "prismatic")):
    return random_tree(list(range(N)), seed, kinds, name=f"chain{N}")


def balanced_binary_tree(N, seed=0):
    """Revolute bodies with parent ``i // 2`` (1-based), so depth grows like ``log2 N``."""
    return random_tree([i // 2 for i in range(1, N + 1)], seed, ("revolute",), name=f"binary{N}")


def free_body(seed=0):
    """A single floating rigid body with random inertia."""
    rng = np.random.default_rng(seed)
    body = {"name": "body", "parent": 0, "joint": {"kind": "free"}, "inertia": {"theta": [float(x) for x in random_inertia_params(rng)]}}
    return model_from_dict({"name": "free_body", "gravity": [0.0] * 6, "bodies": [body]})


def random_state(model, seed=0, speed=1.0):
    rng = np.random.default_rng(seed)
    return ConfigState(model.random_config(rng), speed * rng.normal(size=model.nv))


def random_velocity(model, seed=0):
    return np.random.default_rng(seed).normal(size=model.nv)
