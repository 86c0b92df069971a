"""Recursive dynamics on cluster trees.

Every tree node holds a stack of ``nb`` bodies.  Node quantities are stacked
6-vectors (``6 nb`` rows); the world acts as a one-slot parent with zero
velocity.  ``Xup[k]`` maps the stacked velocity of node ``k``'s parent into
node ``k`` (one nonzero transform per block row).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import (
    body_coriolis_star,
    cluster_B,
    cross_force_stacked,
    cross_motion_stacked,
)


@dataclass
class KinematicsCache:
    """Per-node kinematic quantities at one state."""

    Xup: list  # (6 nb_k) x (6 nb_parent) matrices; world parent has 6 columns
    X_world: list  # per-body SpatialTransform, world -> body
    Phi: list
    Phidot: list  # (v x) Phi + ring, in local coordinates
    v: list  # stacked body twists per node
    I: list  # block-diagonal stacked inertias per node


@dataclass
class FactorizationResult:
    H: np.ndarray
    C: np.ndarray
    method: str


def _blockdiag(blocks):
    n = sum(b.shape[0] for b in blocks)
    m = sum(b.shape[1] for b in blocks)
    out = np.zeros((n, m))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def node_transforms(model, q):
    """``Xup`` block matrix of every node (one anchor-to-body transform per block row)."""
    q = np.asarray(q, dtype=float)
    Xup = []
    for node in model.nodes:
        T = node.joint.transform_matrices(q[node.qs])
        if node.nb == 1 and node.anchors[0] == 0 and (node.parent < 0 or model.nodes[node.parent].nb == 1):
            Xup.append(T[0])
            continue
        pn = 6 * (model.nodes[node.parent].nb if node.parent >= 0 else 1)
        X = np.zeros((6 * node.nb, pn))
        for r, (t, a) in enumerate(zip(T, node.anchors)):
            X[6 * r : 6 * r + 6, 6 * a : 6 * a + 6] = t
        Xup.append(X)
    return Xup


def forward_kinematics(model, q, v, world=False):
    """Velocity sweep; per-body world transforms only when ``world`` is set."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    Xup = node_transforms(model, q)
    Phi, Phidot, vel = [], [], []
    for k, node in enumerate(model.nodes):
        joint = node.joint
        qk, vk = q[node.qs], v[node.vs]
        P = joint.motion_subspace(qk)
        vs = P @ vk
        if node.parent >= 0:
            vs = vs + Xup[k] @ vel[node.parent]
        Pd = cross_motion_stacked(vs) @ P + joint.ring(qk, vk)
        Phi.append(P)
        Phidot.append(Pd)
        vel.append(vs)
    X_world = world_transforms(model, q) if world else None
    return KinematicsCache(Xup, X_world, Phi, Phidot, vel, list(model.node_inertias))


def world_transforms(model, q):
    """World-to-body :class:`SpatialTransform` of every body."""
    q = np.asarray(q, dtype=float)
    rel = [node.joint.transforms(q[node.qs]) for node in model.nodes]
    X_world = [None] * model.n_bodies
    for k, node in enumerate(model.nodes):
        for r, b in enumerate(node.bodies):
            if node.parent >= 0:
                anchor = model.nodes[node.parent].bodies[node.anchors[r]]
                X_world[b] = rel[k][r] @ X_world[anchor]
            else:
                X_world[b] = rel[k][r]
    return X_world


def mass_matrix(model, q, cache=None):
    """Joint-space inertia by the composite-rigid-body recursion."""
    if cache is None:
        cache = forward_kinematics(model, q, np.zeros(model.nv))
    H = np.zeros((model.nv, model.nv))
    Ic = [I.copy() for I in cache.I]
    for j in reversed(range(len(model.nodes))):
        nj = model.nodes[j]
        F = Ic[j] @ cache.Phi[j]
        H[nj.vs, nj.vs] = cache.Phi[j].T @ F
        i = j
        while model.nodes[i].parent >= 0:
            F = cache.Xup[i].T @ F
            i = model.nodes[i].parent
            blk = cache.Phi[i].T @ F
            H[model.nodes[i].vs, nj.vs] = blk
            H[nj.vs, model.nodes[i].vs] = blk.T
        p = nj.parent
        if p >= 0:
            Ic[p] += cache.Xup[j].T @ Ic[j] @ cache.Xup[j]
    return H


def rnea(model, q, v, vdot, with_gravity=True, cache=None):
    """Inverse dynamics ``tau = H vdot + c(q, v) [+ g(q)]``."""
    vdot = np.asarray(vdot, dtype=float)
    if cache is None:
        cache = forward_kinematics(model, q, v)
    v = np.asarray(v, dtype=float)
    a0 = -model.gravity if with_gravity else np.zeros(6)
    acc, f = [], []
    for k, node in enumerate(model.nodes):
        ap = acc[node.parent] if node.parent >= 0 else a0
        ak = cache.Xup[k] @ ap + cache.Phi[k] @ vdot[node.vs] + cache.Phidot[k] @ v[node.vs]
        acc.append(ak)
        vk = cache.v[k]
        f.append(cache.I[k] @ ak + cross_force_stacked(vk) @ (cache.I[k] @ vk))
    tau = np.zeros(model.nv)
    for k in reversed(range(len(model.nodes))):
        node = model.nodes[k]
        tau[node.vs] = cache.Phi[k].T @ f[k]
        if node.parent >= 0:
            f[node.parent] = f[node.parent] + cache.Xup[k].T @ f[k]
    return tau


def forward_dynamics(model, q, v, tau):
    """``vdot = H^-1 (tau - c - g)`` from one kinematics sweep."""
    cache = forward_kinematics(model, q, v)
    H = mass_matrix(model, q, cache)
    bias = rnea(model, q, v, np.zeros(model.nv), True, cache)
    return np.linalg.solve(H, np.asarray(tau, dtype=float) - bias)


def gravity_vector(model, q):
    return rnea(model, q, np.zeros(model.nv), np.zeros(model.nv), True)


def coriolis_star(model, q, v, cache=None):
    """Torsion-free (Christoffel-consistent) Coriolis matrix and mass matrix in O(N d)."""
    if cache is None:
        cache = forward_kinematics(model, q, v)
    nodes = model.nodes
    m = model.nv
    C = np.zeros((m, m))
    H = np.zeros((m, m))
    Ic = [I.copy() for I in cache.I]
    Bc = [cluster_B(cache.I[k], cache.v[k]) for k in range(len(nodes))]
    Phi, Phid, Xup = cache.Phi, cache.Phidot, cache.Xup
    for j in reversed(range(len(nodes))):
        sj = nodes[j].vs
        f1 = Ic[j] @ Phid[j] + Bc[j] @ Phi[j]
        f2 = Ic[j] @ Phi[j]
        f3 = Bc[j].T @ Phi[j]
        C[sj, sj] = Phi[j].T @ f1
        H[sj, sj] = Phi[j].T @ f2
        i = j
        while nodes[i].parent >= 0:
            X = Xup[i]
            f1, f2, f3 = X.T @ f1, X.T @ f2, X.T @ f3
            i = nodes[i].parent
            si = nodes[i].vs
            C[si, sj] = Phi[i].T @ f1
            C[sj, si] = (Phid[i].T @ f2 + Phi[i].T @ f3).T
            H[si, sj] = Phi[i].T @ f2
            H[sj, si] = H[si, sj].T
        p = nodes[j].parent
        if p >= 0:
            X = Xup[j]
            Ic[p] += X.T @ Ic[j] @ X
            Bc[p] += X.T @ Bc[j] @ X
    return FactorizationResult(H, C, "alg1")


def coriolis_transpose_times_v(model, q, v, cache=None):
    """``C^T v`` from composite momenta; independent of the chosen factorization."""
    if cache is None:
        cache = forward_kinematics(model, q, v)
    h = [cache.I[k] @ cache.v[k] for k in range(len(model.nodes))]
    out = np.zeros(model.nv)
    for k in reversed(range(len(model.nodes))):
        node = model.nodes[k]
        out[node.vs] = cache.Phidot[k].T @ h[k]
        if node.parent >= 0:
            h[node.parent] = h[node.parent] + cache.Xup[k].T @ h[k]
    return out


# -- maximal coordinates -------------------------------------------------------


def stacked_transforms(model, q, cache=None):
    """Block lower-triangular ``n x n`` matrix whose (k, i) block is the transform from node i to k."""
    if cache is None:
        cache = forward_kinematics(model, q, np.zeros(model.nv))
    rows = np.cumsum([0] + [6 * n.nb for n in model.nodes])
    n = rows[-1]
    X = np.zeros((n, n))
    for k, node in enumerate(model.nodes):
        rk = slice(rows[k], rows[k + 1])
        X[rk, rk] = np.eye(rows[k + 1] - rows[k])
        p = node.parent
        if p >= 0:
            X[rk, : rows[p + 1]] += cache.Xup[k] @ X[rows[p] : rows[p + 1], : rows[p + 1]]
    return X


def stacked_jacobians(model, q, v):
    """``A`` with ``v_max = A v`` and its time derivative along the motion."""
    cache = forward_kinematics(model, q, v)
    X = stacked_transforms(model, q, cache)
    Phi = _blockdiag(cache.Phi)
    Phid = _blockdiag(cache.Phidot)
    vmax = np.concatenate(cache.v)
    A = X @ Phi
    Adot = X @ Phid - cross_motion_stacked(vmax) @ A
    return A, Adot


def project_factorization(C, H, A, Adot):
    """Carry a factorization ``(H, C)`` through ``v = A vbar``: returns ``(A^T H A, A^T C A + A^T H Adot)``."""
    C, H, A, Adot = (np.asarray(x, dtype=float) for x in (C, H, A, Adot))
    n, m = A.shape
    if C.shape != (n, n) or H.shape != (n, n) or Adot.shape != (n, m):
        raise ValueError(f"shape mismatch: C{C.shape} H{H.shape} A{A.shape} Adot{Adot.shape}")
    return A.T @ H @ A, A.T @ C @ A + A.T @ H @ Adot


def maximal_factorization(model, q, v):
    """Block-diagonal body inertias and single-body Christoffel factorizations at the body twists."""
    cache = forward_kinematics(model, q, v)
    vmax = np.concatenate(cache.v)
    Ib, Cb = [], []
    for b, body in enumerate(model.bodies):
        I = body.inertia.matrix()
        Ib.append(I)
        Cb.append(body_coriolis_star(I, vmax[6 * b : 6 * b + 6]))
    return _blockdiag(Ib), _blockdiag(Cb)


def coriolis_projected(model, q, v):
    """Christoffel factorization obtained by projecting the maximal-coordinate one."""
    Hm, Cm = maximal_factorization(model, q, v)
    A, Adot = stacked_jacobians(model, q, v)
    H, C = project_factorization(Cm, Hm, A, Adot)
    return FactorizationResult(H, C, "projected")


def mass_matrix_dense(model, q):
    """``A^T H A`` with explicit stacked Jacobians."""
    Hm, _ = maximal_factorization(model, q, np.zeros(model.nv))
    A, _ = stacked_jacobians(model, q, np.zeros(model.nv))
    return A.T @ Hm @ A


# -- derivative-based construction ----------------------------------------------


def dual_basis(Phi):
    """``Psi`` with ``Psi^T Phi = 1``, from a QR completion of ``Phi``."""
    n, d = Phi.shape
    Q, _ = np.linalg.qr(Phi, mode="complete")
    full = np.hstack([Phi, Q[:, d:]])
    return np.linalg.inv(full).T[:, :d]


def coriolis_via_derivative(model, q, v, h=1e-3):
    """Christoffel factorization from the velocity Jacobian of the bias force plus a structure-constant correction."""
    for node in model.nodes:
        if node.nb > 1:
            raise ValueError("derivative construction needs an open chain of single-body joints")
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    zero = np.zeros(model.nv)
    J = np.zeros((model.nv, model.nv))
    for c in range(model.nv):
        e = np.zeros(model.nv)
        e[c] = h
        J[:, c] = (rnea(model, q, v + e, zero, False) - rnea(model, q, v - e, zero, False)) / (2 * h)
    cache = forward_kinematics(model, q, v)
    K = np.zeros((model.nv, model.nv))
    for k, node in enumerate(model.nodes):
        qk = q[node.qs]
        if np.any(node.joint.ring_derivative(qk)):
            raise ValueError(f"joint {node.joint.kind} has a nonzero ring term")
        P = cache.Phi[k]
        K[node.vs, node.vs] = dual_basis(P).T @ cross_motion_stacked(P @ v[node.vs]) @ P
    H = mass_matrix(model, q, cache)
    return FactorizationResult(H, 0.5 * (J + H @ K), "derivative")


# -- alternative factorizations ------------------------------------------------


def three_form(m, rng, scale=1.0):
    """Random totally antisymmetric ``m x m x m`` array."""
    eps = np.zeros((m, m, m))
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                b = scale * rng.normal()
                for (a, c, d), s in (((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1), ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)):
                    eps[a, c, d] = s * b
    return eps


def skew_perturbation(eps, v):
    """``N(v)_{ik} = eps_{ijk} v^j``: skew in (i, k), linear in ``v`` and ``N(v) v = 0``."""
    return np.einsum("ijk,j->ik", eps, v)


# -- energy and momentum -------------------------------------------------------


def kinetic_energy(model, q, v):
    cache = forward_kinematics(model, q, v)
    return 0.5 * sum(vk @ I @ vk for vk, I in zip(cache.v, cache.I))


def potential_energy(model, q):
    """Gravitational potential for the uniform field ``model.gravity`` (linear part)."""
    X_world = world_transforms(model, q)
    g = model.gravity[3:]
    U = 0.0
    for b, body in enumerate(model.bodies):
        T = X_world[b]
        # body origin in world is T.r, body axes in world are T.E^T
        U -= g @ (body.inertia.mass * T.r + T.E.T @ body.inertia.h)
    return U


def spatial_momentum_world(model, q, v):
    """Total spatial momentum ``[angular; linear]`` about the world origin."""
    cache = forward_kinematics(model, q, v, world=True)
    vmax = np.concatenate(cache.v)
    out = np.zeros(6)
    for b, body in enumerate(model.bodies):
        hb = body.inertia.matrix() @ vmax[6 * b : 6 * b + 6]
        out += cache.X_world[b].transpose_apply(hb)
    return out


def body_positions(model, q):
    """World position of every body frame origin."""
    return np.array([T.r for T in world_transforms(model, q)])


def momentum_rate_residual(model, q, v, tau):
    """``d/dt (H v)`` predicted by ``tau + C^T v - g``."""
    return tau + coriolis_transpose_times_v(model, q, v) - gravity_vector(model, q)
