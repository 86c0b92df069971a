"""Regressors linear in the inertial parameters, the direct adaptive law and filtered identification residuals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import _blockdiag, coriolis_transpose_times_v, forward_kinematics, gravity_vector, mass_matrix
from .model import integrate_config
from .spatial import SpatialInertia, cluster_B, cross_force, cross_motion, skew


def inertia_rate_columns(u):
    """``d(I(theta) u)/d theta`` for one body: a 6x10 matrix."""
    w, nu = u[:3], u[3:]
    Y = np.zeros((6, 10))
    Y[3:, 0] = nu
    Y[:3, 1:4] = -skew(nu)
    Y[3:, 1:4] = skew(w)
    wx, wy, wz = w
    Y[:3, 4:] = [[wx, 0, 0, wy, wz, 0], [0, wy, 0, wx, 0, wz], [0, 0, wz, 0, wx, wy]]
    return Y


def body_regressor(a, v, w):
    """6x10 matrix with ``Y theta = I(theta) a + B(I(theta), v) w``."""
    a, v, w = (np.asarray(x, dtype=float) for x in (a, v, w))
    vxw = cross_motion(v) @ w
    return (
        inertia_rate_columns(a - 0.5 * vxw)
        + 0.5 * cross_force(v) @ inertia_rate_columns(w)
        + 0.5 * cross_force(w) @ inertia_rate_columns(v)
    )


def stacked_regressor(a, v, w):
    """Block-diagonal regressor for a stack of bodies."""
    n = len(a) // 6
    return _blockdiag([body_regressor(a[6 * r : 6 * r + 6], v[6 * r : 6 * r + 6], w[6 * r : 6 * r + 6]) for r in range(n)])


@dataclass
class AdaptiveState:
    """Estimates and gains for the direct adaptive law ``theta_hat' = -Gamma Y^T s``."""

    theta_hat: np.ndarray
    K_D: np.ndarray
    Lambda: float = 1.0
    lam: float = 10.0
    gain: np.ndarray | float = 1.0
    filters: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float).copy()
        self.K_D = np.atleast_2d(np.asarray(self.K_D, dtype=float))
        if not np.allclose(self.K_D, self.K_D.T) or np.linalg.eigvalsh(self.K_D).min() <= 0:
            raise ValueError("K_D must be symmetric positive definite")
        if self.Lambda <= 0 or self.lam <= 0:
            raise ValueError("Lambda and lam must be positive")

    def theta_rate(self, YTs):
        return -np.asarray(self.gain) * YTs


def _node_inertias(model, theta):
    theta = np.asarray(theta, dtype=float).reshape(-1, 10)
    out = []
    for node in model.nodes:
        out.append(_blockdiag([SpatialInertia.from_params(theta[b]).matrix() for b in node.bodies]))
    return out


def direct_adaptive_step(model, q, v, v_r, vdot_r, theta_hat, K_D):
    """Control torque ``Y theta_hat - K_D s`` and ``Y^T s`` without forming ``Y``."""
    q, v, v_r, vdot_r = (np.asarray(x, dtype=float) for x in (q, v, v_r, vdot_r))
    nodes = model.nodes
    cache = forward_kinematics(model, q, v)
    Ihat = _node_inertias(model, theta_hat)
    a, w, f = [], [], []
    YTs = np.zeros(10 * model.n_bodies)
    for k, node in enumerate(nodes):
        X = cache.Xup[k]
        p = node.parent
        wp = w[p] if p >= 0 else np.zeros(6)
        ap = a[p] if p >= 0 else -model.gravity
        P, Pd = cache.Phi[k], cache.Phidot[k]
        wk = X @ wp + P @ v_r[node.vs]
        ak = X @ ap + Pd @ v_r[node.vs] + P @ vdot_r[node.vs]
        vk = cache.v[k]
        w.append(wk)
        a.append(ak)
        f.append(Ihat[k] @ ak + cluster_B(Ihat[k], vk) @ wk)
        YTs[model.param_slice(k)] = stacked_regressor(ak, vk, wk).T @ (vk - wk)
    tau = np.zeros(model.nv)
    for k in reversed(range(len(nodes))):
        node = nodes[k]
        tau[node.vs] = cache.Phi[k].T @ f[k]
        if node.parent >= 0:
            f[node.parent] = f[node.parent] + cache.Xup[k].T @ f[k]
    s = v - v_r
    return tau - np.atleast_2d(K_D) @ s, YTs


@dataclass
class RegressorBundle:
    Y: np.ndarray
    Y_p: np.ndarray
    Y_g: np.ndarray
    Y_c: np.ndarray
    Y_T: np.ndarray
    Y_Vdot: np.ndarray

    def items(self):
        return {"Y": self.Y, "Y_p": self.Y_p, "Y_g": self.Y_g, "Y_c": self.Y_c, "Y_T": self.Y_T, "Y_Vdot": self.Y_Vdot}.items()


def regressor_bundle(model, q, v, v_r=None, vdot_r=None):
    """Dense regressors for torque, momentum, gravity, ``C^T v``, kinetic energy and potential rate."""
    q, v = np.asarray(q, dtype=float), np.asarray(v, dtype=float)
    v_r = v if v_r is None else np.asarray(v_r, dtype=float)
    vdot_r = np.zeros(model.nv) if vdot_r is None else np.asarray(vdot_r, dtype=float)
    nodes = model.nodes
    cache = forward_kinematics(model, q, v)
    m, npar = model.nv, 10 * model.n_bodies
    Y, Yp, Yg, Yc = (np.zeros((m, npar)) for _ in range(4))
    YT, YV = np.zeros(npar), np.zeros(npar)
    a, w, ag = [], [], []
    zero = np.zeros(6)
    for k, node in enumerate(nodes):
        X = cache.Xup[k]
        p = node.parent
        P, Pd, vk = cache.Phi[k], cache.Phidot[k], cache.v[k]
        wk = X @ (w[p] if p >= 0 else zero) + P @ v_r[node.vs]
        ak = X @ (a[p] if p >= 0 else -model.gravity) + Pd @ v_r[node.vs] + P @ vdot_r[node.vs]
        agk = X @ (ag[p] if p >= 0 else -model.gravity)
        w.append(wk)
        a.append(ak)
        ag.append(agk)
        zk = np.zeros_like(vk)
        F = stacked_regressor(ak, vk, wk)
        Hr = stacked_regressor(vk, zk, zk)
        G = stacked_regressor(agk, zk, zk)
        cols = model.param_slice(k)
        YT[cols] = 0.5 * vk @ Hr
        YV[cols] = vk @ G
        i = k
        while True:
            si = nodes[i].vs
            Y[si, cols] = cache.Phi[i].T @ F
            Yp[si, cols] = cache.Phi[i].T @ Hr
            Yc[si, cols] = cache.Phidot[i].T @ Hr
            Yg[si, cols] = cache.Phi[i].T @ G
            if nodes[i].parent < 0:
                break
            Xi = cache.Xup[i]
            F, Hr, G = Xi.T @ F, Xi.T @ Hr, Xi.T @ G
            i = nodes[i].parent
    return RegressorBundle(Y, Yp, Yg, Yc, YT.reshape(1, -1), YV.reshape(1, -1))


# -- filtered identification residuals -------------------------------------------


def low_pass(u, dt, lam):
    """``lam / (s + lam)`` applied to samples ``u`` (zero initial state).

    Exact for input that is linear between samples (first-order hold).
    """
    u = np.asarray(u, dtype=float)
    y = np.zeros_like(u)
    a = lam * dt
    decay = np.exp(-a)
    b_new = 1.0 - (1.0 - decay) / a
    b_old = (1.0 - decay) / a - decay
    for n in range(1, len(u)):
        y[n] = decay * y[n - 1] + b_old * u[n - 1] + b_new * u[n]
    return y


def _check_uniform(t):
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two samples")
    dt = np.diff(t)
    if np.abs(dt - dt[0]).max() > 1e-9 * max(1.0, abs(dt[0])):
        raise ValueError("filtered residuals need uniformly sampled data")
    return t, float(dt[0])


def filtered_momentum_terms(model, t, Q, V, T, lam=10.0):
    """``(filtered torque, W)`` with ``filt(tau) = W theta`` for the true parameters."""
    t, dt = _check_uniform(t)
    N = len(t)
    bundles = [regressor_bundle(model, Q[n], V[n]) for n in range(N)]
    Yp = np.stack([b.Y_p for b in bundles])
    inner = lam * Yp + np.stack([b.Y_c - b.Y_g for b in bundles])
    weight = lam * np.exp(-lam * (t - t[0]))
    W = lam * Yp - weight[:, None, None] * Yp[0] - low_pass(inner, dt, lam)
    return low_pass(np.asarray(T, dtype=float), dt, lam), W


def filtered_momentum_residual(model, t, Q, V, T, theta=None, lam=10.0):
    """``W theta - filt(tau)`` at every sample; vanishes up to quadrature error for the true parameters."""
    ft, W = filtered_momentum_terms(model, t, Q, V, T, lam)
    theta = model.theta() if theta is None else np.asarray(theta, dtype=float)
    return W @ theta - ft


def filtered_energy_terms(model, t, Q, V, T, lam=10.0):
    t, dt = _check_uniform(t)
    N = len(t)
    bundles = [regressor_bundle(model, Q[n], V[n]) for n in range(N)]
    YT = np.stack([b.Y_T[0] for b in bundles])
    YV = np.stack([b.Y_Vdot[0] for b in bundles])
    power = np.einsum("ni,ni->n", np.asarray(V, dtype=float), np.asarray(T, dtype=float))
    weight = lam * np.exp(-lam * (t - t[0]))
    W = lam * YT - weight[:, None] * YT[0] - low_pass(lam * YT - YV, dt, lam)
    return low_pass(power, dt, lam), W


def filtered_energy_residual(model, t, Q, V, T, theta=None, lam=10.0):
    """Scalar analogue of :func:`filtered_momentum_residual` built on ``v^T tau``."""
    fp, W = filtered_energy_terms(model, t, Q, V, T, lam)
    theta = model.theta() if theta is None else np.asarray(theta, dtype=float)
    return W @ theta - fp


def momentum_rate_check(model, q, v, vdot, tau):
    """``d(Hv)/dt - (tau + C^T v - g)`` at one state, with ``d(Hv)/dt`` from a flow difference."""
    h = 1e-6
    qp = integrate_config(model, q, v, h)
    qm = integrate_config(model, q, v, -h)
    pdot = (mass_matrix(model, qp) @ (v + h * vdot) - mass_matrix(model, qm) @ (v - h * vdot)) / (2 * h)
    return pdot - (tau + coriolis_transpose_times_v(model, q, v) - gravity_vector(model, q))

