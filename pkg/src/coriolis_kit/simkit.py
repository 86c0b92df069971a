"""Fixed-step closed-loop simulation with a passivity-based tracking controller."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adaptive import direct_adaptive_step, regressor_bundle
from .dynamics import forward_dynamics, gravity_vector, kinetic_energy, mass_matrix, potential_energy, rnea
from .model import config_rate, normalize_config
from .oracles import fd_mass_matrix_rate
from .spatial import skew


class SimulationError(RuntimeError):
    pass


@dataclass
class TrackingReference:
    """Desired coordinates with their first two time derivatives and the error gain ``Lambda``."""

    q_d: Callable
    qd_d: Callable
    qdd_d: Callable
    Lambda: float = 1.0

    def __call__(self, t):
        return np.asarray(self.q_d(t), float), np.asarray(self.qd_d(t), float), np.asarray(self.qdd_d(t), float)


def point_mass_reference(Lambda=1.0):
    """``q_d = [t + sin t, 0, 0]``."""
    return TrackingReference(
        lambda t: np.array([t + np.sin(t), 0.0, 0.0]),
        lambda t: np.array([1.0 + np.cos(t), 0.0, 0.0]),
        lambda t: np.array([-np.sin(t), 0.0, 0.0]),
        Lambda,
    )


def constant_reference(q_d, Lambda=1.0):
    q_d = np.asarray(q_d, dtype=float)
    z = np.zeros_like(q_d)
    return TrackingReference(lambda t: q_d, lambda t: z, lambda t: z, Lambda)


def sliding_variable(q, v, ref, t):
    """``(s, v_r, vdot_r)`` with ``v_r = qd_d - Lambda e`` and ``vdot_r`` its derivative along the motion."""
    qd, qdd, qddd = ref(t)
    e = np.asarray(q, dtype=float) - qd
    v_r = qdd - ref.Lambda * e
    vdot_r = qddd - ref.Lambda * (np.asarray(v, dtype=float) - qdd)
    return np.asarray(v) - v_r, v_r, vdot_r


@dataclass
class FactorizationChoice:
    """Coriolis matrix used by the controller.

    ``kind`` is ``"star"`` (Christoffel-consistent, evaluated recursively),
    ``"beta"`` (point-mass family ``C = beta(q) (v x)``) or ``"custom"``
    (``func(model, q, v, theta_hat) -> C``).
    """

    kind: str = "star"
    beta: float | Callable = 0.0
    func: Callable | None = None

    @classmethod
    def parse(cls, text):
        """``"star"`` or ``"beta=<value>"``."""
        if text == "star":
            return cls("star")
        if text.startswith("beta="):
            return cls("beta", float(text[5:]))
        raise ValueError(f"unknown factorization {text!r}; use 'star' or 'beta=<value>'")

    @property
    def tag(self):
        if self.kind == "beta":
            return f"beta={self.beta}" if not callable(self.beta) else "beta(q)"
        return self.kind

    def matrix(self, model, q, v, theta_hat):
        if self.kind == "beta":
            b = self.beta(q) if callable(self.beta) else self.beta
            return b * skew(v)
        if self.kind == "custom":
            return np.asarray(self.func(model, q, v, theta_hat), dtype=float)
        raise ValueError("the star factorization is evaluated recursively")

    def verify(self, model, theta_hat=None, samples=3, seed=0, tol=1e-6):
        """Check ``Hdot = C + C^T`` and ``C v = c`` on random states; raise on failure."""
        if self.kind == "star":
            return 0.0
        if self.kind == "beta" and model.nv != 3:
            raise ValueError("the beta family is defined for the three-speed point mass only")
        theta_hat = model.theta() if theta_hat is None else theta_hat
        est = model.with_theta(theta_hat)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            q, v = est.random_config(rng), rng.normal(size=est.nv)
            C = self.matrix(est, q, v, theta_hat)
            Hd = fd_mass_matrix_rate(est, q, v)
            bias = rnea(est, q, v, np.zeros(est.nv), False)
            res = max(np.abs(Hd - C - C.T).max(), np.abs(C @ v - bias).max())
            worst = max(worst, res / (1 + np.abs(Hd).max()))
        if worst > tol:
            raise SimulationError(f"factorization {self.tag} fails the skew or bias check (residual {worst:.3e})")
        return worst


def passivity_controller(model, q, v, t, ref, theta_hat, K_D, choice=None):
    """Certainty-equivalence law ``H^ vdot_r + C^ v_r + g^ - K_D s``.

    Returns ``(tau, Y^T s, s)``.  ``Y^T s`` always uses the Christoffel
    regressor, which coincides with the controller's when ``C^`` does not
    depend on the parameters beyond ``C*``.
    """
    choice = choice or FactorizationChoice()
    s, v_r, vdot_r = sliding_variable(q, v, ref, t)
    K_D = np.atleast_2d(K_D)
    tau, YTs = direct_adaptive_step(model, q, v, v_r, vdot_r, theta_hat, K_D)
    if choice.kind != "star":
        est = model.with_theta(theta_hat)
        C = choice.matrix(est, q, v, theta_hat)
        tau = mass_matrix(est, q) @ vdot_r + C @ v_r + gravity_vector(est, q) - K_D @ s
    return tau, YTs, s


@dataclass
class ControllerConfig:
    reference: TrackingReference
    theta_hat: np.ndarray
    K_D: np.ndarray
    choice: FactorizationChoice = field(default_factory=FactorizationChoice)
    adapt: bool = False
    gain: float | np.ndarray = 1.0


@dataclass
class SimLog:
    """Per-step samples.  ``theta_hat`` rows are the estimates in use at each sample."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    s: np.ndarray
    theta_hat: np.ndarray
    meta: dict

    def columns(self):
        """Header and rows for CSV output."""
        head = ["t[s]"]
        head += [f"q{i}" for i in range(self.q.shape[1])]
        head += [f"v{i}" for i in range(self.v.shape[1])]
        head += [f"tau{i}" for i in range(self.tau.shape[1])]
        head += [f"s{i}" for i in range(self.s.shape[1])]
        rows = np.hstack([self.t[:, None], self.q, self.v, self.tau, self.s])
        return head, rows


def simulate(model, controller=None, t_final=10.0, dt=1e-3, q0=None, v0=None, per_stage=True, torque=None):
    """Fixed-step RK4 closed loop.

    ``controller`` is a :class:`ControllerConfig` or ``None`` (then ``torque(t, q, v)``
    or zero torque is applied).  With ``per_stage`` the control is re-evaluated at
    every RK4 stage; otherwise it is held over the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = model.neutral_config() if q0 is None else np.array(q0, dtype=float)
    v = np.zeros(model.nv) if v0 is None else np.array(v0, dtype=float)
    nsteps = int(round(t_final / dt))
    ctl = controller
    th = None if ctl is None else np.array(ctl.theta_hat, dtype=float)
    if ctl is not None:
        ctl.choice.verify(model, th)
    npar = 0 if th is None else th.size

    def control(t, q, v, th):
        if ctl is None:
            tau = np.zeros(model.nv) if torque is None else np.asarray(torque(t, q, v), dtype=float)
            return tau, np.zeros(npar), np.zeros(model.nv)
        tau, YTs, s = passivity_controller(model, q, v, t, ctl.reference, th, ctl.K_D, ctl.choice)
        thd = -np.asarray(ctl.gain) * YTs if ctl.adapt else np.zeros(npar)
        return tau, thd, s

    def deriv(t, q, v, th, held):
        tau, thd, _ = held if held is not None else control(t, q, v, th)
        return config_rate(model, q, v), forward_dynamics(model, q, v, tau), thd

    T = np.arange(nsteps + 1) * dt
    Q = np.zeros((nsteps + 1, model.nq))
    V = np.zeros((nsteps + 1, model.nv))
    TAU = np.zeros((nsteps + 1, model.nv))
    S = np.zeros((nsteps + 1, model.nv))
    TH = np.zeros((nsteps + 1, npar))
    start = time.perf_counter()
    for n in range(nsteps + 1):
        t = T[n]
        cur = control(t, q, v, th)
        Q[n], V[n], TAU[n], S[n] = q, v, cur[0], cur[2]
        if npar:
            TH[n] = th
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v)) and np.all(np.isfinite(cur[0]))):
            raise SimulationError(f"non-finite state at t={t:.6g} (step {n}); last |v|={np.abs(v).max():.3e}")
        if n == nsteps:
            break
        held = None if per_stage else cur
        thz = th if th is not None else np.zeros(0)
        k1 = deriv(t, q, v, thz, held)
        k2 = deriv(t + dt / 2, q + dt / 2 * k1[0], v + dt / 2 * k1[1], thz + dt / 2 * k1[2], held)
        k3 = deriv(t + dt / 2, q + dt / 2 * k2[0], v + dt / 2 * k2[1], thz + dt / 2 * k2[2], held)
        k4 = deriv(t + dt, q + dt * k3[0], v + dt * k3[1], thz + dt * k3[2], held)
        q = normalize_config(model, q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]))
        v = v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if th is not None:
            th = th + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    meta = {"model": model.name, "dt": dt, "t_final": t_final, "per_stage": per_stage, "wall_time": time.perf_counter() - start}
    if ctl is not None:
        meta.update(
            factorization=ctl.choice.tag,
            K_D=np.atleast_2d(ctl.K_D).tolist(),
            Lambda=ctl.reference.Lambda,
            adapt=ctl.adapt,
            theta_hat0=np.asarray(ctl.theta_hat).tolist(),
        )
    return SimLog(T, Q, V, TAU, S, TH, meta)


# -- analysis ----------------------------------------------------------------------


def energy_series(model, log):
    """Kinetic plus potential energy at every sample."""
    return np.array([kinetic_energy(model, q, v) + potential_energy(model, q) for q, v in zip(log.q, log.v)])


def lyapunov_series(log, model, theta=None, gain=1.0):
    """``V = 1/2 s^T H s + 1/2 theta_err^T Gamma^-1 theta_err`` at every sample (true ``H``).

    ``gain`` is the adaptation gain ``Gamma`` (scalar or per-parameter diagonal).
    """
    theta = model.theta() if theta is None else np.asarray(theta, dtype=float)
    inv = 1.0 / np.asarray(gain, dtype=float)
    out = np.zeros(len(log.t))
    for n in range(len(log.t)):
        err = log.theta_hat[n] - theta if log.theta_hat.shape[1] else np.zeros(0)
        s = log.s[n]
        out[n] = 0.5 * s @ mass_matrix(model, log.q[n]) @ s + 0.5 * err @ (inv * err)
    return out


def lyapunov_rate_prediction(log, model, ref, K_D, gain=1.0, adapt=False, theta=None):
    """``-s^T K_D s + s^T Y theta_err + theta_err^T Gamma^-1 theta_err'`` at every sample."""
    theta = model.theta() if theta is None else np.asarray(theta, dtype=float)
    K_D = np.atleast_2d(K_D)
    out = np.zeros(len(log.t))
    for n, t in enumerate(log.t):
        s, v_r, vdot_r = sliding_variable(log.q[n], log.v[n], ref, t)
        Y = regressor_bundle(model, log.q[n], log.v[n], v_r, vdot_r).Y
        err = log.theta_hat[n] - theta
        # Gamma^-1 theta_err' = -Y^T s under adaptation
        thd = -(Y.T @ s) if adapt else np.zeros_like(err)
        out[n] = -s @ K_D @ s + s @ Y @ err + err @ thd
    return out


def high_frequency_fraction(x, dt, cutoff=1.0):
    """Share of spectral energy above ``cutoff`` Hz, mean removed, summed over columns."""
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    x = x - x.mean(axis=0)
    P = np.abs(np.fft.rfft(x, axis=0)) ** 2
    f = np.fft.rfftfreq(x.shape[0], dt)
    total = P[1:].sum()
    return float(P[f > cutoff].sum() / total) if total > 0 else 0.0


def _is_point_mass(model):
    return (
        len(model.nodes) == 1
        and model.nodes[0].joint.kind == "translation"
        and not np.any(model.gravity[:3])
    )


def simulate_point_mass(model, m_hat, t_final, dt, q0, v0, K_D=1.0, Lambda=1.0, beta=0.0, adapt=False, gain=1.0):
    """Closed-form counterpart of :func:`simulate` for a single translating body.

    For that model ``H = m 1``, the bias is ``-m g`` and the Christoffel
    controller reduces to ``m^ (vdot_r - g) - K_D s``; the ``beta (v x) v_r``
    term is added for the torsioned choice.  Only the mass estimate evolves
    under adaptation (the other regressor columns vanish).  Gains are scalars.
    Matches :func:`simulate` to roundoff; used to keep long experiments fast.
    """
    if not _is_point_mass(model):
        raise ValueError("closed-form path needs a single translation joint without angular gravity")
    m = model.bodies[0].inertia.mass
    gx, gy, gz = (float(x) for x in model.gravity[3:])
    kd, lam, b, gam = float(K_D), float(Lambda), float(beta), float(gain)
    sin, cos = np.sin, np.cos

    def rhs(t, x):
        q0_, q1, q2, v0_, v1, v2, mh = x
        st, ct = sin(t), cos(t)
        e0, e1, e2 = q0_ - (t + st), q1, q2
        r0, r1, r2 = 1.0 + ct - lam * e0, -lam * e1, -lam * e2
        rd0, rd1, rd2 = -st - lam * (v0_ - 1.0 - ct), -lam * v1, -lam * v2
        s0, s1, s2 = v0_ - r0, v1 - r1, v2 - r2
        u0, u1, u2 = rd0 - gx, rd1 - gy, rd2 - gz
        t0, t1, t2 = mh * u0 - kd * s0, mh * u1 - kd * s1, mh * u2 - kd * s2
        if b:
            t0 += b * (v1 * r2 - v2 * r1)
            t1 += b * (v2 * r0 - v0_ * r2)
            t2 += b * (v0_ * r1 - v1 * r0)
        mhd = -gam * (s0 * u0 + s1 * u1 + s2 * u2) if adapt else 0.0
        return (v0_, v1, v2, t0 / m + gx, t1 / m + gy, t2 / m + gz, mhd), (t0, t1, t2), (s0, s1, s2)

    n = int(round(t_final / dt))
    X = np.zeros((n + 1, 7))
    TAU = np.zeros((n + 1, 3))
    S = np.zeros((n + 1, 3))
    x = (*map(float, q0), *map(float, v0), float(m_hat))
    h2, h6 = dt / 2, dt / 6
    start = time.perf_counter()
    for i in range(n + 1):
        t = i * dt
        k1, tau, s = rhs(t, x)
        X[i], TAU[i], S[i] = x, tau, s
        if i == n:
            break
        k2 = rhs(t + h2, tuple(a + h2 * d for a, d in zip(x, k1)))[0]
        k3 = rhs(t + h2, tuple(a + h2 * d for a, d in zip(x, k2)))[0]
        k4 = rhs(t + dt, tuple(a + dt * d for a, d in zip(x, k3)))[0]
        x = tuple(a + h6 * (p + 2 * q + 2 * r + w) for a, p, q, r, w in zip(x, k1, k2, k3, k4))
    if not np.all(np.isfinite(X)):
        raise SimulationError("non-finite state in point-mass run")
    theta = np.zeros((n + 1, 10))
    theta[:] = model.theta()
    theta[:, 0] = X[:, 6]
    meta = {
        "model": model.name, "dt": dt, "t_final": t_final, "per_stage": True,
        "factorization": "star" if not b else f"beta={b}", "K_D": kd, "Lambda": lam, "adapt": adapt,
        "wall_time": time.perf_counter() - start, "closed_form": True,
    }
    return SimLog(np.arange(n + 1) * dt, X[:, :3].copy(), X[:, 3:6].copy(), TAU, S, theta, meta)


def point_mass_lyapunov(log, model):
    """Vectorized Lyapunov series for :func:`simulate_point_mass` logs."""
    m = model.bodies[0].inertia.mass
    err = log.theta_hat - model.theta()
    return 0.5 * m * np.einsum("ni,ni->n", log.s, log.s) + 0.5 * np.einsum("ni,ni->n", err, err)


@dataclass
class PointMassResult:
    logs: dict
    lyapunov: dict
    spectral: dict
    rms_error: dict
    final_error: dict
    v_gap: float
    wall_time: float


def point_mass_experiment(model, t_final=20.0, dt=1e-3, m_hat=0.9, beta=-5.0, K_D=1.0, Lambda=1.0, v0=(0.0, 1.0, 0.0), adapt=False):
    """Track ``[t + sin t, 0, 0]`` with the zero (torsion-free) and ``beta (v x)`` factorizations.

    ``v_gap`` is the largest difference between the two Lyapunov curves
    relative to the peak of the torsion-free one.
    """
    start = time.perf_counter()
    ref = point_mass_reference(Lambda)
    logs, lyap, desc, rms, fin = {}, {}, {}, {}, {}
    for tag, b in (("star", 0.0), ("torsion", beta)):
        log = simulate_point_mass(model, m_hat, t_final, dt, np.zeros(3), v0, K_D, Lambda, b, adapt)
        qd = np.stack([ref.q_d(t) for t in log.t])
        e = log.q - qd
        logs[tag] = log
        lyap[tag] = point_mass_lyapunov(log, model)
        desc[tag] = high_frequency_fraction(log.v, dt)
        rms[tag] = float(np.sqrt(np.mean(np.sum(e**2, axis=1))))
        fin[tag] = float(np.linalg.norm(e[-1]))
    gap = float(np.abs(lyap["star"] - lyap["torsion"]).max() / np.abs(lyap["star"]).max())
    return PointMassResult(logs, lyap, desc, rms, fin, gap, time.perf_counter() - start)
