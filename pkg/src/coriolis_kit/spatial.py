"""Six-dimensional spatial vector algebra.

Motion vectors are ordered ``[omega; v]`` and force vectors ``[n; f]``
(angular part first).  Transforms follow the Plucker convention: a
:class:`SpatialTransform` ``X`` from frame A to frame B maps motion vectors
expressed in A to motion vectors expressed in B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Parameter ordering shared by every regressor in the package.
PARAM_NAMES = ("m", "hx", "hy", "hz", "Ixx", "Iyy", "Izz", "Ixy", "Ixz", "Iyz")


def skew(a):
    """3x3 matrix ``(a x)`` with ``skew(a) @ b == cross(a, b)``."""
    x, y, z = np.asarray(a, dtype=float).tolist()
    return np.array(((0.0, -z, y), (z, 0.0, -x), (-y, x, 0.0)))


def unskew(S):
    return np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]]) / 2.0


def cross_motion(v):
    """Spatial cross-product matrix ``(v x)`` for a motion vector."""
    x, y, z, a, b, c = np.asarray(v, dtype=float).tolist()
    return np.array(
        (
            (0.0, -z, y, 0.0, 0.0, 0.0),
            (z, 0.0, -x, 0.0, 0.0, 0.0),
            (-y, x, 0.0, 0.0, 0.0, 0.0),
            (0.0, -c, b, 0.0, -z, y),
            (c, 0.0, -a, z, 0.0, -x),
            (-b, a, 0.0, -y, x, 0.0),
        )
    )


def cross_force(v):
    """Force dual ``(v x#) = -(v x)^T``."""
    return -cross_motion(v).T


# cross_force is linear in its argument, so bar_cross_sharp(f)[:, k] is
# cross_force(e_k) @ f; tabulate cross_force(e_k) once.
_CRF_BASIS = np.stack([cross_force(e) for e in np.eye(6)])


def bar_cross_sharp(f):
    """Matrix ``(f xbar#)`` defined by ``bar_cross_sharp(f) @ w == cross_force(w) @ f``.

    Assembled column by column from the defining relation.
    """
    return np.einsum("kij,j->ik", _CRF_BASIS, np.asarray(f, dtype=float))


def body_coriolis_star(I, v):
    """Christoffel-consistent factorization for one rigid body in body-twist speeds.

    ``I`` is a 6x6 spatial inertia (or a :class:`SpatialInertia`), ``v`` the body twist.
    """
    I = as_matrix(I)
    return 0.5 * (I @ cross_motion(v) + cross_force(v) @ I + bar_cross_sharp(I @ v))


def body_coriolis_B(I, v):
    """Body-level factorization ``B = C - I (v x)``; satisfies ``B^T v == 0``."""
    I = as_matrix(I)
    return 0.5 * (cross_force(v) @ I + bar_cross_sharp(I @ v) - I @ cross_motion(v))


# -- stacked (cluster) versions ------------------------------------------------


def cross_motion_stacked(v):
    """Block-diagonal ``(v x)`` for a stack of 6-vectors."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0] // 6
    if n == 1:
        return cross_motion(v)
    out = np.zeros((6 * n, 6 * n))
    for r in range(n):
        out[6 * r : 6 * r + 6, 6 * r : 6 * r + 6] = cross_motion(v[6 * r : 6 * r + 6])
    return out


def cross_force_stacked(v):
    return -cross_motion_stacked(v).T


def bar_cross_sharp_stacked(f):
    f = np.asarray(f, dtype=float)
    n = f.shape[0] // 6
    out = np.zeros((6 * n, 6 * n))
    for r in range(n):
        out[6 * r : 6 * r + 6, 6 * r : 6 * r + 6] = bar_cross_sharp(f[6 * r : 6 * r + 6])
    return out


def cluster_B(I, v):
    """``B(I, v) = 1/2 [(v x#) I + (I v) xbar# - I (v x)]`` for stacked cluster quantities."""
    if I.shape[0] == 6:
        return body_coriolis_B(I, v)
    return 0.5 * (
        cross_force_stacked(v) @ I + bar_cross_sharp_stacked(I @ v) - I @ cross_motion_stacked(v)
    )


# -- transforms ----------------------------------------------------------------


def rotation_about(axis, angle):
    """Rotation matrix (child axes in parent coordinates) for a rotation about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = skew(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class SpatialTransform:
    """Plucker transform from frame A to frame B.

    ``E`` rotates A coordinates into B coordinates and ``r`` is the origin of B
    expressed in A.
    """

    E: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "E", np.array(self.E, dtype=float).reshape(3, 3))
        object.__setattr__(self, "r", np.array(self.r, dtype=float).reshape(3))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def rotation(cls, E):
        return cls(E, np.zeros(3))

    @classmethod
    def translation(cls, r):
        return cls(np.eye(3), r)

    @classmethod
    def from_pose(cls, R, p):
        """Transform into a child frame whose axes are ``R`` and origin ``p`` in the parent."""
        return cls(np.asarray(R).T, p)

    def matrix(self):
        X = np.zeros((6, 6))
        X[:3, :3] = self.E
        X[3:, 3:] = self.E
        X[3:, :3] = -self.E @ skew(self.r)
        return X

    def force_matrix(self):
        """``X^{-T}``: maps force vectors from A to B."""
        X = np.zeros((6, 6))
        X[:3, :3] = self.E
        X[3:, 3:] = self.E
        X[:3, 3:] = -self.E @ skew(self.r)
        return X

    def __matmul__(self, other):
        """Composition: ``(self @ other)`` maps through ``other`` first."""
        if isinstance(other, SpatialTransform):
            return SpatialTransform(self.E @ other.E, other.r + other.E.T @ self.r)
        return self.apply_motion(other)

    def inverse(self):
        return SpatialTransform(self.E.T, -self.E @ self.r)

    def apply_motion(self, v):
        v = np.asarray(v, dtype=float)
        w = self.E @ v[:3]
        return np.concatenate([w, self.E @ (v[3:] - np.cross(self.r, v[:3]))])

    def apply_force(self, f):
        """Transform a force vector from A to B (``X^{-T} f``)."""
        f = np.asarray(f, dtype=float)
        n = self.E @ (f[:3] - np.cross(self.r, f[3:]))
        return np.concatenate([n, self.E @ f[3:]])

    def transpose_apply(self, f):
        """``X^T f``: carries a force in B back to A."""
        return self.inverse().apply_force(f)

    def __repr__(self):
        return f"SpatialTransform(E={self.E.tolist()}, r={self.r.tolist()})"


def transform_compose(X2, X1):
    return X2 @ X1


def transform_inverse(X):
    return X.inverse()


def transform_motion(X, v):
    return X.apply_motion(v)


def transform_force_dual(X, f):
    """Apply ``X^T`` to a force vector expressed in the destination frame."""
    return X.transpose_apply(f)


# -- inertia -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """Body inertia about the body-frame origin: mass, first moment ``h = m c`` and ``Ibar``."""

    mass: float
    h: np.ndarray
    Ibar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "h", np.array(self.h, dtype=float).reshape(3))
        object.__setattr__(self, "Ibar", np.array(self.Ibar, dtype=float).reshape(3, 3))

    @classmethod
    def from_params(cls, theta):
        t = np.asarray(theta, dtype=float)
        if t.shape != (10,):
            raise ValueError(f"inertial parameter vector must have 10 entries, got {t.shape}")
        Ibar = np.array([[t[4], t[7], t[8]], [t[7], t[5], t[9]], [t[8], t[9], t[6]]])
        return cls(t[0], t[1:4], Ibar)

    @classmethod
    def from_mass_com(cls, mass, com, I_com):
        """Build from mass, centre of mass and rotational inertia about the COM."""
        c = np.asarray(com, dtype=float)
        Ibar = np.asarray(I_com, dtype=float) + mass * (c @ c * np.eye(3) - np.outer(c, c))
        return cls(mass, mass * c, Ibar)

    @classmethod
    def from_matrix(cls, M):
        M = 0.5 * (M + M.T)
        return cls(M[3, 3], unskew(M[:3, 3:]), M[:3, :3])

    def params(self):
        I = self.Ibar
        return np.array(
            [self.mass, *self.h, I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[0, 2], I[1, 2]]
        )

    def matrix(self):
        M = np.zeros((6, 6))
        H = skew(self.h)
        M[:3, :3] = self.Ibar
        M[:3, 3:] = H
        M[3:, :3] = H.T
        M[3:, 3:] = self.mass * np.eye(3)
        return M

    def pseudo_inertia(self):
        """4x4 pseudo-inertia ``[[Sigma, h], [h^T, m]]`` with ``Sigma = tr(Ibar)/2 - Ibar``."""
        J = np.zeros((4, 4))
        J[:3, :3] = 0.5 * np.trace(self.Ibar) * np.eye(3) - self.Ibar
        J[:3, 3] = self.h
        J[3, :3] = self.h
        J[3, 3] = self.mass
        return J

    def is_physical(self, tol=1e-12):
        return self.mass >= 0 and np.linalg.eigvalsh(self.pseudo_inertia()).min() >= -tol

    def transform(self, X):
        """Congruence ``X^T I X``: re-express an inertia given in X's destination frame in its source frame."""
        return inertia_transform(X, self)

    def __add__(self, other):
        return SpatialInertia(self.mass + other.mass, self.h + other.h, self.Ibar + other.Ibar)


def as_matrix(I):
    return I.matrix() if isinstance(I, SpatialInertia) else np.asarray(I, dtype=float)


def inertia_transform(X, I):
    Xm = X.matrix() if isinstance(X, SpatialTransform) else np.asarray(X)
    return SpatialInertia.from_matrix(Xm.T @ as_matrix(I) @ Xm)


def inertia_from_params(theta):
    return SpatialInertia.from_params(theta)


def params_from_inertia(I):
    return I.params()
