"""Joint models.

Every joint owns ``nb`` bodies (one for ordinary joints, several for a cluster
joint), ``nq`` configuration entries and ``nv`` generalized speeds.  For a
configuration ``q`` it returns one transform per body, mapping the frame of the
body's anchor in the parent cluster into the body frame, and the stacked mode
matrix ``Phi`` (``6 nb x nv``) relating speeds to relative body twists.
"""

from __future__ import annotations

import numpy as np

from .spatial import SpatialTransform, cross_motion, skew


class JointError(ValueError):
    pass


def quat_to_rot(quat):
    w, x, y, z = quat
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_mul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_exp(phi):
    """Unit quaternion for the rotation vector ``phi``."""
    angle = np.linalg.norm(phi)
    if angle < 1e-12:
        q = np.array([1.0, *(0.5 * np.asarray(phi))])
        return q / np.linalg.norm(q)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * np.asarray(phi) / angle])


def so3_left_jacobian(phi):
    """``V`` in ``exp([phi, rho]^) = [[R, V rho], [0, 1]]``."""
    angle = np.linalg.norm(phi)
    K = skew(phi)
    if angle < 1e-8:
        return np.eye(3) + 0.5 * K + K @ K / 6.0
    return (
        np.eye(3)
        + (1 - np.cos(angle)) / angle**2 * K
        + (angle - np.sin(angle)) / angle**3 * (K @ K)
    )


def _random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


class Joint:
    """Base class; subclasses fill in the kinematic maps."""

    kind = "abstract"
    nb = 1
    nq = 0
    nv = 0
    # True when the generalized speeds are coordinate rates (v == dq/dt).
    coordinate = True

    def transforms(self, q):
        raise NotImplementedError

    def transform_matrices(self, q):
        """Plucker matrices of :meth:`transforms`."""
        return [t.matrix() for t in self.transforms(q)]

    def motion_subspace(self, q):
        raise NotImplementedError

    def ring(self, q, v):
        """Local-coordinate rate of ``Phi`` along speeds ``v`` (zero unless overridden)."""
        return np.zeros((6 * self.nb, self.nv))

    def ring_derivative(self, q):
        """``D = (d ring / d v)^{T23}``: entry ``[r, l, c]`` is ``d ring[r, c] / d v_l``.

        ``ring`` is linear in ``v`` for every joint here, so unit probes are exact.
        """
        pages = [self.ring(q, e) for e in np.eye(self.nv)]
        return np.stack(pages, axis=1)

    def neutral(self):
        return np.zeros(self.nq)

    def random_config(self, rng):
        return rng.uniform(-np.pi, np.pi, self.nq)

    def qdot(self, q, v):
        """Configuration rate for speeds ``v``."""
        return np.asarray(v, dtype=float).copy()

    def integrate(self, q, v, dt):
        """Configuration reached by holding speeds ``v`` for ``dt`` (exponential map)."""
        return np.asarray(q, dtype=float) + dt * np.asarray(v, dtype=float)

    def normalize(self, q):
        return q

    def check_config(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.nq,):
            raise JointError(f"{self.kind} joint expects {self.nq} configuration entries, got {q.shape}")
        return q

    def to_dict(self):
        raise NotImplementedError


def _offset_dict(offset):
    return {"rotation": offset.E.T.tolist(), "translation": offset.r.tolist()}


class ScrewJoint(Joint):
    """Revolute, prismatic or helical joint with a fixed axis in the joint frame."""

    nq = 1
    nv = 1

    def __init__(self, kind, axis, pitch=0.0, offset=None):
        if kind not in ("revolute", "prismatic", "helical"):
            raise JointError(f"unknown screw joint kind {kind!r}")
        a = np.asarray(axis, dtype=float)
        if a.shape != (3,) or np.linalg.norm(a) == 0:
            raise JointError(f"joint axis must be a nonzero 3-vector, got {axis!r}")
        self.kind = kind
        self.axis = a / np.linalg.norm(a)
        self.pitch = float(pitch) if kind == "helical" else 0.0
        self.offset = offset if offset is not None else SpatialTransform.identity()
        if kind == "revolute":
            s = np.concatenate([self.axis, np.zeros(3)])
        elif kind == "prismatic":
            s = np.concatenate([np.zeros(3), self.axis])
        else:
            s = np.concatenate([self.axis, self.pitch * self.axis])
        self.S = s
        self._phi = s.reshape(6, 1)
        self._offset_m = self.offset.matrix()
        K = skew(self.axis)
        self._K, self._KK = K, K @ K

    def _rotation(self, y):
        if self.kind == "prismatic":
            return np.eye(3)
        return np.eye(3) + np.sin(y) * self._K + (1.0 - np.cos(y)) * self._KK

    def joint_transform(self, y):
        y = float(np.asarray(y).reshape(-1)[0])
        shift = y * self.axis if self.kind == "prismatic" else self.pitch * y * self.axis
        return SpatialTransform.from_pose(self._rotation(y), shift)

    def relative_matrix(self, y):
        """6x6 motion transform across the joint and its fixed offset."""
        return self.joint_transform(y).matrix() @ self._offset_m

    def transforms(self, q):
        return [self.joint_transform(q) @ self.offset]

    def transform_matrices(self, q):
        return [self.relative_matrix(q)]

    def motion_subspace(self, q):
        return self._phi

    def to_dict(self):
        d = {"kind": self.kind, "axis": self.axis.tolist(), "offset": _offset_dict(self.offset)}
        if self.kind == "helical":
            d["pitch"] = self.pitch
        return d


class TranslationJoint(Joint):
    """Three-axis Cartesian joint: ``q`` is the child origin in the joint frame."""

    kind = "translation"
    nq = 3
    nv = 3

    def __init__(self, offset=None):
        self.offset = offset if offset is not None else SpatialTransform.identity()
        self._phi = np.vstack([np.zeros((3, 3)), np.eye(3)])

    def transforms(self, q):
        return [SpatialTransform.translation(q) @ self.offset]

    def motion_subspace(self, q):
        return self._phi

    def random_config(self, rng):
        return rng.uniform(-1.0, 1.0, 3)

    def to_dict(self):
        return {"kind": self.kind, "offset": _offset_dict(self.offset)}


class SphericalJoint(Joint):
    """Ball joint; ``q`` is a unit quaternion ``(w, x, y, z)``, speeds are body angular velocity."""

    kind = "spherical"
    nq = 4
    nv = 3
    coordinate = False

    def __init__(self, offset=None):
        self.offset = offset if offset is not None else SpatialTransform.identity()
        self._phi = np.vstack([np.eye(3), np.zeros((3, 3))])

    def transforms(self, q):
        return [SpatialTransform.rotation(quat_to_rot(q).T) @ self.offset]

    def motion_subspace(self, q):
        return self._phi

    def neutral(self):
        return np.array([1.0, 0.0, 0.0, 0.0])

    def random_config(self, rng):
        return _random_quat(rng)

    def qdot(self, q, v):
        return 0.5 * quat_mul(q, np.concatenate([[0.0], v]))

    def integrate(self, q, v, dt):
        return self.normalize(quat_mul(q, quat_exp(dt * np.asarray(v, dtype=float))))

    def normalize(self, q):
        return q / np.linalg.norm(q)

    def to_dict(self):
        return {"kind": self.kind, "offset": _offset_dict(self.offset)}


class FreeJoint(Joint):
    """Floating joint; ``q = [quat(4), position(3)]``, speeds are the body twist ``[omega; v]``."""

    kind = "free"
    nq = 7
    nv = 6
    coordinate = False

    def __init__(self, offset=None):
        self.offset = offset if offset is not None else SpatialTransform.identity()
        self._phi = np.eye(6)

    def transforms(self, q):
        return [SpatialTransform.from_pose(quat_to_rot(q[:4]), q[4:]) @ self.offset]

    def motion_subspace(self, q):
        return self._phi

    def neutral(self):
        return np.array([1.0, 0, 0, 0, 0, 0, 0])

    def random_config(self, rng):
        return np.concatenate([_random_quat(rng), rng.uniform(-1.0, 1.0, 3)])

    def qdot(self, q, v):
        R = quat_to_rot(q[:4])
        return np.concatenate([0.5 * quat_mul(q[:4], np.concatenate([[0.0], v[:3]])), R @ v[3:]])

    def integrate(self, q, v, dt):
        # exact SE(3) exponential of the body twist
        phi = dt * np.asarray(v[:3], dtype=float)
        rho = dt * np.asarray(v[3:], dtype=float)
        R = quat_to_rot(q[:4])
        quat = self.normalize(quat_mul(q[:4], quat_exp(phi)))
        return np.concatenate([quat, q[4:] + R @ so3_left_jacobian(phi) @ rho])

    def normalize(self, q):
        return np.concatenate([q[:4] / np.linalg.norm(q[:4]), q[4:]])

    def to_dict(self):
        return {"kind": self.kind, "offset": _offset_dict(self.offset)}


class LinearClusterJoint(Joint):
    """Cluster of 1-DoF screw joints whose coordinates are a fixed linear map of minimal ones.

    ``joints[r]`` connects body ``r`` of the cluster to ``local_parent[r]`` (an
    earlier body of the cluster, or ``-1`` for the cluster's external anchor).
    Joint coordinates are ``y = G q``.  Models geared transmissions and
    parallel-belt (four-bar parallelogram) drives.
    """

    coordinate = True

    def __init__(self, kind, joints, local_parent, G, params=None):
        self.kind = kind
        self.joints = list(joints)
        self.local_parent = [int(p) for p in local_parent]
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.params = dict(params or {})
        self.nb = len(self.joints)
        self.nq = self.nv = self.G.shape[1]
        if self.G.shape[0] != self.nb:
            raise JointError(f"cluster map has {self.G.shape[0]} rows for {self.nb} bodies")
        for r, p in enumerate(self.local_parent):
            if not -1 <= p < r:
                raise JointError(f"cluster body {r} has invalid local parent {p}")
        for j in self.joints:
            if not isinstance(j, ScrewJoint):
                raise JointError("cluster members must be revolute, prismatic or helical joints")

    def _relative(self, q):
        y = self.G @ np.asarray(q, dtype=float)
        return y, [j.joint_transform(y[r]) @ j.offset for r, j in enumerate(self.joints)]

    def _relative_matrices(self, q):
        y = self.G @ np.asarray(q, dtype=float)
        return [j.relative_matrix(y[r]) for r, j in enumerate(self.joints)]

    def transforms(self, q):
        _, rel = self._relative(q)
        out = []
        for r, p in enumerate(self.local_parent):
            out.append(rel[r] if p < 0 else rel[r] @ out[p])
        return out

    def transform_matrices(self, q):
        rel = self._relative_matrices(q)
        out = []
        for r, p in enumerate(self.local_parent):
            out.append(rel[r] if p < 0 else rel[r] @ out[p])
        return out

    def _subspace(self, rel):
        Phi = np.zeros((6 * self.nb, self.nv))
        for r, p in enumerate(self.local_parent):
            blk = np.outer(self.joints[r].S, self.G[r])
            if p >= 0:
                blk = blk + rel[r] @ Phi[6 * p : 6 * p + 6]
            Phi[6 * r : 6 * r + 6] = blk
        return Phi

    def motion_subspace(self, q):
        return self._subspace(self._relative_matrices(q))

    def ring(self, q, v):
        rel = self._relative_matrices(q)
        ydot = self.G @ np.asarray(v, dtype=float)
        Phi = self._subspace(rel)
        out = np.zeros((6 * self.nb, self.nv))
        for r, p in enumerate(self.local_parent):
            if p < 0:
                continue
            Xm = rel[r]
            # d/dt X_rel = -((S ydot) x) X_rel for a screw joint
            out[6 * r : 6 * r + 6] = (
                -cross_motion(self.joints[r].S * ydot[r]) @ Xm @ Phi[6 * p : 6 * p + 6]
                + Xm @ out[6 * p : 6 * p + 6]
            )
        return out

    def spanning_map(self):
        return self.G.copy()

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "linear":
            d["map"] = self.G.tolist()
        d.update(self.params)
        return d


def make_cluster(kind, joints, local_parent, desc):
    """Construct a cluster joint from its JSON description."""
    nb = len(joints)
    if kind == "geared_pair":
        if nb != 2:
            raise JointError("geared_pair cluster needs exactly two bodies")
        ratio = float(desc.get("ratio", 2.0))
        return LinearClusterJoint(kind, joints, local_parent, [[1.0], [ratio]], {"ratio": ratio})
    if kind == "belt_pair":
        if nb != 2 or local_parent[1] != 0:
            raise JointError("belt_pair cluster needs two bodies, the second carried by the first")
        # second joint angle is relative; the belt holds the second link's absolute angle
        return LinearClusterJoint(kind, joints, local_parent, [[1.0, 0.0], [-1.0, 1.0]])
    if kind == "linear":
        return LinearClusterJoint(kind, joints, local_parent, desc["map"])
    raise JointError(f"unknown cluster kind {kind!r}")


def make_joint(desc):
    kind = desc.get("kind")
    offset = parse_offset(desc.get("offset"))
    if kind in ("revolute", "prismatic", "helical"):
        if "axis" not in desc:
            raise JointError(f"{kind} joint requires an axis")
        return ScrewJoint(kind, desc["axis"], desc.get("pitch", 0.0), offset)
    if kind == "spherical":
        return SphericalJoint(offset)
    if kind == "free":
        return FreeJoint(offset)
    if kind == "translation":
        return TranslationJoint(offset)
    raise JointError(f"unknown joint kind {kind!r}")


def parse_offset(desc):
    if desc is None:
        return SpatialTransform.identity()
    R = np.asarray(desc.get("rotation", np.eye(3)), dtype=float)
    if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-12) or np.linalg.det(R) < 0:
        raise JointError("joint offset rotation must be a proper rotation matrix")
    return SpatialTransform.from_pose(R, desc.get("translation", [0.0, 0.0, 0.0]))
