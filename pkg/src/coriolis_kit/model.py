"""Mechanism description: bodies, cluster tree, configuration state and JSON I/O.

Bodies are numbered from 1 in model files (parent 0 is the world) and from 0
in memory (parent -1 is the world).  Bodies listed in a cluster are grouped
into one tree node; every other body is a node of its own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .joints import Joint, JointError, LinearClusterJoint, make_cluster, make_joint
from .spatial import SpatialInertia

DEFAULT_GRAVITY = (0.0, 0.0, 0.0, 0.0, 0.0, -9.81)


class ModelError(ValueError):
    """Raised for malformed or inconsistent mechanism descriptions."""


@dataclass(frozen=True, eq=False)
class Body:
    name: str
    parent: int
    joint: Joint
    inertia: SpatialInertia


@dataclass(frozen=True, eq=False)
class Node:
    """One node of the cluster tree."""

    joint: Joint
    bodies: tuple
    parent: int
    anchors: tuple  # slot of each body's anchor within the parent node (0 for the world)
    qs: slice
    vs: slice

    @property
    def nb(self):
        return len(self.bodies)


@dataclass(frozen=True, eq=False)
class MechanismModel:
    name: str
    bodies: tuple
    nodes: tuple
    gravity: np.ndarray
    clusters: tuple = ()  # raw cluster descriptions, kept for save_model

    nq: int = field(init=False)
    nv: int = field(init=False)
    node_inertias: tuple = field(init=False, repr=False)  # stacked 6nb x 6nb inertia per node

    def __post_init__(self):
        object.__setattr__(self, "gravity", np.array(self.gravity, dtype=float).reshape(6))
        object.__setattr__(self, "nq", sum(n.joint.nq for n in self.nodes))
        object.__setattr__(self, "nv", sum(n.joint.nv for n in self.nodes))
        stacks = []
        for n in self.nodes:
            I = np.zeros((6 * n.nb, 6 * n.nb))
            for r, b in enumerate(n.bodies):
                I[6 * r : 6 * r + 6, 6 * r : 6 * r + 6] = self.bodies[b].inertia.matrix()
            stacks.append(I)
        object.__setattr__(self, "node_inertias", tuple(stacks))

    @property
    def n_bodies(self):
        return len(self.bodies)

    @property
    def n_maximal(self):
        return 6 * len(self.bodies)

    @property
    def node_parents(self):
        return [n.parent for n in self.nodes]

    def predecessors(self):
        """Body parent array in 1-based numbering (0 is the world)."""
        return [b.parent + 1 for b in self.bodies]

    def theta(self):
        return np.concatenate([b.inertia.params() for b in self.bodies])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(len(self.bodies), 10)
        bodies = tuple(
            Body(b.name, b.parent, b.joint, SpatialInertia.from_params(t)) for b, t in zip(self.bodies, theta)
        )
        return MechanismModel(self.name, bodies, self.nodes, self.gravity, self.clusters)

    def with_gravity(self, gravity):
        return MechanismModel(self.name, self.bodies, self.nodes, gravity, self.clusters)

    def param_slice(self, k):
        """Columns of the stacked parameter vector owned by node ``k``."""
        b = self.nodes[k].bodies
        return slice(10 * b[0], 10 * (b[-1] + 1))

    def ancestors(self, k):
        """Node ``k`` followed by its ancestors toward the root."""
        out = []
        while k >= 0:
            out.append(k)
            k = self.nodes[k].parent
        return out

    def is_coordinate(self):
        return all(n.joint.coordinate for n in self.nodes)

    def neutral_config(self):
        return np.concatenate([n.joint.neutral() for n in self.nodes]) if self.nodes else np.zeros(0)

    def random_config(self, rng):
        return np.concatenate([n.joint.random_config(rng) for n in self.nodes])

    def has_ring(self):
        return any(n.joint.nb > 1 for n in self.nodes)

    def spanning_tree(self):
        """Model with every cluster opened into its member joints, plus the speed map.

        Returns ``(tree_model, G)`` with ``v_tree = G v``; ``G`` is constant for the
        linear clusters used here, so its rate vanishes.  Use
        :meth:`spanning_config` for the matching configuration.
        """
        cols = []
        for node in self.nodes:
            joint = node.joint
            if isinstance(joint, LinearClusterJoint):
                for r in range(node.nb):
                    cols.append((node, joint.G[r]))
            elif joint.nb > 1:
                raise ModelError(f"cannot open cluster of kind {joint.kind}")
            else:
                cols.append((node, None))
        G = np.zeros((len(cols) + sum(n.joint.nv - 1 for n in self.nodes if n.joint.nb == 1), self.nv))
        row = 0
        for node, g in cols:
            if g is None:
                nv = node.joint.nv
                G[row : row + nv, node.vs] = np.eye(nv)
                row += nv
            else:
                G[row, node.vs] = g
                row += 1
        desc = self.to_dict()
        desc["clusters"] = []
        desc["name"] = self.name + "_spanning"
        tree = model_from_dict(desc)
        return tree, G[:row]

    def spanning_config(self, q):
        """Joint coordinates of the opened tree for cluster coordinates ``q``."""
        q = np.asarray(q, dtype=float)
        parts = []
        for node in self.nodes:
            if isinstance(node.joint, LinearClusterJoint):
                parts.append(node.joint.G @ q[node.qs])
            else:
                parts.append(q[node.qs])
        return np.concatenate(parts)

    def to_dict(self):
        bodies = []
        for b in self.bodies:
            bodies.append(
                {
                    "name": b.name,
                    "parent": b.parent + 1,
                    "joint": b.joint.to_dict(),
                    "inertia": {"theta": b.inertia.params().tolist()},
                }
            )
        clusters = [dict(c) for c in self.clusters]
        return {"name": self.name, "gravity": self.gravity.tolist(), "bodies": bodies, "clusters": clusters}


@dataclass
class ConfigState:
    """Configuration and generalized speeds of a mechanism."""

    q: np.ndarray
    v: np.ndarray

    @classmethod
    def zero(cls, model):
        return cls(model.neutral_config(), np.zeros(model.nv))

    @classmethod
    def random(cls, model, rng):
        return cls(model.random_config(rng), rng.normal(size=model.nv))

    def to_dict(self):
        return {"q": np.asarray(self.q).tolist(), "v": np.asarray(self.v).tolist()}


def integrate_config(model, q, v, dt):
    """Configuration reached from ``q`` by holding speeds ``v`` for ``dt`` (per-joint exponential map)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.empty_like(q)
    for n in model.nodes:
        out[n.qs] = n.joint.integrate(q[n.qs], v[n.vs], dt)
    return out


def config_rate(model, q, v):
    """``dq/dt`` for speeds ``v``."""
    out = np.empty(model.nq)
    for n in model.nodes:
        out[n.qs] = n.joint.qdot(q[n.qs], v[n.vs])
    return out


def normalize_config(model, q):
    out = np.array(q, dtype=float)
    for n in model.nodes:
        out[n.qs] = n.joint.normalize(out[n.qs])
    return out


def check_config(model, q, tol=1e-10):
    q = np.asarray(q, dtype=float)
    if q.shape != (model.nq,):
        raise ModelError(f"configuration must have {model.nq} entries, got {q.shape}")
    for n in model.nodes:
        if n.joint.kind in ("spherical", "free"):
            if abs(np.linalg.norm(q[n.qs][:4]) - 1.0) > tol:
                raise ModelError(f"quaternion of body {n.bodies[0] + 1} is not unit norm")
    return q


# -- construction --------------------------------------------------------------


def model_from_dict(desc, validate=True):
    try:
        return _build(desc, validate)
    except JointError as exc:
        raise ModelError(str(exc)) from exc
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model description: {exc!r}") from exc


def _build(desc, validate):
    raw = desc.get("bodies")
    if not raw:
        raise ModelError("model has no bodies")
    gravity = desc.get("gravity", DEFAULT_GRAVITY)
    if len(gravity) != 6:
        raise ModelError("gravity must be a spatial 6-vector")
    bodies = []
    for i, b in enumerate(raw):
        parent = int(b["parent"]) - 1
        if not -1 <= parent < i:
            raise ModelError(f"body {i + 1} has parent {parent + 1}; parents must precede children")
        theta = np.asarray(b["inertia"]["theta"], dtype=float)
        if theta.shape != (10,):
            raise ModelError(f"body {i + 1}: inertia.theta must have 10 entries")
        bodies.append(Body(b.get("name", f"body{i + 1}"), parent, make_joint(b["joint"]), SpatialInertia.from_params(theta)))

    owner = {}
    clusters = list(desc.get("clusters", []))
    for c, cl in enumerate(clusters):
        members = [int(x) - 1 for x in cl["bodies"]]
        if members != list(range(members[0], members[0] + len(members))):
            raise ModelError(f"cluster {c + 1}: bodies must be consecutive and increasing")
        for b in members:
            if not 0 <= b < len(bodies) or b in owner:
                raise ModelError(f"cluster {c + 1}: body {b + 1} missing or already clustered")
            owner[b] = c

    nodes = []
    body_node = {}
    body_slot = {}
    i = 0
    qi = vi = 0
    while i < len(bodies):
        if i in owner:
            cl = clusters[owner[i]]
            members = [int(x) - 1 for x in cl["bodies"]]
            local_parent, external = [], set()
            for b in members:
                p = bodies[b].parent
                if p in members:
                    local_parent.append(members.index(p))
                else:
                    local_parent.append(-1)
                    external.add(p)
            ext_nodes = {body_node.get(p, -1) for p in external}
            if len(ext_nodes) != 1:
                raise ModelError(f"cluster {owner[i] + 1}: members attach to more than one parent cluster")
            joint = make_cluster(cl["kind"], [bodies[b].joint for b in members], local_parent, cl)
            anchors = []
            for r, b in enumerate(members):
                lp = local_parent[r]
                anchors.append(anchors[lp] if lp >= 0 else body_slot.get(bodies[b].parent, 0))
            parent_node = ext_nodes.pop()
        else:
            members = [i]
            joint = bodies[i].joint
            p = bodies[i].parent
            parent_node = body_node.get(p, -1)
            anchors = [body_slot.get(p, 0)]
        k = len(nodes)
        nodes.append(Node(joint, tuple(members), parent_node, tuple(anchors), slice(qi, qi + joint.nq), slice(vi, vi + joint.nv)))
        for r, b in enumerate(members):
            body_node[b] = k
            body_slot[b] = r
        qi += joint.nq
        vi += joint.nv
        i += len(members)

    model = MechanismModel(desc.get("name", "model"), tuple(bodies), tuple(nodes), gravity, tuple(clusters))
    if validate:
        validate_model(model)
    return model


def validate_model(model, samples=3, seed=0):
    """Check tree order, inertia sanity and full column rank of every mode matrix."""
    for k, n in enumerate(model.nodes):
        if n.parent >= k:
            raise ModelError(f"node {k + 1} has parent {n.parent + 1}; tree order violated")
    for b in model.bodies:
        M = b.inertia.matrix()
        if not np.allclose(M, M.T) or b.inertia.mass < 0:
            raise ModelError(f"body {b.name}: invalid spatial inertia")
    rng = np.random.default_rng(seed)
    for n in model.nodes:
        configs = [n.joint.neutral()] + [n.joint.random_config(rng) for _ in range(samples)]
        for q in configs:
            Phi = n.joint.motion_subspace(q)
            if Phi.shape != (6 * n.nb, n.joint.nv) or np.linalg.matrix_rank(Phi) < n.joint.nv:
                raise ModelError(f"node with bodies {[b + 1 for b in n.bodies]}: mode matrix is rank deficient")
    return model


def load_model(path):
    """Load a model file; bare names fall back to the bundled models."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.suffix else p.name + ".json"
        bundled = resources.files("coriolis_kit") / "data" / name
        if not bundled.is_file():
            raise FileNotFoundError(f"no model file {path!s} and no bundled model {name}")
        text = bundled.read_text()
    else:
        text = p.read_text()
    try:
        desc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(desc)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def bundled_models():
    return sorted(p.name[:-5] for p in (resources.files("coriolis_kit") / "data").iterdir() if p.name.endswith(".json"))
