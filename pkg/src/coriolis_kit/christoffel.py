"""Generalized Christoffel symbols of the first kind and the rank-3 tensor tools behind them.

A tensor ``T`` has axes (rows, columns, pages).  The symbol array ``G`` is laid
out so that ``G[i, j, k]`` multiplies speed ``j`` in entry ``(i, k)`` of the
Coriolis matrix: ``C[i, k] = sum_j G[i, j, k] v[j]``.
"""

from __future__ import annotations

import numpy as np

from .dynamics import coriolis_star, forward_kinematics
from .spatial import cluster_B, cross_motion_stacked

_AXES = {12: (1, 0, 2), 13: (2, 1, 0), 23: (0, 2, 1)}


def tensor_transpose(T, which):
    """Swap two axes: ``which`` is 12, 13 or 23."""
    try:
        return np.transpose(T, _AXES[int(which)])
    except KeyError:
        raise ValueError(f"transpose must be one of 12, 13, 23, got {which!r}") from None


def mat_tensor(A, T):
    """``(A T)[i, j, k] = sum_l A[i, l] T[l, j, k]``."""
    if A.shape[1] != T.shape[0]:
        raise ValueError(f"shape mismatch {A.shape} x {T.shape}")
    return np.einsum("il,ljk->ijk", A, T)


def tensor_mat(T, B):
    """``(T B)[i, j, k] = sum_l T[i, l, k] B[l, j]``."""
    if T.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch {T.shape} x {B.shape}")
    return np.einsum("ilk,lj->ijk", T, B)


def congruence(X, T):
    """Page-wise ``X^T T X``."""
    return np.einsum("ai,abk,bj->ijk", X, T, X)


def cross_pages(Phi):
    """Stack ``(phi_c x)`` for every column of ``Phi`` along pages."""
    return np.stack([cross_motion_stacked(c) for c in Phi.T], axis=2)


def B_tensor(I, V):
    """Pages ``B(I, V[:, c])`` of the body-level factorization, one per column of ``V``."""
    return np.stack([cluster_B(I, c) for c in np.asarray(V).T], axis=2)


def b_tensor_identities(I, V, W):
    """Residuals of the two exchange identities for ``B`` tensors.

    Returns ``(r1, r2)``, max-abs residuals of
    ``B(I,V)^T12 W = (-B(I,W)^T12 V)^T23`` and
    ``B(I,V) W = (B(I,W) V + I (W x) V)^T23``.
    """
    BV, BW = B_tensor(I, V), B_tensor(I, W)
    lhs1 = tensor_mat(tensor_transpose(BV, 12), W)
    rhs1 = tensor_transpose(-tensor_mat(tensor_transpose(BW, 12), V), 23)
    lhs2 = tensor_mat(BV, W)
    rhs2 = tensor_transpose(tensor_mat(BW, V) + tensor_mat(mat_tensor(I, cross_pages(W)), V), 23)
    return np.abs(lhs1 - rhs1).max(initial=0.0), np.abs(lhs2 - rhs2).max(initial=0.0)


def christoffel_sweep(model, q):
    """Symbols from one Coriolis evaluation per unit speed."""
    m = model.nv
    G = np.zeros((m, m, m))
    for j, e in enumerate(np.eye(m)):
        G[:, j, :] = coriolis_star(model, q, e).C
    return G


def christoffel_fast(model, q):
    """Symbols from a single composite-inertia sweep over ancestor pairs."""
    q = np.asarray(q, dtype=float)
    nodes = model.nodes
    m = model.nv
    cache = forward_kinematics(model, q, np.zeros(m))
    Xup, Phi = cache.Xup, cache.Phi
    Ic = [I.copy() for I in cache.I]
    D = [n.joint.ring_derivative(q[n.qs]) for n in nodes]
    G = np.zeros((m, m, m))
    for k in reversed(range(len(nodes))):
        sk = nodes[k].vs
        Bt = B_tensor(Ic[k], Phi[k])
        F3 = mat_tensor(Ic[k], D[k])
        f4 = Ic[k] @ Phi[k]
        j = k
        while j >= 0:
            sj = nodes[j].vs
            F1 = tensor_mat(Bt, Phi[j])
            F2 = tensor_mat(tensor_transpose(Bt, 12), Phi[j])
            i = j
            while i >= 0:
                si = nodes[i].vs
                A1 = mat_tensor(Phi[i].T, F1)
                A2 = tensor_transpose(mat_tensor(Phi[i].T, F2), 12)
                A3 = -tensor_transpose(A2, 13)
                G[si, sj, sk] = A1
                G[si, sk, sj] = tensor_transpose(A1, 23)
                G[sj, si, sk] = A2
                G[sj, sk, si] = tensor_transpose(A2, 23)
                G[sk, si, sj] = A3
                G[sk, sj, si] = tensor_transpose(A3, 23)
                if i == j:
                    G[sk, si, si] = A3 + mat_tensor(f4.T, D[i])
                if j == k:
                    G[si, sj, sj] = A1 + mat_tensor(Phi[i].T, F3)
                p = nodes[i].parent
                if p >= 0:
                    X = Xup[i]
                    if j == k:
                        F3 = mat_tensor(X.T, F3)
                    F1 = mat_tensor(X.T, F1)
                    F2 = mat_tensor(X.T, F2)
                i = p
            p = nodes[j].parent
            if p >= 0:
                X = Xup[j]
                Bt = congruence(X, Bt)
                f4 = X.T @ f4
            j = p
        p = nodes[k].parent
        if p >= 0:
            Ic[p] += Xup[k].T @ Ic[k] @ Xup[k]
    return G


def contract(G, v):
    """Coriolis matrix ``C[i, k] = G[i, j, k] v[j]``."""
    return np.einsum("ijk,j->ik", G, v)


# -- structure constants ---------------------------------------------------------


def structure_constants(Phi):
    """``s[l, j, k]``: component ``l`` of the bracket ``phi_j x phi_k`` in the basis ``Phi``.

    ``Phi`` must span a subalgebra (e.g. the identity for a free body).
    """
    # brackets[j, k] = phi_j x phi_k
    brackets = np.einsum("jrk->jkr", np.stack([cross_motion_stacked(a) @ Phi for a in Phi.T]))
    coords, *_ = np.linalg.lstsq(Phi, brackets.reshape(-1, Phi.shape[0]).T, rcond=None)
    d = Phi.shape[1]
    return coords.reshape(d, d, d)


def lowered_structure_constants(H, s):
    """``s_{ijk} = H[i, l] s[l, j, k]``."""
    return np.einsum("il,ljk->ijk", H, s)


def free_body_structure_constants():
    """Structure constants of the body-twist basis of SE(3)."""
    return structure_constants(np.eye(6))


def metric_rate(G):
    """``dH[i, j]`` along speed direction ``k``: ``G[i, k, j] + G[j, k, i]``."""
    return np.einsum("ikj->ijk", G) + np.einsum("jki->ijk", G)
