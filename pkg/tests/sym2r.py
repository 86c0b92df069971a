"""Closed-form planar two-link model derived symbolically, used as an independent oracle.

Links of unit length and mass, centre of mass at mid-link, rotational inertia
1/3 about each joint axis, gravity 9.81 along -y.
"""

import numpy as np
import sympy as sp

q1, q2 = sp.symbols("q1 q2")
_q = (q1, q2)
_c2 = sp.cos(q2)
H_SYM = sp.Matrix([[sp.Rational(5, 3) + _c2, sp.Rational(1, 3) + _c2 / 2], [sp.Rational(1, 3) + _c2 / 2, sp.Rational(1, 3)]])
U_SYM = 9.81 * (sp.sin(q1) / 2 + sp.sin(q1) + sp.sin(q1 + q2) / 2)
GAMMA_SYM = [
    [[sp.Rational(1, 2) * (sp.diff(H_SYM[i, j], _q[k]) + sp.diff(H_SYM[i, k], _q[j]) - sp.diff(H_SYM[j, k], _q[i])) for k in range(2)] for j in range(2)]
    for i in range(2)
]

_H = sp.lambdify(_q, H_SYM, "numpy")
_g = sp.lambdify(_q, [sp.diff(U_SYM, x) for x in _q], "numpy")
_G = sp.lambdify(_q, GAMMA_SYM, "numpy")


def mass_matrix(q):
    return np.array(_H(*q), dtype=float)


def gravity(q):
    return np.array(_g(*q), dtype=float)


def christoffel(q):
    """``G[i, j, k]`` with ``C[i, k] = sum_j G[i, j, k] v[j]``."""
    return np.array(_G(*q), dtype=float)
