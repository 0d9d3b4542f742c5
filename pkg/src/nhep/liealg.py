"""Fixed-size Lie-algebra primitives for so(3) and se(3).

Elements of se(3) are stored as length-6 arrays ``(omega, vel)`` and dual
elements as ``(pi, p)``; both halves are 3-vectors in body coordinates.
"""

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def cross(a, b):
    """Cross product of two 3-vectors (faster than ``np.cross`` for single vectors)."""
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def hat(v):
    """Return the skew matrix with ``hat(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(mat):
    """Inverse of :func:`hat` (the skew part is assumed)."""
    return np.array([mat[2, 1], mat[0, 2], mat[1, 0]])


def se3(omega, vel):
    return np.concatenate([np.asarray(omega, dtype=float), np.asarray(vel, dtype=float)])


def split(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[:3], xi[3:]


def so3_bracket(a, b):
    return cross(a, b)


def se3_bracket(a, b):
    """Commutator ``[(W1, Y1), (W2, Y2)] = (W1 x W2, W1 x Y2 - W2 x Y1)``."""
    w1, y1 = split(a)
    w2, y2 = split(b)
    return se3(cross(w1, w2), cross(w1, y2) - cross(w2, y1))


def so3_coad(omega, pi):
    return cross(pi, omega)


def se3_coad(xi, mu):
    """Coadjoint action ``ad*_xi mu = (Pi x W + P x Y, P x W)``.

    Satisfies ``<ad*_xi mu, eta> = <mu, [xi, eta]>``.
    """
    w, y = split(xi)
    pi, p = split(mu)
    return se3(cross(pi, w) + cross(p, y), cross(p, w))


def momentum_K(y, gamma):
    """Momentum map for the rotation action on R^3: ``K(y, G) = (y x G, 0)``."""
    return se3(cross(y, gamma), np.zeros(3))


def so3_momentum_K(y, gamma):
    return cross(y, gamma)


def advect_action(xi, gamma):
    """Infinitesimal action on the advected vector, ``xi G = W x G``.

    The advected parameter then evolves as ``dG/dt = -xi G = G x W``.
    Accepts either an se(3) 6-vector or an so(3) 3-vector.
    """
    xi = np.asarray(xi, dtype=float)
    return cross(xi[:3], gamma)


def pairing(mu, xi):
    return float(np.dot(mu, xi))
