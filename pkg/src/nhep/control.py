"""Controlled-Lagrangian stabilization of the skate by an internal rotor.

The rotor spins about ``E1`` with rate ``theta_dot``.  Under the matching
conditions the closed loop driven by the feedback ``u`` coincides with the
free motion of a skate whose inertia is reshaped to ``tilde_inertia``.
The closed-loop state is ``(v1, v2, v3, G2, G3, theta_dot)``.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import models
from .hamel import checked_basis, curvature_F, action_coefficients, reduced_rhs, mass_matrix_rate


@dataclass(frozen=True)
class MatchingData:
    """Matching gains for ``s`` rotors in an ``n``-dimensional algebra.

    ``tau`` is ``s x n``; ``sigma`` and ``rho`` are ``s x s`` symmetric.
    ``T(G) = tau @ E(G)`` expresses ``tau`` in the moving frame.
    """

    tau: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    T: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RotorState:
    zeta: np.ndarray
    theta_dot: float

    def as_array(self):
        return np.append(np.asarray(self.zeta, dtype=float), self.theta_dot)

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(zeta=x[:5].copy(), theta_dot=float(x[5]))


def matching_from_gains(G_ia, G_ab, sigma, frame, rho=None):
    """Build :class:`MatchingData` from the rotor coupling blocks.

    ``G_ia`` is ``s x n`` (or an ``n``-vector for ``s = 1``).  ``rho`` is
    derived from the matching conditions unless given explicitly, which is
    only useful for checking that a wrong pair is detected.
    """
    G_ia = np.atleast_2d(np.asarray(G_ia, dtype=float))
    G_ab = np.atleast_2d(np.asarray(G_ab, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    sigma_inv = np.linalg.inv(sigma)
    tau = -sigma_inv @ G_ia
    if rho is None:
        rho_inv = np.linalg.inv(G_ab) - sigma_inv
        if np.linalg.cond(rho_inv) > 1e14:
            raise ZeroDivisionError("rho is unbounded: sigma equals the rotor inertia block")
        rho = np.linalg.inv(rho_inv)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    return MatchingData(tau=tau, sigma=sigma, rho=rho, T=lambda gamma: tau @ checked_basis(frame, gamma))


def matching_from_sigma(rotor, rho=None):
    """Matching data for the single skate rotor: ``tau = -(J1/sigma) e1``."""
    if rotor.require_sigma() == rotor.J1:
        raise ZeroDivisionError("sigma == J1 makes rho unbounded")
    _, G_ia, G_ab = models.rotor_mass_matrix(rotor)
    return matching_from_gains(G_ia, G_ab, rotor.sigma, models.skate_frame(), rho=rho)


def rho_scalar(rotor):
    return rotor.J1 / (1.0 - rotor.J1 / rotor.require_sigma())


def matching_residuals(matching, G_ia, G_ab):
    """Residuals of ``tau = -sigma^-1 G_ai`` and ``sigma^-1 + rho^-1 = G_ab^-1``."""
    G_ia = np.atleast_2d(np.asarray(G_ia, dtype=float))
    G_ab = np.atleast_2d(np.asarray(G_ab, dtype=float))
    sigma_inv = np.linalg.inv(matching.sigma)
    r_tau = np.max(np.abs(matching.tau + sigma_inv @ G_ia))
    r_inv = np.max(np.abs(sigma_inv + np.linalg.inv(matching.rho) - np.linalg.inv(G_ab)))
    return float(r_tau), float(r_inv)


def control_law_generic(system, matching, G_ab, v, gamma, vdot):
    """``u_a = G_ab (T^b_i F^i_{ab} v^a v^b - T^b_a vdot^a)``."""
    v = np.asarray(v, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    k = system.frame.n_free
    F = curvature_F(system.frame, gamma, action_coefficients(system, gamma))
    T = matching.T(gamma)
    shaped = np.einsum("bi,iac,a,c->b", T, F, v, v) - T[:, :k] @ np.asarray(vdot, dtype=float)
    return np.atleast_2d(G_ab) @ shaped


def tilde_inertia(rotor):
    """Shaped inertia ``diag(I1 + J1^2/sigma, I2 + J2, I3 + J3)``."""
    b = rotor.base
    return np.diag([b.I1 + rotor.J1**2 / rotor.require_sigma(), b.I2 + rotor.J2, b.I3 + rotor.J3])


def tilde_params(rotor):
    """The matched skate as :class:`~nhep.models.SkateParams` (``I1`` may be negative)."""
    b = rotor.base
    I1, I2, I3 = np.diag(tilde_inertia(rotor))
    return models.SkateParams(b.m, b.l, b.g, float(I1), float(I2), float(I3), shaped=True)


def tilde_vector_field(rotor, zeta):
    return models.skate_vector_field(tilde_params(rotor), zeta)


def control_law_skate(rotor, zeta):
    """Feedback ``u = (J1^2/sigma) dv1/dt`` with ``dv1/dt`` of the matched flow."""
    tp = tilde_params(rotor)
    v1, v2, v3, G2, G3 = zeta.tolist() if isinstance(zeta, np.ndarray) else zeta
    ml = tp.m * tp.l
    num = ((tp.Ibar2 - tp.I3) * G3 * v2 * v2 + tp.mgl) * G2 + ml * G3 * v2 * v3
    return rotor.J1**2 / rotor.sigma * num / tp.Ibar1


def uncontrolled_params(rotor):
    """Skate whose flow matches the rotor-carrying skate with zero torque.

    With ``u = 0`` the rotor momentum ``J1 (v1 + theta_dot)`` is conserved and
    the body sees inertias ``(I1, I2 + J2, I3 + J3)``.
    """
    b = rotor.base
    return models.SkateParams(b.m, b.l, b.g, b.I1, b.I2 + rotor.J2, b.I3 + rotor.J3)


def pi_tilde(rotor, v1, theta_dot, rho=None):
    """Conserved rotor momentum of the shaped system: ``J1 v1 + rho theta_dot``."""
    if rho is None:
        rho = rho_scalar(rotor)
    return rotor.J1 * v1 + rho * theta_dot


def pi_tilde_generic(matching, G_ia, G_ab, xi, theta_dot):
    """``rho (theta_dot + G_ab^-1 G_ai xi + tau xi)``."""
    G_ia = np.atleast_2d(np.asarray(G_ia, dtype=float))
    G_ab = np.atleast_2d(np.asarray(G_ab, dtype=float))
    inner = np.atleast_1d(theta_dot) + np.linalg.solve(G_ab, G_ia @ xi) + matching.tau @ xi
    return matching.rho @ inner


def theta_dot_for_zero_pi(rotor, v1):
    """Rotor rate making ``pi_tilde`` vanish: ``(J1/sigma - 1) v1``."""
    return (rotor.J1 / rotor.require_sigma() - 1.0) * v1


def closed_loop_rhs(rotor, state, control=True):
    """Time derivative of ``(v1, v2, v3, G2, G3, theta_dot)``.

    Assembles the momentum rates of the rotor-carrying skate, sets the rotor
    torque to :func:`control_law_skate` (or zero with ``control=False``) and
    solves the coupled 4x4 system for ``(dv/dt, theta_ddot)``.
    """
    x = state.as_array() if isinstance(state, RotorState) else np.asarray(state, dtype=float)
    body = rotor.body_with_rotor()
    zeta = x[:5]
    J1 = rotor.J1
    pdot = models.skate_momentum_rates(body, zeta)
    Gd = models.skate_hamel_mass_rate(body, zeta)
    A = np.zeros((4, 4))
    A[:3, :3] = models.skate_hamel_mass(body, zeta)
    # rotor coupling G_aa' = <(J1 e1, 0), E_a> = J1 for a = 1 only (G1 = 0)
    A[0, 3] = A[3, 0] = J1
    A[3, 3] = J1
    u = control_law_skate(rotor, zeta) if control else 0.0
    rhs = np.empty(4)
    rhs[:3] = pdot - Gd @ zeta[:3]
    rhs[3] = u
    acc = np.linalg.solve(A, rhs)
    v1, G2, G3 = zeta[0], zeta[3], zeta[4]
    return np.array([acc[0], acc[1], acc[2], v1 * G3, -v1 * G2, acc[3]])


def closed_loop_rhs_framework(rotor, state, matching=None):
    """Closed loop assembled entirely from the Hamel framework.

    The torque is eliminated from the rotor equation by substituting the
    generic control law, giving a state-only linear system.  Slower than
    :func:`closed_loop_rhs`; used to cross-check it.
    """
    x = state.as_array() if isinstance(state, RotorState) else np.asarray(state, dtype=float)
    if matching is None:
        matching = matching_from_sigma(rotor)
    system = models.rotor_system(rotor)
    G_body, G_ia, G_ab = models.rotor_mass_matrix(rotor)
    v, gamma, theta_dot = x[:3], models.gamma_of(x), x[5]
    k = system.frame.n_free
    E = checked_basis(system.frame, gamma)
    pdot, gamma_dot = reduced_rhs(system, v, gamma, mu_extra=G_ia * theta_dot)
    Gfull = E.T @ G_body @ E
    Gdot = mass_matrix_rate(system, gamma, gamma_dot, E)
    G_fa = E[:, :k].T @ G_ia
    dE = np.tensordot(gamma_dot, system.frame.dbasis(gamma), axes=1)
    Gdot_fa = dE[:, :k].T @ G_ia
    T = matching.T(gamma)
    F = curvature_F(system.frame, gamma, action_coefficients(system, gamma, E))
    TFvv = np.einsum("bi,iac,a,c->b", T, F, v, v)
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = Gfull[:k, :k]
    A[:k, k] = G_fa
    A[k, :k] = G_fa + G_ab * T[0, :k]
    A[k, k] = G_ab
    rhs = np.empty(k + 1)
    rhs[:k] = pdot - Gdot[:k, :k] @ v - Gdot_fa * theta_dot
    rhs[k] = G_ab * TFvv[0] - Gdot_fa @ v
    acc = np.linalg.solve(A, rhs)
    return np.array([acc[0], acc[1], acc[2], gamma_dot[1], gamma_dot[2], acc[3]])


def rotor_total_energy(rotor, state):
    """Kinetic plus potential energy of the body-rotor system."""
    x = np.asarray(state, dtype=float)
    xi = models.zeta_to_full(x[:5])
    G, G_ia, G_ab = models.rotor_mass_matrix(rotor)
    xi6 = np.concatenate([xi.Omega, xi.Y])
    theta_dot = x[5]
    kinetic = 0.5 * xi6 @ G @ xi6 + theta_dot * (G_ia @ xi6) + 0.5 * G_ab * theta_dot**2
    return kinetic + rotor.base.mgl * x[4]
