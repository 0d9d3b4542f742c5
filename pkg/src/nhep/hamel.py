"""Reduced equations in a Gamma-dependent Hamel basis.

A :class:`HamelFrame` supplies an invertible matrix ``E(G)`` whose columns
are the basis vectors ``E_i(G)`` of the Lie algebra written in a fixed
standard basis.  The first ``n_free`` columns span the constraint
subspace, the rest its complement, so a constrained velocity is
``xi = E[:, :n_free] @ v``.

With ``mu = dl/dxi`` restricted to the constraint and ``p_i = <mu, E_i>``
the reduced equations are::

    dp_a/dt = -B^i_ab p_i v^b + <K(dl/dG, G), E_a>,   B = C + F
    dG/dt   = -(xi G)

where ``C`` are the structure constants in the moving basis and ``F``
collects the contribution of the basis moving with ``G``.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from . import liealg

RCOND_MIN = 1e-10


class SingularFrameError(ValueError):
    """The Hamel basis is not invertible at the requested point."""


class MassMatrixError(ValueError):
    """The constrained mass matrix is not positive definite."""


@dataclass(frozen=True)
class HamelFrame:
    """Gamma-dependent basis.

    ``basis(G)`` returns the ``(n, n)`` matrix with columns ``E_i(G)``.
    ``dbasis(G)`` returns an array of shape ``(dim_X, n, n)`` holding
    ``dE/dG_j`` for each component ``j`` of ``G``.
    """

    basis: Callable[[np.ndarray], np.ndarray]
    dbasis: Callable[[np.ndarray], np.ndarray]
    n_total: int
    n_free: int


@dataclass(frozen=True)
class ReducedSystem:
    """Kinetic-minus-potential system ``l = 1/2 xi.G xi - U(G)``.

    The algebra hooks work in the standard basis: ``bracket(a, b)`` is the
    Lie bracket, ``momentum_K(y, G)`` the momentum map into the dual and
    ``advect_action(xi, G)`` the infinitesimal action ``xi G``.
    """

    frame: HamelFrame
    G_body: np.ndarray
    potential: Callable[[np.ndarray], float]
    dpotential: Callable[[np.ndarray], np.ndarray]
    bracket: Callable[[np.ndarray, np.ndarray], np.ndarray]
    momentum_K: Callable[[np.ndarray, np.ndarray], np.ndarray]
    advect_action: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ReducedTensors:
    """Tensors of the reduced equations at a single ``G``.

    Index order: ``C[k, a, b]`` and ``F[i, a, b]`` for free ``a, b``;
    ``varkappa[j, b]`` is component ``j`` of ``E_b G`` (the action
    coefficients already contracted with ``G``).
    """

    C: np.ndarray
    F: np.ndarray
    B: np.ndarray
    G: np.ndarray
    varkappa: np.ndarray
    Kterm: np.ndarray


def checked_basis(frame, gamma):
    """Return ``E(G)``; raise :class:`SingularFrameError` if ill-conditioned."""
    E = np.asarray(frame.basis(gamma), dtype=float)
    sv = np.linalg.svd(E, compute_uv=False)
    rcond = sv[-1] / sv[0] if sv[0] > 0 else 0.0
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise SingularFrameError(f"Hamel basis singular at Gamma={np.asarray(gamma)} (rcond={rcond:.3e})")
    return E


def frame_matrices(frame, gamma):
    """Return ``(E, E^-1)``; raise :class:`SingularFrameError` if ill-conditioned."""
    E = checked_basis(frame, gamma)
    return E, np.linalg.inv(E)


def default_bracket(n):
    if n == 6:
        return liealg.se3_bracket
    if n == 3:
        return liealg.so3_bracket
    raise ValueError(f"no default bracket for dimension {n}")


def fixed_structure_constants(bracket, n):
    """Structure constants ``c[k, i, j]`` of the standard basis."""
    eye = np.eye(n)
    c = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            c[:, i, j] = bracket(eye[i], eye[j])
    return c


def structure_constants(frame, gamma, bracket=None):
    """``C[k, i, j]`` with ``[E_i, E_j] = C^k_ij E_k`` in the moving basis.

    ``bracket`` defaults to se(3) for ``n_total == 6`` and so(3) for 3.
    """
    if bracket is None:
        bracket = default_bracket(frame.n_total)
    E, Einv = frame_matrices(frame, gamma)
    n = frame.n_total
    C = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            col = Einv @ bracket(E[:, i], E[:, j])
            C[:, i, j] = col
            C[:, j, i] = -col
    return C


def action_coefficients(system, gamma, E=None):
    """Matrix whose column ``b`` is ``E_b G`` (only free columns)."""
    if E is None:
        E = checked_basis(system.frame, gamma)
    k = system.frame.n_free
    return np.column_stack([system.advect_action(E[:, b], gamma) for b in range(k)])


def curvature_F(frame, gamma, varkappa):
    """Full tensor ``F[i, a, b] = (E^-1 dE_a/dG_j)^i (E_b G)_j``."""
    _, Einv = frame_matrices(frame, gamma)
    dE = np.asarray(frame.dbasis(gamma), dtype=float)
    k = frame.n_free
    F = np.empty((frame.n_total, k, k))
    for b in range(k):
        moved = np.tensordot(varkappa[:, b], dE, axes=1)
        F[:, :, b] = (Einv @ moved)[:, :k]
    return F


def curvature_F_contraction(frame, gamma, mu, xi_gamma):
    """``<mu, dE_a(G) . xi G>`` for each free index ``a``.

    Equal to ``F^i_ab p_i v^b`` when ``xi_gamma`` is the action of the
    constrained velocity on ``G``.
    """
    dE = np.asarray(frame.dbasis(gamma), dtype=float)
    moved = np.tensordot(xi_gamma, dE, axes=1)
    return mu @ moved[:, : frame.n_free]


def hamel_mass_matrix(system, gamma, E=None):
    if E is None:
        E = checked_basis(system.frame, gamma)
    return E.T @ system.G_body @ E


def potential_term(system, gamma, E=None):
    """``<K(dl/dG, G), E_a>`` with ``dl/dG = -dU/dG``."""
    if E is None:
        E = checked_basis(system.frame, gamma)
    k_vec = system.momentum_K(-np.asarray(system.dpotential(gamma), dtype=float), gamma)
    return E[:, : system.frame.n_free].T @ k_vec


def reduced_tensors(system, gamma):
    E = checked_basis(system.frame, gamma)
    k = system.frame.n_free
    C = structure_constants(system.frame, gamma, system.bracket)[:, :k, :k]
    kappa = action_coefficients(system, gamma, E)
    F = curvature_F(system.frame, gamma, kappa)
    return ReducedTensors(
        C=C,
        F=F,
        B=C + F,
        G=hamel_mass_matrix(system, gamma, E),
        varkappa=kappa,
        Kterm=potential_term(system, gamma, E),
    )


def body_momentum(system, v, gamma, mu_extra=None, E=None):
    """``mu = G_body xi`` (plus any extra momentum, e.g. rotor coupling)."""
    if E is None:
        E = checked_basis(system.frame, gamma)
    xi = E[:, : system.frame.n_free] @ v
    mu = system.G_body @ xi
    if mu_extra is not None:
        mu = mu + mu_extra
    return mu


def _momentum_rates(system, v, gamma, E, dE, mu_extra):
    k = system.frame.n_free
    xi = E[:, :k] @ v
    mu = system.G_body @ xi
    if mu_extra is not None:
        mu = mu + mu_extra
    # C^i_ab p_i v^b = <mu, [E_a, xi]> by bilinearity; avoids the full tensor
    c_term = np.array([mu @ system.bracket(E[:, a], xi) for a in range(k)])
    xi_gamma = system.advect_action(xi, gamma)
    f_term = mu @ np.tensordot(xi_gamma, dE, axes=1)[:, :k]
    pdot = -c_term - f_term + potential_term(system, gamma, E)
    return pdot, -xi_gamma


def reduced_rhs(system, v, gamma, mu_extra=None):
    """Right-hand side ``(dp_a/dt, dG/dt)`` of the reduced equations.

    ``mu_extra`` is an additional body momentum in the standard basis
    (used for internal rotors); it enters ``p`` but not ``xi``.
    """
    v = np.asarray(v, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    E = checked_basis(system.frame, gamma)
    dE = np.asarray(system.frame.dbasis(gamma), dtype=float)
    return _momentum_rates(system, v, gamma, E, dE, mu_extra)


def _mass_rate(G_body, E, dE, gamma_dot):
    dEt = np.tensordot(gamma_dot, dE, axes=1)
    GE = G_body @ E
    return dEt.T @ GE + GE.T @ dEt


def mass_matrix_rate(system, gamma, gamma_dot, E=None):
    """``d/dt G(G)`` along ``dG/dt``, using the analytic basis derivative."""
    if E is None:
        E = checked_basis(system.frame, gamma)
    return _mass_rate(system.G_body, E, np.asarray(system.frame.dbasis(gamma), dtype=float), gamma_dot)


def _spd_solve(G, rhs, gamma):
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise MassMatrixError(f"constrained mass matrix not positive definite at Gamma={gamma}") from exc
    return linalg.cho_solve((L, True), rhs, check_finite=False)


def _accelerations(system, v, gamma, pdot, E, dE):
    k = system.frame.n_free
    G = (E.T @ system.G_body @ E)[:k, :k]
    gamma_dot = -system.advect_action(E[:, :k] @ v, gamma)
    Gdot = _mass_rate(system.G_body, E, dE, gamma_dot)[:k, :k]
    return _spd_solve(G, pdot - Gdot @ v, gamma)


def solve_accelerations(system, v, gamma, pdot):
    """Solve ``d/dt (G_ab(G) v^b) = pdot_a`` for ``dv/dt``."""
    v = np.asarray(v, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    E = checked_basis(system.frame, gamma)
    dE = np.asarray(system.frame.dbasis(gamma), dtype=float)
    return _accelerations(system, v, gamma, np.asarray(pdot, dtype=float), E, dE)


def vector_field(system, v, gamma):
    """``(dv/dt, dG/dt)`` for the unforced reduced system."""
    v = np.asarray(v, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    E = checked_basis(system.frame, gamma)
    dE = np.asarray(system.frame.dbasis(gamma), dtype=float)
    pdot, gamma_dot = _momentum_rates(system, v, gamma, E, dE, None)
    return _accelerations(system, v, gamma, pdot, E, dE), gamma_dot


def constrained_energy(system, v, gamma):
    """``1/2 G_ab v^a v^b + U(G)``."""
    k = system.frame.n_free
    G = hamel_mass_matrix(system, gamma)[:k, :k]
    v = np.asarray(v, dtype=float)
    return 0.5 * float(v @ G @ v) + float(system.potential(gamma))
