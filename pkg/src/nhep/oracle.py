"""Reference dynamics in multiplier form.

The unconstrained reduced equations are augmented by constraint forces
``Psi lambda``; the multipliers are found at every evaluation by requiring
the time derivative of each constraint to vanish.  This formulation shares
no code path with the quasivelocity framework beyond the Lie-algebra
primitives and serves as an independent check of it.
"""

from dataclasses import dataclass

import numpy as np

from . import liealg, models

CONSTRAINT_TOL = 1e-8


class ConstraintViolationError(ValueError):
    pass


@dataclass(frozen=True)
class MultiplierSystem:
    """Full mass matrix, constraint covectors and applied forces of a model."""

    mass: np.ndarray
    mass_inv: np.ndarray
    params: object


def skate_multiplier_system(params):
    M = models.skate_mass_matrix(params)
    return MultiplierSystem(mass=M, mass_inv=np.linalg.inv(M), params=params)


def skate_constraints(gamma):
    """Columns ``psi1 = (E1xG, 0)``, ``psi2 = (0, G)``, ``psi3 = (0, E1xG)``."""
    e1g = liealg.cross(liealg.E1, gamma)
    Psi = np.zeros((6, 3))
    Psi[:3, 0] = e1g
    Psi[3:, 1] = gamma
    Psi[3:, 2] = e1g
    return Psi


def skate_constraint_rates(gamma, gamma_dot):
    """Time derivative of :func:`skate_constraints` along ``dG/dt``."""
    return skate_constraints(gamma_dot)


def constraint_residuals(z):
    z = np.asarray(z, dtype=float)
    return skate_constraints(z[6:9]).T @ z[:6]


def _skate_forces(params, M, xi, gamma):
    """Unconstrained generalized force ``ad*_xi (M xi) + K(-dU/dG, G)``."""
    grad_u = np.array([0.0, 0.0, params.mgl])
    return liealg.se3_coad(xi, M @ xi) + liealg.momentum_K(-grad_u, gamma)


def _check_constraints(residual):
    if np.max(np.abs(residual)) > CONSTRAINT_TOL:
        raise ConstraintViolationError(f"constraint residuals {residual} exceed {CONSTRAINT_TOL:.0e}")


def solve_multipliers(params, z, system=None, check=True):
    """Multipliers ``(l1, l2, l3)`` at the full state ``z = (Omega, Y, G)``."""
    if system is None:
        system = skate_multiplier_system(params)
    z = np.asarray(z, dtype=float)
    xi, gamma = z[:6], z[6:9]
    Psi = skate_constraints(gamma)
    if check:
        _check_constraints(Psi.T @ xi)
    gamma_dot = liealg.cross(gamma, xi[:3])
    f = _skate_forces(params, system.mass, xi, gamma)
    Minv = system.mass_inv
    gram = Psi.T @ Minv @ Psi
    rhs = -Psi.T @ (Minv @ f) - skate_constraint_rates(gamma, gamma_dot).T @ xi
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError("singular constraint Gramian")
    return np.linalg.solve(gram, rhs)


def full_rhs(params, z, system=None, check=True):
    """``dz/dt`` of ``(Omega, Y, G)`` with multipliers eliminated."""
    if system is None:
        system = skate_multiplier_system(params)
    z = np.asarray(z, dtype=float)
    xi, gamma = z[:6], z[6:9]
    lam = solve_multipliers(params, z, system, check=check)
    f = _skate_forces(params, system.mass, xi, gamma)
    xi_dot = system.mass_inv @ (f + skate_constraints(gamma) @ lam)
    return np.concatenate([xi_dot, liealg.cross(gamma, xi[:3])])


def full_energy(params, z):
    z = np.asarray(z, dtype=float)
    xi = z[:6]
    return 0.5 * xi @ models.skate_mass_matrix(params) @ xi + params.mgl * z[8]


# --- Veselova ------------------------------------------------------------


def veselova_multiplier(params, omega, gamma, check=True):
    """Single multiplier enforcing ``G . Omega = 0``."""
    omega = np.asarray(omega, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if check and abs(gamma @ omega) > CONSTRAINT_TOL:
        raise ConstraintViolationError(f"constraint residual {gamma @ omega:.3e}")
    I = params.inertia
    _, dU = params.potential_pair()
    rest = liealg.cross(I * omega, omega) + liealg.cross(-dU(gamma), gamma)
    # d/dt (G . Omega) = G . dOmega/dt since dG/dt = G x Omega is normal to Omega
    return -(gamma @ (rest / I)) / (gamma @ (gamma / I))


def veselova_full_rhs(params, z, check=True):
    """``d/dt (Omega, G)`` for the Veselova system in multiplier form."""
    z = np.asarray(z, dtype=float)
    omega, gamma = z[:3], z[3:6]
    I = params.inertia
    _, dU = params.potential_pair()
    lam = veselova_multiplier(params, omega, gamma, check=check)
    rest = liealg.cross(I * omega, omega) + liealg.cross(-dU(gamma), gamma)
    return np.concatenate([(rest + lam * gamma) / I, liealg.cross(gamma, omega)])
