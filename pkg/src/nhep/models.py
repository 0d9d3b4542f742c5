"""Concrete systems: the pendulum skate, the skate with an internal rotor,
and the Veselova system.

The skate state is ``zeta = (v1, v2, v3, G2, G3)``: quasivelocities along the
frame columns ``(E1, 0)``, ``(G, 0)``, ``(0, E1)`` plus the two nonzero
components of the advected vertical ``G = (0, G2, G3)``.  The first
component of ``G`` vanishes identically and is never stored.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import liealg
from .hamel import HamelFrame, ReducedSystem, SingularFrameError, frame_matrices, vector_field

CONSTRAINT_TOL = 1e-6


@dataclass(frozen=True)
class SkateParams:
    """Mass ``m``, pendulum length ``l``, gravity ``g`` and principal inertias.

    ``shaped=True`` admits a nonpositive ``I1``, which occurs for the
    matched inertia of the controlled system.
    """

    m: float
    l: float
    g: float
    I1: float
    I2: float
    I3: float
    shaped: bool = False

    def __post_init__(self):
        for name in ("m", "l", "g", "I2", "I3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.I1) or (not self.shaped and self.I1 <= 0):
            raise ValueError(f"I1 must be positive and finite, got {self.I1}")
        if self.I2 <= self.I3:
            raise ValueError(f"I2 > I3 is required, got I2={self.I2}, I3={self.I3}")

    @classmethod
    def reference(cls):
        """Uncontrolled reference skate: m=2, l=0.8, g=9.8, I=(0.35, 0.35, 0.004)."""
        return cls(m=2.0, l=0.8, g=9.8, I1=0.35, I2=0.35, I3=0.004)

    @property
    def inertia(self):
        return np.array([self.I1, self.I2, self.I3])

    @property
    def Ibar1(self):
        return self.I1 + self.m * self.l**2

    @property
    def Ibar2(self):
        return self.I2 + self.m * self.l**2

    @property
    def mgl(self):
        return self.m * self.g * self.l


@dataclass(frozen=True)
class RotorParams:
    """Skate carrying a rotor about ``E1``; ``base.m`` is the total mass.

    ``sigma`` is the matching gain; ``None`` describes an uncontrolled rotor.
    """

    base: SkateParams
    J1: float
    J2: float
    J3: float
    sigma: Optional[float] = None

    def __post_init__(self):
        for name in ("J1", "J2", "J3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.sigma is not None and (not math.isfinite(self.sigma) or self.sigma == 0):
            raise ValueError("sigma must be finite and nonzero")

    def with_sigma(self, sigma):
        return RotorParams(self.base, self.J1, self.J2, self.J3, sigma)

    def require_sigma(self):
        if self.sigma is None:
            raise ValueError("this operation needs the matching gain sigma")
        return self.sigma

    @classmethod
    def reference(cls, sigma=-1e-5):
        base = SkateParams(m=3.0, l=0.8, g=9.8, I1=0.35, I2=0.35, I3=0.004)
        return cls(base=base, J1=0.005, J2=0.0025, J3=0.0025, sigma=sigma)

    @property
    def J(self):
        return np.array([self.J1, self.J2, self.J3])

    def body_with_rotor(self):
        """Locked-rotor inertias ``I + J`` as a :class:`SkateParams`."""
        b = self.base
        return SkateParams(b.m, b.l, b.g, b.I1 + self.J1, b.I2 + self.J2, b.I3 + self.J3)


@dataclass(frozen=True)
class ReducedState:
    v1: float
    v2: float
    v3: float
    G2: float
    G3: float

    def as_array(self):
        return np.array([self.v1, self.v2, self.v3, self.G2, self.G3])

    @classmethod
    def from_array(cls, zeta):
        return cls(*(float(x) for x in zeta))


@dataclass(frozen=True)
class FullState:
    Omega: np.ndarray
    Y: np.ndarray
    Gamma: np.ndarray

    def as_array(self):
        return np.concatenate([self.Omega, self.Y, self.Gamma])

    @classmethod
    def from_array(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(z[:3].copy(), z[3:6].copy(), z[6:9].copy())


def sliding_equilibrium(Y0=1.0):
    return np.array([0.0, 0.0, Y0, 0.0, 1.0])


def spinning_equilibrium(Omega0):
    return np.array([0.0, Omega0, 0.0, 0.0, 1.0])


def tilt_initial_condition(phi0):
    """Perturbed sliding state tilted by ``phi0`` about ``E1``."""
    return FullState(
        Omega=np.array([0.1, 0.1 * math.tan(phi0), 0.1]),
        Y=np.array([1.0, 0.0, 0.0]),
        Gamma=np.array([0.0, math.sin(phi0), math.cos(phi0)]),
    )


def gamma_of(zeta):
    return np.array([0.0, zeta[3], zeta[4]])


# --- skate frame ---------------------------------------------------------


def skate_basis(gamma):
    """Columns ``(E1,0), (G,0), (0,E1), (E1xG,0), (0,G), (0,E1xG)``."""
    gamma = np.asarray(gamma, dtype=float)
    e1g = liealg.cross(liealg.E1, gamma)
    E = np.zeros((6, 6))
    E[:3, 0] = liealg.E1
    E[:3, 1] = gamma
    E[3:, 2] = liealg.E1
    E[:3, 3] = e1g
    E[3:, 4] = gamma
    E[3:, 5] = e1g
    return E


def _skate_dbasis_const():
    dE = np.zeros((3, 6, 6))
    eye = np.eye(3)
    for j in range(3):
        e1ej = liealg.cross(liealg.E1, eye[j])
        dE[j, :3, 1] = eye[j]
        dE[j, :3, 3] = e1ej
        dE[j, 3:, 4] = eye[j]
        dE[j, 3:, 5] = e1ej
    return dE


_SKATE_DBASIS = _skate_dbasis_const()


def skate_dbasis(gamma):
    """Basis derivative; constant because the frame is linear in ``G``."""
    return _SKATE_DBASIS


def skate_frame():
    return HamelFrame(basis=skate_basis, dbasis=skate_dbasis, n_total=6, n_free=3)


def skate_mass_matrix(params, inertia=None):
    """Constant 6x6 body mass matrix; ``inertia`` overrides ``params.inertia``."""
    I1, I2, I3 = params.inertia if inertia is None else inertia
    m, l = params.m, params.l
    ml = m * l
    ml2 = m * l**2
    return np.array(
        [
            [I1 + ml2, 0.0, 0.0, 0.0, -ml, 0.0],
            [0.0, I2 + ml2, 0.0, ml, 0.0, 0.0],
            [0.0, 0.0, I3, 0.0, 0.0, 0.0],
            [0.0, ml, 0.0, m, 0.0, 0.0],
            [-ml, 0.0, 0.0, 0.0, m, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, m],
        ]
    )


def _skate_system(params, G_body):
    mgl = params.mgl
    return ReducedSystem(
        frame=skate_frame(),
        G_body=G_body,
        potential=lambda gamma: mgl * gamma[2],
        dpotential=lambda gamma: np.array([0.0, 0.0, mgl]),
        bracket=liealg.se3_bracket,
        momentum_K=liealg.momentum_K,
        advect_action=liealg.advect_action,
    )


def skate_system(params):
    return _skate_system(params, skate_mass_matrix(params))


def hamel_zeta_rhs(system, zeta):
    """Framework right-hand side in the skate state layout."""
    zeta = np.asarray(zeta, dtype=float)
    vdot, gdot = vector_field(system, zeta[:3], gamma_of(zeta))
    return np.concatenate([vdot, gdot[1:]])


def zeta_to_full(zeta):
    v1, v2, v3, G2, G3 = (float(x) for x in zeta)
    gamma = np.array([0.0, G2, G3])
    return FullState(Omega=v1 * liealg.E1 + v2 * gamma, Y=v3 * liealg.E1, Gamma=gamma)


def quasivelocities_from_full(z, warn=True):
    """Project ``(Omega, Y, G)`` onto the skate frame.

    Returns ``(zeta, residuals)`` where ``residuals = (v4, v5, v6)`` are the
    constraint components, which vanish on constrained states.
    """
    omega, y, gamma = (np.asarray(a, dtype=float) for a in (z.Omega, z.Y, z.Gamma))
    e1g = liealg.cross(liealg.E1, gamma)
    zeta = np.array([omega[0], omega @ gamma, y[0], gamma[1], gamma[2]])
    residuals = np.array([omega @ e1g, y @ gamma, y @ e1g])
    if warn and np.max(np.abs(residuals)) > CONSTRAINT_TOL:
        warnings.warn(f"state violates skate constraints, residuals={residuals}", stacklevel=2)
    return zeta, residuals


# --- closed-form skate dynamics --------------------------------------------


def skate_vector_field(params, zeta):
    """Closed-form reduced vector field of the skate."""
    v1, v2, v3, G2, G3 = zeta.tolist() if isinstance(zeta, np.ndarray) else zeta
    m, l = params.m, params.l
    ml = m * l
    D = params.I2 * G2 * G2 + params.I3 * G3 * G3
    dv1 = (((params.Ibar2 - params.I3) * G3 * v2 * v2 + params.mgl) * G2 + ml * G3 * v2 * v3) / params.Ibar1
    dv2 = 2.0 * (params.I3 - params.I2) * G2 * G3 * v1 * v2 / D
    dv3 = -2.0 * l * params.I3 * G3 * v1 * v2 / D
    return np.array([dv1, dv2, dv3, v1 * G3, -v1 * G2])


def skate_hamel_mass(params, zeta):
    """Constrained 3x3 mass matrix in the skate frame."""
    G2, G3 = zeta[3], zeta[4]
    ml = params.m * params.l
    return np.array(
        [
            [params.Ibar1, 0.0, 0.0],
            [0.0, params.Ibar2 * G2 * G2 + params.I3 * G3 * G3, ml * G2],
            [0.0, ml * G2, params.m],
        ]
    )


def skate_hamel_mass_rate(params, zeta):
    """Time derivative of :func:`skate_hamel_mass` along the flow."""
    v1, G2, G3 = zeta[0], zeta[3], zeta[4]
    ml = params.m * params.l
    a = 2.0 * (params.Ibar2 - params.I3) * G2 * G3 * v1
    b = ml * G3 * v1
    return np.array([[0.0, 0.0, 0.0], [0.0, a, b], [0.0, b, 0.0]])


def skate_momentum_rates(params, zeta):
    """Closed-form ``dp/dt`` for the three constrained momenta (valid on |G| = 1)."""
    v1, v2, v3, G2, G3 = zeta.tolist() if isinstance(zeta, np.ndarray) else zeta
    ml = params.m * params.l
    p1 = ((params.Ibar2 - params.I3) * G3 * v2 * v2 + params.mgl) * G2 + ml * G3 * v2 * v3
    return np.array([p1, ml * G3 * v1 * v3, -ml * G3 * v1 * v2])


# --- invariants ------------------------------------------------------------

INVARIANT_NAMES = ("E", "C1", "C2", "C3")


def c2_coefficient(params, printed=False):
    """Coefficient multiplying ``l C1 arctan(...)`` in ``C2``.

    ``printed=True`` returns ``1/(I3 (I2 - I3))``, which is not conserved for
    generic parameters and is kept only so tests can tell the two apart.
    """
    prod = params.I3 * (params.I2 - params.I3)
    return 1.0 / prod if printed else 1.0 / math.sqrt(prod)


def skate_invariants(params, zeta, printed_c2=False):
    """``(E, C1, C2, C3)`` at ``zeta``."""
    v1, v2, v3, G2, G3 = (float(x) for x in zeta)
    m, l = params.m, params.l
    ml = m * l
    E = 0.5 * (
        params.Ibar1 * v1 * v1
        + (params.Ibar2 * G2 * G2 + params.I3 * G3 * G3) * v2 * v2
        + 2.0 * ml * G2 * v2 * v3
        + m * v3 * v3
    ) + params.mgl * G3
    C1 = (params.I2 * G2 * G2 + params.I3 * G3 * G3) * v2
    s = math.sqrt((params.I2 - params.I3) / params.I3)
    C2 = l * G2 * v2 + v3 + l * c2_coefficient(params, printed_c2) * C1 * math.atan(s * G2)
    C3 = 0.5 * (G2 * G2 + G3 * G3)
    return np.array([E, C1, C2, C3])


def skate_invariant_gradients(params, zeta, printed_c2=False):
    """4x5 matrix of gradients of ``(E, C1, C2, C3)`` with respect to ``zeta``."""
    v1, v2, v3, G2, G3 = (float(x) for x in zeta)
    m, l = params.m, params.l
    ml = m * l
    I2, I3 = params.I2, params.I3
    D = I2 * G2 * G2 + I3 * G3 * G3
    C1 = D * v2
    s = math.sqrt((I2 - I3) / I3)
    kappa = c2_coefficient(params, printed_c2)
    at = math.atan(s * G2)
    dE = [
        params.Ibar1 * v1,
        (params.Ibar2 * G2 * G2 + I3 * G3 * G3) * v2 + ml * G2 * v3,
        ml * G2 * v2 + m * v3,
        params.Ibar2 * G2 * v2 * v2 + ml * v2 * v3,
        I3 * G3 * v2 * v2 + params.mgl,
    ]
    dC1 = [0.0, D, 0.0, 2.0 * I2 * G2 * v2, 2.0 * I3 * G3 * v2]
    dC2 = [
        0.0,
        l * G2 + l * kappa * D * at,
        1.0,
        l * v2 + l * kappa * (2.0 * I2 * G2 * v2 * at + C1 * s / (1.0 + s * s * G2 * G2)),
        l * kappa * 2.0 * I3 * G3 * v2 * at,
    ]
    dC3 = [0.0, 0.0, 0.0, G2, G3]
    return np.array([dE, dC1, dC2, dC3])


@dataclass(frozen=True)
class InvariantSet:
    """Energy plus Casimirs; row 0 of ``values``/``gradients`` is the energy."""

    names: tuple
    values: Callable[[np.ndarray], np.ndarray]
    gradients: Callable[[np.ndarray], np.ndarray]


def skate_invariant_set(params):
    return InvariantSet(
        names=INVARIANT_NAMES,
        values=lambda zeta: skate_invariants(params, zeta),
        gradients=lambda zeta: skate_invariant_gradients(params, zeta),
    )


# --- rotor -------------------------------------------------------------------


def rotor_mass_matrix(rotor):
    """``(G, G_ia, G_ab)``: body block with ``I + J``, coupling ``J1 e1`` and ``J1``."""
    G = skate_mass_matrix(rotor.base, inertia=rotor.base.inertia + rotor.J)
    G_ia = np.zeros(6)
    G_ia[0] = rotor.J1
    return G, G_ia, rotor.J1


def rotor_system(rotor):
    return _skate_system(rotor.base, rotor_mass_matrix(rotor)[0])


def rotor_kinetic_energy(rotor, xi, theta_dot):
    """Kinetic energy of body plus rotor written directly from the geometry."""
    b = rotor.base
    omega, y = liealg.split(xi)
    arm = y + b.l * liealg.cross(omega, liealg.E3)
    return (
        0.5 * omega @ (b.inertia * omega)
        + 0.5 * b.m * arm @ arm
        + 0.5 * rotor.J1 * (omega[0] + theta_dot) ** 2
        + 0.5 * rotor.J2 * omega[1] ** 2
        + 0.5 * rotor.J3 * omega[2] ** 2
    )


# --- Veselova ------------------------------------------------------------------


def linear_potential(w):
    """``U(G) = w . G`` and its gradient."""
    w = np.asarray(w, dtype=float)
    return (lambda gamma: float(w @ gamma)), (lambda gamma: w.copy())


@dataclass(frozen=True)
class VeselovaParams:
    """Rigid body with constraint ``G . Omega = 0``; linear potential ``w . G``."""

    I1: float
    I2: float
    I3: float
    w: tuple = (0.0, 0.0, 0.0)
    potential: Optional[Callable] = field(default=None, compare=False)
    dpotential: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("I1", "I2", "I3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if (self.potential is None) != (self.dpotential is None):
            raise ValueError("potential and dpotential must be given together")

    @property
    def inertia(self):
        return np.array([self.I1, self.I2, self.I3])

    def potential_pair(self):
        if self.potential is not None:
            return self.potential, self.dpotential
        return linear_potential(self.w)


def veselova_seed(gamma):
    """Gram-Schmidt seed: ``e1`` unless ``G`` is nearly parallel to it."""
    gamma = np.asarray(gamma, dtype=float)
    norm = np.linalg.norm(gamma)
    if norm == 0:
        raise SingularFrameError("Veselova frame undefined at Gamma = 0")
    return liealg.E2.copy() if abs(gamma[0]) / norm > 0.9 else liealg.E1.copy()


def veselova_frame(seed):
    """Frame ``(E1, E2, G)`` with ``E1, E2`` an orthonormal basis of ``G^perp``.

    ``seed`` is fixed for the lifetime of the frame so that the basis is
    smooth in ``G``.
    """
    seed = np.asarray(seed, dtype=float)
    eye = np.eye(3)

    def parts(gamma):
        gamma = np.asarray(gamma, dtype=float)
        r = np.linalg.norm(gamma)
        if r == 0:
            raise SingularFrameError("Veselova frame undefined at Gamma = 0")
        u = gamma / r
        a = seed - (seed @ u) * u
        na = np.linalg.norm(a)
        return gamma, r, u, a, na

    def basis(gamma):
        gamma, _, u, a, na = parts(gamma)
        e1 = a / na
        return np.column_stack([e1, liealg.cross(u, e1), gamma])

    def dbasis(gamma):
        gamma, r, u, a, na = parts(gamma)
        e1 = a / na
        du = (eye - np.outer(u, u)) / r
        da = -(np.outer(u, seed) + (seed @ u) * eye) @ du
        de1 = (eye - np.outer(e1, e1)) @ da / na
        de2 = -liealg.hat(e1) @ du + liealg.hat(u) @ de1
        dE = np.zeros((3, 3, 3))
        for j in range(3):
            dE[j, :, 0] = de1[:, j]
            dE[j, :, 1] = de2[:, j]
            dE[j, :, 2] = eye[j]
        return dE

    return HamelFrame(basis=basis, dbasis=dbasis, n_total=3, n_free=2)


def veselova_system(params, gamma0=None):
    """Reduced system on so(3) with one constraint; the seed is chosen from ``gamma0``."""
    seed = liealg.E1 if gamma0 is None else veselova_seed(gamma0)
    U, dU = params.potential_pair()
    return ReducedSystem(
        frame=veselova_frame(seed),
        G_body=np.diag(params.inertia),
        potential=U,
        dpotential=dU,
        bracket=liealg.so3_bracket,
        momentum_K=liealg.so3_momentum_K,
        advect_action=liealg.advect_action,
    )


def veselova_state_from_omega(system, omega, gamma):
    """Quasivelocity state ``(v1, v2, G1, G2, G3)`` for a constrained ``Omega``."""
    _, Einv = frame_matrices(system.frame, gamma)
    v = Einv @ np.asarray(omega, dtype=float)
    return np.concatenate([v[:2], np.asarray(gamma, dtype=float)])


def veselova_omega(system, state):
    E, _ = frame_matrices(system.frame, state[2:])
    return E[:, :2] @ state[:2]


def veselova_rhs(system, state):
    """Framework right-hand side for the state ``(v1, v2, G)``."""
    state = np.asarray(state, dtype=float)
    vdot, gdot = vector_field(system, state[:2], state[2:])
    return np.concatenate([vdot, gdot])


def veselova_energy(params, omega, gamma):
    U, _ = params.potential_pair()
    omega = np.asarray(omega, dtype=float)
    return 0.5 * omega @ (params.inertia * omega) + U(np.asarray(gamma, dtype=float))
