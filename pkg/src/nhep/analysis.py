"""Equilibria, linearization and energy-Casimir stability certificates.

Eigenvalues come from a self-contained Hessenberg reduction followed by
Francis double-shift QR; the matrices involved are at most 6x6.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from . import control, models

SUBDIAG_TOL = 1e-12
LINEAR_UNSTABLE_TOL = 1e-8
STATIONARITY_TOL = 1e-8
DEFINITE_MARGIN = 1e-10
RANK_TOL = 1e-10
EQUILIBRIUM_TOL = 1e-10


class EigenvalueConvergenceError(RuntimeError):
    pass


class StationarityError(ValueError):
    """The supplied multipliers do not make the combined invariant stationary."""


class DependentGradientsError(ValueError):
    pass


class ThresholdConditionError(ValueError):
    """``I3 + m l^2 <= I2``: spinning is unstable for every rate."""


# --- equilibria ------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumReport:
    zeta_eq: np.ndarray
    residual: float
    kind: str


def equilibrium_residual(params, zeta):
    """Max of ``|v1|`` and the tilt balance ``((Ib2 - I3) G3 v2^2 + mgl) G2 + ml G3 v2 v3``."""
    v1, v2, v3, G2, G3 = (float(x) for x in zeta)
    balance = ((params.Ibar2 - params.I3) * G3 * v2 * v2 + params.mgl) * G2 + params.m * params.l * G3 * v2 * v3
    return max(abs(v1), abs(balance))


def classify_equilibrium(params, zeta, tol=EQUILIBRIUM_TOL):
    """Return an :class:`EquilibriumReport`; raise if ``zeta`` is not an equilibrium."""
    zeta = np.asarray(zeta, dtype=float)
    residual = max(equilibrium_residual(params, zeta), float(np.max(np.abs(models.skate_vector_field(params, zeta)))))
    if residual > tol:
        raise ValueError(f"not an equilibrium: residual {residual:.3e} > {tol:.1e}")
    upright = abs(zeta[3]) <= tol and zeta[4] > 0
    if upright and abs(zeta[1]) <= tol:
        kind = "sliding"
    elif upright and abs(zeta[2]) <= tol:
        kind = "spinning"
    else:
        kind = "other"
    return EquilibriumReport(zeta_eq=zeta, residual=residual, kind=kind)


# --- Jacobians -------------------------------------------------------------


def jacobian(field_fn, zeta, h=None):
    """Central-difference Jacobian with step ``1e-6 max(1, |zeta|)``."""
    zeta = np.asarray(zeta, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.linalg.norm(zeta)))
    n = zeta.size
    cols = []
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        cols.append((np.asarray(field_fn(zeta + step)) - np.asarray(field_fn(zeta - step))) / (2 * h))
    return np.column_stack(cols)


def skate_jacobian(params, zeta):
    """Analytic Jacobian of the closed-form skate vector field."""
    v1, v2, v3, G2, G3 = (float(x) for x in zeta)
    ml = params.m * params.l
    b1 = params.Ibar1
    a = params.Ibar2 - params.I3
    I2, I3 = params.I2, params.I3
    D = I2 * G2 * G2 + I3 * G3 * G3
    c = 2.0 * (I3 - I2)
    d = -2.0 * params.l * I3
    J = np.zeros((5, 5))
    J[0] = [
        0.0,
        (2 * a * G2 * G3 * v2 + ml * G3 * v3) / b1,
        ml * G3 * v2 / b1,
        (a * G3 * v2 * v2 + params.mgl) / b1,
        (a * G2 * v2 * v2 + ml * v2 * v3) / b1,
    ]
    J[1] = [
        c * G2 * G3 * v2 / D,
        c * G2 * G3 * v1 / D,
        0.0,
        c * v1 * v2 * (G3 / D - 2 * I2 * G2 * G2 * G3 / D**2),
        c * v1 * v2 * (G2 / D - 2 * I3 * G2 * G3 * G3 / D**2),
    ]
    J[2] = [
        d * G3 * v2 / D,
        d * G3 * v1 / D,
        0.0,
        -2 * I2 * G2 * d * G3 * v1 * v2 / D**2,
        d * v1 * v2 * (1.0 / D - 2 * I3 * G3 * G3 / D**2),
    ]
    J[3] = [G3, 0.0, 0.0, 0.0, v1]
    J[4] = [-G2, 0.0, 0.0, -v1, 0.0]
    return J


# --- eigenvalues -------------------------------------------------------------


def hessenberg(a):
    """Upper Hessenberg form by Householder similarity transforms."""
    H = np.array(a, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _hqr(a, tol, max_iter):
    """Francis double-shift QR on an upper Hessenberg matrix (modified in place)."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = sum(abs(a[i, j]) for i in range(n) for j in range(max(i - 1, 0), n))
    nn = n - 1
    t = 0.0
    total = 0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= tol * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                raise EigenvalueConvergenceError(f"QR iteration did not converge in {max_iter} iterations")
            if its in (10, 20):
                # exceptional shift breaks cycles
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= tol * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            k = m
            while k <= nn - 1:
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s != 0.0:
                    if k == m:
                        if l != m:
                            a[k, k - 1] = -a[k, k - 1]
                    else:
                        a[k, k - 1] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = a[k, j] + q * a[k + 1, j]
                        if k != nn - 1:
                            p += r * a[k + 2, j]
                            a[k + 2, j] -= p * z
                        a[k + 1, j] -= p * y
                        a[k, j] -= p * x
                    mmin = nn if nn < k + 3 else k + 3
                    for i in range(l, mmin + 1):
                        p = x * a[i, k] + y * a[i, k + 1]
                        if k != nn - 1:
                            p += z * a[i, k + 2]
                            a[i, k + 2] -= p * r
                        a[i, k + 1] -= p * q
                        a[i, k] -= p
                k += 1
    return wr + 1j * wi


def eigenvalues(mat, tol=SUBDIAG_TOL):
    """All eigenvalues of a small real square matrix, sorted by (real, imag)."""
    A = np.array(mat, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    H = hessenberg(A)
    lam = _hqr(H, tol, max_iter=100 * n * n)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


# --- energy-Casimir ------------------------------------------------------------


def nullspace(A, rtol=RANK_TOL):
    """Orthonormal basis of ``ker A`` from a column-pivoted QR of ``A^T``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    k, n = A.shape
    Q, R, _ = linalg.qr(A.T, pivoting=True)
    smax = np.linalg.norm(A, 2)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.sum(diag > rtol * smax)) if smax > 0 else 0
    return Q[:, rank:], rank


def hessian_fd(grad_fn, zeta, h=1e-5):
    """Symmetrized central-difference Jacobian of an analytic gradient."""
    H = jacobian(grad_fn, zeta, h=h * max(1.0, float(np.linalg.norm(zeta))))
    return 0.5 * (H + H.T)


def definiteness(eigs, margin=DEFINITE_MARGIN):
    """``'positive'``, ``'negative'``, ``'indefinite'`` or ``'marginal'``."""
    eigs = np.asarray(eigs, dtype=float)
    scale = margin * max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
    if np.all(eigs > scale):
        return "positive"
    if np.all(eigs < -scale):
        return "negative"
    if np.any(eigs > scale) and np.any(eigs < -scale):
        return "indefinite"
    return "marginal"


@dataclass
class StabilityCertificate:
    eigenvalues: Optional[np.ndarray]
    linear_verdict: Optional[str]
    ec_multipliers: np.ndarray
    stationarity: float
    hessian: np.ndarray
    tangent_basis: np.ndarray
    restricted_hessian: np.ndarray
    restricted_eigenvalues: np.ndarray
    definiteness: str
    ec_verdict: str
    notes: list = field(default_factory=list)


def linear_verdict(eigs, tol=LINEAR_UNSTABLE_TOL):
    return "unstable" if np.any(np.real(eigs) > tol) else "inconclusive"


def energy_casimir_certificate(invariants, zeta_eq, multipliers, field_fn=None):
    """Check stationarity and constrained definiteness of ``E + c . C``.

    ``invariants`` is a :class:`~nhep.models.InvariantSet` whose first row is
    the energy.  If ``field_fn`` is given the linearization eigenvalues are
    included.  ``ec_verdict`` is ``'stable'`` when the restricted Hessian is
    sign definite, ``'indefinite'`` when it has both signs and
    ``'inconclusive'`` when an eigenvalue sits within the margin of zero.
    """
    zeta_eq = np.asarray(zeta_eq, dtype=float)
    c = np.asarray(multipliers, dtype=float)
    grads = invariants.gradients(zeta_eq)
    if c.size != grads.shape[0] - 1:
        raise ValueError(f"expected {grads.shape[0] - 1} multipliers, got {c.size}")

    def combined_grad(z):
        g = invariants.gradients(z)
        return g[0] + c @ g[1:]

    stat = float(np.max(np.abs(combined_grad(zeta_eq))))
    if stat > STATIONARITY_TOL:
        raise StationarityError(f"|D(E + c.C)| = {stat:.3e} exceeds {STATIONARITY_TOL:.0e}")
    N, rank = nullspace(grads[1:])
    if rank < grads.shape[0] - 1:
        raise DependentGradientsError(f"Casimir gradients have rank {rank} < {grads.shape[0] - 1}")
    H = hessian_fd(combined_grad, zeta_eq)
    Hr = N.T @ H @ N
    Hr = 0.5 * (Hr + Hr.T)
    reig = np.linalg.eigvalsh(Hr)
    kind = definiteness(reig)
    verdict = {"positive": "stable", "negative": "stable", "indefinite": "indefinite"}.get(kind, "inconclusive")
    eigs = lin = None
    if field_fn is not None:
        eigs = eigenvalues(jacobian(field_fn, zeta_eq))
        lin = linear_verdict(eigs)
    return StabilityCertificate(
        eigenvalues=eigs,
        linear_verdict=lin,
        ec_multipliers=c,
        stationarity=stat,
        hessian=H,
        tangent_basis=N,
        restricted_hessian=Hr,
        restricted_eigenvalues=reig,
        definiteness=kind,
        ec_verdict=verdict,
    )


def auto_multipliers(invariants, zeta_eq):
    """Least-squares multipliers making ``E + c . C`` stationary."""
    g = invariants.gradients(np.asarray(zeta_eq, dtype=float))
    c, *_ = np.linalg.lstsq(g[1:].T, -g[0], rcond=None)
    return c


# --- presets and thresholds --------------------------------------------------------


def spinning_multipliers(params, Omega0):
    return np.array([-Omega0, 0.0, params.I3 * Omega0**2 - params.mgl])


def sliding_multipliers(params, Y0):
    return np.array([0.0, -params.m * Y0, -params.mgl])


def spinning_threshold(params):
    """Critical spin rate ``sqrt(mgl / (I3 + m l^2 - I2))``."""
    gap = params.I3 + params.m * params.l**2 - params.I2
    if gap <= 0:
        raise ThresholdConditionError("I3 + m l^2 <= I2: spinning is unstable for every rate")
    return math.sqrt(params.mgl / gap)


def sigma_stability_bound(rotor):
    """Lower end of the stabilizing window ``bound < sigma < 0``."""
    b = rotor.base
    return -rotor.J1**2 / (b.I1 + b.m * b.l**2)


def certify_sliding(params, Y0=1.0):
    zeta = models.sliding_equilibrium(Y0)
    return energy_casimir_certificate(
        models.skate_invariant_set(params),
        zeta,
        sliding_multipliers(params, Y0),
        field_fn=lambda z: models.skate_vector_field(params, z),
    )


def certify_spinning(params, Omega0):
    zeta = models.spinning_equilibrium(Omega0)
    return energy_casimir_certificate(
        models.skate_invariant_set(params),
        zeta,
        spinning_multipliers(params, Omega0),
        field_fn=lambda z: models.skate_vector_field(params, z),
    )


def certify_controlled_sliding(rotor, Y0=1.0):
    """Certificate for sliding under the matched control (shaped invariants)."""
    tp = control.tilde_params(rotor)
    zeta = models.sliding_equilibrium(Y0)
    return energy_casimir_certificate(
        models.skate_invariant_set(tp),
        zeta,
        sliding_multipliers(tp, Y0),
        field_fn=lambda z: models.skate_vector_field(tp, z),
    )
