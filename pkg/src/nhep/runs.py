"""Scenario execution: simulations, verification suites, stability reports
and parameter sweeps.  The command-line front end only formats the results.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analysis, control, hamel, models, oracle, sim
from .scenario import ScenarioError

SKATE_COLUMNS = ["t", "v1", "v2", "v3", "Gamma1", "Gamma2", "Gamma3", "Omega1", "Omega2", "Omega3", "Y1", "E", "C1", "C2"]
ROTOR_COLUMNS = SKATE_COLUMNS + ["u", "theta_dot"]
VESELOVA_COLUMNS = ["t", "v1", "v2", "Gamma1", "Gamma2", "Gamma3", "Omega1", "Omega2", "Omega3", "E", "constraint"]
IC_TOL = 1e-6


# --- parameter construction ----------------------------------------------------


def skate_params(sc):
    p = sc.params
    try:
        return models.SkateParams(p["m"], p["l"], p["g"], *p["I"])
    except ValueError as exc:
        raise ScenarioError(f"params: {exc}") from None


def rotor_params(sc, sigma=None):
    base = skate_params(sc)
    if sigma is None and sc.controlled:
        sigma = sc.control["sigma"]
    try:
        return models.RotorParams(base, *sc.params["J"], sigma=sigma)
    except ValueError as exc:
        raise ScenarioError(f"params: {exc}") from None


def veselova_params(sc):
    try:
        return models.VeselovaParams(*sc.params["I"], w=tuple(sc.params["w"]))
    except ValueError as exc:
        raise ScenarioError(f"params: {exc}") from None


def initial_zeta(initial):
    """Skate initial state from the ``initial`` block."""
    if "phi0" in initial:
        full = models.tilt_initial_condition(initial["phi0"])
    elif "zeta" in initial:
        zeta = np.array(initial["zeta"])
        if abs(zeta[3] ** 2 + zeta[4] ** 2 - 1.0) > IC_TOL:
            raise ScenarioError("initial.zeta: Gamma2^2 + Gamma3^2 must equal 1")
        return zeta
    else:
        full = models.FullState(*(np.array(initial[k]) for k in ("Omega", "Y", "Gamma")))
    if abs(full.Gamma[0]) > IC_TOL or abs(np.linalg.norm(full.Gamma) - 1.0) > IC_TOL:
        raise ScenarioError("initial.Gamma: need Gamma1 = 0 and |Gamma| = 1")
    zeta, residuals = models.quasivelocities_from_full(full, warn=False)
    if np.max(np.abs(residuals)) > IC_TOL:
        raise ScenarioError(f"initial: state violates the skate constraints (residuals {residuals})")
    return zeta


# --- simulation -----------------------------------------------------------------


@dataclass
class RunSetup:
    rhs: Callable
    state0: np.ndarray
    columns: list
    row: Callable[[float, np.ndarray], list]
    invariants: Callable[[np.ndarray], np.ndarray]
    invariant_names: tuple
    event: Optional[Callable] = None


def _skate_row(params_inv, zeta):
    v1, v2, v3, G2, G3 = zeta[:5]
    E, C1, C2, _ = models.skate_invariants(params_inv, zeta[:5])
    return [v1, v2, v3, 0.0, G2, G3, v1, v2 * G2, v2 * G3, v3, E, C1, C2]


def setup_run(sc):
    if sc.model == "skate":
        p = skate_params(sc)
        return RunSetup(
            rhs=lambda t, y: models.skate_vector_field(p, y),
            state0=initial_zeta(sc.initial),
            columns=list(SKATE_COLUMNS),
            row=lambda t, y: [t] + _skate_row(p, y),
            invariants=lambda y: models.skate_invariants(p, y)[:3],
            invariant_names=("E", "C1", "C2"),
            event=lambda y: y[4],
        )
    if sc.model == "skate_rotor":
        rotor = rotor_params(sc)
        zeta0 = initial_zeta(sc.initial)
        if sc.controlled:
            inv_params = control.tilde_params(rotor)
            rho = sc.control.get("rho", control.rho_scalar(rotor))
            theta0 = sc.initial.get("theta_dot", control.theta_dot_for_zero_pi(rotor, zeta0[0]))
            torque = lambda y: control.control_law_skate(rotor, y[:5])

            def invariants(y):
                e, c1, c2, _ = models.skate_invariants(inv_params, y[:5])
                return np.array([e, c1, c2, control.pi_tilde(rotor, y[0], y[5], rho=rho)])

            names = ("E", "C1", "C2", "pi_tilde")
            row = lambda t, y: [t] + _skate_row(inv_params, y) + [torque(y), y[5]]
        else:
            inv_params = control.uncontrolled_params(rotor)
            theta0 = sc.initial.get("theta_dot", 0.0)

            def invariants(y):
                _, c1, c2, _ = models.skate_invariants(inv_params, y[:5])
                return np.array([control.rotor_total_energy(rotor, y), c1, c2])

            names = ("E", "C1", "C2")

            def row(t, y):
                vals = _skate_row(inv_params, y)
                vals[10] = control.rotor_total_energy(rotor, y)
                return [t] + vals + [0.0, y[5]]

        return RunSetup(
            rhs=lambda t, y: control.closed_loop_rhs(rotor, y, control=sc.controlled),
            state0=np.append(zeta0, theta0),
            columns=list(ROTOR_COLUMNS),
            row=row,
            invariants=invariants,
            invariant_names=names,
            event=lambda y: y[4],
        )
    vp = veselova_params(sc)
    omega0 = np.array(sc.initial["Omega"])
    gamma0 = np.array(sc.initial["Gamma"])
    if abs(omega0 @ gamma0) > IC_TOL:
        raise ScenarioError("initial: Veselova state needs Gamma . Omega = 0")
    system = models.veselova_system(vp, gamma0)

    def vrow(t, y):
        omega = models.veselova_omega(system, y)
        return [t, y[0], y[1], *y[2:5], *omega, models.veselova_energy(vp, omega, y[2:5]), float(omega @ y[2:5])]

    return RunSetup(
        rhs=lambda t, y: models.veselova_rhs(system, y),
        state0=models.veselova_state_from_omega(system, omega0, gamma0),
        columns=list(VESELOVA_COLUMNS),
        row=vrow,
        invariants=lambda y: np.array([vrow(0.0, y)[9], float(y[2:5] @ y[2:5])]),
        invariant_names=("E", "Gamma_norm2"),
    )


@dataclass
class RunSummary:
    columns: list
    rows: list
    event_time: Optional[float]
    final_state: dict
    drifts: dict
    min_gamma3: Optional[float]
    runtime: float
    steps: int


def integrator_config(sc, event=None):
    ic = sc.integrator
    return sim.IntegratorConfig(
        method=ic["method"],
        dt=ic["dt"],
        t_end=ic["t_end"],
        event=event,
        stop_at_event=ic["stop_at_event"],
        store_every=ic["store_every"],
    )


def simulate(sc):
    setup = setup_run(sc)
    start = time.perf_counter()
    traj = sim.integrate(setup.rhs, setup.state0, integrator_config(sc, setup.event))
    runtime = time.perf_counter() - start
    rows = [setup.row(float(t), y) for t, y in zip(traj.times, traj.states)]
    upto = traj.event_time if traj.event_time is not None else None
    drift = sim.drift_report(traj, setup.invariants, names=setup.invariant_names, upto=upto)
    min_g3 = float(np.min(traj.states[:, 4])) if sc.model != "veselova" else None
    return RunSummary(
        columns=setup.columns,
        rows=rows,
        event_time=traj.event_time,
        final_state=dict(zip(setup.columns, rows[-1])),
        drifts=drift.as_dict(),
        min_gamma3=min_g3,
        runtime=runtime,
        steps=int(traj.stats.get("steps", traj.stats.get("nfev", 0))),
    )


def select_columns(columns, rows, wanted):
    if not wanted:
        return columns, rows
    unknown = [c for c in wanted if c not in columns]
    if unknown:
        raise ScenarioError(f"outputs.columns: unknown column(s) {unknown}; available: {columns}")
    idx = [columns.index(c) for c in wanted]
    return list(wanted), [[r[i] for i in idx] for r in rows]


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\r\n")
        for r in rows:
            fh.write(",".join(format(float(x), ".17g") for x in r) + "\r\n")


# --- verification ---------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(np.isfinite(self.value) and self.value <= self.threshold)


def _random_skate_states(rng, n, scale=2.0):
    phi = rng.uniform(-1.4, 1.4, n)
    return np.column_stack([rng.normal(size=(n, 3)) * scale, np.sin(phi), np.cos(phi)])


def _window(sc, limit):
    return min(sc.integrator["t_end"], limit)


def verify_skate(sc):
    p = skate_params(sc)
    system = models.skate_system(p)
    rng = np.random.default_rng(0)
    checks = []
    states = _random_skate_states(rng, 200)
    err = max(np.max(np.abs(models.hamel_zeta_rhs(system, z) - models.skate_vector_field(p, z))) for z in states)
    checks.append(Check("framework vs closed-form field (200 states)", err, 1e-12))
    gam = models.gamma_of(states[0])
    Gm = hamel.hamel_mass_matrix(system, gam)
    checks.append(Check("mass matrix symmetry", float(np.max(np.abs(Gm - Gm.T)) / np.max(np.abs(Gm))), 1e-14))

    zeta0 = initial_zeta(sc.initial)
    dt = sc.integrator["dt"]
    cfg = sim.IntegratorConfig(dt=dt, t_end=_window(sc, 1.0), event=lambda y: y[4], stop_at_event=True)
    tq = sim.integrate(lambda t, y: models.skate_vector_field(p, y), zeta0, cfg)
    drift = sim.drift_report(tq, lambda y: models.skate_invariants(p, y)[:3], names=("E", "C1", "C2"))
    for name, rel in zip(drift.names, drift.relative):
        checks.append(Check(f"drift {name} (relative)", rel, 1e-8))

    msys = oracle.skate_multiplier_system(p)
    z0 = models.zeta_to_full(zeta0).as_array()
    cfg_o = sim.IntegratorConfig(dt=dt, t_end=tq.times[-1])
    to = sim.integrate(lambda t, y: oracle.full_rhs(p, y, msys, check=False), z0, cfg_o)
    n = min(len(to.states), len(tq.states))
    mapped = np.array([models.quasivelocities_from_full(models.FullState.from_array(z), warn=False)[0] for z in to.states[:n]])
    checks.append(Check("oracle equivalence (sup-norm)", float(np.max(np.abs(mapped - tq.states[:n]))), 1e-6))
    cres = max(float(np.max(np.abs(oracle.constraint_residuals(z)))) for z in to.states)
    checks.append(Check("oracle constraint residual", cres, 1e-8))
    return checks


def verify_rotor(sc):
    rotor = rotor_params(sc)
    checks = []
    _, G_ia, G_ab = models.rotor_mass_matrix(rotor)
    K_err = 0.0
    G, _, _ = models.rotor_mass_matrix(rotor)
    rng = np.random.default_rng(1)
    for _ in range(50):
        xi, th = rng.normal(size=6), rng.normal()
        quad = 0.5 * xi @ G @ xi + th * (G_ia @ xi) + 0.5 * G_ab * th * th
        K_err = max(K_err, abs(quad - models.rotor_kinetic_energy(rotor, xi, th)))
    checks.append(Check("rotor kinetic energy identity", K_err, 1e-12))
    if not sc.controlled:
        setup = setup_run(sc)
        cfg = sim.IntegratorConfig(dt=sc.integrator["dt"], t_end=_window(sc, 1.0), event=lambda y: y[4], stop_at_event=True)
        traj = sim.integrate(setup.rhs, setup.state0, cfg)
        drift = sim.drift_report(traj, setup.invariants, names=setup.invariant_names)
        for name, rel in zip(drift.names, drift.relative):
            checks.append(Check(f"drift {name} (relative)", rel, 1e-8))
        return checks
    matching = control.matching_from_sigma(rotor, rho=sc.control.get("rho"))
    r_tau, r_rho = control.matching_residuals(matching, G_ia, G_ab)
    checks.append(Check("matching residual tau", r_tau, 1e-12))
    checks.append(Check("matching residual sigma/rho", r_rho * rotor.J1, 1e-12))
    states = _random_skate_states(rng, 20, scale=0.5)
    err = 0.0
    for z in states:
        x = np.append(z, rng.normal())
        a = control.closed_loop_rhs(rotor, x)
        b = control.closed_loop_rhs_framework(rotor, x, matching)
        err = max(err, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))))
    checks.append(Check("framework vs assembled closed loop", err, 1e-9))

    setup = setup_run(sc)
    cfg = sim.IntegratorConfig(dt=sc.integrator["dt"], t_end=_window(sc, 5.0))
    traj = sim.integrate(setup.rhs, setup.state0, cfg)
    tilde = sim.integrate(lambda t, y: control.tilde_vector_field(rotor, y), setup.state0[:5], cfg)
    checks.append(Check("closed loop vs matched system (sup-norm)", float(np.max(np.abs(traj.states[:, :5] - tilde.states))), 1e-8))
    drift = sim.drift_report(traj, setup.invariants, names=setup.invariant_names)
    for name, a, rel in zip(drift.names, drift.absolute, drift.relative):
        if name == "pi_tilde":
            checks.append(Check("drift pi_tilde (absolute)", a, 1e-10))
        else:
            checks.append(Check(f"drift shaped {name} (relative)", rel, 1e-8))
    return checks


def verify_veselova(sc):
    vp = veselova_params(sc)
    setup = setup_run(sc)
    checks = []
    cfg = sim.IntegratorConfig(dt=sc.integrator["dt"], t_end=_window(sc, 1.0))
    tq = sim.integrate(setup.rhs, setup.state0, cfg)
    omega0 = np.array(sc.initial["Omega"])
    gamma0 = np.array(sc.initial["Gamma"])
    to = sim.integrate(lambda t, y: oracle.veselova_full_rhs(vp, y, check=False), np.concatenate([omega0, gamma0]), cfg)
    system = models.veselova_system(vp, gamma0)
    mapped = np.array([np.concatenate([models.veselova_omega(system, y), y[2:]]) for y in tq.states])
    checks.append(Check("oracle equivalence (sup-norm)", float(np.max(np.abs(mapped - to.states))), 1e-6))
    drift = sim.drift_report(tq, setup.invariants, names=setup.invariant_names)
    for name, rel in zip(drift.names, drift.relative):
        checks.append(Check(f"drift {name} (relative)", rel, 1e-8))
    cres = float(max(abs(r[-1]) for r in (setup.row(0.0, y) for y in tq.states)))
    checks.append(Check("constraint Gamma . Omega", cres, 1e-10))
    return checks


def verify(sc):
    return {"skate": verify_skate, "skate_rotor": verify_rotor, "veselova": verify_veselova}[sc.model](sc)


# --- stability ---------------------------------------------------------------------


def equilibrium_zeta(eq):
    kind = eq["kind"]
    if kind == "sliding":
        return models.sliding_equilibrium(eq["Y0"])
    if kind == "spinning":
        return models.spinning_equilibrium(eq["Omega0"])
    return np.array(eq["zeta"])


def stability(sc, eq):
    """Linearization and energy-Casimir report at the requested equilibrium."""
    if sc.model == "veselova":
        raise ScenarioError("stability analysis is available for the skate models only")
    notes = []
    rotor = None
    if sc.model == "skate_rotor":
        rotor = rotor_params(sc)
        p = control.tilde_params(rotor) if sc.controlled else control.uncontrolled_params(rotor)
    else:
        p = skate_params(sc)
    zeta = equilibrium_zeta(eq)
    try:
        report = analysis.classify_equilibrium(p, zeta)
    except ValueError as exc:
        raise ScenarioError(f"equilibrium: {exc}") from None
    if eq["kind"] == "sliding":
        c = analysis.sliding_multipliers(p, eq["Y0"])
    elif eq["kind"] == "spinning":
        c = analysis.spinning_multipliers(p, eq["Omega0"])
    elif "multipliers" in eq:
        c = np.array(eq["multipliers"])
    else:
        c = analysis.auto_multipliers(models.skate_invariant_set(p), zeta)
        notes.append("multipliers from least squares")
    field_fn = lambda z: models.skate_vector_field(p, z)
    try:
        cert = analysis.energy_casimir_certificate(models.skate_invariant_set(p), zeta, c, field_fn=field_fn)
    except (analysis.StationarityError, analysis.DependentGradientsError) as exc:
        raise ScenarioError(f"equilibrium: {exc}") from None
    thresholds = {}
    try:
        thresholds["spinning_threshold"] = analysis.spinning_threshold(p)
    except analysis.ThresholdConditionError as exc:
        notes.append(str(exc))
    if rotor is not None:
        thresholds["sigma_stability_bound"] = analysis.sigma_stability_bound(rotor)
    return {"report": report, "certificate": cert, "thresholds": thresholds, "notes": notes, "params": p}


# --- sweeps -----------------------------------------------------------------------

SWEEP_PARAMETERS = ("Omega0", "sigma", "Y0")


def sweep_point(doc, parameter, value):
    """Certificate verdict at one grid point; ``doc`` is a scenario dict (picklable)."""
    from .scenario import from_dict

    sc = from_dict(doc)
    if parameter == "sigma":
        if sc.model != "skate_rotor":
            raise ScenarioError("sigma sweeps need model 'skate_rotor'")
        sc.control = {"mode": "matched", "sigma": value}
        eq = {"kind": "sliding", "Y0": (sc.equilibrium or {}).get("Y0", 1.0)}
    elif parameter == "Omega0":
        eq = {"kind": "spinning", "Omega0": value}
    else:
        eq = {"kind": "sliding", "Y0": value}
    res = stability(sc, eq)
    cert = res["certificate"]
    return {
        "value": value,
        "ec_verdict": cert.ec_verdict,
        "linear_verdict": cert.linear_verdict,
        "max_real_eig": float(np.max(np.real(cert.eigenvalues))),
        "restricted_min": float(np.min(cert.restricted_eigenvalues)),
        "restricted_max": float(np.max(cert.restricted_eigenvalues)),
    }


def sweep_threshold(sc, parameter):
    if parameter == "Omega0":
        p = skate_params(sc) if sc.model == "skate" else (
            control.tilde_params(rotor_params(sc)) if sc.controlled else control.uncontrolled_params(rotor_params(sc))
        )
        try:
            return analysis.spinning_threshold(p)
        except analysis.ThresholdConditionError:
            return math.nan
    if parameter == "sigma":
        return analysis.sigma_stability_bound(rotor_params(sc))
    return math.nan


def transitions(rows):
    """Grid brackets ``(a, b)`` where the energy-Casimir verdict changes."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a["ec_verdict"] != b["ec_verdict"]:
            out.append((a["value"], b["value"]))
    return out
