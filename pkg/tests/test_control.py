import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_zeta
from nhep import control, models, sim


def rotor_state(rotor, zeta):
    return np.append(zeta, control.theta_dot_for_zero_pi(rotor, zeta[0]))


class TestMatching:
    def test_rho_value(self, rotor):
        m = control.matching_from_sigma(rotor)
        assert m.rho[0, 0] == pytest.approx(0.005 / 501, rel=1e-12)
        assert control.rho_scalar(rotor) == pytest.approx(9.98004e-6, rel=1e-6)

    def test_residuals_vanish(self, rotor):
        m = control.matching_from_sigma(rotor)
        _, G_ia, G_ab = models.rotor_mass_matrix(rotor)
        r_tau, r_inv = control.matching_residuals(m, G_ia, G_ab)
        assert r_tau <= 1e-12
        # the inverse condition involves 1/rho ~ 1e5, so compare at the scale of J1
        assert r_inv * rotor.J1 <= 1e-12

    def test_wrong_rho_is_detected(self, rotor):
        m = control.matching_from_sigma(rotor, rho=2e-5)
        _, G_ia, G_ab = models.rotor_mass_matrix(rotor)
        assert control.matching_residuals(m, G_ia, G_ab)[1] * rotor.J1 > 1e-3

    def test_T_in_moving_frame(self, rotor, rng):
        m = control.matching_from_sigma(rotor)
        z = random_zeta(rng)
        T = m.T(models.gamma_of(z))
        assert_allclose(T[0, :3], [-rotor.J1 / rotor.sigma, 0.0, 0.0], atol=1e-12)

    def test_sigma_equal_J1_rejected(self, rotor):
        with pytest.raises(ZeroDivisionError):
            control.matching_from_sigma(rotor.with_sigma(rotor.J1))


class TestControlLaw:
    def test_zero_at_equilibria(self, rotor):
        assert control.control_law_skate(rotor, models.sliding_equilibrium(1.0)) == 0.0
        assert control.control_law_skate(rotor, models.spinning_equilibrium(4.0)) == 0.0

    def test_equals_scaled_tilde_acceleration(self, rotor, rng):
        for z in random_zeta(rng, 20):
            u = control.control_law_skate(rotor, z)
            assert u == pytest.approx(rotor.J1**2 / rotor.sigma * control.tilde_vector_field(rotor, z)[0], rel=1e-12)

    def test_printed_form_with_shaped_denominator(self, rotor, rng):
        b = rotor.base
        tp = control.tilde_params(rotor)
        for z in random_zeta(rng, 5):
            v1, v2, v3, G2, G3 = z
            num = G2 * (tp.mgl + (b.m * b.l**2 + tp.I2 - tp.I3) * G3 * v2**2) + b.m * b.l * G3 * v2 * v3
            u = (rotor.J1 / rotor.sigma) * num / ((tp.I1 + b.m * b.l**2) / rotor.J1)
            assert control.control_law_skate(rotor, z) == pytest.approx(u, rel=1e-12)

    def test_tilt_value(self, rotor):
        z = np.array([0.0, 0.0, 1.0, math.sin(0.1), math.cos(0.1)])
        tp = control.tilde_params(rotor)
        expected = rotor.J1**2 / rotor.sigma * tp.mgl * math.sin(0.1) / tp.Ibar1
        assert control.control_law_skate(rotor, z) == pytest.approx(expected, rel=1e-13)

    def test_generic_matches_skate(self, rotor, rng):
        system = models.rotor_system(rotor)
        m = control.matching_from_sigma(rotor)
        _, _, G_ab = models.rotor_mass_matrix(rotor)
        for z in random_zeta(rng, 20):
            vdot = control.tilde_vector_field(rotor, z)[:3]
            u = control.control_law_generic(system, m, G_ab, z[:3], models.gamma_of(z), vdot)
            assert u[0] == pytest.approx(control.control_law_skate(rotor, z), rel=1e-10, abs=1e-14)

    def test_generic_zero_velocity(self, rotor):
        system = models.rotor_system(rotor)
        m = control.matching_from_sigma(rotor)
        u = control.control_law_generic(system, m, rotor.J1, np.zeros(3), np.array([0, 0.6, 0.8]), np.zeros(3))
        assert_allclose(u, 0.0)


class TestTilde:
    def test_tilde_inertia(self, rotor):
        assert_allclose(np.diag(control.tilde_inertia(rotor)), [-2.15, 0.3525, 0.0065], rtol=1e-12)

    def test_large_sigma_limit(self, rotor):
        I = np.diag(control.tilde_inertia(rotor.with_sigma(1e12)))
        assert_allclose(I, rotor.base.inertia + [0, rotor.J2, rotor.J3], rtol=1e-12)

    def test_pi_tilde(self, rotor):
        assert control.pi_tilde(rotor, 0.0, 0.0) == 0.0
        v1 = 0.37
        assert abs(control.pi_tilde(rotor, v1, control.theta_dot_for_zero_pi(rotor, v1))) <= 1e-18

    def test_pi_tilde_generic_matches(self, rotor, rng):
        m = control.matching_from_sigma(rotor)
        _, G_ia, G_ab = models.rotor_mass_matrix(rotor)
        z = random_zeta(rng)
        xi = models.zeta_to_full(z)
        xi6 = np.concatenate([xi.Omega, xi.Y])
        got = control.pi_tilde_generic(m, G_ia, G_ab, xi6, 0.8)[0]
        assert got == pytest.approx(control.pi_tilde(rotor, z[0], 0.8), rel=1e-10)


class TestClosedLoop:
    def test_equilibrium_is_fixed(self, rotor):
        assert_allclose(control.closed_loop_rhs(rotor, np.append(models.sliding_equilibrium(1.0), 0.0)), 0.0)

    def test_framework_assembly_agrees(self, rotor, rng):
        m = control.matching_from_sigma(rotor)
        for z in random_zeta(rng, 10, scale=0.5):
            x = np.append(z, rng.normal())
            a = control.closed_loop_rhs(rotor, x)
            b = control.closed_loop_rhs_framework(rotor, x, m)
            assert_allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_velocity_part_equals_tilde_field(self, rotor, rng):
        for z in random_zeta(rng, 10, scale=0.5):
            x = rotor_state(rotor, z)
            assert_allclose(control.closed_loop_rhs(rotor, x)[:5], control.tilde_vector_field(rotor, z), atol=1e-12)

    def test_pi_tilde_rate_vanishes(self, rotor, rng):
        rho = control.rho_scalar(rotor)
        for z in random_zeta(rng, 10, scale=0.5):
            x = np.append(z, rng.normal())
            d = control.closed_loop_rhs(rotor, x)
            assert abs(rotor.J1 * d[0] + rho * d[5]) <= 1e-12

    def test_trajectory_matches_tilde_system(self, rotor):
        zeta0, _ = models.quasivelocities_from_full(models.tilt_initial_condition(0.1))
        cfg = sim.IntegratorConfig(dt=1e-3, t_end=5.0)
        loop = sim.integrate(lambda t, y: control.closed_loop_rhs(rotor, y), rotor_state(rotor, zeta0), cfg)
        tilde = sim.integrate(lambda t, y: control.tilde_vector_field(rotor, y), zeta0, cfg)
        assert np.max(np.abs(loop.states[:, :5] - tilde.states)) <= 1e-8
        pi = [control.pi_tilde(rotor, y[0], y[5]) for y in loop.states]
        assert np.max(np.abs(pi)) <= 1e-10

    def test_uncontrolled_energy_conserved(self, rotor):
        free = models.RotorParams(rotor.base, rotor.J1, rotor.J2, rotor.J3)
        zeta0, _ = models.quasivelocities_from_full(models.tilt_initial_condition(0.1))
        cfg = sim.IntegratorConfig(dt=1e-4, t_end=1.0)
        traj = sim.integrate(lambda t, y: control.closed_loop_rhs(free, y, control=False), np.append(zeta0, 0.0), cfg)
        drift = sim.drift_report(traj, lambda y: [control.rotor_total_energy(free, y)])
        assert drift.relative[0] <= 1e-8
        # with zero torque the body evolves as a skate with inertias (I1, I2 + J2, I3 + J3)
        ref = sim.integrate(lambda t, y: models.skate_vector_field(control.uncontrolled_params(free), y), zeta0, cfg)
        assert np.max(np.abs(traj.states[:, :5] - ref.states)) <= 1e-9

    def test_total_energy_matches_geometric_kinetic_energy(self, rotor, rng):
        z = random_zeta(rng)
        x = np.append(z, 0.4)
        full = models.zeta_to_full(z)
        T = models.rotor_kinetic_energy(rotor, np.concatenate([full.Omega, full.Y]), 0.4)
        assert control.rotor_total_energy(rotor, x) == pytest.approx(T + rotor.base.mgl * z[4], rel=1e-12)
