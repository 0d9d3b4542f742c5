import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_zeta
from nhep import hamel, liealg, models, oracle, sim


class TestParams:
    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            models.SkateParams(m=-1, l=0.8, g=9.8, I1=0.35, I2=0.35, I3=0.004)
        with pytest.raises(ValueError, match="I2 > I3"):
            models.SkateParams(m=2, l=0.8, g=9.8, I1=0.35, I2=0.004, I3=0.35)
        with pytest.raises(ValueError):
            models.SkateParams(m=2, l=0.8, g=9.8, I1=-2.0, I2=0.35, I3=0.004)
        models.SkateParams(m=2, l=0.8, g=9.8, I1=-2.0, I2=0.35, I3=0.004, shaped=True)
        with pytest.raises(ValueError):
            models.RotorParams(models.SkateParams.reference(), 0.005, 0.0025, 0.0025, sigma=0.0)

    def test_sigma_required_only_when_used(self, rotor):
        free = models.RotorParams(rotor.base, rotor.J1, rotor.J2, rotor.J3)
        with pytest.raises(ValueError):
            free.require_sigma()


class TestFrame:
    def test_orthonormal(self, rng):
        for phi in rng.uniform(-np.pi, np.pi, 10):
            E = models.skate_basis([0.0, np.sin(phi), np.cos(phi)])
            assert_allclose(E.T @ E, np.eye(6), atol=1e-15)

    def test_upright_columns(self):
        E = models.skate_basis(liealg.E3)
        assert_allclose(E[:, 1], liealg.se3(liealg.E3, np.zeros(3)))
        assert_allclose(E[:, 3], liealg.se3(-liealg.E2, np.zeros(3)))

    def test_dbasis_structure(self):
        dE = models.skate_dbasis(liealg.E3)
        for j in range(3):
            assert_allclose(dE[j][:3, 1], np.eye(3)[j])
        assert_allclose(dE[:, :, 0], 0.0)
        assert_allclose(dE[:, :, 2], 0.0)


class TestQuasivelocities:
    def test_sliding_and_spinning(self):
        zeta, res = models.quasivelocities_from_full(models.FullState(np.zeros(3), 1.5 * liealg.E1, liealg.E3))
        assert_allclose(zeta, models.sliding_equilibrium(1.5))
        assert_allclose(res, 0.0)
        zeta, res = models.quasivelocities_from_full(models.FullState(4.0 * liealg.E3, np.zeros(3), liealg.E3))
        assert_allclose(zeta, models.spinning_equilibrium(4.0))

    @given(
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-3.0, 3.0),
    )
    def test_round_trip(self, v1, v2, v3, phi):
        zeta = np.array([v1, v2, v3, math.sin(phi), math.cos(phi)])
        full = models.zeta_to_full(zeta)
        back, res = models.quasivelocities_from_full(full)
        assert_allclose(back, zeta, atol=1e-12)
        assert_allclose(res, 0.0, atol=1e-12)
        assert full.Gamma[0] == 0.0

    def test_violation_warns(self):
        bad = models.FullState(np.array([0.0, 1.0, 0.0]), np.zeros(3), liealg.E3)
        with pytest.warns(UserWarning, match="violates"):
            _, res = models.quasivelocities_from_full(bad)
        assert abs(res[0]) == 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            models.quasivelocities_from_full(bad, warn=False)


class TestVectorField:
    def test_equilibria(self, skate):
        assert_allclose(models.skate_vector_field(skate, models.sliding_equilibrium(1.0)), 0.0)
        assert_allclose(models.skate_vector_field(skate, models.spinning_equilibrium(3.0)), 0.0)

    def test_tilt_acceleration(self, skate):
        z = np.array([0.0, 0.0, 1.0, math.sin(0.1), math.cos(0.1)])
        dv1 = models.skate_vector_field(skate, z)[0]
        assert dv1 == pytest.approx(skate.mgl * math.sin(0.1) / skate.Ibar1, rel=1e-14)
        # the quoted hand value 0.9606 is rounded; the closed form gives 0.96036
        assert dv1 == pytest.approx(0.96036072, abs=1e-8)
        assert dv1 == pytest.approx(0.9606, abs=5e-4)

    def test_matches_framework(self, skate, rng):
        system = models.skate_system(skate)
        err = max(np.max(np.abs(models.hamel_zeta_rhs(system, z) - models.skate_vector_field(skate, z))) for z in random_zeta(rng, 1000))
        assert err <= 1e-12

    def test_closed_form_mass_matrix(self, skate, rng):
        system = models.skate_system(skate)
        z = random_zeta(rng)
        g = models.gamma_of(z)
        assert_allclose(models.skate_hamel_mass(skate, z), hamel.hamel_mass_matrix(system, g)[:3, :3], atol=1e-14)
        gdot = np.cross(g, models.zeta_to_full(z).Omega)
        assert_allclose(models.skate_hamel_mass_rate(skate, z), hamel.mass_matrix_rate(system, g, gdot)[:3, :3], atol=1e-13)

    def test_gamma_norm_drift(self, skate):
        zeta0, _ = models.quasivelocities_from_full(models.tilt_initial_condition(0.1))
        cfg = sim.IntegratorConfig(dt=1e-3, t_end=10.0)
        traj = sim.integrate(lambda t, y: models.skate_vector_field(skate, y), zeta0, cfg)
        norms = traj.states[:, 3] ** 2 + traj.states[:, 4] ** 2
        assert np.max(np.abs(norms - 1.0)) <= 1e-10


class TestInvariants:
    def test_values_at_equilibria(self, skate):
        _, C1, _, C3 = models.skate_invariants(skate, models.spinning_equilibrium(2.5))
        assert C1 == pytest.approx(skate.I3 * 2.5)
        assert C3 == pytest.approx(0.5)
        E, C1, C2, _ = models.skate_invariants(skate, models.sliding_equilibrium(1.3))
        assert C1 == 0.0 and C2 == pytest.approx(1.3)

    def test_energy_matches_framework(self, skate, rng):
        system = models.skate_system(skate)
        for z in random_zeta(rng, 10):
            assert models.skate_invariants(skate, z)[0] == pytest.approx(hamel.constrained_energy(system, z[:3], models.gamma_of(z)), rel=1e-13)

    def test_gradients_match_finite_differences(self, skate, rng):
        from nhep.analysis import jacobian

        for z in random_zeta(rng, 5, scale=1.0):
            fd = jacobian(lambda x: models.skate_invariants(skate, x), z)
            assert_allclose(models.skate_invariant_gradients(skate, z), fd, atol=1e-7)

    def test_invariants_are_first_integrals(self, skate, rng):
        # dI/dt = grad I . f vanishes pointwise for the corrected C2 coefficient
        for z in random_zeta(rng, 50, scale=1.0):
            rate = models.skate_invariant_gradients(skate, z) @ models.skate_vector_field(skate, z)
            assert_allclose(rate, 0.0, atol=1e-12)

    def test_printed_c2_coefficient_is_not_conserved(self, skate):
        zeta0, _ = models.quasivelocities_from_full(models.tilt_initial_condition(0.1))
        cfg = sim.IntegratorConfig(dt=1e-4, t_end=1.0)
        traj = sim.integrate(lambda t, y: models.skate_vector_field(skate, y), zeta0, cfg)
        good = sim.drift_report(traj, lambda y: models.skate_invariants(skate, y)[2:3])
        bad = sim.drift_report(traj, lambda y: models.skate_invariants(skate, y, printed_c2=True)[2:3])
        assert good.relative[0] <= 1e-8
        assert bad.relative[0] > 1e-2


class TestRotor:
    def test_mass_matrix(self, rotor):
        G, G_ia, G_ab = models.rotor_mass_matrix(rotor)
        assert G[0, 0] == pytest.approx(2.275, abs=1e-12)
        assert_allclose(G, G.T)
        assert_allclose(G_ia, [rotor.J1, 0, 0, 0, 0, 0])
        assert G_ab == rotor.J1

    def test_kinetic_energy_identity(self, rotor, rng):
        G, G_ia, G_ab = models.rotor_mass_matrix(rotor)
        for _ in range(100):
            xi, th = rng.normal(size=6), rng.normal()
            quad = 0.5 * xi @ G @ xi + xi @ G_ia * th + 0.5 * G_ab * th * th
            assert models.rotor_kinetic_energy(rotor, xi, th) == pytest.approx(quad, rel=1e-12, abs=1e-14)


class TestVeselova:
    @pytest.fixture
    def params(self):
        return models.VeselovaParams(1.0, 2.0, 3.0, w=(0.3, -0.2, 0.5))

    def test_frame_is_orthonormal_with_gamma_last(self):
        g = np.array([0.1, 0.7, -0.5])
        frame = models.veselova_frame(models.veselova_seed(g))
        E = frame.basis(g)
        u = g / np.linalg.norm(g)
        assert_allclose(E[:, :2].T @ E[:, :2], np.eye(2), atol=1e-15)
        assert_allclose(E[:, :2].T @ u, 0.0, atol=1e-15)
        assert_allclose(E[:, 2], g)

    def test_seed_switches_near_e1(self):
        assert_allclose(models.veselova_seed([1.0, 0.1, 0.0]), liealg.E2)
        assert_allclose(models.veselova_seed([0.1, 1.0, 0.0]), liealg.E1)

    def test_constraint_is_structural(self, params, rng):
        g = rng.normal(size=3)
        system = models.veselova_system(params, g)
        omega = models.veselova_omega(system, np.concatenate([rng.normal(size=2), g]))
        assert abs(omega @ g) <= 1e-14

    def test_spherical_free_body_keeps_omega(self):
        params = models.VeselovaParams(2.0, 2.0, 2.0)
        g = np.array([0.0, 0.6, 0.8])
        system = models.veselova_system(params, g)
        omega = np.cross(g, [1.0, 0.2, -0.3])
        state = models.veselova_state_from_omega(system, omega, g)
        cfg = sim.IntegratorConfig(dt=1e-3, t_end=1.0)
        traj = sim.integrate(lambda t, y: models.veselova_rhs(system, y), state, cfg)
        final = models.veselova_omega(system, traj.states[-1])
        assert_allclose(final, omega, atol=1e-10)

    def test_matches_multiplier_form(self, params):
        g = np.array([0.0, 0.6, 0.8])
        omega = np.array([0.3, 0.1, -0.1])
        omega = omega - (omega @ g) * g
        system = models.veselova_system(params, g)
        state = models.veselova_state_from_omega(system, omega, g)
        rhs = models.veselova_rhs(system, state)
        E = system.frame.basis(g)
        dE = np.tensordot(rhs[2:], system.frame.dbasis(g), axes=1)
        omega_dot = E[:, :2] @ rhs[:2] + dE[:, :2] @ state[:2]
        ref = oracle.veselova_full_rhs(params, np.concatenate([omega, g]))
        assert_allclose(np.concatenate([omega_dot, rhs[2:]]), ref, atol=1e-13)
