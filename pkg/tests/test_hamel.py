import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_zeta
from nhep import hamel, liealg, models


@pytest.fixture
def system(skate):
    return models.skate_system(skate)


def tilted(phi):
    return np.array([0.0, np.sin(phi), np.cos(phi)])


def identity_frame(n=6, k=3):
    eye = np.eye(n)
    return hamel.HamelFrame(basis=lambda g: eye, dbasis=lambda g: np.zeros((3, n, n)), n_total=n, n_free=k)


class TestStructureConstants:
    def test_skate_contraction_matches_printed_matrix(self, system, rng):
        # the printed matrix is indexed (beta, alpha) relative to C[k, alpha, beta]
        for phi in (0.0, 0.3, -1.0):
            g = tilted(phi)
            C = hamel.structure_constants(system.frame, g)[:, :3, :3]
            p = rng.normal(size=6)
            M = np.einsum("kab,k->ab", C, p)
            printed = np.array([[0, -p[3], 0], [p[3], 0, p[5]], [0, -p[5], 0]])
            assert_allclose(M.T, printed, atol=1e-14)

    def test_antisymmetry(self, system):
        C = hamel.structure_constants(system.frame, tilted(0.7))
        assert_allclose(C, -np.transpose(C, (0, 2, 1)), atol=1e-15)

    def test_identity_frame_gives_fixed_constants(self):
        C = hamel.structure_constants(identity_frame(), None)
        assert_allclose(C, hamel.fixed_structure_constants(liealg.se3_bracket, 6), atol=0)

    def test_singular_frame_raises(self):
        frame = hamel.HamelFrame(basis=lambda g: np.zeros((6, 6)), dbasis=lambda g: np.zeros((3, 6, 6)), n_total=6, n_free=3)
        with pytest.raises(hamel.SingularFrameError):
            hamel.structure_constants(frame, tilted(0.1))
        with pytest.raises(hamel.SingularFrameError):
            models.veselova_frame(liealg.E1).basis(np.zeros(3))


class TestCurvature:
    def test_constant_frame_has_zero_F(self):
        frame = identity_frame()
        F = hamel.curvature_F(frame, tilted(0.2), np.ones((3, 3)))
        assert_allclose(F, 0.0)

    def test_skate_contraction_closed_form(self, system, rng):
        for z in random_zeta(rng, 20):
            v, g = z[:3], models.gamma_of(z)
            mu = hamel.body_momentum(system, v, g)
            xg = liealg.advect_action(hamel.checked_basis(system.frame, g)[:, :3] @ v, g)
            got = hamel.curvature_F_contraction(system.frame, g, mu, xg)
            # printed form (G3 Pi2 - G2 Pi3) v1 carries the opposite sign of xi G
            Pi = mu[:3]
            expect = np.array([0.0, -(g[2] * Pi[1] - g[1] * Pi[2]) * v[0], 0.0])
            assert_allclose(got, expect, atol=1e-13)

    def test_full_tensor_matches_contraction(self, system, rng):
        z = random_zeta(rng)
        v, g = z[:3], models.gamma_of(z)
        E = hamel.checked_basis(system.frame, g)
        mu = hamel.body_momentum(system, v, g)
        p = E.T @ mu
        F = hamel.curvature_F(system.frame, g, hamel.action_coefficients(system, g))
        xg = liealg.advect_action(E[:, :3] @ v, g)
        assert_allclose(np.einsum("iab,i,b->a", F, p, v), hamel.curvature_F_contraction(system.frame, g, mu, xg), atol=1e-13)

    @pytest.mark.parametrize("model", ["skate", "veselova"])
    def test_contraction_matches_finite_difference(self, model, skate, rng):
        if model == "skate":
            frame, g = models.skate_frame(), tilted(0.4)
        else:
            g = np.array([0.3, -0.5, 0.8])
            frame = models.veselova_frame(models.veselova_seed(g))
        n = frame.n_total
        mu, xi = rng.normal(size=n), rng.normal(size=3)
        xg = np.cross(xi, g)
        got = hamel.curvature_F_contraction(frame, g, mu, xg)
        errs = []
        for eps in (1e-4, 1e-5):
            fd = (mu @ frame.basis(g + eps * xg) - mu @ frame.basis(g - eps * xg))[: frame.n_free] / (2 * eps)
            errs.append(np.max(np.abs(fd - got)))
        assert max(errs) < 1e-7

    @pytest.mark.parametrize("h", [1e-4, 1e-5])
    def test_dbasis_central_difference(self, h):
        g = np.array([0.2, -0.6, 0.7])
        frames = [models.skate_frame(), models.veselova_frame(models.veselova_seed(g))]
        for frame in frames:
            dE = frame.dbasis(g)
            for j in range(3):
                step = np.zeros(3)
                step[j] = h
                fd = (frame.basis(g + step) - frame.basis(g - step)) / (2 * h)
                # O(h^2) truncation; the skate frame is linear so only rounding remains
                assert np.max(np.abs(fd - dE[j])) < 50 * h * h + 1e-9

    def test_B_is_C_plus_F(self, system):
        t = hamel.reduced_tensors(system, tilted(0.9))
        assert np.array_equal(t.B, t.C + t.F)


class TestReducedRhs:
    def test_printed_B_contraction(self, skate, system, rng):
        # the printed vector is the negated B p v of this convention; both give the same dp/dt
        for z in random_zeta(rng, 10):
            v, g = z[:3], models.gamma_of(z)
            pdot, _ = hamel.reduced_rhs(system, v, g)
            v1, v2, v3, G2, G3 = z
            ml = skate.m * skate.l
            printed = np.array([(skate.Ibar2 - skate.I3) * G2 * G3 * v2**2 + ml * G3 * v2 * v3, ml * G3 * v3 * v1, -ml * G3 * v1 * v2])
            K = skate.mgl * np.array([G2, 0.0, 0.0])
            assert_allclose(pdot, printed + K, atol=1e-12)

    def test_matches_closed_form_field(self, skate, system, rng):
        for z in random_zeta(rng, 1000):
            got = models.hamel_zeta_rhs(system, z)
            assert np.max(np.abs(got - models.skate_vector_field(skate, z))) <= 1e-12

    def test_upright_rest_has_zero_rate(self, system):
        pdot, gdot = hamel.reduced_rhs(system, np.zeros(3), liealg.E3)
        assert_allclose(pdot, 0.0)
        assert_allclose(gdot, 0.0)

    def test_gamma_rate_is_gamma_cross_omega(self, system, rng):
        z = random_zeta(rng)
        _, gdot = hamel.reduced_rhs(system, z[:3], models.gamma_of(z))
        full = models.zeta_to_full(z)
        assert_allclose(gdot, np.cross(full.Gamma, full.Omega), atol=1e-14)


class TestAccelerations:
    def test_recovers_closed_form(self, skate, system, rng):
        z = random_zeta(rng)
        g = models.gamma_of(z)
        pdot = models.skate_momentum_rates(skate, z)
        assert_allclose(hamel.solve_accelerations(system, z[:3], g, pdot), models.skate_vector_field(skate, z)[:3], atol=1e-12)

    def test_constant_mass_and_zero_rate(self, skate):
        sys0 = hamel.ReducedSystem(
            frame=identity_frame(),
            G_body=models.skate_mass_matrix(skate),
            potential=lambda g: 0.0,
            dpotential=lambda g: np.zeros(3),
            bracket=liealg.se3_bracket,
            momentum_K=liealg.momentum_K,
            advect_action=liealg.advect_action,
        )
        assert_allclose(hamel.solve_accelerations(sys0, np.array([1.0, 2.0, 3.0]), liealg.E3, np.zeros(3)), 0.0)

    def test_spd_solve_residual(self, system, rng):
        z = random_zeta(rng)
        g = models.gamma_of(z)
        pdot = rng.normal(size=3)
        vdot = hamel.solve_accelerations(system, z[:3], g, pdot)
        G = hamel.hamel_mass_matrix(system, g)[:3, :3]
        Gdot = hamel.mass_matrix_rate(system, g, np.cross(g, hamel.checked_basis(system.frame, g)[:3, :3] @ z[:3]))[:3, :3]
        assert np.max(np.abs(G @ vdot + Gdot @ z[:3] - pdot)) <= 1e-12

    def test_indefinite_mass_matrix_raises(self, skate):
        bad = models._skate_system(skate, -np.eye(6))
        with pytest.raises(hamel.MassMatrixError):
            hamel.vector_field(bad, np.ones(3), liealg.E3)


class TestEnergy:
    def test_sliding_value(self, system):
        assert hamel.constrained_energy(system, np.array([0.0, 0.0, 1.0]), liealg.E3) == pytest.approx(16.68, abs=1e-12)

    def test_rest_is_potential(self, skate, system):
        assert hamel.constrained_energy(system, np.zeros(3), liealg.E3) == pytest.approx(skate.mgl)

    def test_mass_matrix_symmetric(self, system, rng):
        for z in random_zeta(rng, 20):
            G = hamel.hamel_mass_matrix(system, models.gamma_of(z))
            assert np.max(np.abs(G - G.T)) <= 1e-14 * np.max(np.abs(G))

    def test_conserved_by_framework_flow(self, skate, system):
        from nhep import sim

        zeta0, _ = models.quasivelocities_from_full(models.tilt_initial_condition(0.1))
        cfg = sim.IntegratorConfig(dt=1e-3, t_end=1.0)
        traj = sim.integrate(lambda t, y: models.hamel_zeta_rhs(system, y), zeta0, cfg)
        energy = [hamel.constrained_energy(system, y[:3], models.gamma_of(y)) for y in traj.states]
        assert np.max(np.abs(np.array(energy) - energy[0])) / abs(energy[0]) <= 1e-8
