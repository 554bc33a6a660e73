import numpy as np
import pytest

from coiso import (
    CoisoError,
    ConstraintSet,
    HamiltonianSystem,
    NewtonConfig,
    PhasePoint,
    StepFailed,
    constraint_residual,
    fiber_map,
    hidden_residual,
    integrate,
    launch,
    method_by_name,
    project_to_hidden,
    rattle_step,
    shake_step,
)

MIDPOINT = method_by_name("implicit-midpoint")


class TestLaunch:
    def test_closed_form_free_particle(self):
        # g = q, H = p^2/2, fiber slides p: the only landing on q = 0
        # after one step from (0, p0) kills the momentum entirely.
        sys = HamiltonianSystem(
            d=1,
            H=lambda z: 0.5 * z.p[0] ** 2,
            grad_H=lambda z: np.array([0.0, z.p[0]]),
            hess_H=lambda z: np.array([[0.0, 0.0], [0.0, 1.0]]),
        )
        cs = ConstraintSet(
            m=1,
            g=lambda z: np.array([z.q[0]]),
            jac_g=lambda z: np.array([[1.0, 0.0]]),
            fiber_flow=lambda lam, z: PhasePoint(z.q, z.p - lam),
        )
        z = PhasePoint(np.array([0.0]), np.array([0.8]))
        mu, z_plus = launch(sys, cs, MIDPOINT, 0.1, z)
        assert np.allclose(z_plus.z, [0.0, 0.0], atol=1e-10)
        z_minus = MIDPOINT.step(sys, 0.1, z_plus)
        assert abs(z_minus.q[0]) < 1e-11

    def test_rejects_h_zero(self, hopf_gravity, z_a):
        with pytest.raises(ValueError):
            launch(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT, 0.0, z_a)

    def test_multiplier_scales_with_h(self, hopf_gravity, z_a, cfg):
        from coiso import project_onto_M
        z = project_onto_M(hopf_gravity.constraints, z_a)
        mus = []
        for h in (0.1, 0.05):
            mu, _ = launch(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT, h, z, cfg)
            mus.append(abs(float(mu[0])))
        assert mus[1] < 0.7 * mus[0]


class TestSteps:
    def test_shake_lands_on_M(self, hopf_gravity, z_a, cfg):
        rec = shake_step(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT, 0.1, z_a, cfg)
        assert rec.g_residual <= 10 * cfg.tol
        assert rec.z is None
        assert rec.rho_residual > 1e-4  # hidden offset remains

    def test_rattle_lands_on_Mp(self, hopf_gravity, z_a, cfg):
        rec = rattle_step(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT, 0.1, z_a, cfg)
        assert rec.g_residual <= 10 * cfg.tol
        assert rec.rho_residual <= 10 * cfg.tol
        assert rec.z is not None

    def test_rattle_projection_moves_along_fiber(self, hopf_gravity, z_a, cfg):
        rec = rattle_step(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT, 0.1, z_a, cfg)
        # the RATTLE point is the SHAKE point slid by sigma along the fiber
        slid = fiber_map(hopf_gravity.constraints, rec.sigma, rec.z_minus)
        assert np.allclose(slid.z, rec.z.z, atol=1e-12)

    def test_rattle_symmetric_with_midpoint(self, hopf_gravity, z_a, cfg):
        sys, cs = hopf_gravity.system, hopf_gravity.constraints
        _, z0 = project_to_hidden(sys, cs, rattle_step(sys, cs, MIDPOINT, 0.1, z_a, cfg).z, cfg)
        fwd = rattle_step(sys, cs, MIDPOINT, 0.1, z0, cfg).z
        back = rattle_step(sys, cs, MIDPOINT, -0.1, fwd, cfg).z
        assert np.linalg.norm(back.z - z0.z) < 1e-8


class TestProjectToHidden:
    def test_idempotent_on_Mp(self, hopf_gravity, z_a, cfg):
        sys, cs = hopf_gravity.system, hopf_gravity.constraints
        sigma, z1 = project_to_hidden(sys, cs, z_a, cfg)
        sigma2, z2 = project_to_hidden(sys, cs, z1, cfg)
        assert np.max(np.abs(sigma2)) < 1e-9
        assert np.allclose(z2.z, z1.z, atol=1e-9)


class TestIntegrate:
    def test_zero_steps(self, hopf_gravity, z_a, cfg):
        traj = integrate(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT,
                         "rattle", 0.1, 0, z_a, cfg)
        assert len(traj) == 1

    def test_invalid_mode(self, hopf_gravity, z_a):
        with pytest.raises(ValueError):
            integrate(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT,
                      "leapfrog", 0.1, 1, z_a)

    def test_off_manifold_start_rejected_without_projection(self, hopf_gravity):
        z = PhasePoint(np.array([2.0, 0.0]), np.array([0.0, 0.1]))
        with pytest.raises(CoisoError):
            integrate(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT,
                      "rattle", 0.1, 1, z, auto_project=False)

    def test_residual_invariants(self, hopf_gravity, z_a, cfg):
        traj = integrate(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT,
                         "rattle", 0.1, 50, z_a, cfg)
        assert max(r.g_residual for r in traj.records) <= 10 * cfg.tol
        assert max(r.rho_residual for r in traj.records) <= 10 * cfg.tol

    def test_shake_equals_rattle_after_projection(self, pendulum, hopf_gravity, cfg):
        starts = {
            "pendulum": PhasePoint(np.array([1.0, 0.0]), np.array([0.0, 0.5])),
            "hopf-gravity": None,
        }
        for pb in (pendulum, hopf_gravity):
            z0 = starts[pb.name] if pb.name in starts and starts[pb.name] is not None \
                else PhasePoint(np.array([-0.78652612, -0.4043988]),
                                np.array([-0.3880746864163783, 0.2173391755798215]))
            sh = integrate(pb.system, pb.constraints, MIDPOINT, "shake", 0.1, 25, z0, cfg)
            ra = integrate(pb.system, pb.constraints, MIDPOINT, "rattle", 0.1, 25, z0, cfg)
            _, z_proj = project_to_hidden(pb.system, pb.constraints,
                                          sh.records[-1].z_minus, cfg)
            assert np.linalg.norm(z_proj.z - ra.records[-1].z.z) < 1e-8

    def test_fiber_start_is_irrelevant_for_shake(self, hopf_gravity, cfg, z_a):
        sys, cs = hopf_gravity.system, hopf_gravity.constraints
        base = integrate(sys, cs, MIDPOINT, "shake", 0.1, 40, z_a, cfg)
        z0 = base.records[0].point
        for lam in (0.2, -0.7):
            zd = fiber_map(cs, np.array([lam]), z0)
            other = integrate(sys, cs, MIDPOINT, "shake", 0.1, 40, zd, cfg)
            dev = max(np.linalg.norm(a.z_minus.z - b.z_minus.z)
                      for a, b in zip(base.records[1:], other.records[1:]))
            assert dev < 1e-8

    def test_step_failure_carries_index(self, degenerate):
        z0 = PhasePoint(np.array([0.3, 0.0]), np.array([0.2, 0.1]))
        with pytest.raises(StepFailed) as exc:
            integrate(degenerate.system, degenerate.constraints, MIDPOINT,
                      "shake", 0.1, 5, z0)
        assert exc.value.index == 1

    def test_trajectory_metadata(self, hopf_gravity, z_a, cfg):
        traj = integrate(hopf_gravity.system, hopf_gravity.constraints, MIDPOINT,
                         "rattle", 0.1, 3, z_a, cfg)
        assert traj.h == 0.1
        assert traj.method == "implicit-midpoint"
        assert traj.mode == "rattle"
        assert len(traj.points()) == 4
        assert traj.energies().shape == (4,)
