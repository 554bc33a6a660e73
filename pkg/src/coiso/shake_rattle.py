"""Geometric SHAKE and RATTLE.

One SHAKE step from z:

    z+      = Phi(mu, z)          (slide along the fiber)
    z_minus = Psi_h(z+)           with mu chosen so g(z_minus) = 0

and RATTLE post-processes z_minus back onto the hidden constraint set
by a second fiber slide:

    z1 = Phi(sigma, z_minus)      with rho(z1) = 0.

The launch multiplier is solved in the scaled form mu = h * lambda, so
the launch Jacobian tends to the O(1) nondegeneracy matrix as h -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    ConstraintSet,
    constraint_residual,
    hidden_residual,
    project_onto_M,
)
from .errors import (
    CoisoError,
    NonConvergence,
    SingularJacobian,
    SpuriousSolution,
    StepFailed,
)
from .fiber import fiber_map
from .phase import HamiltonianSystem, PhasePoint
from .underlying import NewtonConfig, OneStepMethod, newton_solve


@dataclass(frozen=True)
class StepRecord:
    """Output of one step: SHAKE landing point, optional RATTLE point."""

    index: int
    z_minus: PhasePoint
    z: PhasePoint | None
    lam: np.ndarray          # launch multipliers, scaled form mu = h * lambda
    sigma: np.ndarray | None  # projection multipliers (RATTLE only)
    g_residual: float
    rho_residual: float
    energy: float

    @property
    def point(self) -> PhasePoint:
        """The point to continue from: RATTLE output when present."""
        return self.z if self.z is not None else self.z_minus


@dataclass
class Trajectory:
    records: list[StepRecord] = field(default_factory=list)
    h: float = 0.0
    method: str = ""
    mode: str = ""

    def __len__(self):
        return len(self.records)

    def points(self) -> list[PhasePoint]:
        return [r.point for r in self.records]

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])


def _nearest_scalar_root(F, radius: float, n: int = 65) -> float | None:
    """Scan a scalar residual on [-radius, radius] for the sign-change
    bracket nearest zero; bisect it down and return the root, or None."""
    mus = np.linspace(-radius, radius, n)
    vals = [float(F(np.array([m]))[0]) for m in mus]
    brackets = [(mus[i], mus[i + 1]) for i in range(n - 1)
                if vals[i] * vals[i + 1] < 0.0]
    if not brackets:
        return None
    a, b = min(brackets, key=lambda ab: abs(ab[0] + ab[1]))
    fa = float(F(np.array([a]))[0])
    for _ in range(52):
        c = 0.5 * (a + b)
        fc = float(F(np.array([c]))[0])
        if fa * fc <= 0.0:
            b = c
        else:
            a, fa = c, fc
        if b - a < 1e-13 * max(1.0, radius):
            break
    return 0.5 * (a + b)


def launch(sys: HamiltonianSystem, cs: ConstraintSet, method: OneStepMethod,
           h: float, z: PhasePoint, cfg: NewtonConfig = NewtonConfig(),
           mu0: np.ndarray | None = None,
           _allow_retry: bool = True) -> tuple[np.ndarray, PhasePoint]:
    """Solve the sliding equation g(Psi_h(Phi(mu, z))) = 0 for mu.

    Returns the scaled multiplier mu and the launch point z+ on the fiber
    through z.  Solutions whose fiber displacement exceeds a cap are
    rejected as spurious (a jump to another component of Mp); one retry
    seeds the solve from the half-step solution before giving up.
    """
    if h == 0.0:
        raise ValueError("launch requires h != 0")

    def F(mu):
        return constraint_residual(cs, method.step(sys, h, fiber_map(cs, mu, z), cfg))

    seed = np.zeros(cs.m) if mu0 is None else np.asarray(mu0, dtype=float)
    try:
        mu = newton_solve(F, seed, cfg=cfg)
    except (NonConvergence, SingularJacobian):
        raise
    xh = sys.vector_field(z).v
    cap = 10.0 * abs(h) * (1.0 + float(np.linalg.norm(xh)))
    # The sliding equation can have several roots along a compact fiber.
    # Newton from mu = 0 usually lands on the one nearest the start, but
    # when the converged multiplier is not O(h) (a start displaced far
    # along the fiber, or a near-miss of two roots) we scan for the
    # sign-change bracket nearest zero and re-solve from it, so the
    # selected launch point depends only on the fiber position, not on
    # the basin geometry.  Scalar constraints only; multi-constraint
    # problems keep the plain Newton solution.
    if cs.m == 1 and abs(float(mu[0])) > abs(h) * (1.0 + float(np.linalg.norm(xh))):
        radius = min(abs(float(mu[0])) * (1.0 + 1e-9), cap)
        near = _nearest_scalar_root(F, radius)
        if near is not None and abs(near) < abs(float(mu[0])):
            mu = newton_solve(F, np.array([near]), cfg=cfg)
    if float(np.linalg.norm(mu)) > cap:
        if _allow_retry:
            # homotopy retry: seed from the half-step solution
            mu_half, _ = launch(sys, cs, method, h / 2.0, z, cfg, _allow_retry=False)
            mu = newton_solve(F, mu_half, cfg=cfg)
            if float(np.linalg.norm(mu)) <= cap:
                return mu, fiber_map(cs, mu, z)
        raise SpuriousSolution(
            f"launch multiplier |mu| = {np.linalg.norm(mu):.3e} exceeds cap {cap:.3e}"
        )
    return mu, fiber_map(cs, mu, z)


def shake_step(sys: HamiltonianSystem, cs: ConstraintSet, method: OneStepMethod,
               h: float, z: PhasePoint, cfg: NewtonConfig = NewtonConfig(),
               index: int = 0) -> StepRecord:
    """One geometric SHAKE step; output lands on M with an O(h) hidden offset."""
    mu, z_plus = launch(sys, cs, method, h, z, cfg)
    z_minus = method.step(sys, h, z_plus, cfg)
    return StepRecord(
        index=index,
        z_minus=z_minus,
        z=None,
        lam=mu,
        sigma=None,
        g_residual=float(np.max(np.abs(constraint_residual(cs, z_minus)))),
        rho_residual=float(np.max(np.abs(hidden_residual(sys, cs, z_minus)))),
        energy=sys.energy(z_minus),
    )


def project_to_hidden(sys: HamiltonianSystem, cs: ConstraintSet, z: PhasePoint,
                      cfg: NewtonConfig = NewtonConfig()) -> tuple[np.ndarray, PhasePoint]:
    """Fiber projection onto Mp: find sigma with rho(Phi(sigma, z)) = 0."""

    def F(sigma):
        return hidden_residual(sys, cs, fiber_map(cs, sigma, z))

    sigma = newton_solve(F, np.zeros(cs.m), cfg=cfg)
    return sigma, fiber_map(cs, sigma, z)


def rattle_step(sys: HamiltonianSystem, cs: ConstraintSet, method: OneStepMethod,
                h: float, z: PhasePoint, cfg: NewtonConfig = NewtonConfig(),
                index: int = 0) -> StepRecord:
    """One geometric RATTLE step: SHAKE followed by the fiber projection."""
    rec = shake_step(sys, cs, method, h, z, cfg, index=index)
    sigma, z1 = project_to_hidden(sys, cs, rec.z_minus, cfg)
    return StepRecord(
        index=index,
        z_minus=rec.z_minus,
        z=z1,
        lam=rec.lam,
        sigma=sigma,
        g_residual=float(np.max(np.abs(constraint_residual(cs, z1)))),
        rho_residual=float(np.max(np.abs(hidden_residual(sys, cs, z1)))),
        energy=sys.energy(z1),
    )


def _initial_record(sys, cs, z0):
    return StepRecord(
        index=0,
        z_minus=z0,
        z=z0,
        lam=np.zeros(cs.m),
        sigma=np.zeros(cs.m),
        g_residual=float(np.max(np.abs(constraint_residual(cs, z0)))),
        rho_residual=float(np.max(np.abs(hidden_residual(sys, cs, z0)))),
        energy=sys.energy(z0),
    )


def integrate(sys: HamiltonianSystem, cs: ConstraintSet, method: OneStepMethod,
              mode: str, h: float, steps: int, z0: PhasePoint,
              cfg: NewtonConfig = NewtonConfig(),
              auto_project: bool = True) -> Trajectory:
    """Iterate SHAKE or RATTLE steps from z0.

    `mode` is "shake" (z0 on M; iterates carry an O(h) hidden-constraint
    offset) or "rattle" (z0 on Mp; when `auto_project` is set, an initial
    point within 1e-6 of Mp is projected onto it first).

    Raises StepFailed with the failing step index on any Newton failure.
    """
    if mode not in ("shake", "rattle"):
        raise ValueError(f"mode must be 'shake' or 'rattle', got {mode!r}")
    if steps < 0:
        raise ValueError("steps must be >= 0")

    g0 = float(np.max(np.abs(constraint_residual(cs, z0))))
    if g0 > cfg.tol:
        if not auto_project:
            raise CoisoError(f"initial point is off M: max |g| = {g0:.3e}")
        # Gauss-Newton projection in the ambient space; fiber slides cannot
        # change g, so an off-M start needs this (e.g. the published
        # hopf-gravity initial data, which sit at radius^2 = 0.98).
        z0 = project_onto_M(cs, z0, tol=cfg.tol)
    if mode == "rattle":
        rho0 = float(np.max(np.abs(hidden_residual(sys, cs, z0))))
        if rho0 > cfg.tol:
            if not auto_project:
                raise CoisoError(f"initial point is off Mp: max |rho| = {rho0:.3e}")
            _, z0 = project_to_hidden(sys, cs, z0, cfg)

    traj = Trajectory(h=h, method=method.name, mode=mode)
    traj.records.append(_initial_record(sys, cs, z0))
    z = z0
    step_fn = rattle_step if mode == "rattle" else shake_step
    for k in range(1, steps + 1):
        try:
            rec = step_fn(sys, cs, method, h, z, cfg, index=k)
        except (NonConvergence, SingularJacobian, SpuriousSolution) as exc:
            raise StepFailed(k, exc) from exc
        traj.records.append(rec)
        z = rec.point
    return traj
