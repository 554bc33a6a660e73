"""Built-in constrained Hamiltonian problems.

Five fixtures:

* ``pendulum``          planar pendulum, holonomic circle constraint
* ``hopf-free``         harmonic (Hopf) constraint on S^3, kinetic H only
* ``hopf-gravity``      Hopf constraint with a linear potential -gv . q
* ``index1-model``      holonomic alpha = 0 with H depending on beta
* ``degenerate-index5`` a constraint chain of index 5; nondegeneracy fails

All exact fiber flows are installed.  Fiber parameters follow the package
convention X_f = (f_p, -f_q); for the Hopf constraint the flow is a
rotation by angle 2*lam in each (q_i, p_i) plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constraints import ConstraintSet, hidden_residual
from .errors import CoisoError
from .phase import HamiltonianSystem, PhasePoint

PROBLEM_NAMES = (
    "pendulum",
    "hopf-free",
    "hopf-gravity",
    "index1-model",
    "degenerate-index5",
)


@dataclass
class BuiltinProblem:
    name: str
    system: HamiltonianSystem
    constraints: ConstraintSet
    known_mp_test: Callable[[PhasePoint], bool]
    exact_solution: Optional[Callable[[PhasePoint, float], PhasePoint]] = None

    @property
    def d(self) -> int:
        return self.system.d

    def on_mp(self, z: PhasePoint, tol: float = 1e-9) -> bool:
        g = np.max(np.abs(self.constraints.residual(z)))
        rho = np.max(np.abs(hidden_residual(self.system, self.constraints, z)))
        return bool(g <= tol and rho <= tol)


def _rotation_fiber_flow(lam, z):
    """Exact flow of lam * X_g for g = |q|^2 + |p|^2 - 1: rotation by 2 lam."""
    th = 2.0 * float(lam[0])
    c, s = np.cos(th), np.sin(th)
    return PhasePoint(c * z.q + s * z.p, -s * z.q + c * z.p)


def _hopf_constraints() -> ConstraintSet:
    return ConstraintSet(
        m=1,
        g=lambda z: np.array([z.q @ z.q + z.p @ z.p - 1.0]),
        jac_g=lambda z: np.concatenate([2.0 * z.q, 2.0 * z.p])[None, :],
        fiber_flow=_rotation_fiber_flow,
        name="hopf",
    )


def _pendulum() -> BuiltinProblem:
    # H = |p|^2 / 2 + q_2, constraint |q|^2 - 1 = 0 (smooth form of the
    # unit-circle constraint).
    def hess(z):
        H = np.zeros((4, 4))
        H[2, 2] = H[3, 3] = 1.0
        return H

    sys = HamiltonianSystem(
        d=2,
        H=lambda z: 0.5 * float(z.p @ z.p) + float(z.q[1]),
        grad_H=lambda z: np.concatenate([[0.0, 1.0], z.p]),
        hess_H=hess,
        name="pendulum",
    )
    cs = ConstraintSet(
        m=1,
        g=lambda z: np.array([z.q @ z.q - 1.0]),
        jac_g=lambda z: np.concatenate([2.0 * z.q, np.zeros(2)])[None, :],
        fiber_flow=lambda lam, z: PhasePoint(z.q, z.p - 2.0 * float(lam[0]) * z.q),
        name="pendulum",
    )
    return BuiltinProblem(
        "pendulum", sys, cs,
        known_mp_test=lambda z: abs(z.q @ z.q - 1.0) < 1e-9 and abs(z.q @ z.p) < 1e-9,
    )


def _hopf_free() -> BuiltinProblem:
    def hess(z):
        H = np.zeros((4, 4))
        H[2, 2] = H[3, 3] = 1.0
        return H

    sys = HamiltonianSystem(
        d=2,
        H=lambda z: 0.5 * float(z.p @ z.p),
        grad_H=lambda z: np.concatenate([np.zeros(2), z.p]),
        hess_H=hess,
        name="hopf-free",
    )
    return BuiltinProblem(
        "hopf-free", sys, _hopf_constraints(),
        known_mp_test=lambda z: abs(z.q @ z.q + z.p @ z.p - 1.0) < 1e-9
        and abs(z.q @ z.p) < 1e-9,
        exact_solution=hopf_exact_solution,
    )


def _hopf_gravity(gv) -> BuiltinProblem:
    gv = np.asarray(gv, dtype=float)
    if gv.shape != (2,):
        raise ValueError("hopf-gravity expects a 2-vector gv")

    def hess(z):
        H = np.zeros((4, 4))
        H[2, 2] = H[3, 3] = 1.0
        return H

    sys = HamiltonianSystem(
        d=2,
        H=lambda z: 0.5 * float(z.p @ z.p) - float(gv @ z.q),
        grad_H=lambda z: np.concatenate([-gv, z.p]),
        hess_H=hess,
        name="hopf-gravity",
    )

    def mp_test(z):
        return (
            abs(z.q @ z.q + z.p @ z.p - 1.0) < 1e-8
            and abs(2.0 * (z.q @ z.p + gv @ z.p)) < 1e-8
        )

    return BuiltinProblem("hopf-gravity", sys, _hopf_constraints(), known_mp_test=mp_test)


def _index1_model() -> BuiltinProblem:
    # Coordinates (q, alpha; p, beta), omega = dq^dp + dalpha^dbeta.
    # H = p^2/2 + beta^2/2 + beta q so H_beta_beta = 1; the hidden
    # constraint is beta + q = 0 and the reduced system reads
    # qdot = p, pdot = -beta = q.
    def hess(z):
        H = np.zeros((4, 4))
        H[2, 2] = H[3, 3] = 1.0
        H[0, 3] = H[3, 0] = 1.0
        return H

    sys = HamiltonianSystem(
        d=2,
        H=lambda z: 0.5 * float(z.p[0] ** 2) + 0.5 * float(z.p[1] ** 2)
        + float(z.p[1] * z.q[0]),
        grad_H=lambda z: np.array([z.p[1], 0.0, z.p[0], z.p[1] + z.q[0]]),
        hess_H=hess,
        name="index1-model",
    )
    cs = ConstraintSet(
        m=1,
        g=lambda z: np.array([z.q[1]]),
        jac_g=lambda z: np.array([[0.0, 1.0, 0.0, 0.0]]),
        fiber_flow=lambda lam, z: PhasePoint(
            z.q, np.array([z.p[0], z.p[1] - float(lam[0])])
        ),
        name="index1",
    )
    return BuiltinProblem(
        "index1-model", sys, cs,
        known_mp_test=lambda z: abs(z.q[1]) < 1e-9 and abs(z.p[1] + z.q[0]) < 1e-9,
    )


def _degenerate_index5() -> BuiltinProblem:
    # Coordinates (q, qbar; p, pbar), H = p^2/2 + pbar q, g = qbar.
    # H restricted to a fiber is linear in pbar, so every fiber critical
    # point is degenerate; the hidden chain continues (p = 0, pbar = 0)
    # and the DAE has index 5.  Shipped as a negative fixture: the
    # nondegeneracy matrix is identically [0] on Mp = {q = 0}.
    def hess(z):
        H = np.zeros((4, 4))
        H[2, 2] = 1.0
        H[0, 3] = H[3, 0] = 1.0
        return H

    sys = HamiltonianSystem(
        d=2,
        H=lambda z: 0.5 * float(z.p[0] ** 2) + float(z.p[1] * z.q[0]),
        grad_H=lambda z: np.array([z.p[1], 0.0, z.p[0], z.q[0]]),
        hess_H=hess,
        name="degenerate-index5",
    )
    cs = ConstraintSet(
        m=1,
        g=lambda z: np.array([z.q[1]]),
        jac_g=lambda z: np.array([[0.0, 1.0, 0.0, 0.0]]),
        fiber_flow=lambda lam, z: PhasePoint(
            z.q, np.array([z.p[0], z.p[1] - float(lam[0])])
        ),
        name="degenerate-index5",
    )
    return BuiltinProblem(
        "degenerate-index5", sys, cs,
        known_mp_test=lambda z: abs(z.q[1]) < 1e-9 and abs(z.q[0]) < 1e-9,
    )


def builtin_problem(name: str, params: Optional[dict] = None) -> BuiltinProblem:
    """Construct a built-in problem by name.

    ``hopf-gravity`` accepts ``{"gv": [gx, gy]}`` (default (0, -1)).
    """
    params = dict(params or {})
    if name == "pendulum":
        return _pendulum()
    if name == "hopf-free":
        return _hopf_free()
    if name == "hopf-gravity":
        return _hopf_gravity(params.pop("gv", (0.0, -1.0)))
    if name == "index1-model":
        return _index1_model()
    if name == "degenerate-index5":
        return _degenerate_index5()
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")


def benchmark_initial_conditions() -> dict[str, PhasePoint]:
    """The three published hopf-gravity initial conditions z_a, z_b, z_c.

    All satisfy the hidden residual rho = 0 of the gv = (0, -1) problem to
    machine accuracy, but they sit on the sphere of radius sqrt(0.98), not
    the unit sphere, so g = -0.02 at each of them; integrate() restores
    g = 0 by its initial Gauss-Newton projection.
    """
    return {
        "z_a": PhasePoint(
            np.array([-0.78652612, -0.4043988]),
            np.array([-0.3880746864163783, 0.2173391755798215]),
        ),
        "z_b": PhasePoint(
            np.array([-0.4963624948824013, -0.7319740436366664]),
            np.array([-0.4275775933953260, 0.1225384882604160]),
        ),
        "z_c": PhasePoint(
            np.array([0.3477491188213400, -0.8131619010029159]),
            np.array([-0.4368285559113795, -0.0837800227934176]),
        ),
    }


def hopf_exact_solution(z0: PhasePoint, t: float) -> PhasePoint:
    """Exact hopf-free solution: simultaneous rotation of q and p.

    q(t) = R(t / (a - 1/a)) q0, same for p, with a = +-|p0|/|q0|.  The
    sign of a is resolved per call by matching the t-derivative at 0
    against the constrained vector field ((1 + lam) p0, -lam q0) with
    lam = |p0|^2 / (|q0|^2 - |p0|^2); the matching sign is deterministic
    for a given z0.
    """
    nq = float(np.linalg.norm(z0.q))
    np_ = float(np.linalg.norm(z0.p))
    if abs(nq - np_) < 1e-12:
        raise CoisoError(
            "hopf_exact_solution: |q0| = |p0| lies on an exceptional fiber "
            "(degenerate critical points; no unique solution)"
        )
    if abs(z0.q @ z0.p) > 1e-9 or abs(nq**2 + np_**2 - 1.0) > 1e-9:
        raise CoisoError("hopf_exact_solution: initial point is not on Mp")
    lam = np_**2 / (nq**2 - np_**2)
    target = np.concatenate([(1.0 + lam) * z0.p, -lam * z0.q])
    Jrot = np.array([[0.0, -1.0], [1.0, 0.0]])
    best = None
    for alpha in (np_ / nq, -np_ / nq):
        rate = 1.0 / (alpha - 1.0 / alpha)
        vel = rate * np.concatenate([Jrot @ z0.q, Jrot @ z0.p])
        err = np.linalg.norm(vel - target)
        if best is None or err < best[0]:
            best = (err, alpha, rate)
    _, alpha, rate = best
    th = rate * t
    c, s = np.cos(th), np.sin(th)
    R = np.array([[c, -s], [s, c]])
    return PhasePoint(R @ z0.q, R @ z0.p)
