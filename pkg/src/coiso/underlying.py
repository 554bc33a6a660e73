"""Unconstrained symplectic one-step methods and the shared Newton kernel.

The three methods exposed by name are the (q0, p1)-form symplectic Euler,
Stormer-Verlet, and the implicit midpoint rule.  All implicit stages are
solved with the damped Newton kernel below, seeded with an explicit Euler
predictor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonConvergence, SingularJacobian
from .phase import HamiltonianSystem, PhasePoint

_FD_JAC = float(np.sqrt(np.finfo(float).eps))
_COND_LIMIT = 1e14


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-11
    max_iter: int = 50
    damping: float = 1.0
    fd_scale: float = _FD_JAC

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def _fd_jacobian(F, x, fx, scale):
    n = x.size
    J = np.empty((fx.size, n))
    for j in range(n):
        h = scale * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += h
        J[:, j] = (F(xp) - fx) / h
    return J


def newton_solve(F: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                 jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 cfg: NewtonConfig = NewtonConfig()) -> np.ndarray:
    """Damped Newton iteration for F(x) = 0 in the max norm.

    The Jacobian comes from `jac` when given, forward differences
    otherwise.  On residual increase the step is halved down to 1/64
    before being accepted anyway (a short line search, not a globalized
    method).
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    fx = np.atleast_1d(np.asarray(F(x), dtype=float))
    res = float(np.max(np.abs(fx)))
    for it in range(cfg.max_iter):
        if res <= cfg.tol:
            return x
        J = (np.atleast_2d(np.asarray(jac(x), dtype=float)) if jac is not None
             else _fd_jacobian(F, x, fx, cfg.fd_scale))
        if J.shape[0] == J.shape[1]:
            cond = np.linalg.cond(J)
            if not np.isfinite(cond) or cond > _COND_LIMIT:
                raise SingularJacobian(
                    f"Newton Jacobian condition estimate {cond:.3e} exceeds {_COND_LIMIT:.0e}"
                )
            dx = np.linalg.solve(J, -fx)
        else:
            dx, *_ = np.linalg.lstsq(J, -fx, rcond=None)
        step = cfg.damping
        while True:
            x_new = x + step * dx
            f_new = np.atleast_1d(np.asarray(F(x_new), dtype=float))
            res_new = float(np.max(np.abs(f_new)))
            if res_new < res or step <= 1.0 / 64.0:
                break
            step *= 0.5
        x, fx, res = x_new, f_new, res_new
        if not np.all(np.isfinite(fx)):
            raise NonConvergence("Newton: non-finite residual", residual=res,
                                 iterations=it + 1)
    if res <= cfg.tol:
        return x
    raise NonConvergence(
        f"Newton did not converge in {cfg.max_iter} iterations",
        residual=res, iterations=cfg.max_iter,
    )


def symplectic_euler_step(sys: HamiltonianSystem, h: float, z: PhasePoint,
                          cfg: NewtonConfig = NewtonConfig()) -> PhasePoint:
    """Symplectic Euler in the (q0, p1) form:

        p1 = p0 - h H_q(q0, p1),  q1 = q0 + h H_p(q0, p1).

    Implicit in p1 only.
    """
    d = sys.d
    q0, p0 = z.q, z.p

    def F(p1):
        g = sys.grad(PhasePoint(q0, p1))
        return p1 - p0 + h * g[:d]

    jac = None
    if sys.hess_H is not None:
        def jac(p1):
            H = sys.hess(PhasePoint(q0, p1))
            return np.eye(d) + h * H[:d, d:]

    g0 = sys.grad(z)
    p1 = newton_solve(F, p0 - h * g0[:d], jac=jac, cfg=cfg)
    g1 = sys.grad(PhasePoint(q0, p1))
    return PhasePoint(q0 + h * g1[d:], p1)


def stormer_verlet_step(sys: HamiltonianSystem, h: float, z: PhasePoint,
                        cfg: NewtonConfig = NewtonConfig()) -> PhasePoint:
    """Stormer-Verlet (generalized leapfrog):

        p_half = p0 - (h/2) H_q(q0, p_half)
        q1     = q0 + (h/2) (H_p(q0, p_half) + H_p(q1, p_half))
        p1     = p_half - (h/2) H_q(q1, p_half)
    """
    d = sys.d
    q0, p0 = z.q, z.p

    def F_p(ph):
        g = sys.grad(PhasePoint(q0, ph))
        return ph - p0 + 0.5 * h * g[:d]

    jac_p = None
    jac_q = None
    if sys.hess_H is not None:
        def jac_p(ph):
            H = sys.hess(PhasePoint(q0, ph))
            return np.eye(d) + 0.5 * h * H[:d, d:]

    g0 = sys.grad(z)
    p_half = newton_solve(F_p, p0 - 0.5 * h * g0[:d], jac=jac_p, cfg=cfg)
    hp0 = sys.grad(PhasePoint(q0, p_half))[d:]

    def F_q(q1):
        g = sys.grad(PhasePoint(q1, p_half))
        return q1 - q0 - 0.5 * h * (hp0 + g[d:])

    if sys.hess_H is not None:
        def jac_q(q1):
            H = sys.hess(PhasePoint(q1, p_half))
            return np.eye(d) - 0.5 * h * H[d:, :d]

    q1 = newton_solve(F_q, q0 + h * hp0, jac=jac_q, cfg=cfg)
    p1 = p_half - 0.5 * h * sys.grad(PhasePoint(q1, p_half))[:d]
    return PhasePoint(q1, p1)


def implicit_midpoint_step(sys: HamiltonianSystem, h: float, z: PhasePoint,
                           cfg: NewtonConfig = NewtonConfig()) -> PhasePoint:
    """Implicit midpoint rule z1 = z0 + h X_H((z0 + z1)/2)."""
    d = sys.d
    z0 = z.z

    def xh(zv):
        g = sys.grad(PhasePoint.from_z(zv))
        return np.concatenate([g[d:], -g[:d]])

    def F(z1):
        return z1 - z0 - h * xh(0.5 * (z0 + z1))

    jac = None
    if sys.hess_H is not None:
        def jac(z1):
            H = sys.hess(PhasePoint.from_z(0.5 * (z0 + z1)))
            jac_xh = np.block(
                [[H[d:, :d], H[d:, d:]], [-H[:d, :d], -H[:d, d:]]]
            )
            return np.eye(2 * d) - 0.5 * h * jac_xh

    z1 = newton_solve(F, z0 + h * xh(z0), jac=jac, cfg=cfg)
    return PhasePoint.from_z(z1)


@dataclass(frozen=True)
class OneStepMethod:
    """A map (sys, h, z) -> z' approximating the time-h Hamiltonian flow."""

    name: str
    step: Callable[[HamiltonianSystem, float, PhasePoint, NewtonConfig], PhasePoint]
    order: int
    symmetric: bool


_METHODS = {
    "symplectic-euler": OneStepMethod("symplectic-euler", symplectic_euler_step, 1, False),
    "stormer-verlet": OneStepMethod("stormer-verlet", stormer_verlet_step, 2, True),
    "implicit-midpoint": OneStepMethod("implicit-midpoint", implicit_midpoint_step, 2, True),
}


def method_by_name(name: str) -> OneStepMethod:
    try:
        return _METHODS[name]
    except KeyError:
        raise ValueError(
            f"unknown method {name!r}; choose from {sorted(_METHODS)}"
        ) from None


def method_names() -> list[str]:
    return sorted(_METHODS)
