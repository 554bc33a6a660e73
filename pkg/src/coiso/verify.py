"""Quantitative verification utilities.

Hopf/stereographic projections for figure-style trajectory data, orbit
distance against the exact hopf-free solution, order estimation against
a self-convergent reference, symplecticity residuals through a
finite-difference step Jacobian, energy-drift statistics, and the fiber
criticality scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .constraints import ConstraintSet, tangent_basis_Mp
from .errors import CoisoError
from .phase import HamiltonianSystem, PhasePoint, TangentVector, omega
from .problems import BuiltinProblem, hopf_exact_solution
from .shake_rattle import Trajectory, integrate
from .underlying import NewtonConfig, OneStepMethod, method_by_name


def hopf_map(z: PhasePoint) -> tuple[complex, float]:
    """(z0, z1) -> (2 z0 conj(z1), |z0|^2 - |z1|^2) with z_k = q_k + i p_k.

    Maps 3-spheres onto 2-spheres and collapses each Hopf fiber to a point.
    """
    if z.d != 2:
        raise CoisoError("hopf_map requires d = 2")
    z0 = complex(z.q[0], z.p[0])
    z1 = complex(z.q[1], z.p[1])
    return 2.0 * z0 * z1.conjugate(), abs(z0) ** 2 - abs(z1) ** 2


def stereographic(zeta: complex, r: float) -> complex:
    """Stereographic chart zeta / (sqrt(|zeta|^2 + r^2) - r); pole excluded."""
    denom = np.sqrt(abs(zeta) ** 2 + r * r) - r
    if denom <= 1e-14:
        raise CoisoError("stereographic: input is at (or too near) the projection pole")
    return zeta / denom


def orbit_distance_hopf_free(z0: PhasePoint, z: PhasePoint,
                             n_grid: int = 4096) -> float:
    """Distance from z to the exact orbit {(R(t)q0, R(t)p0)} of hopf-free.

    Grid scan over the rotation angle followed by one local
    golden-section refinement pass around the best grid point.
    """
    # validates z0 (on Mp, non-exceptional)
    hopf_exact_solution(z0, 0.0)
    zq, zp = z.q, z.p

    def dist(theta):
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s], [s, c]])
        return float(np.sqrt(np.sum((R @ z0.q - zq) ** 2) + np.sum((R @ z0.p - zp) ** 2)))

    thetas = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    dists = [dist(t) for t in thetas]
    k = int(np.argmin(dists))
    lo = thetas[k] - 2.0 * np.pi / n_grid
    hi = thetas[k] + 2.0 * np.pi / n_grid
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1, f2 = dist(c1), dist(c2)
    for _ in range(80):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = dist(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = dist(c2)
    return min(f1, f2)


@dataclass
class OrderEstimate:
    slope: float
    h_values: np.ndarray
    errors: np.ndarray
    saturated: bool


def estimate_order(problem: BuiltinProblem, mode: str, method: OneStepMethod,
                   h_list: Sequence[float], T: float, z0: PhasePoint,
                   cfg: NewtonConfig = NewtonConfig(),
                   reference: Optional[PhasePoint] = None,
                   saturation_tol: float = 1e-10) -> OrderEstimate:
    """Global error at time T versus step size, and the log-log slope.

    The reference is RATTLE with implicit midpoint at h_ref = h_min / 64
    (self-convergence) unless an explicit reference point is supplied.
    Errors are measured in the ambient Euclidean norm.
    """
    h_list = list(h_list)
    if any(h <= 0 for h in h_list):
        raise ValueError("h_list entries must be positive")
    for h in h_list:
        n = T / h
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"T = {T} is not an integer multiple of h = {h}")
    if reference is None:
        h_ref = min(h_list) / 64.0
        n_ref = int(round(T / h_ref))
        ref_traj = integrate(problem.system, problem.constraints,
                             method_by_name("implicit-midpoint"), "rattle",
                             h_ref, n_ref, z0, cfg)
        reference = ref_traj.records[-1].point

    errors = []
    for h in h_list:
        n = int(round(T / h))
        traj = integrate(problem.system, problem.constraints, method, mode,
                         h, n, z0, cfg)
        zT = traj.records[-1].point
        errors.append(float(np.linalg.norm(zT.z - reference.z)))
    errors = np.array(errors)
    hs = np.array(h_list, dtype=float)
    saturated = bool(np.max(errors) < saturation_tol)
    if saturated or np.any(errors == 0.0):
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    return OrderEstimate(slope=slope, h_values=hs, errors=errors, saturated=saturated)


def _fd_step_jacobian(step_map: Callable[[PhasePoint], PhasePoint],
                      z: PhasePoint, u: TangentVector, fd_step: float) -> TangentVector:
    zp = step_map(PhasePoint.from_z(z.z + fd_step * u.v))
    zm = step_map(PhasePoint.from_z(z.z - fd_step * u.v))
    return TangentVector.from_v((zp.z - zm.z) / (2.0 * fd_step))


def symplecticity_residual(step_map: Callable[[PhasePoint], PhasePoint],
                           sys: HamiltonianSystem, cs: ConstraintSet,
                           z: PhasePoint, fd_step: float = 1e-6,
                           basis: Optional[list[TangentVector]] = None) -> float:
    """Max |omega(A u_i, A u_j) - omega(u_i, u_j)| over basis pairs.

    A is the central-difference Jacobian of the step map at z.  The
    default basis spans T_z Mp; pass a basis of T_z M to test
    presymplecticity on M instead.  The residual carries an O(fd_step)
    finite-difference error budget.
    """
    if basis is None:
        basis = tangent_basis_Mp(sys, cs, z)
    images = [_fd_step_jacobian(step_map, z, u, fd_step) for u in basis]
    worst = 0.0
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            worst = max(
                worst,
                abs(omega(images[i], images[j]) - omega(basis[i], basis[j])),
            )
    return worst


@dataclass
class DriftStats:
    max_deviation: float
    slope: float
    slope_stderr: float

    @property
    def drift_detected(self) -> bool:
        return abs(self.slope) > 2.0 * self.slope_stderr


def energy_drift(traj: Trajectory) -> DriftStats:
    """Max energy deviation and the least-squares linear trend per step."""
    e = traj.energies()
    if e.size == 0:
        raise CoisoError("energy_drift: empty trajectory")
    dev = float(np.max(np.abs(e - e[0])))
    if e.size < 3:
        return DriftStats(dev, 0.0, float("inf"))
    k = np.arange(e.size, dtype=float)
    A = np.vstack([k, np.ones_like(k)]).T
    coef, res, *_ = np.linalg.lstsq(A, e, rcond=None)
    slope = float(coef[0])
    dof = e.size - 2
    sse = float(res[0]) if res.size else float(np.sum((e - A @ coef) ** 2))
    sigma2 = sse / dof
    sxx = float(np.sum((k - k.mean()) ** 2))
    stderr = float(np.sqrt(sigma2 / sxx))
    return DriftStats(dev, slope, stderr)


def fiber_scan(sys: HamiltonianSystem, z: PhasePoint,
               n: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Sample the derivative of H along the circular fiber through z.

    The fiber is parametrised by theta via
    (cos(theta) q + sin(theta) p, -sin(theta) q + cos(theta) p); the
    derivative is grad H . d/dtheta of that curve.  Zeros are the points
    of Mp on the fiber.
    """
    thetas = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    vals = np.empty(n)
    for k, th in enumerate(thetas):
        c, s = np.cos(th), np.sin(th)
        pt = PhasePoint(c * z.q + s * z.p, -s * z.q + c * z.p)
        dpt = np.concatenate([-s * z.q + c * z.p, -c * z.q - s * z.p])
        vals[k] = float(sys.grad(pt) @ dpt)
    return thetas, vals


def count_zero_crossings(values: np.ndarray, tol: float = 1e-12) -> int:
    """Sign changes of a periodic sample sequence; 0 when identically ~0."""
    if np.max(np.abs(values)) <= tol:
        return 0
    signs = np.sign(values)
    # treat exact zeros as crossings by giving them the next nonzero sign
    nz = signs != 0
    if not np.any(nz):
        return 0
    # propagate last nonzero sign onto zeros, then count flips cyclically
    filled = signs.copy()
    last = filled[nz][-1]
    for i in range(filled.size):
        if filled[i] == 0:
            filled[i] = last
        else:
            last = filled[i]
    return int(np.sum(filled != np.roll(filled, 1)))


def fiber_criticality_scan(problem: BuiltinProblem, z: PhasePoint,
                           n: int = 2048) -> tuple[np.ndarray, np.ndarray, int]:
    """Criticality scan of one circular fiber: samples and crossing count.

    On hopf-style problems the count classifies the fiber: 4 generic
    crossings without potential, 2/3/4 with a linear potential, 0 on an
    exceptional fiber where H is constant.
    """
    if problem.d != 2:
        raise CoisoError("fiber_criticality_scan requires a d = 2 problem")
    thetas, vals = fiber_scan(problem.system, z, n)
    return thetas, vals, count_zero_crossings(vals)
