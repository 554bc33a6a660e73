"""Fiber flow Phi(lam, z) = exp(sum_i lam_i X_{g_i})(z).

Delegates to the exact flow when the constraint set supplies one, and
otherwise integrates the summed generator numerically to roundoff-level
tolerance.  Under coisotropy the flows of the X_{g_i} commute on M, so
the summed generator is a well defined parametrisation of the fiber.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import solve_ivp

from .constraints import ConstraintSet
from .errors import CoisoError
from .phase import PhasePoint, hamiltonian_vector_field


def fiber_map(cs: ConstraintSet, lam: np.ndarray, z: PhasePoint) -> PhasePoint:
    """Evaluate Phi(lam, z), exactly when possible."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.size != cs.m:
        raise CoisoError(f"fiber parameter has length {lam.size}, expected {cs.m}")
    if cs.fiber_flow is not None:
        return cs.fiber_flow(lam, z)
    return fiber_map_numeric(cs, lam, z)


def fiber_map_numeric(cs: ConstraintSet, lam: np.ndarray, z: PhasePoint,
                      tol: float = 1e-13) -> PhasePoint:
    """Integrate dz/ds = sum_i lam_i X_{g_i}(z) over s in [0, 1].

    Uses an adaptive embedded Runge-Kutta pair of order 8(5,3); the
    result is only as symplectic as the integration tolerance, which a
    one-time warning points out.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.size != cs.m:
        raise CoisoError(f"fiber parameter has length {lam.size}, expected {cs.m}")
    if not np.any(lam):
        return z
    warnings.warn(
        "fiber_map_numeric: no exact fiber flow supplied; downstream "
        "symplecticity holds only to the integration tolerance",
        stacklevel=2,
    )

    def rhs(_, y):
        pt = PhasePoint.from_z(y)
        J = cs.jacobian(pt)
        v = np.zeros_like(y)
        for i in range(cs.m):
            v += lam[i] * hamiltonian_vector_field(J[i]).v
        return v

    sol = solve_ivp(rhs, (0.0, 1.0), z.z, method="DOP853", rtol=tol, atol=tol)
    if not sol.success:
        raise CoisoError(f"fiber_map_numeric: integration failed ({sol.message})")
    y = sol.y[:, -1]
    if not np.all(np.isfinite(y)):
        raise CoisoError("fiber_map_numeric: non-finite state")
    return PhasePoint.from_z(y)
