"""Constraint manifolds M = g^{-1}(0), hidden constraints, and structure checks.

The hidden constraint set is

    Mp = { z in M : {g_i, H}(z) = 0, i = 1..m }

and the two structural hypotheses that make SHAKE/RATTLE well posed are
materialized here as samplers:

* coisotropy: all pairwise Poisson brackets {g_i, g_j} vanish on M;
* nondegeneracy: the m x m matrix of directional derivatives of the
  hidden residual along the fiber directions is invertible on Mp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CoisoError, NonConvergence
from .phase import (
    FD_SCALE_HESS,
    HamiltonianSystem,
    PhasePoint,
    TangentVector,
    grad_fd,
    hamiltonian_vector_field,
    poisson_bracket,
)


@dataclass
class ConstraintSet:
    """m scalar constraints g_i on R^{2d} with Jacobian rows (g_q, g_p).

    `fiber_flow`, when given, is the exact flow exp(sum_i lam_i X_{g_i})
    evaluated at parameter 1, i.e. the map Phi(lam, z) parametrising the
    fiber through z.
    """

    m: int
    g: Callable[[PhasePoint], np.ndarray]
    jac_g: Callable[[PhasePoint], np.ndarray]
    fiber_flow: Optional[Callable[[np.ndarray, PhasePoint], PhasePoint]] = None
    name: str = ""

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")

    def residual(self, z: PhasePoint) -> np.ndarray:
        r = np.atleast_1d(np.asarray(self.g(z), dtype=float))
        if r.size != self.m:
            raise CoisoError(f"g returned {r.size} values, expected {self.m}")
        return r

    def jacobian(self, z: PhasePoint) -> np.ndarray:
        J = np.atleast_2d(np.asarray(self.jac_g(z), dtype=float))
        if J.shape != (self.m, 2 * z.d):
            raise CoisoError(f"jac_g returned shape {J.shape}, expected {(self.m, 2 * z.d)}")
        return J


@dataclass
class StructureReport:
    """Sampled evidence for the coisotropy and nondegeneracy assumptions."""

    max_bracket_residual: float
    min_nondeg_singular_value: float
    samples_tested: int
    verdict_coisotropy: bool
    verdict_nondegeneracy: bool

    def as_text(self) -> str:
        return "\n".join(
            f"{k}={v}"
            for k, v in (
                ("max_bracket_residual", repr(self.max_bracket_residual)),
                ("min_nondeg_singular_value", repr(self.min_nondeg_singular_value)),
                ("samples_tested", self.samples_tested),
                ("verdict_coisotropy", self.verdict_coisotropy),
                ("verdict_nondegeneracy", self.verdict_nondegeneracy),
            )
        )

    def as_dict(self) -> dict:
        return {
            "max_bracket_residual": self.max_bracket_residual,
            "min_nondeg_singular_value": self.min_nondeg_singular_value,
            "samples_tested": self.samples_tested,
            "verdict_coisotropy": self.verdict_coisotropy,
            "verdict_nondegeneracy": self.verdict_nondegeneracy,
        }


def constraint_residual(cs: ConstraintSet, z: PhasePoint) -> np.ndarray:
    """g(z); the point lies on M iff this is numerically zero."""
    return cs.residual(z)


def hidden_residual(sys: HamiltonianSystem, cs: ConstraintSet, z: PhasePoint) -> np.ndarray:
    """rho(z) with rho_i = {g_i, H}(z); z in Mp iff g(z) = 0 and rho(z) = 0."""
    grad_h = sys.grad(z)
    J = cs.jacobian(z)
    d = z.d
    # {g_i, H} = g_q . H_p - g_p . H_q, rowwise over the constraint Jacobian.
    return J[:, :d] @ grad_h[d:] - J[:, d:] @ grad_h[:d]


def hidden_jacobian(sys: HamiltonianSystem, cs: ConstraintSet, z: PhasePoint) -> np.ndarray:
    """m x 2d Jacobian of the hidden residual rho.

    Analytic (via the Hessian of H and differencing of jac_g) is not
    attempted wholesale; instead each row uses the analytic Hessian of H
    when available and nested central differences otherwise.
    """
    hess = sys.hess(z)
    if hess is None:
        rows = np.empty((cs.m, 2 * z.d))
        for i in range(cs.m):
            rows[i] = grad_fd(
                lambda y, i=i: float(hidden_residual(sys, cs, y)[i]),
                z,
                scale=FD_SCALE_HESS,
            )
        return rows
    # rho_i(z) = nabla g_i(z) . X_H(z); differentiate the product.  The
    # Jacobian of X_H is J_sym @ hess with J_sym the symplectic structure
    # matrix; the Jacobian of nabla g_i is differenced.
    d = z.d
    Xh = sys.vector_field(z).v
    J = cs.jacobian(z)
    rows = np.empty((cs.m, 2 * z.d))
    jac_xh = np.block(
        [[hess[d:, :d], hess[d:, d:]], [-hess[:d, :d], -hess[:d, d:]]]
    )
    for i in range(cs.m):
        grad_gi_jac = _grad_row_fd(cs, z, i)
        rows[i] = grad_gi_jac @ Xh + J[i] @ jac_xh
    return rows


def _grad_row_fd(cs: ConstraintSet, z: PhasePoint, i: int) -> np.ndarray:
    """2d x 2d Jacobian of the covector nabla g_i by central differences."""
    zv = z.z
    n = zv.size
    out = np.empty((n, n))
    for j in range(n):
        h = FD_SCALE_HESS * max(1.0, abs(zv[j]))
        zp, zm = zv.copy(), zv.copy()
        zp[j] += h
        zm[j] -= h
        out[:, j] = (
            cs.jacobian(PhasePoint.from_z(zp))[i] - cs.jacobian(PhasePoint.from_z(zm))[i]
        ) / (2.0 * h)
    return out


def nondegeneracy_matrix(sys: HamiltonianSystem, cs: ConstraintSet, z: PhasePoint) -> np.ndarray:
    """m x m matrix m_ij = d rho_i / d(fiber direction j) at z.

    Entry (i, j) is the directional derivative of rho_i along X_{g_j}.
    On Mp the nondegeneracy assumption holds at z iff this matrix is
    invertible.  (It equals -{{H, g_i}, g_j}; invertibility is unaffected
    by the sign.)
    """
    rows = hidden_jacobian(sys, cs, z)
    J = cs.jacobian(z)
    d = z.d
    out = np.empty((cs.m, cs.m))
    for j in range(cs.m):
        xg = hamiltonian_vector_field(J[j]).v
        out[:, j] = rows @ xg
    # report with row index i, column index j
    return out


def project_onto_M(cs: ConstraintSet, z0: PhasePoint, tol: float = 1e-11,
                   max_iter: int = 50) -> PhasePoint:
    """Gauss-Newton projection onto M along the rows of jac_g."""
    z = z0
    for _ in range(max_iter):
        r = cs.residual(z)
        if np.max(np.abs(r)) <= tol:
            return z
        J = cs.jacobian(z)
        dz, *_ = np.linalg.lstsq(J, -r, rcond=None)
        z = PhasePoint.from_z(z.z + dz)
    r = cs.residual(z)
    if np.max(np.abs(r)) <= tol:
        return z
    raise NonConvergence(
        "project_onto_M did not converge", residual=float(np.max(np.abs(r))),
        iterations=max_iter,
    )


def project_onto_Mp_direct(sys: HamiltonianSystem, cs: ConstraintSet, z0: PhasePoint,
                           tol: float = 1e-11, max_iter: int = 60) -> PhasePoint:
    """Gauss-Newton projection onto Mp using the stacked (g, rho) system.

    This is a sampler utility working in the full ambient space; the
    dynamical projection used by RATTLE moves along the fiber instead
    (see `coiso.shake_rattle.project_to_hidden`).
    """
    z = z0
    for _ in range(max_iter):
        F = np.concatenate([cs.residual(z), hidden_residual(sys, cs, z)])
        if np.max(np.abs(F)) <= tol:
            return z
        J = np.vstack([cs.jacobian(z), hidden_jacobian(sys, cs, z)])
        dz, *_ = np.linalg.lstsq(J, -F, rcond=None)
        # damped update to widen the basin for random samples
        step = 1.0
        base = np.max(np.abs(F))
        while step >= 1.0 / 64.0:
            znew = PhasePoint.from_z(z.z + step * dz)
            Fnew = np.concatenate([cs.residual(znew), hidden_residual(sys, cs, znew)])
            if np.max(np.abs(Fnew)) < base:
                break
            step *= 0.5
        z = PhasePoint.from_z(z.z + step * dz)
    F = np.concatenate([cs.residual(z), hidden_residual(sys, cs, z)])
    if np.max(np.abs(F)) <= tol:
        return z
    raise NonConvergence(
        "project_onto_Mp_direct did not converge",
        residual=float(np.max(np.abs(F))), iterations=max_iter,
    )


def sample_points_on_M(cs: ConstraintSet, d: int, n: int, seed: int = 0,
                       scale: float = 1.0) -> list[PhasePoint]:
    """Draw n random ambient points and project them onto M."""
    rng = np.random.default_rng(seed)
    points = []
    attempts = 0
    while len(points) < n:
        attempts += 1
        if attempts > 50 * n:
            raise NonConvergence("sample_points_on_M: too many failed projections")
        z0 = PhasePoint.from_z(scale * rng.standard_normal(2 * d))
        try:
            points.append(project_onto_M(cs, z0))
        except NonConvergence:
            continue
    return points


def check_coisotropy(cs: ConstraintSet, points: list[PhasePoint],
                     tol: float = 1e-10) -> tuple[float, bool]:
    """Max |{g_i, g_j}| over sampled points of M, and the verdict."""
    worst = 0.0
    for z in points:
        J = cs.jacobian(z)
        for i in range(cs.m):
            for j in range(i + 1, cs.m):
                worst = max(worst, abs(poisson_bracket(J[i], J[j])))
    return worst, worst <= tol


def check_nondegeneracy(sys: HamiltonianSystem, cs: ConstraintSet,
                        points: list[PhasePoint],
                        tol: float = 1e-8) -> tuple[float, bool]:
    """Min singular value of the nondegeneracy matrix over sampled Mp points."""
    smin = np.inf
    for z in points:
        sv = np.linalg.svd(nondegeneracy_matrix(sys, cs, z), compute_uv=False)
        smin = min(smin, float(sv[-1]))
    return smin, smin > tol


def sample_points_on_Mp(sys: HamiltonianSystem, cs: ConstraintSet, d: int, n: int,
                        seed: int = 0, scale: float = 1.0,
                        reject_singular_below: Optional[float] = None) -> list[PhasePoint]:
    """Random ambient points projected onto Mp.

    `reject_singular_below` discards samples whose nondegeneracy matrix
    has smallest singular value below the threshold; used to keep
    samplers away from degenerate fibers on problems known to have them.
    """
    rng = np.random.default_rng(seed)
    points = []
    attempts = 0
    while len(points) < n:
        attempts += 1
        if attempts > 200 * n:
            raise NonConvergence("sample_points_on_Mp: too many rejected samples")
        z0 = PhasePoint.from_z(scale * rng.standard_normal(2 * d))
        try:
            z = project_onto_Mp_direct(sys, cs, z0)
        except NonConvergence:
            continue
        if reject_singular_below is not None:
            sv = np.linalg.svd(nondegeneracy_matrix(sys, cs, z), compute_uv=False)
            if sv[-1] < reject_singular_below:
                continue
        points.append(z)
    return points


def structure_report(sys: HamiltonianSystem, cs: ConstraintSet, d: int,
                     n_samples: int = 256, seed: int = 0,
                     coisotropy_tol: float = 1e-10,
                     nondegeneracy_tol: float = 1e-8,
                     n_mp_samples: int = 64,
                     reject_singular_below: Optional[float] = None) -> StructureReport:
    """Assemble a StructureReport by sampling M and Mp."""
    m_points = sample_points_on_M(cs, d, n_samples, seed=seed)
    bracket, coiso_ok = check_coisotropy(cs, m_points, tol=coisotropy_tol)
    try:
        mp_points = sample_points_on_Mp(
            sys, cs, d, n_mp_samples, seed=seed + 1,
            reject_singular_below=reject_singular_below,
        )
        smin, nondeg_ok = check_nondegeneracy(sys, cs, mp_points, tol=nondegeneracy_tol)
    except NonConvergence:
        smin, nondeg_ok = 0.0, False
    return StructureReport(
        max_bracket_residual=bracket,
        min_nondeg_singular_value=smin,
        samples_tested=n_samples,
        verdict_coisotropy=coiso_ok,
        verdict_nondegeneracy=nondeg_ok,
    )


def tangent_basis_Mp(sys: HamiltonianSystem, cs: ConstraintSet,
                     z: PhasePoint, rank_tol: float = 1e-8) -> list[TangentVector]:
    """Orthonormal basis of T_z Mp, the null space of stacked (jac_g, jac_rho).

    Raises on rank deficiency of the stacked 2m x 2d matrix, which signals
    a failure of the nondegeneracy assumption at z.
    """
    stacked = np.vstack([cs.jacobian(z), hidden_jacobian(sys, cs, z)])
    u, s, vt = np.linalg.svd(stacked)
    k = 2 * cs.m
    if s.size < k or s[k - 1] <= rank_tol * max(1.0, s[0]):
        raise CoisoError("tangent_basis_Mp: stacked constraint Jacobian is rank deficient")
    return [TangentVector.from_v(vt[i]) for i in range(k, 2 * z.d)]


def tangent_basis_M(cs: ConstraintSet, z: PhasePoint,
                    rank_tol: float = 1e-10) -> list[TangentVector]:
    """Orthonormal basis of T_z M, the null space of jac_g alone."""
    J = cs.jacobian(z)
    u, s, vt = np.linalg.svd(J)
    if s[-1] <= rank_tol * max(1.0, s[0]):
        raise CoisoError("tangent_basis_M: constraint Jacobian is rank deficient")
    return [TangentVector.from_v(vt[i]) for i in range(cs.m, 2 * z.d)]
