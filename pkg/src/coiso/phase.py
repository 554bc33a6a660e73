"""Canonical symplectic linear algebra on R^{2d}.

Phase points are pairs z = (q, p) with q, p in R^d.  Covectors (gradients
of scalar functions) are stored as flat arrays of length 2d in the order
(f_q, f_p).  The sign convention for Hamiltonian vector fields is fixed
once and used everywhere:

    X_f = (f_p, -f_q)

so that the canonical form omega = sum_i dq_i ^ dp_i satisfies
iota_{X_f} omega = df and the Poisson bracket is
{f, h} = f_q . h_p - f_p . h_q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CoisoError, DimensionMismatch

# Central-difference step scales, balanced for first and second derivatives.
FD_SCALE_GRAD = float(np.finfo(float).eps) ** (1.0 / 3.0)
FD_SCALE_HESS = float(np.finfo(float).eps) ** (1.0 / 4.0)


def _as_vector(x, name):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True)
class PhasePoint:
    """A point z = (q, p) of the canonical phase space R^{2d}."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vector(self.q, "q"))
        object.__setattr__(self, "p", _as_vector(self.p, "p"))
        if self.q.size != self.p.size:
            raise DimensionMismatch(
                f"q has length {self.q.size} but p has length {self.p.size}"
            )

    @property
    def d(self) -> int:
        return self.q.size

    @property
    def z(self) -> np.ndarray:
        """Flat coordinate vector (q, p) of length 2d."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_z(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        d = z.size // 2
        return cls(z[:d], z[d:])

    def __eq__(self, other):
        return (
            isinstance(other, PhasePoint)
            and np.array_equal(self.q, other.q)
            and np.array_equal(self.p, other.p)
        )


@dataclass(frozen=True)
class TangentVector:
    """An element (dq, dp) of the tangent space at a phase point."""

    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dq", _as_vector(self.dq, "dq"))
        object.__setattr__(self, "dp", _as_vector(self.dp, "dp"))
        if self.dq.size != self.dp.size:
            raise DimensionMismatch(
                f"dq has length {self.dq.size} but dp has length {self.dp.size}"
            )

    @property
    def d(self) -> int:
        return self.dq.size

    @property
    def v(self) -> np.ndarray:
        return np.concatenate([self.dq, self.dp])

    @classmethod
    def from_v(cls, v) -> "TangentVector":
        v = np.asarray(v, dtype=float)
        d = v.size // 2
        return cls(v[:d], v[d:])


def omega(u: TangentVector, v: TangentVector) -> float:
    """Canonical symplectic pairing omega(u, v) = u.dq . v.dp - u.dp . v.dq."""
    if u.d != v.d:
        raise DimensionMismatch(f"omega: dimensions {u.d} and {v.d} differ")
    return float(u.dq @ v.dp - u.dp @ v.dq)


def hamiltonian_vector_field(f_grad: np.ndarray) -> TangentVector:
    """Hamiltonian vector field X_f = (f_p, -f_q) of a covector (f_q, f_p)."""
    f_grad = np.asarray(f_grad, dtype=float)
    d = f_grad.size // 2
    return TangentVector(f_grad[d:], -f_grad[:d])


def poisson_bracket(fa_grad: np.ndarray, fb_grad: np.ndarray) -> float:
    """Canonical Poisson bracket {fa, fb} = fa_q . fb_p - fa_p . fb_q."""
    fa_grad = np.asarray(fa_grad, dtype=float)
    fb_grad = np.asarray(fb_grad, dtype=float)
    if fa_grad.size != fb_grad.size:
        raise DimensionMismatch("poisson_bracket: covector lengths differ")
    d = fa_grad.size // 2
    return float(fa_grad[:d] @ fb_grad[d:] - fa_grad[d:] @ fb_grad[:d])


def grad_fd(f: Callable[[PhasePoint], float], z: PhasePoint,
            scale: float = FD_SCALE_GRAD) -> np.ndarray:
    """Central-difference gradient of a scalar function on phase space.

    Per-coordinate step scale * max(1, |z_i|).  Exact (up to roundoff) on
    affine and quadratic functions.
    """
    zv = z.z
    grad = np.empty(zv.size)
    for i in range(zv.size):
        h = scale * max(1.0, abs(zv[i]))
        zp, zm = zv.copy(), zv.copy()
        zp[i] += h
        zm[i] -= h
        fp = f(PhasePoint.from_z(zp))
        fm = f(PhasePoint.from_z(zm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise CoisoError(f"grad_fd: non-finite value at probe coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


@dataclass
class HamiltonianSystem:
    """A Hamiltonian H on R^{2d}, with optional analytic derivatives.

    When `grad_H` is absent the gradient falls back to central finite
    differences of `H`; when `hess_H` is absent Hessian actions are
    obtained by differencing the gradient.
    """

    d: int
    H: Callable[[PhasePoint], float]
    grad_H: Optional[Callable[[PhasePoint], np.ndarray]] = None
    hess_H: Optional[Callable[[PhasePoint], np.ndarray]] = None
    name: str = ""
    check_gradient: bool = False
    _rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.check_gradient and self.grad_H is not None:
            self._self_check()

    def _self_check(self, n_probe: int = 4, rtol: float = 1e-5):
        rng = np.random.default_rng(0)
        for _ in range(n_probe):
            z = PhasePoint.from_z(rng.standard_normal(2 * self.d))
            g_ana = self.grad_H(z)
            g_fd = grad_fd(self.H, z)
            denom = max(1.0, float(np.max(np.abs(g_fd))))
            if np.max(np.abs(np.asarray(g_ana) - g_fd)) / denom > rtol:
                raise CoisoError(
                    "grad_H disagrees with finite differences of H at a probe point"
                )

    def grad(self, z: PhasePoint) -> np.ndarray:
        if self.grad_H is not None:
            return np.asarray(self.grad_H(z), dtype=float)
        return grad_fd(self.H, z)

    def hess(self, z: PhasePoint) -> Optional[np.ndarray]:
        """Full 2d x 2d Hessian, or None when no analytic Hessian is given."""
        if self.hess_H is not None:
            return np.asarray(self.hess_H(z), dtype=float)
        return None

    def hess_fd(self, z: PhasePoint) -> np.ndarray:
        """Hessian by central differencing of the gradient."""
        zv = z.z
        n = zv.size
        out = np.empty((n, n))
        for j in range(n):
            h = FD_SCALE_HESS * max(1.0, abs(zv[j]))
            zp, zm = zv.copy(), zv.copy()
            zp[j] += h
            zm[j] -= h
            gp = self.grad(PhasePoint.from_z(zp))
            gm = self.grad(PhasePoint.from_z(zm))
            out[:, j] = (gp - gm) / (2.0 * h)
        return 0.5 * (out + out.T)

    def vector_field(self, z: PhasePoint) -> TangentVector:
        return hamiltonian_vector_field(self.grad(z))

    def energy(self, z: PhasePoint) -> float:
        return float(self.H(z))
