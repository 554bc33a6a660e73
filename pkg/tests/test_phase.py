import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coiso import (
    DimensionMismatch,
    HamiltonianSystem,
    PhasePoint,
    TangentVector,
    grad_fd,
    hamiltonian_vector_field,
    omega,
    poisson_bracket,
)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def vec(d):
    return st.lists(finite, min_size=d, max_size=d).map(np.array)


class TestPhasePoint:
    def test_round_trip(self):
        z = PhasePoint(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        assert np.array_equal(PhasePoint.from_z(z.z).z, z.z)
        assert z.d == 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            PhasePoint(np.array([1.0, 2.0]), np.array([3.0]))

    def test_odd_flat_vector_rejected(self):
        with pytest.raises(DimensionMismatch):
            PhasePoint.from_z(np.array([1.0, 2.0, 3.0]))


class TestOmega:
    @given(vec(3), vec(3), vec(3), vec(3))
    @settings(max_examples=50, deadline=None)
    def test_antisymmetry(self, a, b, c, d):
        u = TangentVector(a, b)
        v = TangentVector(c, d)
        assert omega(u, v) == pytest.approx(-omega(v, u), abs=1e-12)

    def test_canonical_pairing(self):
        # omega(dq_i, dp_i) = 1 for each conjugate pair
        e = np.eye(2)
        u = TangentVector(e[0], np.zeros(2))
        v = TangentVector(np.zeros(2), e[0])
        assert omega(u, v) == pytest.approx(1.0)
        assert omega(u, TangentVector(np.zeros(2), e[1])) == pytest.approx(0.0)

    @given(vec(2), vec(2))
    @settings(max_examples=50, deadline=None)
    def test_nondegeneracy(self, a, b):
        u = TangentVector(a, b)
        if np.linalg.norm(u.v) < 1e-9:
            return
        # the conjugate partner (dp, -dq) always pairs to |u|^2
        v = TangentVector(b, -a)
        assert abs(omega(u, v)) == pytest.approx(float(u.v @ u.v))


class TestBracket:
    @given(vec(2), vec(2), vec(2), vec(2))
    @settings(max_examples=50, deadline=None)
    def test_bracket_equals_omega_of_fields(self, a, b, c, d):
        df = np.concatenate([a, b])
        dh = np.concatenate([c, d])
        lhs = poisson_bracket(df, dh)
        rhs = omega(hamiltonian_vector_field(df), hamiltonian_vector_field(dh))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_canonical_bracket(self):
        # {q_1, p_1} = 1 in a d = 2 system
        dq1 = np.array([1.0, 0.0, 0.0, 0.0])
        dp1 = np.array([0.0, 0.0, 1.0, 0.0])
        assert poisson_bracket(dq1, dp1) == pytest.approx(1.0)

    def test_field_components(self):
        # X_f = (f_p, -f_q)
        df = np.array([1.0, 2.0, 3.0, 4.0])
        xf = hamiltonian_vector_field(df)
        assert np.allclose(xf.dq, [3.0, 4.0])
        assert np.allclose(xf.dp, [-1.0, -2.0])


class TestGradFd:
    def test_quadratic(self):
        z = PhasePoint(np.array([0.3, -0.7]), np.array([1.1, 0.2]))
        g = grad_fd(lambda w: 0.5 * float(w.z @ w.z), z)
        assert np.allclose(g, z.z, atol=1e-9)

    def test_nonpolynomial(self):
        z = PhasePoint(np.array([0.4]), np.array([-0.2]))
        g = grad_fd(lambda w: float(np.sin(w.q[0]) * np.exp(w.p[0])), z)
        expect = np.array([np.cos(0.4) * np.exp(-0.2), np.sin(0.4) * np.exp(-0.2)])
        assert np.allclose(g, expect, atol=1e-8)


class TestHamiltonianSystem:
    def test_fd_gradient_fallback(self):
        sys = HamiltonianSystem(d=1, H=lambda z: 0.5 * float(z.p @ z.p))
        z = PhasePoint(np.array([0.0]), np.array([2.0]))
        assert np.allclose(sys.grad(z), [0.0, 2.0], atol=1e-8)
        xh = sys.vector_field(z)
        assert np.allclose(xh.dq, [2.0], atol=1e-8)
        assert np.allclose(xh.dp, [0.0], atol=1e-8)

    def test_gradient_self_check_catches_mismatch(self):
        with pytest.raises(Exception):
            HamiltonianSystem(
                d=1,
                H=lambda z: 0.5 * float(z.p @ z.p),
                grad_H=lambda z: np.array([1.0, z.p[0]]),  # wrong dH/dq
                check_gradient=True,
            )

    def test_hess_fd_matches_analytic(self):
        sys = HamiltonianSystem(
            d=1,
            H=lambda z: 0.5 * z.p[0] ** 2 + np.cos(z.q[0]),
            grad_H=lambda z: np.array([-np.sin(z.q[0]), z.p[0]]),
        )
        z = PhasePoint(np.array([0.6]), np.array([-0.3]))
        expect = np.array([[-np.cos(0.6), 0.0], [0.0, 1.0]])
        assert np.allclose(sys.hess_fd(z), expect, atol=1e-6)
