"""Shared fixtures: built-in problems and a non-builtin harmonic fixture.

The harmonic fixture (quadratic potential, spherical position constraint)
exists because every built-in Hamiltonian has a nilpotent ambient
linearisation, on which even explicit Euler happens to preserve the
symplectic form exactly; a genuinely oscillatory system is needed as a
negative control for the symplecticity checks.
"""

import numpy as np
import pytest

from coiso import (
    ConstraintSet,
    HamiltonianSystem,
    NewtonConfig,
    PhasePoint,
    builtin_problem,
    benchmark_initial_conditions,
)


# Verdict lines recorded by the acceptance suite; echoed after the test
# summary so they are visible even with output capture on.
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return NewtonConfig()


@pytest.fixture(scope="session")
def pendulum():
    return builtin_problem("pendulum")


@pytest.fixture(scope="session")
def hopf_free():
    return builtin_problem("hopf-free")


@pytest.fixture(scope="session")
def hopf_gravity():
    return builtin_problem("hopf-gravity")


@pytest.fixture(scope="session")
def index1():
    return builtin_problem("index1-model")


@pytest.fixture(scope="session")
def degenerate():
    return builtin_problem("degenerate-index5")


@pytest.fixture(scope="session")
def z_a():
    return benchmark_initial_conditions()["z_a"]


def make_harmonic_on_sphere():
    """H = (|p|^2 + |q|^2)/2 constrained to |q|^2 = 1, with the affine
    fiber flow (q, p - 2 lambda q)."""
    d = 2
    sys = HamiltonianSystem(
        d=d,
        H=lambda z: 0.5 * float(z.p @ z.p) + 0.5 * float(z.q @ z.q),
        grad_H=lambda z: np.concatenate([z.q, z.p]),
        hess_H=lambda z: np.eye(2 * d),
        name="harmonic",
    )
    cs = ConstraintSet(
        m=1,
        g=lambda z: np.array([float(z.q @ z.q) - 1.0]),
        jac_g=lambda z: np.concatenate([2.0 * z.q, np.zeros(d)])[None, :],
        fiber_flow=lambda lam, z: PhasePoint(z.q, z.p - 2.0 * lam[0] * z.q),
        name="sphere",
    )
    return sys, cs


@pytest.fixture(scope="session")
def harmonic_on_sphere():
    return make_harmonic_on_sphere()
