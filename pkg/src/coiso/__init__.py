"""Geometric SHAKE/RATTLE for coisotropically constrained Hamiltonian systems."""

from .constraints import (
    ConstraintSet,
    StructureReport,
    check_coisotropy,
    check_nondegeneracy,
    constraint_residual,
    hidden_residual,
    nondegeneracy_matrix,
    project_onto_M,
    structure_report,
    tangent_basis_M,
    tangent_basis_Mp,
)
from .errors import (
    CoisoError,
    DimensionMismatch,
    NonConvergence,
    SingularJacobian,
    SpuriousSolution,
    StepFailed,
)
from .fiber import fiber_map, fiber_map_numeric
from .phase import (
    HamiltonianSystem,
    PhasePoint,
    TangentVector,
    grad_fd,
    hamiltonian_vector_field,
    omega,
    poisson_bracket,
)
from .problems import (
    BuiltinProblem,
    builtin_problem,
    hopf_exact_solution,
    benchmark_initial_conditions,
)
from .shake_rattle import (
    StepRecord,
    Trajectory,
    integrate,
    launch,
    project_to_hidden,
    rattle_step,
    shake_step,
)
from .underlying import (
    NewtonConfig,
    OneStepMethod,
    implicit_midpoint_step,
    method_by_name,
    newton_solve,
    stormer_verlet_step,
    symplectic_euler_step,
)
from .verify import (
    energy_drift,
    estimate_order,
    fiber_criticality_scan,
    hopf_map,
    orbit_distance_hopf_free,
    stereographic,
    symplecticity_residual,
)

__version__ = "0.1.0"
