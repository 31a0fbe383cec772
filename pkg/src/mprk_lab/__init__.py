"""Positive, invariant-conserving MPRK22(alpha) integrators and their stability analysis."""
from .errors import MPRKLabError
from .linalg import Spectrum, eigenvalues, expm, expm_apply, kernel_basis
from .mprk import (
    SchemeConfig,
    Trajectory,
    convergence_order,
    convergence_study,
    integrate,
    mprk22_step,
    mprk22_step_linear,
)
from .pds import (
    InvariantSlice,
    LinearPDS,
    ProductionDestructionSystem,
    check_conservative,
    linear_pds_from_matrix,
    rhs,
    steady_state_for_initial,
)
from .problems import NamedProblem, get_problem
from .stability import (
    StabilityReport,
    Verdict,
    analyze,
    lyapunov_probe,
    mprk22_jacobian,
    stability_function,
    stability_function_ncs,
)

__version__ = "0.1.0"
