"""Nonlocal LWR traffic model with an exponential look-ahead kernel.

Solvers for the nonlocal equation and for its local limit, plus the
entropy audits that check the eps -> 0 limit picks the entropy solution.
"""

from .config import RunConfig, load_config, parse_config
from .entropy_audit import (
    Bump,
    JDecomposition,
    TestFunction,
    bump_family,
    entropy_residual,
    j_decomposition,
    l1_distance,
    stationary_jump_trajectory,
    total_variation,
)
from .errors import (
    CFLViolationError,
    ConfigError,
    DomainError,
    InvalidModelError,
    NonlocalLWRError,
    UsageError,
)
from .harness import ConvergenceReport, convergence_study, decide_verdict, fit_rate
from .kernel import DensityField, QField, check_ode_identity, exp_average
from .local_solver import godunov_flux, riemann_similarity, solve_local
from .model import VelocityModel, entropy_pair_eval, local_flux, validate_model, w_eval
from .nonlocal_solver import NonlocalState, cfl_dt, solve_nonlocal, step_nonlocal
from .trajectory import Trajectory

__version__ = "0.1.0"
