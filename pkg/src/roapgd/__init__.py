"""Region-of-attraction estimation by adversarial worst-case search.

The pipeline: pick a candidate region (a transformed norm ball), search it
for the initial condition that maximises the squared terminal-state norm of
the closed loop, compare the worst case against a terminal tolerance, and
bisect the region radius to the largest value that passes.
"""

from .errors import (
    ConfigError,
    DegenerateGradientError,
    DegenerateRegionError,
    RoapgdError,
    TransportError,
    UnsupportedBackendError,
    UnsupportedRegionError,
)
from .estimator import (
    AroaCriterion,
    BisectionOutcome,
    BracketStep,
    CheckResult,
    Witness,
    bisect_radius,
    check_region,
    convergence_benchmark,
    random_cubic_instance,
    resimulate_witness,
    scaling_benchmark,
)
from .geometry import Region, boundary_sample, interior_sample, project
from .gradients import GradientBackend, GradientResult, estimate_gradient, grad_costate, grad_fd
from .oracle import GridOracleResult, boundary_grid, boundary_grid_max, roa_membership_sample
from .pgd import PgdConfig, PgdRun, search, step_closed_form, step_projected
from .policy import MlpPolicy, Layer, load_policy, mlp_forward, save_policy
from .simulate import (
    CountingSimulator,
    SimulatorSpec,
    Trajectory,
    build_simulator,
    objective_value,
)
from .dynamics import (
    cartpole_step,
    cubic_step,
    pendulum_step,
    true_roa_radius_cubic,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
