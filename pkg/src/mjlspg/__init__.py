"""Policy-gradient quadratic control of Markovian jump linear systems."""

__version__ = "0.1.0"

from .errors import (
    DivergenceDetected,
    NoConvergence,
    NonErgodic,
    NotStabilizing,
    SingularCorrelation,
)
from .estimation import (
    ChainEstimate,
    EstimationConfig,
    GradientEstimate,
    estimate_gradient_and_correlation,
    estimate_pseudo_spectral_params,
    estimate_transition_matrix,
    required_chain_length,
    sample_perturbation,
)
from .exact import (
    BlockCorrelation,
    CouplingSolution,
    GradientSchedule,
    apply_FK,
    correlation_truncation_horizon,
    cost_truncation_horizon,
    exact_cost,
    exact_gradient,
    finite_horizon_cost,
    mss_spectral_radius,
    solve_coupled_are,
    solve_coupled_lyapunov,
    state_correlation,
)
from .harness import ExperimentConfig, run_experiment
from .models import (
    CostOracle,
    GainSchedule,
    InitialStateDistribution,
    JumpLinearModel,
    Trajectory,
    generate_random_model,
    load_model,
    model_from_dict,
    model_to_dict,
    monte_carlo_cost,
    mu_parameter,
    rollout,
    sample_mode_chain,
    save_model,
)
from .optimize import (
    OptimizationTrace,
    OptimizerConfig,
    compute_gd_stepsize,
    compute_ngd_stepsize,
    gd_step,
    ngd_step,
    optimize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
