"""Long-run mean-variance optimization of finite Markov decision processes.

The package optimizes the steady-state mean reward penalized by the
steady-state reward variance, J_mean - beta * J_var, over deterministic
and randomized stationary policies. Exact policy evaluation goes through
the stationary distribution and a bias (potential) equation; solvers use
the resulting one-step improvement scores.
"""

from .errors import (
    EvaluationError,
    FeasibilityError,
    ModelIOError,
    MvmdpError,
    SolverError,
    ValidationError,
)
from .evaluation import (
    EvaluationReport,
    combined_metric,
    evaluate,
    long_run_mean,
    mv_cost_vector,
    report_to_dict,
    solve_poisson,
    stationary_distribution,
    steady_state_variance,
)
from .model import (
    DeterministicPolicy,
    ErgodicityReport,
    MdpModel,
    MixedPolicy,
    RandomizedPolicy,
    check_ergodicity,
    closed_class_count,
    induced_chain,
    induced_chain_mixed,
    induced_chain_randomized,
    is_irreducible,
    load_model,
    load_policy,
    model_from_dict,
    model_to_dict,
    sample_random_policy,
    save_model,
    save_policy,
)
from .sensitivity import (
    DifferenceBreakdown,
    ImprovementVector,
    check_necessary_condition,
    derivative_mixed,
    derivative_randomized,
    improvement_vector,
    predicted_difference,
)
from .simulation import (
    PathSample,
    PotentialEstimate,
    SimulationEstimate,
    estimate_metrics,
    estimate_potential,
    simulate_path,
)
from .solvers import (
    ExplorationConfig,
    ExplorationResult,
    GradientConfig,
    GradientResult,
    MultiStartResult,
    SolverTrace,
    TraceRecord,
    diversity,
    epsilon_greedy_iteration,
    gradient_solver,
    mollify,
    multi_start,
    policy_iteration,
    ucb_iteration,
)
from .wind_storage import (
    WIND_KERNEL,
    JointState,
    WindStorageSpec,
    action_values,
    build,
    build_abandonment,
    build_no_abandonment,
    decompose_action,
    state_index,
)

__version__ = "0.1.0"

__all__ = [
    "MvmdpError",
    "ValidationError",
    "FeasibilityError",
    "EvaluationError",
    "SolverError",
    "ModelIOError",
    "MdpModel",
    "DeterministicPolicy",
    "RandomizedPolicy",
    "MixedPolicy",
    "induced_chain",
    "induced_chain_randomized",
    "induced_chain_mixed",
    "closed_class_count",
    "is_irreducible",
    "ErgodicityReport",
    "check_ergodicity",
    "sample_random_policy",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "save_policy",
    "load_policy",
    "EvaluationReport",
    "stationary_distribution",
    "long_run_mean",
    "steady_state_variance",
    "combined_metric",
    "mv_cost_vector",
    "solve_poisson",
    "evaluate",
    "report_to_dict",
    "ImprovementVector",
    "DifferenceBreakdown",
    "improvement_vector",
    "predicted_difference",
    "check_necessary_condition",
    "derivative_mixed",
    "derivative_randomized",
    "TraceRecord",
    "SolverTrace",
    "ExplorationConfig",
    "GradientConfig",
    "MultiStartResult",
    "ExplorationResult",
    "GradientResult",
    "policy_iteration",
    "multi_start",
    "epsilon_greedy_iteration",
    "ucb_iteration",
    "gradient_solver",
    "diversity",
    "mollify",
    "PathSample",
    "SimulationEstimate",
    "PotentialEstimate",
    "simulate_path",
    "estimate_metrics",
    "estimate_potential",
    "WIND_KERNEL",
    "WindStorageSpec",
    "JointState",
    "state_index",
    "build_no_abandonment",
    "build_abandonment",
    "build",
    "decompose_action",
    "action_values",
    "__version__",
]
