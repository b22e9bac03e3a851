"""Solvers for the combined mean-variance metric.

policy_iteration is the exact potential-based improvement loop; multi_start,
epsilon_greedy_iteration, and ucb_iteration wrap it with exploration to
escape local optima of the nonconvex combined metric; gradient_solver is the
projected-gradient baseline over randomized policies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, SolverError, ValidationError
from .evaluation import EvaluationReport, evaluate
from .model import (
    DeterministicPolicy,
    MdpModel,
    RandomizedPolicy,
    closed_class_count,
    induced_chain,
    sample_random_policy,
)
from .sensitivity import derivative_randomized, improvement_vector

TIE_TOL = 1e-9
DISTINCT_OPTIMA_TOL = 1e-6
MOLLIFY_EPS = 1e-6


@dataclass(frozen=True)
class TraceRecord:
    """One solver iterate: the policy, its metrics, and how many states the
    improvement step changed relative to the previous iterate."""

    iteration: int
    policy: object
    j_mean: float
    j_var: float
    j_combined: float
    states_changed: int


@dataclass(frozen=True)
class SolverTrace:
    iterations: tuple
    converged: bool
    stop_reason: str  # fixed_point | max_iterations | threshold


@dataclass(frozen=True)
class ExplorationConfig:
    """Knobs for the exploring solvers.

    epsilon-greedy and UCB are mutually exclusive per run: the epsilon
    solver requires gamma == 0 and the UCB solver requires epsilon == 0.
    counts optionally carries visit counts from a previous run; they only
    ever increase. budget caps the number of policy evaluations.
    """

    epsilon: float = 0.0
    gamma: float = 0.0
    counts: np.ndarray | None = None
    seed: int = 0
    budget: int = 100
    gamma_decay: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValidationError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if self.budget < 1:
            raise ValidationError(f"budget must be >= 1, got {self.budget}")
        if not 0.0 < self.gamma_decay <= 1.0:
            raise ValidationError(f"gamma_decay must be in (0, 1], got {self.gamma_decay}")
        if self.counts is not None and np.any(np.asarray(self.counts) < 0):
            raise ValidationError("counts must be nonnegative")


@dataclass(frozen=True)
class GradientConfig:
    """Projected-gradient settings: step size 1/sqrt(l), stop when the
    largest per-state L1 parameter change drops below stop_ratio."""

    step_rule: str = "inv_sqrt"
    stop_ratio: float = 0.001
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.step_rule != "inv_sqrt":
            raise ValidationError(f"unknown step_rule {self.step_rule!r}")
        if not self.stop_ratio > 0:
            raise ValidationError(f"stop_ratio must be > 0, got {self.stop_ratio}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")


@dataclass(frozen=True)
class MultiStartResult:
    best_policy: DeterministicPolicy
    best_report: EvaluationReport
    best_index: int
    traces: tuple
    distinct_optima: tuple


@dataclass(frozen=True)
class ExplorationResult:
    best_policy: DeterministicPolicy
    best_report: EvaluationReport
    trace: SolverTrace
    counts: np.ndarray


def _evaluate_iterate(model: MdpModel, policy: DeterministicPolicy, step: int):
    try:
        return evaluate(model, policy)
    except EvaluationError as exc:
        raise SolverError(
            f"non-ergodic iterate at improvement step {step}: policy "
            f"{list(int(a) for a in policy.action)} ({exc})"
        ) from exc


def _greedy_step(
    model: MdpModel, policy: DeterministicPolicy, report: EvaluationReport
) -> DeterministicPolicy:
    """One improvement step: per state take the best-scoring action, keeping
    the current one unless some action beats it by more than the tie
    tolerance; exact ties go to the lowest action index."""
    iv = improvement_vector(model, report, policy)
    new_action = policy.action.copy()
    for i, acts in enumerate(model.feasible):
        acts = list(acts)
        scores = iv.score[i, acts]
        best = scores.max()
        if best > iv.current_score[i] + TIE_TOL:
            new_action[i] = acts[int(np.argmax(scores))]
    return DeterministicPolicy(new_action)


def policy_iteration(
    model: MdpModel,
    initial: DeterministicPolicy,
    max_iterations: int | None = None,
):
    """Exact policy iteration on the combined metric.

    Evaluates the current policy, scores all feasible pairs with its
    potentials, and moves every state to its best-scoring action until the
    policy repeats. The combined metric strictly increases at every step
    that changes the policy. Returns (final policy, trace); the trace ends
    with the repeated fixed-point policy.
    """
    initial.validate_for(model)
    if max_iterations is None:
        max_iterations = 10 * model.num_states * model.num_actions
    d = initial
    records = []
    for step in range(max_iterations + 1):
        report = _evaluate_iterate(model, d, step)
        if records:
            changed = int(np.sum(records[-1].policy.action != d.action))
        else:
            changed = 0
        records.append(
            TraceRecord(step, d, report.j_mean, report.j_var, report.j_combined, changed)
        )
        new_d = _greedy_step(model, d, report)
        if new_d == d:
            records.append(
                TraceRecord(
                    step + 1, d, report.j_mean, report.j_var, report.j_combined, 0
                )
            )
            return d, SolverTrace(tuple(records), True, "fixed_point")
        d = new_d
    return d, SolverTrace(tuple(records), False, "max_iterations")


def diversity(policies) -> int:
    """Sum over states of the number of distinct actions the set uses."""
    policies = list(policies)
    if not policies:
        raise ValidationError("diversity needs a nonempty policy set")
    num_states = policies[0].action.shape[0]
    total = 0
    for i in range(num_states):
        total += len({int(p.action[i]) for p in policies})
    return total


def _distinct_values(values, tol: float = DISTINCT_OPTIMA_TOL):
    """Cluster values whose pairwise gap exceeds tol; returns descending reps."""
    out = []
    for v in sorted(values, reverse=True):
        if not out or out[-1] - v > tol:
            out.append(v)
    return tuple(out)


def multi_start(model: MdpModel, num_starts: int, seed: int = 0) -> MultiStartResult:
    """Run policy_iteration from seeded random irreducible initial policies.

    The best run by final combined metric wins; ties go to the lowest start
    index. distinct_optima lists the final values that differ by more than
    1e-6, descending.
    """
    if num_starts < 1:
        raise ValidationError(f"num_starts must be >= 1, got {num_starts}")
    children = np.random.SeedSequence(seed).spawn(num_starts)
    traces = []
    finals = []
    best = None
    for k in range(num_starts):
        rng = np.random.default_rng(children[k])
        initial = sample_random_policy(model, rng)
        policy, trace = policy_iteration(model, initial)
        report = evaluate(model, policy)
        traces.append(trace)
        finals.append(report.j_combined)
        if best is None or report.j_combined > best[1].j_combined:
            best = (policy, report, k)
    return MultiStartResult(
        best_policy=best[0],
        best_report=best[1],
        best_index=best[2],
        traces=tuple(traces),
        distinct_optima=_distinct_values(finals),
    )


def _propose_epsilon(
    model: MdpModel,
    greedy: DeterministicPolicy,
    epsilon: float,
    rng: np.random.Generator,
    max_tries: int = 50,
) -> DeterministicPolicy:
    """Randomize the greedy step per state; redraw proposals that would
    induce a chain without a unique stationary distribution."""
    if epsilon == 0.0:
        return greedy
    for _ in range(max_tries):
        action = greedy.action.copy()
        explore = rng.random(model.num_states) < epsilon
        for i in np.flatnonzero(explore):
            action[i] = rng.choice(np.asarray(model.feasible[i]))
        proposal = DeterministicPolicy(action)
        P, _ = induced_chain(model, proposal)
        if closed_class_count(P) == 1:
            return proposal
    raise SolverError(
        f"no evaluable exploratory policy found in {max_tries} draws"
    )


def epsilon_greedy_iteration(
    model: MdpModel, initial: DeterministicPolicy, config: ExplorationConfig
) -> ExplorationResult:
    """Policy iteration whose improvement step is randomized per state with
    probability epsilon; tracks and returns the best policy seen. Runs until
    the evaluation budget is spent."""
    if config.gamma != 0.0:
        raise ValidationError("epsilon-greedy run requires gamma == 0")
    initial.validate_for(model)
    rng = np.random.default_rng(config.seed)
    d = initial
    records = []
    best = None
    for step in range(config.budget):
        report = _evaluate_iterate(model, d, step)
        if records:
            changed = int(np.sum(records[-1].policy.action != d.action))
        else:
            changed = 0
        records.append(
            TraceRecord(step, d, report.j_mean, report.j_var, report.j_combined, changed)
        )
        if best is None or report.j_combined > best[1].j_combined:
            best = (d, report)
        greedy = _greedy_step(model, d, report)
        d = _propose_epsilon(model, greedy, config.epsilon, rng)
    counts = np.zeros((model.num_states, model.num_actions), dtype=int)
    return ExplorationResult(
        best_policy=best[0],
        best_report=best[1],
        trace=SolverTrace(tuple(records), False, "max_iterations"),
        counts=counts,
    )


def _ucb_step(
    model: MdpModel,
    policy: DeterministicPolicy,
    report: EvaluationReport,
    counts: np.ndarray,
    gamma: float,
) -> DeterministicPolicy:
    """Greedy step on Q + exploration bonus.

    Never-scored pairs are taken first (infinite bonus); otherwise the bonus
    is gamma * sqrt(2 ln(total state count) / pair count). Counts increment
    afterwards for every feasible pair scored."""
    iv = improvement_vector(model, report, policy)
    new_action = policy.action.copy()
    for i, acts in enumerate(model.feasible):
        acts = list(acts)
        n = counts[i, acts].astype(float)
        unvisited = [a for a, c in zip(acts, n) if c == 0]
        if unvisited and gamma > 0:
            scores = iv.score[i, unvisited]
            new_action[i] = unvisited[int(np.argmax(scores))]
            continue
        total = n.sum()
        bonus = np.zeros(len(acts))
        if gamma > 0 and total > 0:
            bonus = gamma * np.sqrt(2.0 * np.log(total) / n)
        scores = iv.score[i, acts] + bonus
        best = scores.max()
        current = scores[acts.index(int(policy.action[i]))]
        if best > current + TIE_TOL:
            new_action[i] = acts[int(np.argmax(scores))]
    for i, acts in enumerate(model.feasible):
        counts[i, list(acts)] += 1
    return DeterministicPolicy(new_action)


def ucb_iteration(
    model: MdpModel, initial: DeterministicPolicy, config: ExplorationConfig
) -> ExplorationResult:
    """Policy iteration with an upper-confidence exploration bonus on the
    improvement scores; gamma decays by gamma_decay each iteration. Tracks
    the best policy seen and runs until the budget is spent."""
    if config.epsilon != 0.0:
        raise ValidationError("UCB run requires epsilon == 0")
    initial.validate_for(model)
    if config.counts is not None:
        counts = np.array(config.counts, dtype=int)
        if counts.shape != (model.num_states, model.num_actions):
            raise ValidationError(
                f"counts shape {counts.shape} != {(model.num_states, model.num_actions)}"
            )
    else:
        counts = np.zeros((model.num_states, model.num_actions), dtype=int)
    d = initial
    gamma = config.gamma
    records = []
    best = None
    for step in range(config.budget):
        report = _evaluate_iterate(model, d, step)
        if records:
            changed = int(np.sum(records[-1].policy.action != d.action))
        else:
            changed = 0
        records.append(
            TraceRecord(step, d, report.j_mean, report.j_var, report.j_combined, changed)
        )
        if best is None or report.j_combined > best[1].j_combined:
            best = (d, report)
        d = _ucb_step(model, d, report, counts, gamma)
        gamma *= config.gamma_decay
    return ExplorationResult(
        best_policy=best[0],
        best_report=best[1],
        trace=SolverTrace(tuple(records), False, "max_iterations"),
        counts=counts,
    )


def _uniform_feasible(model: MdpModel) -> np.ndarray:
    theta = np.zeros((model.num_states, model.num_actions))
    for i, acts in enumerate(model.feasible):
        theta[i, list(acts)] = 1.0 / len(acts)
    return theta


def mollify(model: MdpModel, theta: RandomizedPolicy, eps: float = MOLLIFY_EPS):
    """Mix a vanishing uniform-feasible component into every state row,
    making the induced chain irreducible whenever the model's union support
    is. Used to take gradients at policies whose own chain has no unique
    stationary distribution."""
    blended = (1.0 - eps) * theta.theta + eps * _uniform_feasible(model)
    return RandomizedPolicy(blended)


@dataclass(frozen=True)
class GradientResult:
    theta: RandomizedPolicy
    trace: SolverTrace
    report: EvaluationReport


def _evaluate_theta(model: MdpModel, theta: RandomizedPolicy):
    """Evaluate theta, falling back to a mollified copy when the strict
    chain has no unique stationary distribution."""
    try:
        return theta, evaluate(model, theta)
    except EvaluationError:
        soft = mollify(model, theta)
        return soft, evaluate(model, soft)


def gradient_solver(
    model: MdpModel, initial_theta: RandomizedPolicy, config: GradientConfig
) -> GradientResult:
    """Projected gradient ascent over randomized policies.

    Each iteration adds step 1/sqrt(l) to the probability of the
    maximal-gradient action at every state and renormalizes the rows. Stops
    when the largest per-state L1 change falls below stop_ratio (rows carry
    unit mass, so this is the relative change)."""
    initial_theta.validate_for(model)
    theta = initial_theta.theta
    records = []
    prev_argmax = None
    stop_reason = "max_iterations"
    converged = False
    for l in range(1, config.max_iterations + 1):
        pol = RandomizedPolicy(theta)
        eval_pol, report = _evaluate_theta(model, pol)
        grad = derivative_randomized(model, eval_pol, report)
        arg = np.nanargmax(np.where(np.isnan(grad), -np.inf, grad), axis=1)
        changed = 0 if prev_argmax is None else int(np.sum(arg != prev_argmax))
        records.append(
            TraceRecord(l - 1, pol, report.j_mean, report.j_var, report.j_combined, changed)
        )
        prev_argmax = arg
        alpha = 1.0 / np.sqrt(l)
        new_theta = theta.copy()
        new_theta[np.arange(model.num_states), arg] += alpha
        new_theta /= new_theta.sum(axis=1, keepdims=True)
        delta = float(np.max(np.abs(new_theta - theta).sum(axis=1)))
        theta = new_theta
        if delta < config.stop_ratio:
            converged = True
            stop_reason = "threshold"
            break
    final = RandomizedPolicy(theta)
    _, final_report = _evaluate_theta(model, final)
    records.append(
        TraceRecord(
            records[-1].iteration + 1,
            final,
            final_report.j_mean,
            final_report.j_var,
            final_report.j_combined,
            0,
        )
    )
    return GradientResult(
        theta=final,
        trace=SolverTrace(tuple(records), converged, stop_reason),
        report=final_report,
    )
