"""Monte Carlo oracle: sample-path estimates of the long-run metrics and of
the performance potential, with batch-means confidence intervals. These are
the independent cross-checks for the exact evaluation module."""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .errors import ValidationError
from .evaluation import evaluate
from .model import (
    DeterministicPolicy,
    MdpModel,
    RandomizedPolicy,
    induced_chain,
    induced_chain_randomized,
)

DEFAULT_BATCHES = 30


@dataclass(frozen=True)
class PathSample:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray


@dataclass(frozen=True)
class SimulationEstimate:
    """Point estimates with 95% batch-means half-widths.

    Half-widths are zero for degenerate (constant) reward paths.
    """

    j_mean_hat: float
    j_var_hat: float
    j_combined_hat: float
    half_width_mean: float
    half_width_var: float
    half_width_combined: float
    horizon: int
    seed: int


@dataclass(frozen=True)
class PotentialEstimate:
    value: float
    std_error: float
    state: int
    truncation: int
    num_replications: int
    seed: int


def _cum_rows(P: np.ndarray):
    return [list(np.cumsum(row)) for row in P]


def simulate_path(
    model: MdpModel,
    policy,
    T: int,
    seed: int = 0,
    start_state: int = 0,
) -> PathSample:
    """Sample a length-T trajectory under the policy, deterministic in seed."""
    if T < 1:
        raise ValidationError(f"path length must be >= 1, got {T}")
    if not 0 <= start_state < model.num_states:
        raise ValidationError(f"start_state {start_state} out of range")
    rng = np.random.default_rng(seed)
    states = np.empty(T, dtype=int)
    if isinstance(policy, DeterministicPolicy):
        P, r = induced_chain(model, policy)
        cum = _cum_rows(P)
        us = rng.random(T)
        i = start_state
        for t in range(T):
            states[t] = i
            i = bisect_right(cum[i], us[t])
        actions = policy.action[states].copy()
        rewards = r[states]
        return PathSample(states, actions, rewards)
    if isinstance(policy, RandomizedPolicy):
        policy.validate_for(model)
        cum_theta = _cum_rows(policy.theta)
        cum_kernel = [_cum_rows(model.kernel[i]) for i in range(model.num_states)]
        ua = rng.random(T)
        us = rng.random(T)
        actions = np.empty(T, dtype=int)
        i = start_state
        for t in range(T):
            states[t] = i
            a = bisect_right(cum_theta[i], ua[t])
            actions[t] = a
            i = bisect_right(cum_kernel[i][a], us[t])
        rewards = model.reward[states, actions]
        return PathSample(states, actions, rewards.copy())
    raise ValidationError(f"cannot simulate policy of type {type(policy).__name__}")


def _batch_half_width(estimates: np.ndarray) -> float:
    nb = len(estimates)
    if nb < 2:
        return 0.0
    spread = float(np.std(estimates, ddof=1))
    if spread == 0.0:
        return 0.0
    q = float(student_t.ppf(0.975, df=nb - 1))
    return q * spread / np.sqrt(nb)


def estimate_metrics(
    path,
    beta: float,
    num_batches: int = DEFAULT_BATCHES,
    seed: int = 0,
) -> SimulationEstimate:
    """Time-average metric estimates from one path, with batch-means CIs.

    Accepts a PathSample or a bare reward sequence. The point estimates use
    the full path; half-widths come from the spread of per-batch estimates.
    """
    rewards = path.rewards if isinstance(path, PathSample) else np.asarray(path, float)
    T = rewards.shape[0]
    if T < 2:
        raise ValidationError(f"need a path of length >= 2, got {T}")
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta}")
    mean_hat = float(np.mean(rewards))
    var_hat = float(np.mean((rewards - mean_hat) ** 2))
    combined_hat = mean_hat - beta * var_hat
    nb = min(num_batches, T)
    bs = T // nb
    trimmed = rewards[: nb * bs].reshape(nb, bs)
    b_mean = trimmed.mean(axis=1)
    b_var = ((trimmed - b_mean[:, None]) ** 2).mean(axis=1)
    b_comb = b_mean - beta * b_var
    return SimulationEstimate(
        j_mean_hat=mean_hat,
        j_var_hat=var_hat,
        j_combined_hat=combined_hat,
        half_width_mean=_batch_half_width(b_mean),
        half_width_var=_batch_half_width(b_var),
        half_width_combined=_batch_half_width(b_comb),
        horizon=T,
        seed=seed,
    )


def _accumulate_cost(P, f, J, start, truncation, reps, seed):
    """Mean and spread over replications of sum_{t<=truncation} (f(X_t) - J)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, start]))
    S = P.shape[0]
    cum = np.cumsum(P, axis=1)
    cur = np.full(reps, start, dtype=int)
    acc = np.zeros(reps)
    excess = f - J
    for t in range(truncation + 1):
        acc += excess[cur]
        if t == truncation:
            break
        u = rng.random(reps)
        cur = np.minimum((cum[cur] <= u[:, None]).sum(axis=1), S - 1)
    return float(acc.mean()), float(acc.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0


def estimate_potential(
    model: MdpModel,
    policy,
    state: int,
    truncation: int = 200,
    num_replications: int = 10_000,
    seed: int = 0,
    j_combined: float | None = None,
) -> PotentialEstimate:
    """Truncated-sum potential estimate at one state, pinned so state 0 is 0.

    Averages sum_{t=0}^{truncation} (f(X_t) - J) over replications started
    at `state`, then subtracts the same estimate started at state 0. J is
    the exact combined metric unless supplied.
    """
    if truncation < 1:
        raise ValidationError(f"truncation must be >= 1, got {truncation}")
    if not 0 <= state < model.num_states:
        raise ValidationError(f"state {state} out of range")
    if isinstance(policy, DeterministicPolicy):
        P, _ = induced_chain(model, policy)
    elif isinstance(policy, RandomizedPolicy):
        P, _, _ = induced_chain_randomized(model, policy)
    else:
        raise ValidationError(f"cannot estimate potential of {type(policy).__name__}")
    report = evaluate(model, policy)
    f = report.cost
    if j_combined is None:
        j_combined = report.j_combined
    mean_s, se_s = _accumulate_cost(
        P, f, j_combined, state, truncation, num_replications, seed
    )
    mean_0, se_0 = _accumulate_cost(
        P, f, j_combined, 0, truncation, num_replications, seed
    )
    if state == 0:
        return PotentialEstimate(0.0, 0.0, state, truncation, num_replications, seed)
    return PotentialEstimate(
        value=mean_s - mean_0,
        std_error=float(np.hypot(se_s, se_0)),
        state=state,
        truncation=truncation,
        num_replications=num_replications,
        seed=seed,
    )
