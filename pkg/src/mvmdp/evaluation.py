"""Exact policy evaluation for the long-run mean-variance metric.

Evaluating a policy yields the stationary distribution, the long-run mean
J_mean, the steady-state variance J_var, the combined metric
J_combined = J_mean - beta * J_var, the mean-variance cost vector, and the
performance potentials that solve the associated Poisson equation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ValidationError
from .model import (
    DeterministicPolicy,
    MdpModel,
    RandomizedPolicy,
    closed_class_count,
    induced_chain,
    induced_chain_randomized,
)

STATIONARY_TOL = 1e-10
CONSISTENCY_TOL = 1e-9
POISSON_TOL = 1e-8


@dataclass(frozen=True)
class EvaluationReport:
    """Everything exact evaluation produces for one policy.

    potential solves g = cost - j_combined * 1 + P g with g[0] = 0;
    potential_mean and potential_var are the potentials of the plain reward
    and of the squared-deviation cost, so that
    potential = potential_mean - beta * potential_var.
    """

    pi: np.ndarray
    j_mean: float
    j_var: float
    j_combined: float
    cost: np.ndarray
    potential: np.ndarray
    potential_mean: np.ndarray
    potential_var: np.ndarray
    beta: float


def _check_stochastic(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {P.shape}")
    if np.any(P < 0):
        raise ValidationError("transition matrix has a negative entry")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-12)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"transition row {i} sums to {sums[i]!r}, expected 1")
    return P


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of a row-stochastic matrix.

    Solved as the balance system with the last balance equation replaced by
    the normalization row. Raises when the distribution is not unique, i.e.
    when the support graph has two or more closed communicating classes.
    """
    P = _check_stochastic(P)
    S = P.shape[0]
    if closed_class_count(P) != 1:
        raise EvaluationError(
            "stationary distribution is not unique: the chain has multiple "
            "closed communicating classes"
        )
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    b = np.zeros(S)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"stationary solve failed: {exc}") from exc
    residual = np.max(np.abs(pi @ P - pi))
    if residual > STATIONARY_TOL:
        raise EvaluationError(
            f"stationary solve residual {residual:.3e} exceeds {STATIONARY_TOL}"
        )
    # transient states may come out as tiny negative round-off
    pi = np.where((pi < 0) & (pi > -STATIONARY_TOL), 0.0, pi)
    if np.any(pi < 0):
        raise EvaluationError("stationary solve produced a negative probability")
    return pi


def long_run_mean(pi: np.ndarray, r: np.ndarray) -> float:
    pi = np.asarray(pi, dtype=float)
    r = np.asarray(r, dtype=float)
    if pi.shape != r.shape:
        raise ValidationError(f"length mismatch: pi has {pi.shape}, r has {r.shape}")
    return float(pi @ r)


def steady_state_variance(
    pi: np.ndarray,
    r: np.ndarray,
    j_mean: float,
    second_moment: np.ndarray | None = None,
) -> float:
    """Long-run variance of the instantaneous reward around j_mean.

    For a randomized policy pass the per-state second-moment row; the
    variance then mixes the per-action quadratics instead of squaring the
    mixed reward.
    """
    pi = np.asarray(pi, dtype=float)
    r = np.asarray(r, dtype=float)
    if pi.shape != r.shape:
        raise ValidationError(f"length mismatch: pi has {pi.shape}, r has {r.shape}")
    if second_moment is None:
        return float(pi @ (r - j_mean) ** 2)
    m2 = np.asarray(second_moment, dtype=float)
    return float(pi @ (m2 - 2.0 * j_mean * r + j_mean**2))


def combined_metric(j_mean: float, j_var: float, beta: float) -> float:
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta}")
    return float(j_mean - beta * j_var)


def mv_cost_vector(r: np.ndarray, j_mean: float, beta: float) -> np.ndarray:
    """Mean-variance cost f(i) = r(i) - beta * (r(i) - j_mean)**2.

    j_mean must be the long-run mean of the same policy that produced r;
    the quadratic penalty couples every state to the global mean.
    """
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta}")
    r = np.asarray(r, dtype=float)
    return r - beta * (r - j_mean) ** 2


def _poisson_residual(P, f, J, g) -> float:
    return float(np.max(np.abs(g - (f - J) - P @ g)))


def _solve_poisson_given_pi(P: np.ndarray, f: np.ndarray, J: float, pi: np.ndarray):
    """Solve (I - P) g = f - J with g[0] = 0, given the stationary pi.

    The pinned system (row 0 of I - P replaced by e_0) is nonsingular for
    irreducible chains. When state 0 is transient in a unichain it becomes
    singular; the normalized system (I - P + 1 pi^T) g = f - J is then
    solved instead and shifted to g[0] = 0.
    """
    S = P.shape[0]
    consistency = abs(float(pi @ f) - J)
    if consistency > CONSISTENCY_TOL:
        raise EvaluationError(
            f"supplied average {J!r} disagrees with pi.f by {consistency:.3e}"
        )
    M = np.eye(S) - P
    M[0, :] = 0.0
    M[0, 0] = 1.0
    b = f - J
    b[0] = 0.0
    g = None
    try:
        g = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        pass
    if g is not None and _poisson_residual(P, f, J, g) <= _poisson_tol(g):
        return g
    M2 = np.eye(S) - P + np.outer(np.ones(S), pi)
    try:
        g = np.linalg.solve(M2, f - J)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"potential solve failed: {exc}") from exc
    g = g - g[0]
    residual = _poisson_residual(P, f, J, g)
    if residual > _poisson_tol(g):
        raise EvaluationError(f"potential residual {residual:.3e} is too large")
    return g


def _poisson_tol(g: np.ndarray) -> float:
    # scale-aware: badly mixing chains have huge potentials and a
    # proportionally larger attainable residual
    return max(POISSON_TOL, 1e-12 * float(np.max(np.abs(g))))


def solve_poisson(P: np.ndarray, f: np.ndarray, J: float) -> np.ndarray:
    """Potential g with g[0] = 0 solving g = f - J + P g.

    J must equal pi.f within 1e-9; the solution is unique once g[0] is
    pinned.
    """
    P = _check_stochastic(P)
    f = np.asarray(f, dtype=float)
    if f.shape != (P.shape[0],):
        raise ValidationError(f"cost length {f.shape} does not match P {P.shape}")
    pi = stationary_distribution(P)
    return _solve_poisson_given_pi(P, f.copy(), float(J), pi)


def evaluate(model: MdpModel, policy) -> EvaluationReport:
    """Full exact evaluation of a deterministic or randomized policy."""
    if isinstance(policy, DeterministicPolicy):
        P, r = induced_chain(model, policy)
        m2 = None
    elif isinstance(policy, RandomizedPolicy):
        P, r, m2 = induced_chain_randomized(model, policy)
    else:
        raise ValidationError(f"cannot evaluate policy of type {type(policy).__name__}")
    pi = stationary_distribution(P)
    j_mean = long_run_mean(pi, r)
    j_var = steady_state_variance(pi, r, j_mean, second_moment=m2)
    j_comb = combined_metric(j_mean, j_var, model.beta)
    if m2 is None:
        sq = (r - j_mean) ** 2
    else:
        sq = m2 - 2.0 * j_mean * r + j_mean**2
    cost = r - model.beta * sq
    g = _solve_poisson_given_pi(P, cost.copy(), j_comb, pi)
    g_mean = _solve_poisson_given_pi(P, r.copy(), j_mean, pi)
    g_var = _solve_poisson_given_pi(P, sq.copy(), j_var, pi)
    return EvaluationReport(
        pi=pi,
        j_mean=j_mean,
        j_var=j_var,
        j_combined=j_comb,
        cost=cost,
        potential=g,
        potential_mean=g_mean,
        potential_var=g_var,
        beta=model.beta,
    )


def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready dict with fields named exactly as in EvaluationReport."""
    return {
        "pi": [float(x) for x in report.pi],
        "j_mean": report.j_mean,
        "j_var": report.j_var,
        "j_combined": report.j_combined,
        "cost": [float(x) for x in report.cost],
        "potential": [float(x) for x in report.potential],
        "potential_mean": [float(x) for x in report.potential_mean],
        "potential_var": [float(x) for x in report.potential_var],
        "beta": report.beta,
    }
