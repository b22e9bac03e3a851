"""Command-line surface: model ingestion, solvers, beta sweeps, simulation
cross-checks, and CSV/report emission.

Exit codes: 0 success, 2 validation problem, 3 solver/evaluation failure,
4 file I/O problem. All numeric CSV output uses shortest round-trip float
formatting, so reruns with identical inputs are byte-identical.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationError,
    ModelIOError,
    MvmdpError,
    SolverError,
    ValidationError,
)
from .evaluation import evaluate, report_to_dict
from .model import (
    DeterministicPolicy,
    MdpModel,
    RandomizedPolicy,
    check_ergodicity,
    load_model,
    load_policy,
    sample_random_policy,
    save_model,
    save_policy,
)
from .sensitivity import improvement_vector
from .simulation import estimate_metrics, simulate_path
from .solvers import (
    GradientConfig,
    MultiStartResult,
    SolverTrace,
    gradient_solver,
    multi_start,
    policy_iteration,
)
from .wind_storage import WindStorageSpec, build_abandonment, build_no_abandonment

COMMANDS = (
    "evaluate",
    "solve-pi",
    "solve-gd",
    "multi-start",
    "sweep-beta",
    "simulate",
    "check",
    "wind-build",
)


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation. Only the fields the command uses are consulted."""

    command: str
    model_path: str | None = None
    policy_path: str | None = None
    beta_grid: tuple = ()
    seed: int = 0
    output_path: str | None = None
    initial_path: str | None = None
    policy_out: str | None = None
    scores_out: str | None = None
    path_out: str | None = None
    starts: int = 5
    horizon: int = 100_000
    burn_in: int = 1000
    stop_ratio: float = 0.001
    max_iterations: int | None = None
    scenario: str = "no-abandon"
    beta: float = 0.1
    kernel_path: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.beta_grid:
            grid = tuple(float(b) for b in self.beta_grid)
            if any(b <= 0 for b in grid):
                raise ValidationError("beta grid values must be > 0")
            if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
                raise ValidationError("beta grid must be strictly increasing")
            object.__setattr__(self, "beta_grid", grid)


@dataclass(frozen=True)
class ParetoPoint:
    beta: float
    j_mean: float
    j_var: float
    j_combined: float
    policy_id: str


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: str, header: str, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise ModelIOError(f"cannot write {path}: {exc}") from exc


def _write_json(path: str | None, data: dict) -> None:
    text = json.dumps(data, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ModelIOError(f"cannot write {path}: {exc}") from exc


def _trace_rows(trace: SolverTrace):
    for rec in trace.iterations:
        yield (
            str(rec.iteration),
            _fmt(rec.j_mean),
            _fmt(rec.j_var),
            _fmt(rec.j_combined),
            str(rec.states_changed),
        )


def _load_model(config: RunConfig) -> MdpModel:
    if config.model_path is None:
        raise ValidationError(f"{config.command} needs --model")
    return load_model(config.model_path)


def _cmd_evaluate(config: RunConfig) -> int:
    model = _load_model(config)
    if config.policy_path is None:
        raise ValidationError("evaluate needs --policy")
    policy = load_policy(config.policy_path)
    report = evaluate(model, policy)
    if config.scores_out is not None:
        if not isinstance(policy, DeterministicPolicy):
            raise ValidationError("--scores-out needs a deterministic policy")
        iv = improvement_vector(model, report, policy)
        rows = []
        for i, acts in enumerate(model.feasible):
            for a in acts:
                rows.append((str(i), str(a), _fmt(iv.score[i, a])))
        _write_csv(config.scores_out, "state,action,score", rows)
    _write_json(config.output_path, report_to_dict(report))
    print(
        f"j_mean={report.j_mean!r} j_var={report.j_var!r} "
        f"j_combined={report.j_combined!r}",
        file=sys.stderr,
    )
    return 0


def _initial_policy(config: RunConfig, model: MdpModel) -> DeterministicPolicy:
    if config.initial_path is not None:
        policy = load_policy(config.initial_path)
        if not isinstance(policy, DeterministicPolicy):
            raise ValidationError("initial policy file must be deterministic")
        return policy
    return sample_random_policy(model, np.random.default_rng(config.seed))


def _cmd_solve_pi(config: RunConfig) -> int:
    model = _load_model(config)
    initial = _initial_policy(config, model)
    policy, trace = policy_iteration(model, initial, max_iterations=config.max_iterations)
    if config.output_path is not None:
        _write_csv(
            config.output_path,
            "iter,j_mean,j_var,j_combined,states_changed",
            _trace_rows(trace),
        )
    if config.policy_out is not None:
        save_policy(policy, config.policy_out)
    last = trace.iterations[-1]
    print(
        f"stop={trace.stop_reason} iterations={len(trace.iterations) - 1} "
        f"j_mean={last.j_mean!r} j_var={last.j_var!r} j_combined={last.j_combined!r}",
        file=sys.stderr,
    )
    if not trace.converged:
        raise SolverError(
            f"policy iteration stopped by iteration cap ({trace.stop_reason})"
        )
    return 0


def _cmd_solve_gd(config: RunConfig) -> int:
    model = _load_model(config)
    if config.initial_path is not None:
        loaded = load_policy(config.initial_path)
        if isinstance(loaded, DeterministicPolicy):
            theta = loaded.as_randomized(model)
        else:
            theta = loaded
    else:
        rows = np.zeros((model.num_states, model.num_actions))
        for i, acts in enumerate(model.feasible):
            rows[i, list(acts)] = 1.0 / len(acts)
        theta = RandomizedPolicy(rows)
    gc = GradientConfig(
        stop_ratio=config.stop_ratio,
        max_iterations=config.max_iterations or 500,
        seed=config.seed,
    )
    result = gradient_solver(model, theta, gc)
    if config.output_path is not None:
        _write_csv(
            config.output_path,
            "iter,j_mean,j_var,j_combined,states_changed",
            _trace_rows(result.trace),
        )
    if config.policy_out is not None:
        save_policy(result.theta, config.policy_out)
    print(
        f"stop={result.trace.stop_reason} iterations={len(result.trace.iterations) - 1} "
        f"j_mean={result.report.j_mean!r} j_var={result.report.j_var!r} "
        f"j_combined={result.report.j_combined!r}",
        file=sys.stderr,
    )
    if not result.trace.converged:
        raise SolverError("gradient solver did not reach the stop threshold")
    return 0


def _cmd_multi_start(config: RunConfig) -> int:
    model = _load_model(config)
    result = multi_start(model, config.starts, config.seed)
    rows = []
    for k, trace in enumerate(result.traces):
        last = trace.iterations[-1]
        rows.append(
            (f"start{k}", _fmt(last.j_mean), _fmt(last.j_var), _fmt(last.j_combined))
        )
    if config.output_path is not None:
        _write_csv(config.output_path, "policy_id,j_mean,j_var,j_combined", rows)
    if config.policy_out is not None:
        save_policy(result.best_policy, config.policy_out)
    best = result.best_report
    print(
        f"best j_combined={best.j_combined!r} "
        f"distinct_optima={[repr(v) for v in result.distinct_optima]}",
        file=sys.stderr,
    )
    return 0


def sweep_beta(model: MdpModel, beta_grid, starts_per_beta: int, seed: int = 0):
    """Best multi-start point per beta.

    Returns (points, optima_rows, failures): one ParetoPoint per successful
    beta, all distinct local-optimum rows per beta, and (beta, message)
    pairs for betas whose runs failed. Failures do not stop the sweep.
    """
    if not beta_grid:
        raise ValidationError("beta grid must be nonempty")
    points = []
    optima_rows = []
    failures = []
    for beta in beta_grid:
        model_b = dataclasses.replace(model, beta=float(beta))
        try:
            result = multi_start(model_b, starts_per_beta, seed)
        except MvmdpError as exc:
            failures.append((float(beta), str(exc)))
            continue
        best = result.best_report
        points.append(
            ParetoPoint(
                beta=float(beta),
                j_mean=best.j_mean,
                j_var=best.j_var,
                j_combined=best.j_combined,
                policy_id=f"start{result.best_index}",
            )
        )
        seen = []
        for trace in result.traces:
            last = trace.iterations[-1]
            if any(abs(last.j_combined - v) <= 1e-6 for v in seen):
                continue
            seen.append(last.j_combined)
            optima_rows.append(
                (float(beta), last.j_mean, last.j_var, last.j_combined)
            )
    return points, optima_rows, failures


def _cmd_sweep_beta(config: RunConfig) -> int:
    model = _load_model(config)
    if not config.beta_grid:
        raise ValidationError("sweep-beta needs --beta-grid")
    points, optima_rows, failures = sweep_beta(
        model, config.beta_grid, config.starts, config.seed
    )
    if config.output_path is not None:
        _write_csv(
            config.output_path,
            "beta,j_mean,j_var,j_combined",
            (
                (_fmt(p.beta), _fmt(p.j_mean), _fmt(p.j_var), _fmt(p.j_combined))
                for p in points
            ),
        )
        stem, dot, ext = config.output_path.rpartition(".")
        optima_path = f"{stem}_optima.{ext}" if dot else config.output_path + "_optima"
        _write_csv(
            optima_path,
            "beta,j_mean,j_var,j_combined",
            ((_fmt(b), _fmt(m), _fmt(v), _fmt(c)) for b, m, v, c in optima_rows),
        )
    for beta, message in failures:
        print(f"beta={beta!r} failed: {message}", file=sys.stderr)
    return 0


def _cmd_simulate(config: RunConfig) -> int:
    model = _load_model(config)
    if config.policy_path is None:
        raise ValidationError("simulate needs --policy")
    policy = load_policy(config.policy_path)
    total = config.horizon + config.burn_in
    path = simulate_path(model, policy, total, seed=config.seed)
    est = estimate_metrics(path.rewards[config.burn_in :], model.beta, seed=config.seed)
    if config.path_out is not None:
        rows = (
            (str(t), str(int(s)), str(int(a)), _fmt(r))
            for t, (s, a, r) in enumerate(zip(path.states, path.actions, path.rewards))
        )
        _write_csv(config.path_out, "t,state,action,reward", rows)
    _write_json(config.output_path, dataclasses.asdict(est))
    return 0


def cross_check(model: MdpModel, policy, T: int, seed: int = 0, burn_in: int = 1000):
    """Analytic vs. simulated metrics with 3-half-width agreement flags."""
    report = evaluate(model, policy)
    path = simulate_path(model, policy, T + burn_in, seed=seed)
    est = estimate_metrics(path.rewards[burn_in:], model.beta, seed=seed)
    def entry(analytic, estimate, half_width):
        return {
            "analytic": analytic,
            "estimate": estimate,
            "half_width": half_width,
            "pass": bool(abs(analytic - estimate) <= 3.0 * half_width)
            if half_width > 0
            else bool(analytic == estimate),
        }
    return {
        "j_mean": entry(report.j_mean, est.j_mean_hat, est.half_width_mean),
        "j_var": entry(report.j_var, est.j_var_hat, est.half_width_var),
        "j_combined": entry(
            report.j_combined, est.j_combined_hat, est.half_width_combined
        ),
        "horizon": T,
        "burn_in": burn_in,
        "seed": seed,
    }


def _cmd_check(config: RunConfig) -> int:
    model = _load_model(config)
    if config.policy_path is None:
        raise ValidationError("check needs --policy")
    policy = load_policy(config.policy_path)
    report = cross_check(
        model, policy, config.horizon, seed=config.seed, burn_in=config.burn_in
    )
    _write_json(config.output_path, report)
    return 0


def _cmd_wind_build(config: RunConfig) -> int:
    if config.output_path is None:
        raise ValidationError("wind-build needs --out")
    abandonment = {"no-abandon": False, "abandon": True}.get(config.scenario)
    if abandonment is None:
        raise ValidationError(f"unknown scenario {config.scenario!r}")
    kwargs = {"beta": config.beta, "abandonment": abandonment}
    if config.kernel_path is not None:
        try:
            with open(config.kernel_path) as fh:
                kernel = json.load(fh)
        except OSError as exc:
            raise ModelIOError(f"cannot read kernel {config.kernel_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ModelIOError(
                f"kernel file {config.kernel_path} is not valid JSON: {exc.msg}"
            ) from exc
        kwargs["wind_kernel"] = np.asarray(kernel, dtype=float)
    spec = WindStorageSpec(**kwargs)
    model = build_abandonment(spec) if abandonment else build_no_abandonment(spec)
    save_model(model, config.output_path)
    ergo = check_ergodicity(model)
    print(
        f"states={model.num_states} actions={model.num_actions} "
        f"ergodicity_check={ergo.mode} violations={len(ergo.violations)}",
        file=sys.stderr,
    )
    return 0


_HANDLERS = {
    "evaluate": _cmd_evaluate,
    "solve-pi": _cmd_solve_pi,
    "solve-gd": _cmd_solve_gd,
    "multi-start": _cmd_multi_start,
    "sweep-beta": _cmd_sweep_beta,
    "simulate": _cmd_simulate,
    "check": _cmd_check,
    "wind-build": _cmd_wind_build,
}


def run(config: RunConfig) -> int:
    """Dispatch one parsed invocation; raises package errors on failure."""
    return _HANDLERS[config.command](config)


def _default_seed() -> int:
    return int(os.environ.get("MVMDP_SEED", "0"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvmdp",
        description="Long-run mean-variance optimization of finite MDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--out", dest="output_path", default=None)
        return p

    p = add("evaluate", "exact metrics and potentials of one policy")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--policy", dest="policy_path", required=True)
    p.add_argument("--scores-out", dest="scores_out", default=None)

    p = add("solve-pi", "policy iteration on the combined metric")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--initial", dest="initial_path", default=None)
    p.add_argument("--policy-out", dest="policy_out", default=None)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)

    p = add("solve-gd", "projected-gradient baseline over randomized policies")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--initial", dest="initial_path", default=None)
    p.add_argument("--policy-out", dest="policy_out", default=None)
    p.add_argument("--stop-ratio", dest="stop_ratio", type=float, default=0.001)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)

    p = add("multi-start", "policy iteration from several random starts")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--policy-out", dest="policy_out", default=None)

    p = add("sweep-beta", "trace the mean-variance frontier over beta")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--beta-grid", dest="beta_grid", required=True)
    p.add_argument("--starts", type=int, default=5)

    p = add("simulate", "Monte Carlo metric estimates for one policy")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--policy", dest="policy_path", required=True)
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.add_argument("--path-out", dest="path_out", default=None)

    p = add("check", "analytic vs. simulated metric agreement report")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--policy", dest="policy_path", required=True)
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)

    p = add("wind-build", "emit a wind-plus-storage benchmark model file")
    p.add_argument("--scenario", choices=["no-abandon", "abandon"], default="no-abandon")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--kernel", dest="kernel_path", default=None)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    data = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    if "beta_grid" in data and isinstance(data["beta_grid"], str):
        try:
            data["beta_grid"] = tuple(float(x) for x in data["beta_grid"].split(","))
        except ValueError as exc:
            raise ValidationError(f"bad beta grid: {exc}") from exc
    return RunConfig(**data)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return run(_config_from_args(args))
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
