"""Wind-farm-plus-battery dispatch benchmark.

A wind farm with output levels 0..5 MW (an exogenous Markov chain) shares a
grid connection with a battery of capacity B MWh. Each hour the dispatcher
picks a battery power A (positive discharges, negative charges); delivered
power is Y = X + A. In the abandonment variant the decision U = A - V may
also discard V >= 0 MW of wind when the battery cannot absorb it.

States are flattened as wind * (B + 1) + battery.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import MdpModel

# hourly wind-level transition probabilities estimated for the benchmark site
WIND_KERNEL = np.array(
    [
        [0.53, 0.18, 0.19, 0.04, 0.01, 0.05],
        [0.51, 0.08, 0.20, 0.08, 0.02, 0.11],
        [0.35, 0.11, 0.19, 0.11, 0.03, 0.21],
        [0.27, 0.15, 0.15, 0.14, 0.03, 0.26],
        [0.14, 0.11, 0.13, 0.15, 0.05, 0.42],
        [0.09, 0.03, 0.06, 0.06, 0.03, 0.73],
    ]
)
WIND_KERNEL.setflags(write=False)


@dataclass(frozen=True)
class WindStorageSpec:
    """Benchmark data: wind levels (MW), battery capacity (MWh), battery
    power actions (MW), wind transition matrix, risk weight, scenario."""

    wind_states: tuple = (0, 1, 2, 3, 4, 5)
    battery_capacity: int = 5
    charge_actions: tuple = (-2, -1, 0, 1, 2)
    wind_kernel: np.ndarray = field(default_factory=lambda: WIND_KERNEL)
    beta: float = 0.1
    abandonment: bool = False

    def __post_init__(self):
        object.__setattr__(self, "wind_kernel", np.asarray(self.wind_kernel, float))
        W = len(self.wind_states)
        if self.wind_kernel.shape != (W, W):
            raise ValidationError(
                f"wind kernel shape {self.wind_kernel.shape} != {(W, W)}"
            )
        if np.any(self.wind_kernel < 0):
            raise ValidationError("wind kernel has a negative entry")
        sums = self.wind_kernel.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-12)
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"wind kernel row {i} sums to {float(sums[i])!r}, expected 1"
            )
        if self.battery_capacity < 1:
            raise ValidationError("battery capacity must be >= 1")
        if 0 not in self.charge_actions:
            raise ValidationError("charge action set must contain 0")

    @property
    def num_states(self) -> int:
        return len(self.wind_states) * (self.battery_capacity + 1)


@dataclass(frozen=True)
class JointState:
    """Wind output level (MW) and battery level (MWh)."""

    wind: int
    battery: int

    def flat_index(self, battery_capacity: int = 5) -> int:
        return self.wind * (battery_capacity + 1) + self.battery

    @classmethod
    def from_flat(cls, index: int, battery_capacity: int = 5) -> "JointState":
        return cls(index // (battery_capacity + 1), index % (battery_capacity + 1))


def state_index(spec: WindStorageSpec, wind: int, battery: int) -> int:
    return wind * (spec.battery_capacity + 1) + battery


def _joint_kernel_row(spec: WindStorageSpec, wind: int, battery_next: int):
    """Next-state distribution: wind moves by its kernel, battery is set."""
    S = spec.num_states
    row = np.zeros(S)
    for w2, p in enumerate(spec.wind_kernel[wind]):
        row[state_index(spec, w2, battery_next)] = p
    return row


def build_no_abandonment(spec: WindStorageSpec) -> MdpModel:
    """Joint MDP where all wind power goes to the battery or the grid.

    Feasible battery powers A at (X, b) satisfy b - B <= A <= b (battery
    stays within capacity) and A >= -X (charging draws from current wind
    only, so delivered power Y = X + A stays nonnegative). Reward is Y.
    """
    if spec.abandonment:
        raise ValidationError("spec has the abandonment flag set")
    B = spec.battery_capacity
    acts = spec.charge_actions
    S = spec.num_states
    A = len(acts)
    feasible = []
    kernel = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    for w, x_power in enumerate(spec.wind_states):
        for b in range(B + 1):
            i = state_index(spec, w, b)
            allowed = [
                ai
                for ai, a in enumerate(acts)
                if b - B <= a <= b and a >= -x_power
            ]
            if not allowed:
                raise ValidationError(f"state (wind {w}, battery {b}) has no action")
            feasible.append(tuple(allowed))
            for ai in allowed:
                a = acts[ai]
                reward[i, ai] = x_power + a
                kernel[i, ai] = _joint_kernel_row(spec, w, b - a)
    return MdpModel(S, A, tuple(feasible), kernel, reward, spec.beta)


def decompose_action(spec: WindStorageSpec, state: JointState, U: int):
    """Split a decision U into battery power A and abandoned power V.

    The battery absorbs as much of a charging request as its free capacity
    and the charge limit allow; the remainder is abandoned:
    A = U when U >= max(min charge, b - B), else A is that bound and
    V = A - U. Always U = A - V, 0 <= V <= X.
    """
    x_power = spec.wind_states[state.wind]
    b = state.battery
    B = spec.battery_capacity
    lo = -x_power
    hi = min(max(spec.charge_actions), b)
    if not lo <= U <= hi:
        raise ValidationError(
            f"decision {U} outside feasible range [{lo}, {hi}] at "
            f"(wind {state.wind}, battery {b})"
        )
    a_floor = max(min(spec.charge_actions), b - B)
    if U >= a_floor:
        return U, 0
    return a_floor, a_floor - U


def build_abandonment(spec: WindStorageSpec) -> MdpModel:
    """Joint MDP where surplus wind may be abandoned.

    The decision variable is U in {-X, ..., min(max charge action, b)};
    reward is Y = X + U. Actions are indexed globally over the widest
    possible range; states expose the subset their wind level allows.
    """
    if not spec.abandonment:
        raise ValidationError("spec lacks the abandonment flag")
    B = spec.battery_capacity
    S = spec.num_states
    u_min = -max(spec.wind_states)
    u_max = max(spec.charge_actions)
    decisions = list(range(u_min, u_max + 1))
    A = len(decisions)
    feasible = []
    kernel = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    for w, x_power in enumerate(spec.wind_states):
        for b in range(B + 1):
            i = state_index(spec, w, b)
            allowed = [
                ui for ui, u in enumerate(decisions) if -x_power <= u <= min(u_max, b)
            ]
            if not allowed:
                raise ValidationError(f"state (wind {w}, battery {b}) has no action")
            feasible.append(tuple(allowed))
            for ui in allowed:
                u = decisions[ui]
                a, _ = decompose_action(spec, JointState(w, b), u)
                reward[i, ui] = x_power + u
                kernel[i, ui] = _joint_kernel_row(spec, w, b - a)
    return MdpModel(S, A, tuple(feasible), kernel, reward, spec.beta)


def build(spec: WindStorageSpec) -> MdpModel:
    return build_abandonment(spec) if spec.abandonment else build_no_abandonment(spec)


def action_values(spec: WindStorageSpec):
    """Physical meaning of each action index for the given scenario."""
    if spec.abandonment:
        u_min = -max(spec.wind_states)
        return tuple(range(u_min, max(spec.charge_actions) + 1))
    return tuple(spec.charge_actions)
