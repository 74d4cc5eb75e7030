"""Fixed-step classical RK4 and trajectory sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import RHS, Derivative, EnsembleState
from .relativistic import ModelParams


class NumericalAbort(RuntimeError):
    def __init__(self, step: int, agent: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:.6g}), agent {agent}")
        self.step = step
        self.agent = agent
        self.t = t


def default_dt(params: ModelParams) -> float:
    # phi(0) = 1 for every kernel in the library
    return min(1e-2, 0.1 * params.T_star / 1.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    sample_every: int = 1
    model: str = "rcs"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if int(self.sample_every) < 1:
            raise ValueError("sample_every must be >= 1")
        if self.model not in RHS:
            raise ValueError(f"unknown model {self.model!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be unsigned")

    @property
    def n_steps(self) -> int:
        ratio = self.t_end / self.dt
        # guard against 33/0.01 = 3300.0000000000005
        return max(1, math.ceil(ratio - 1e-9 * ratio))


@dataclass
class Trajectory:
    samples: list[EnsembleState]
    config: SimConfig
    params: ModelParams
    steps: list[int] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def X(self) -> np.ndarray:
        return np.stack([s.x for s in self.samples])

    @property
    def W(self) -> np.ndarray:
        return np.stack([s.w for s in self.samples])

    def __len__(self) -> int:
        return len(self.samples)


def rk4_step(
    state: EnsembleState, dt: float, rhs: Callable[[EnsembleState], Derivative]
) -> EnsembleState:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    x, w, t = state.x, state.w, state.t
    k1 = rhs(state)
    k2 = rhs(EnsembleState(t + 0.5 * dt, x + 0.5 * dt * k1.dx, w + 0.5 * dt * k1.dw))
    k3 = rhs(EnsembleState(t + 0.5 * dt, x + 0.5 * dt * k2.dx, w + 0.5 * dt * k2.dw))
    k4 = rhs(EnsembleState(t + dt, x + dt * k3.dx, w + dt * k3.dw))
    x_new = x + (dt / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx)
    w_new = w + (dt / 6.0) * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw)
    return EnsembleState(t + dt, x_new, w_new)


def simulate(init: EnsembleState, params: ModelParams, config: SimConfig) -> Trajectory:
    """Integrate ``config.model`` from ``init`` with uniform steps.

    Runs ``ceil(t_end/dt)`` steps; sample times are ``t0 + k*dt`` computed from
    the step index, so two runs with the same ``dt`` share a time grid. The
    final state is always sampled.
    """
    field_fn = RHS[config.model]

    def rhs(s: EnsembleState) -> Derivative:
        return field_fn(s, params)

    t0 = init.t
    state = init.copy()
    samples, steps = [state], [0]
    n = config.n_steps
    for step in range(1, n + 1):
        state = rk4_step(state, config.dt, rhs)
        state.t = t0 + step * config.dt
        if not state.is_finite():
            bad = ~(np.isfinite(state.x).all(axis=1) & np.isfinite(state.w).all(axis=1))
            agent = int(np.argmax(bad)) if bad.any() else -1
            raise NumericalAbort(step, agent, state.t)
        if step % config.sample_every == 0 or step == n:
            samples.append(state)
            steps.append(step)
    return Trajectory(samples, config, params, steps)
