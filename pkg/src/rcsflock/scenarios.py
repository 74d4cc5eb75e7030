"""Initial data builders and the reference scenarios used by the checks."""

from __future__ import annotations

import math

import numpy as np

from .dynamics import EnsembleState, prepare_initial
from .integrator import SimConfig
from .io import Scenario
from .meanfield import MeasureSpec, sample_cloud
from .relativistic import KernelSpec, ModelParams, uniform_params


def measure_spec(scenario: Scenario) -> MeasureSpec:
    if scenario.kind == "explicit":
        raise ValueError("explicit scenarios have no measure spec")
    return MeasureSpec(
        kind=scenario.kind,
        x_scale=scenario.x_scale,
        w_scale=scenario.w_scale,
        separation=scenario.separation,
        truncation=scenario.truncation,
    )


def build_initial(scenario: Scenario, params: ModelParams, seed: int) -> EnsembleState:
    """Zero-momentum-sum initial state for a scenario block.

    With ``mode="from_v"`` the sampled (or listed) vectors are velocities and
    are converted to momenta before the mean is removed.
    """
    if scenario.kind == "explicit":
        x = np.array(scenario.positions, dtype=float).reshape(-1, 3)
        data = np.array(scenario.velocities, dtype=float).reshape(-1, 3)
    else:
        cloud = sample_cloud(measure_spec(scenario), scenario.N, seed, params)
        x, data = cloud.points[:, :3], cloud.points[:, 3:]
    return prepare_initial(x, data, scenario.mode, params).state


def standard_flocking(c: float = 10.0, seed: int = 7) -> tuple[EnsembleState, ModelParams, SimConfig]:
    """Eight agents in a unit cube with small momenta; certified at ``c = 10``."""
    params = uniform_params(c, kernel=KernelSpec("power_law", 2.0))
    sc = Scenario(N=8, x_scale=0.5, w_scale=0.05)
    return build_initial(sc, params, seed), params, SimConfig(dt=0.01, t_end=40.0, sample_every=10, seed=seed)


def standard_kinetic() -> tuple[MeasureSpec, int, int, ModelParams, SimConfig]:
    """32-point uniform cloud used for the Wasserstein rate; returns ``(spec, N, seed, params, config)``."""
    params = uniform_params(10.0, kernel=KernelSpec("power_law", 2.0))
    spec = MeasureSpec("uniform_box", x_scale=0.5, w_scale=0.03)
    return spec, 32, 11, params, SimConfig(dt=0.01, t_end=40.0, sample_every=10, seed=11)


def two_body_cs_exact(x0, w0, t, T_star: float = 1.0):
    """Closed-form classical two-body flow with constant kernel.

    The relative velocity obeys ``u' = -u/T*``, the centre of mass moves
    uniformly. Returns ``(x, w)`` arrays of shape (2, 3).
    """
    x0 = np.asarray(x0, dtype=float).reshape(2, 3)
    w0 = np.asarray(w0, dtype=float).reshape(2, 3)
    vc = w0.mean(axis=0)
    xc = x0.mean(axis=0) + vc * t
    u0 = w0[1] - w0[0]
    r0 = x0[1] - x0[0]
    e = math.exp(-t / T_star)
    u = u0 * e
    r = r0 + u0 * T_star * (1.0 - e)
    x = np.stack([xc - 0.5 * r, xc + 0.5 * r])
    w = np.stack([vc - 0.5 * u, vc + 0.5 * u])
    return x, w
