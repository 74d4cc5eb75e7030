"""Right-hand sides of the relativistic and classical Cucker-Smale systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .relativistic import DomainError, KernelSpec, ModelParams, velocity_factors, w_from_v


@dataclass
class EnsembleState:
    t: float
    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float).reshape(-1, 3)
        self.w = np.array(self.w, dtype=float).reshape(-1, 3)
        if self.x.shape != self.w.shape:
            raise ValueError("positions and momenta differ in shape")
        if self.x.shape[0] < 1:
            raise ValueError("an ensemble needs at least one agent")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.x).all() and np.isfinite(self.w).all() and np.isfinite(self.t))

    def momentum_sum(self) -> np.ndarray:
        return self.w.sum(axis=0)

    def is_zero_sum(self, rtol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.max(np.linalg.norm(self.w, axis=1))))
        return float(np.linalg.norm(self.momentum_sum())) <= rtol * scale

    def copy(self) -> "EnsembleState":
        return EnsembleState(self.t, self.x.copy(), self.w.copy())


@dataclass
class Derivative:
    dx: np.ndarray
    dw: np.ndarray


@dataclass
class PreparedInitial:
    """Projected initial state plus the raw input it came from."""

    state: EnsembleState
    raw_w: np.ndarray
    mean_removed: np.ndarray = field(default_factory=lambda: np.zeros(3))


def kernel_eval(spec: KernelSpec, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("kernel argument must be >= 0")
    if spec.kind == "constant":
        out = np.ones_like(r)
    else:
        out = (1.0 + r * r) ** (-0.5 * spec.beta)
    return float(out) if out.ndim == 0 else out


def kernel_lipschitz(spec: KernelSpec) -> float:
    """Lipschitz constant of the kernel on ``[0, inf)``."""
    if spec.kind == "constant" or spec.beta == 0:
        return 0.0
    b = spec.beta
    # |phi'(r)| = b r (1 + r^2)^(-b/2 - 1), maximal at r = 1/sqrt(b + 1)
    r = 1.0 / np.sqrt(b + 1.0)
    return float(b * r * (1.0 + r * r) ** (-0.5 * b - 1.0))


def _pair_weights(x: np.ndarray, spec: KernelSpec) -> np.ndarray:
    diff = x[None, :, :] - x[:, None, :]
    return kernel_eval(spec, np.sqrt(np.einsum("abk,abk->ab", diff, diff)))


def _alignment(x: np.ndarray, v: np.ndarray, spec: KernelSpec, T_star: float) -> np.ndarray:
    n = x.shape[0]
    phi = _pair_weights(x, spec)
    rel = v[None, :, :] - v[:, None, :]
    # explicit reduction over b, no BLAS, so results are bitwise reproducible
    return np.sum(phi[:, :, None] * rel, axis=1) / (n * T_star)


def rcs_rhs(state: EnsembleState, params: ModelParams) -> Derivative:
    v, _ = velocity_factors(state.w, params)
    return Derivative(v, _alignment(state.x, v, params.kernel, params.T_star))


def cs_rhs(state: EnsembleState, params: ModelParams) -> Derivative:
    return Derivative(state.w.copy(), _alignment(state.x, state.w, params.kernel, params.T_star))


RHS = {"rcs": rcs_rhs, "cs": cs_rhs}


def prepare_initial(
    positions, data, mode: str, params: ModelParams, t0: float = 0.0
) -> PreparedInitial:
    """Build a zero-momentum-sum initial state.

    ``mode="from_v"`` treats ``data`` as velocities and converts them to
    generalized momenta first; ``"from_w"`` takes them as momenta. The mean
    momentum is then removed.
    """
    x = np.array(positions, dtype=float).reshape(-1, 3)
    data = np.array(data, dtype=float).reshape(-1, 3)
    if x.shape != data.shape:
        raise ValueError("positions and velocities differ in shape")
    if mode == "from_v":
        raw = np.array([w_from_v(vi, params, i) for i, vi in enumerate(data)]).reshape(-1, 3)
    elif mode == "from_w":
        raw = data.copy()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    mean = raw.mean(axis=0)
    w = raw - mean
    return PreparedInitial(EnsembleState(t0, x, w), raw, mean)
