"""Relativistic kinematics of a single agent.

Every agent carries a generalized momentum ``w = F v`` where

    Gamma = 1 / sqrt(1 - |v|^2 / c^2)
    F     = Gamma * (1 + k Gamma),   k = (D + 2) / (2 gamma*)
    gamma* = m c^2 / (k_B T*)

``k`` is called the pressure coefficient below. Everything here is a pure
function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "power_law"
    beta: float = 2.0

    def __post_init__(self):
        if self.kind not in ("constant", "power_law"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "power_law" and not self.beta >= 0:
            raise ValueError("kernel beta must be >= 0")


@dataclass(frozen=True)
class ModelParams:
    """Physical constants plus per-agent ``(mass, dof)`` pairs.

    ``agents`` of length one is broadcast to every agent of an ensemble.
    """

    c: float
    T_star: float = 1.0
    k_B: float = 1.0
    agents: tuple[tuple[float, float], ...] = ((1.0, 3.0),)
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("c must be a finite positive number")
        if not self.T_star > 0:
            raise ValueError("T_star must be > 0")
        if not self.k_B > 0:
            raise ValueError("k_B must be > 0")
        if len(self.agents) == 0:
            raise ValueError("at least one (mass, dof) pair is required")
        for m, d in self.agents:
            if not m > 0:
                raise ValueError("every mass must be > 0")
            if not d >= 1:
                raise ValueError("every degree of freedom must be >= 1")
        object.__setattr__(self, "agents", tuple((float(m), float(d)) for m, d in self.agents))

    @property
    def homogeneous(self) -> bool:
        return len(set(self.agents)) == 1

    def agent(self, index: int = 0) -> tuple[float, float]:
        if len(self.agents) == 1:
            return self.agents[0]
        return self.agents[index]

    def gamma_star(self, index: int = 0) -> float:
        m, _ = self.agent(index)
        return m * self.c**2 / (self.k_B * self.T_star)

    def pressure_coeff(self, index: int = 0) -> float:
        _, d = self.agent(index)
        return (d + 2.0) / (2.0 * self.gamma_star(index))

    def pressure_coeffs(self, n: int) -> np.ndarray:
        if len(self.agents) == 1:
            return np.full(n, self.pressure_coeff(0))
        if len(self.agents) != n:
            raise ValueError(f"params describe {len(self.agents)} agents, ensemble has {n}")
        return np.array([self.pressure_coeff(i) for i in range(n)])

    def n_agent_kinds(self) -> int:
        return len(self.agents)

    def with_c(self, c: float) -> "ModelParams":
        """Same masses, dofs and temperature at another speed of light."""
        return replace(self, c=float(c))


@dataclass(frozen=True)
class RelConstants:
    Lambda0: float
    Lambda1: float
    Lambda2: float
    lambda_: float
    Dx_inf: float


def lorentz_from_v(v, params: ModelParams, agent_index: int = 0) -> float:
    v = np.asarray(v, dtype=float)
    beta2 = float(v @ v) / params.c**2
    if beta2 >= 1.0:
        raise DomainError("superluminal velocity")
    return 1.0 / math.sqrt(1.0 - beta2)


def F_of_gamma(gamma, params: ModelParams, agent_index: int = 0):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 1.0):
        raise DomainError("Lorentz factor must be >= 1")
    k = params.pressure_coeff(agent_index)
    out = (1.0 + k * gamma) * gamma
    return float(out) if out.ndim == 0 else out


def _solve_u(w_norm: np.ndarray, c: float, k: np.ndarray) -> np.ndarray:
    """Solve ``c u (1 + k sqrt(1 + u^2)) = w`` for ``u = sqrt(Gamma^2 - 1) >= 0``.

    The left side is increasing and convex in ``u``, and since
    ``sqrt(1 + u^2) >= 1`` the root lies in ``[0, w / (c (1 + k))]``. Newton
    started at the upper end of that bracket decreases monotonically onto
    the root; a step that leaves the bracket is replaced by bisection.
    """
    w_norm = np.asarray(w_norm, dtype=float)
    k = np.broadcast_to(np.asarray(k, dtype=float), w_norm.shape)
    lo = np.zeros_like(w_norm)
    hi = w_norm / (c * (1.0 + k))
    u = hi.copy()
    for _ in range(100):
        s = np.sqrt(1.0 + u * u)
        h = c * u * (1.0 + k * s) - w_norm
        dh = c * (1.0 + k * s + k * u * u / s)
        u_new = u - h / dh
        bad = (u_new < lo) | (u_new > hi)
        if bad.any():
            lo = np.where(h < 0, np.maximum(lo, u), lo)
            hi = np.where(h > 0, np.minimum(hi, u), hi)
            u_new = np.where(bad, 0.5 * (lo + hi), u_new)
        # quadratic convergence: the error after this step is ~ step^2
        done = np.abs(u_new - u) <= 1e-11 * u_new
        u = u_new
        if done.all():
            break
    return u


def _gamma_parts(w_norm, c: float, k):
    """Return ``(Gamma, Gamma - 1)`` with the second computed without cancellation."""
    u = _solve_u(w_norm, c, k)
    s = np.sqrt(1.0 + u * u)
    return s, u * u / (1.0 + s)


def gamma_from_w(w_norm, params: ModelParams, agent_index: int = 0):
    w_norm = np.asarray(w_norm, dtype=float)
    if np.any(w_norm < 0) or not np.all(np.isfinite(w_norm)):
        raise DomainError("momentum norm must be finite and >= 0")
    gamma, _ = _gamma_parts(w_norm, params.c, params.pressure_coeff(agent_index))
    return float(gamma) if gamma.ndim == 0 else gamma


def velocity_factors(w: np.ndarray, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(v, F)`` for an ``(N, 3)`` momentum array, one root solve per agent."""
    w = np.asarray(w, dtype=float)
    k = params.pressure_coeffs(w.shape[0])
    gamma, _ = _gamma_parts(np.linalg.norm(w, axis=1), params.c, k)
    F = gamma * (1.0 + k * gamma)
    return w / F[:, None], F


def v_from_w(w, params: ModelParams, agent_index: int = 0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    gamma = gamma_from_w(float(np.linalg.norm(w)), params, agent_index)
    return w / F_of_gamma(gamma, params, agent_index)


def w_from_v(v, params: ModelParams, agent_index: int = 0) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    gamma = lorentz_from_v(v, params, agent_index)
    return F_of_gamma(gamma, params, agent_index) * v


def F_prime(gamma, params: ModelParams, agent_index: int = 0):
    """Derivative of F with respect to ``|w|^2`` at Lorentz factor ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 1.0):
        raise DomainError("Lorentz factor must be >= 1")
    k = params.pressure_coeff(agent_index)
    num = 1.0 + 2.0 * k * gamma
    den = 2.0 * params.c**2 * (1.0 + k * gamma) * (2.0 * k * gamma**2 + gamma - k)
    out = num / den
    return float(out) if out.ndim == 0 else out


def jacobian_A(z, params: ModelParams, agent_index: int = 0) -> np.ndarray:
    """Jacobian of ``z -> z / F(|z|^2)``."""
    z = np.asarray(z, dtype=float)
    z2 = float(z @ z)
    gamma = gamma_from_w(math.sqrt(z2), params, agent_index)
    F = F_of_gamma(gamma, params, agent_index)
    Fp = F_prime(gamma, params, agent_index)
    return np.eye(3) / F - 2.0 * Fp / F**2 * np.outer(z, z)


def jacobian_eigenvalues(z, params: ModelParams, agent_index: int = 0) -> np.ndarray:
    """Analytic eigenvalues of :func:`jacobian_A`, ascending."""
    z = np.asarray(z, dtype=float)
    z2 = float(z @ z)
    gamma = gamma_from_w(math.sqrt(z2), params, agent_index)
    F = F_of_gamma(gamma, params, agent_index)
    Fp = F_prime(gamma, params, agent_index)
    return np.array([1.0 / F - 2.0 * z2 * Fp / F**2, 1.0 / F, 1.0 / F])


def _min_eigenvalue(z_norm, params: ModelParams, agent_index: int):
    z_norm = np.asarray(z_norm, dtype=float)
    gamma = np.asarray(gamma_from_w(z_norm, params, agent_index))
    F = (1.0 + params.pressure_coeff(agent_index) * gamma) * gamma
    Fp = np.asarray(F_prime(gamma, params, agent_index))
    return (F - 2.0 * z_norm**2 * Fp) / F**2


def lambda0(W0: float, params: ModelParams, agent_index: int = 0, grid: int = 1024) -> float:
    """Coercivity constant of ``z -> z/F`` on the ball ``|z| <= W0``.

    Grid scan of the smallest Jacobian eigenvalue over ``[0, W0]``, polished
    by a bounded scalar minimisation around the best grid point.
    """
    if not W0 >= 0:
        raise DomainError("W0 must be >= 0")
    if W0 == 0:
        return float(_min_eigenvalue(0.0, params, agent_index))
    zs = np.linspace(0.0, W0, grid + 1)
    vals = _min_eigenvalue(zs, params, agent_index)
    i = int(np.argmin(vals))
    best = float(vals[i])
    a, b = zs[max(i - 1, 0)], zs[min(i + 1, grid)]
    if b > a:
        res = minimize_scalar(
            lambda z: float(_min_eigenvalue(z, params, agent_index)),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-12 * max(W0, 1.0)},
        )
        best = min(best, float(res.fun))
    return min(best, 1.0)


def lambda1(W: float, params: ModelParams, agent_index: int = 0) -> float:
    """Constant with ``|w - w/F| <= lambda1 |w| / c^2`` for ``|w| <= W``."""
    if not W >= 0:
        raise DomainError("W must be >= 0")
    k = params.pressure_coeff(agent_index)
    gamma, gm1 = _gamma_parts(np.asarray(W, dtype=float), params.c, k)
    F = gamma * (1.0 + k * gamma)
    # 1 - 1/F = (F - 1)/F, F - 1 = (Gamma - 1) + k Gamma^2
    return float(params.c**2 * (gm1 + k * gamma**2) / F)


def lambda2(W: float, params: ModelParams, agent_index: int = 0) -> float:
    """Majorant of ``c^2 |grad_z((1/F - 1) z)|`` on ``|z| <= W``.

    Three-term bound ``(Gamma^2-1)/(Gamma+1) + k Gamma^2 + (Gamma^2-1)(1 + 2k Gamma)``
    evaluated at ``Gamma(W)``, every term being nondecreasing in Gamma.
    """
    if not W >= 0:
        raise DomainError("W must be >= 0")
    k = params.pressure_coeff(agent_index)
    gamma, gm1 = _gamma_parts(np.asarray(W, dtype=float), params.c, k)
    g2m1 = gm1 * (gamma + 1.0)
    bound = gm1 + k * gamma**2 + g2m1 * (1.0 + 2.0 * k * gamma)
    return float(params.c**2 * bound)


def ensemble_constants(W: float, params: ModelParams) -> tuple[float, float, float]:
    """Worst case of ``(Lambda0, Lambda1, Lambda2)`` over the distinct agent kinds."""
    kinds = range(params.n_agent_kinds())
    return (
        min(lambda0(W, params, i) for i in kinds),
        max(lambda1(W, params, i) for i in kinds),
        max(lambda2(W, params, i) for i in kinds),
    )


def rel_constants(W: float, Dx_inf: float, params: ModelParams, phi_at_Dx_inf: float) -> RelConstants:
    L0, L1, L2 = ensemble_constants(W, params)
    lam = phi_at_Dx_inf / params.T_star - 2.0 * L2 / (params.c**2 * params.T_star)
    return RelConstants(L0, L1, L2, lam, Dx_inf)


def uniform_params(
    c: float,
    T_star: float = 1.0,
    k_B: float = 1.0,
    mass: float = 1.0,
    dof: float = 3.0,
    kernel: KernelSpec | None = None,
) -> ModelParams:
    return ModelParams(c=c, T_star=T_star, k_B=k_B, agents=((mass, dof),), kernel=kernel or KernelSpec())


def heterogeneous_params(
    c: float, masses: Sequence[float], dofs: Sequence[float], **kw
) -> ModelParams:
    if len(masses) != len(dofs):
        raise ValueError("masses and dofs differ in length")
    return ModelParams(c=c, agents=tuple(zip(masses, dofs)), **kw)
