"""Functionals, flocking certificates and decay checks over trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EnsembleState, kernel_eval
from .integrator import Trajectory
from .relativistic import ModelParams, ensemble_constants, _gamma_parts, velocity_factors


@dataclass
class DiagnosticsSeries:
    t: np.ndarray
    D_x: np.ndarray
    D_w: np.ndarray
    L: np.ndarray
    momentum_norm: np.ndarray
    E_total: np.ndarray
    max_speed: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class FlockingCertificate:
    Dx_inf: float
    lam: float
    condition_lhs: float
    condition_rhs: float
    satisfied: bool
    model: str = "rcs"
    Dx0: float = 0.0
    Dw0: float = 0.0
    Lambda0: float = 1.0
    Lambda2: float = 0.0
    # same inequality with the alternative denominator 2c^2 phi - 4 Lambda2
    condition_lhs_alt: float = math.nan
    kinetic_rate: float = math.nan
    phi_inf: float = math.nan


@dataclass
class LyapunovValue:
    value: float
    pair_value: float
    zero_sum: bool


@dataclass
class SDDIReport:
    n_checked: int
    max_violation_x: float
    max_violation_w: float
    violations: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _pair_max(a: np.ndarray) -> float:
    if a.shape[0] < 2:
        return 0.0
    diff = a[:, None, :] - a[None, :, :]
    return float(np.sqrt(np.max(np.einsum("abk,abk->ab", diff, diff))))


def diameters(state: EnsembleState) -> tuple[float, float]:
    return _pair_max(state.x), _pair_max(state.w)


def lyapunov(state: EnsembleState, rtol: float = 1e-10) -> LyapunovValue:
    """Mean squared momentum, cross-checked against the pairwise form.

    The two agree only when the momenta sum to zero; otherwise ``zero_sum``
    is False and both numbers are reported.
    """
    w = state.w
    n = w.shape[0]
    value = float(np.sum(w * w)) / n
    diff = w[:, None, :] - w[None, :, :]
    pair = float(np.sum(diff * diff)) / (2.0 * n * n)
    scale = max(value, pair, 1e-300)
    return LyapunovValue(value, pair, abs(value - pair) <= rtol * scale or value == pair)


def agent_energy(w: np.ndarray, params: ModelParams) -> np.ndarray:
    """``c^2 (Gamma - 1) + (D+2) k_B T*/(2m) (Gamma^2 - log Gamma)`` per agent."""
    w = np.asarray(w, dtype=float).reshape(-1, 3)
    n = w.shape[0]
    k = params.pressure_coeffs(n)
    c2 = params.c**2
    gamma, gm1 = _gamma_parts(np.linalg.norm(w, axis=1), params.c, k)
    # Gamma^2 - log Gamma = 1 + (Gamma^2 - 1) - log1p(Gamma - 1)
    thermal = 1.0 + gm1 * (gamma + 1.0) - np.log1p(gm1)
    # k c^2 = (D+2) k_B T* / (2 m)
    return c2 * gm1 + k * c2 * thermal


def total_energy(state: EnsembleState, params: ModelParams) -> float:
    return float(np.mean(agent_energy(state.w, params)))


def max_speed(state: EnsembleState, params: ModelParams, model: str = "rcs") -> float:
    if model == "cs":
        v = state.w
    else:
        v, _ = velocity_factors(state.w, params)
    return float(np.max(np.linalg.norm(v, axis=1)))


def series(traj: Trajectory, model: str | None = None) -> DiagnosticsSeries:
    model = model or traj.config.model
    params = traj.params
    rows = []
    for s in traj.samples:
        dx, dw = diameters(s)
        rows.append(
            (
                s.t,
                dx,
                dw,
                lyapunov(s).value,
                float(np.linalg.norm(s.momentum_sum())),
                total_energy(s, params) if model == "rcs" else float(np.mean(np.sum(s.w**2, axis=1))) / 2.0,
                max_speed(s, params, model),
            )
        )
    cols = [np.array(col) for col in zip(*rows)]
    return DiagnosticsSeries(*cols)


def _certificate_grid(scale: float) -> np.ndarray:
    fine = 1.0 + 0.1 * np.arange(1, 91)  # 1.1 .. 10.0
    coarse = np.geomspace(10.0, 1000.0, 200)[1:]
    return scale * np.concatenate([fine, coarse])


def flocking_certificate(init: EnsembleState, params: ModelParams, model: str = "rcs") -> FlockingCertificate:
    """Search the smallest flocking radius for which the sufficient condition holds.

    Condition (relativistic):
        D_x(0) + c^4 T* D_w(0) / ((c^2+1)(c^2 phi(R) - 2 Lambda2(D_w(0)))) < R,
        c^2 phi(R) > 2 Lambda2(D_w(0)),
    with rate ``phi(R)/T* - 2 Lambda2(D_w(0)) / (c^2 T*)``. For ``model="cs"``
    the c -> infinity form ``D_x(0) + T* D_w(0)/phi(R) < R`` is used.

    At consensus (``D_w(0) = 0``) momenta stay equal forever, the Lambda2
    correction multiplies zero, and the rate is ``phi(R)/T*``.
    """
    Dx0, Dw0 = diameters(init)
    c, T = params.c, params.T_star
    L0, _, L2 = ensemble_constants(Dw0, params)
    scale = Dx0 if Dx0 > 0 else max(T * Dw0, 1.0)
    grid = _certificate_grid(scale)
    phis = kernel_eval(params.kernel, grid)

    if Dw0 == 0.0:
        lhs = np.full_like(grid, Dx0)
        alt = lhs.copy()
        ok = lhs < grid
        rates = phis / T
        L2_used = 0.0
    elif model == "cs":
        lhs = Dx0 + T * Dw0 / phis
        alt = Dx0 + T * Dw0 / (2.0 * phis)
        ok = (phis > 0) & (lhs < grid)
        rates = phis / T
        L2_used = 0.0
    else:
        denom = c**2 * phis - 2.0 * L2
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.where(denom > 0, Dx0 + c**4 * T * Dw0 / ((c**2 + 1.0) * denom), np.inf)
            alt = np.where(denom > 0, Dx0 + c**4 * T * Dw0 / ((c**2 + 1.0) * 2.0 * denom), np.inf)
        ok = (denom > 0) & (lhs < grid)
        rates = phis / T - 2.0 * L2 / (c**2 * T)
        L2_used = L2
    ok &= rates > 0

    if ok.any():
        i = int(np.argmax(ok))
        sat = True
    else:
        # report the closest miss
        gap = np.where(np.isfinite(lhs), lhs - grid, np.inf)
        i = int(np.argmin(gap))
        sat = False
    kinetic = float(phis[i] - 2.0 * L2_used / c**2) if model == "rcs" else float(phis[i])
    return FlockingCertificate(
        Dx_inf=float(grid[i]),
        lam=float(rates[i]),
        condition_lhs=float(lhs[i]),
        condition_rhs=float(grid[i]),
        satisfied=sat,
        model=model,
        Dx0=Dx0,
        Dw0=Dw0,
        Lambda0=L0,
        Lambda2=L2,
        condition_lhs_alt=float(alt[i]),
        kinetic_rate=kinetic,
        phi_inf=float(phis[i]),
    )


def check_sddi(
    traj: Trajectory,
    params: ModelParams,
    cert: FlockingCertificate,
    kinetic: bool = False,
    rel_tol: float = 1e-9,
) -> SDDIReport:
    """Check the two diameter inequalities with centered differences.

    ``dD_x/dt <= c^2/(c^2+1) D_w`` and ``dD_w/dt <= -rate D_w`` where ``rate`` is
    the certified decay rate (without the 1/T* factor when ``kinetic``). The
    centered difference averages the derivative over two sampling intervals,
    so each bound is taken as its maximum over the same window, and the
    tolerance is ``10 (dt^2 + |second difference| / h)``.
    """
    if len(traj) < 3:
        raise ValueError("need at least three samples")
    t = traj.times
    d = [diameters(s) for s in traj.samples]
    Dx = np.array([a for a, _ in d])
    Dw = np.array([b for _, b in d])
    c2 = params.c**2
    factor = 1.0 if traj.config.model == "cs" else c2 / (c2 + 1.0)
    rate = cert.kinetic_rate if kinetic else cert.lam
    bx = factor * Dw
    bw = -rate * Dw
    dt = traj.config.dt
    violations = []
    mx = mw = -math.inf
    for i in range(1, len(t) - 1):
        h = 0.5 * (t[i + 1] - t[i - 1])
        for name, D, b in (("x", Dx, bx), ("w", Dw, bw)):
            slope = (D[i + 1] - D[i - 1]) / (2.0 * h)
            bound = max(b[i - 1], b[i], b[i + 1])
            curv = abs(D[i + 1] - 2.0 * D[i] + D[i - 1]) / h
            tol = 10.0 * (dt**2 + curv) + rel_tol * max(abs(D[i]), 1.0)
            excess = slope - bound
            if name == "x":
                mx = max(mx, excess)
            else:
                mw = max(mw, excess)
            if excess > tol:
                violations.append((i, name, float(excess)))
    return SDDIReport(len(t) - 2, float(mx), float(mw), violations)


def fit_decay_rate(t, y, window: float = 0.5) -> tuple[float, float]:
    """Least-squares exponential rate over the trailing ``window`` fraction.

    Returns ``(rate, r_squared)`` with ``rate = -slope`` of ``log y`` vs ``t``.
    A perfectly flat series has ``r_squared = 1``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    start = min(int(math.floor((1.0 - window) * len(t))), len(t) - 2)
    tw, yw = t[start:], y[start:]
    if np.any(yw <= 0):
        raise ValueError("log of nonpositive value")
    ly = np.log(yw)
    slope, intercept = np.polyfit(tw, ly, 1)
    resid = ly - (slope * tw + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-30 * max(len(ly), 1):
        r2 = 1.0
        slope = 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(-slope), float(r2)


def flocking_bounds(
    diag: DiagnosticsSeries, cert: FlockingCertificate, slack: float = 0.05, kinetic: bool = False
) -> dict:
    """Largest ratios of observed to certified quantities over the samples."""
    rate = cert.kinetic_rate if kinetic else cert.lam
    env = diag.D_w[0] * np.exp(-rate * diag.t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, diag.D_w / env, np.where(diag.D_w > 0, np.inf, 0.0))
    return {
        "max_Dx": float(np.max(diag.D_x)),
        "Dx_inf": cert.Dx_inf,
        "Dx_ok": bool(np.all(diag.D_x < cert.Dx_inf)),
        "max_Dw_ratio": float(np.max(ratio)),
        "Dw_ok": bool(np.all(ratio <= 1.0 + slack)),
    }


def lyapunov_bound(
    diag: DiagnosticsSeries, cert: FlockingCertificate, T_star: float, slack: float = 0.05
) -> dict:
    """Compare ``L(t)`` with ``L(0) exp(-2 Lambda0(D_w(0)) phi(R) t / T*)``."""
    rate = 2.0 * cert.Lambda0 * cert.phi_inf / T_star
    env = diag.L[0] * np.exp(-rate * diag.t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, diag.L / env, np.where(diag.L > 0, np.inf, 0.0))
    return {"rate": float(rate), "max_ratio": float(np.max(ratio)), "ok": bool(np.all(ratio <= 1.0 + slack))}
