"""Paired relativistic/classical runs and the c^-4 deviation rate."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import FlockingCertificate, flocking_certificate
from .dynamics import EnsembleState
from .integrator import SimConfig, Trajectory, simulate
from .relativistic import ModelParams


class CertificateFailure(RuntimeError):
    pass


@dataclass
class LimitScanResult:
    c_values: list[float]
    sup_delta: list[float]
    slope: float
    intercept: float
    r_squared: float
    K: float = 0.0
    models: tuple[str, str] = ("rcs", "cs")
    t_end: float = 0.0
    certificates: list[FlockingCertificate] = field(default_factory=list)
    per_c_series: dict[float, np.ndarray] = field(default_factory=dict)
    inversions: list[int] = field(default_factory=list)

    @property
    def fit_defined(self) -> bool:
        return math.isfinite(self.slope)


def delta_c(state_r: EnsembleState, state_c: EnsembleState) -> float:
    """Mean over agents of ``|x - x_inf|^2 + |w - w_inf|^2``."""
    if state_r.n != state_c.n:
        raise ValueError("ensembles differ in size")
    if not math.isclose(state_r.t, state_c.t, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"states at different times {state_r.t} and {state_c.t}")
    dx = state_r.x - state_c.x
    dw = state_r.w - state_c.w
    return float((np.sum(dx * dx) + np.sum(dw * dw)) / state_r.n)


def delta_series(traj_r: Trajectory, traj_c: Trajectory) -> np.ndarray:
    if len(traj_r) != len(traj_c):
        raise ValueError("trajectories have different sample counts")
    return np.array([delta_c(a, b) for a, b in zip(traj_r.samples, traj_c.samples)])


def perturb_initial(base: EnsembleState, c: float, K: float, seed: int) -> EnsembleState:
    """Seeded perturbation with deviation exactly ``K c^-4`` from ``base``.

    The momentum part of the perturbation is mean-free, so a zero-sum base
    stays zero-sum. The same seed yields the same direction for every ``c``.
    """
    if not K >= 0:
        raise ValueError("K must be >= 0")
    out = base.copy()
    if K == 0:
        return out
    rng = np.random.default_rng(seed)
    dx = rng.standard_normal(base.x.shape)
    dw = rng.standard_normal(base.w.shape)
    dw -= dw.mean(axis=0)
    size = float((np.sum(dx * dx) + np.sum(dw * dw)) / base.n)
    if size == 0.0:
        # N = 1: the projected momentum part vanishes, move x only
        dx = np.ones_like(dx)
        size = float(np.sum(dx * dx) / base.n)
    s = math.sqrt(K * c**-4 / size)
    out.x = base.x + s * dx
    out.w = base.w + s * dw
    return out


def loglog_fit(xs, ys) -> tuple[float, float, float]:
    """Slope, intercept and r^2 of ``log y`` against ``log x`` over positive ``y``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0
    if keep.sum() < 2:
        return math.nan, math.nan, math.nan
    lx, ly = np.log(xs[keep]), np.log(ys[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _ladder_inversions(sup: list[float], rel: float = 0.05) -> list[int]:
    return [i for i in range(1, len(sup)) if sup[i] > sup[i - 1] * (1.0 + rel)]


def required_t_end(cert: FlockingCertificate, t_end: float) -> float:
    if cert.satisfied and cert.lam > 0:
        return max(t_end, 10.0 / cert.lam)
    return t_end


def _paired_run(base, params, config, c, K, seed, models):
    p = params.with_c(c)
    init_r = perturb_initial(base, c, K, seed)
    traj_r = simulate(init_r, p, replace(config, model=models[0]))
    traj_c = simulate(base, p, replace(config, model=models[1]))
    return traj_r, traj_c


def c_scan(
    base_init: EnsembleState,
    params_template: ModelParams,
    config: SimConfig,
    c_values,
    K: float = 0.0,
    seed: int | None = None,
    models: tuple[str, str] = ("rcs", "cs"),
    extend_horizon: bool = True,
    threads: int = 1,
    keep_series: bool = False,
    observer=None,
) -> LimitScanResult:
    """Sup-in-time deviation between paired runs across a ladder of ``c``.

    The relativistic run starts from ``perturb_initial(base, c, K)``, the
    classical one from ``base``. ``dt`` is shared across the ladder and the
    horizon is stretched to ``10/lambda`` of the smallest-``c`` certificate.
    ``observer(c, traj_r, traj_c)``, if given, sees every paired run.
    """
    c_values = sorted(float(c) for c in c_values)
    if len(c_values) < 3:
        raise ValueError("a slope fit needs at least three c values")
    if not base_init.is_zero_sum():
        raise ValueError("base initial data must have zero momentum sum")
    seed = config.seed if seed is None else seed
    certs = []
    for c in c_values:
        cert = flocking_certificate(base_init, params_template.with_c(c), models[0])
        if not cert.satisfied:
            raise CertificateFailure(
                f"flocking condition fails at c={c}: lhs={cert.condition_lhs:.6g} >= R={cert.Dx_inf:.6g}"
            )
        certs.append(cert)
    if extend_horizon:
        config = replace(config, t_end=required_t_end(certs[0], config.t_end))

    def run(c):
        tr, tc = _paired_run(base_init, params_template, config, c, K, seed, models)
        if observer is not None:
            observer(c, tr, tc)
        return c, delta_series(tr, tc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(run, c_values))
    else:
        results = dict(run(c) for c in c_values)
    sup = [float(np.max(results[c])) for c in c_values]
    slope, intercept, r2 = loglog_fit(c_values, sup)
    return LimitScanResult(
        c_values=c_values,
        sup_delta=sup,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        K=K,
        models=models,
        t_end=config.t_end,
        certificates=certs,
        per_c_series={c: results[c] for c in c_values} if keep_series else {},
        inversions=_ladder_inversions(sup),
    )


def rhs_consistency(w: np.ndarray, params: ModelParams) -> float:
    """Largest ``|v - w| / (Lambda1(|w|) |w| / c^2)`` over the rows of ``w``.

    Values above 1 would contradict the Lambda1 bound.
    """
    from .relativistic import lambda1, velocity_factors

    w = np.asarray(w, dtype=float).reshape(-1, 3)
    v, _ = velocity_factors(w, params)
    worst = 0.0
    for i, (wi, vi) in enumerate(zip(w, v)):
        n = float(np.linalg.norm(wi))
        if n == 0:
            continue
        kind = 0 if params.n_agent_kinds() == 1 else i
        bound = lambda1(n, params, kind) * n / params.c**2
        worst = max(worst, float(np.linalg.norm(vi - wi)) / bound)
    return worst
