"""Empirical-measure view of the kinetic model and exact discrete W1.

For an empirical initial measure the characteristics of the kinetic
equation are exactly the N-particle flow, so kinetic runs here are particle
runs read as uniform atomic measures on R^6 = (x, w).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .classical_limit import (
    CertificateFailure,
    delta_c,
    loglog_fit,
    perturb_initial,
    required_t_end,
)
from .diagnostics import FlockingCertificate, diameters, flocking_certificate
from .dynamics import EnsembleState
from .integrator import SimConfig, Trajectory, simulate
from .relativistic import ModelParams

MAX_EXACT_N = 512


@dataclass(frozen=True)
class MeasureSpec:
    """Compactly supported initial measure on (x, w).

    ``uniform_box``: both marginals uniform on centred cubes of half-width
    ``x_scale`` / ``w_scale``. ``gaussian_truncated``: independent normal
    coordinates with those standard deviations, cut at ``truncation`` sigmas.
    ``two_cluster``: two uniform position cubes centred at ``+-separation/2``
    on the first axis, uniform momenta.
    """

    kind: str = "uniform_box"
    x_scale: float = 0.5
    w_scale: float = 0.02
    separation: float = 1.0
    truncation: float = 2.0

    def __post_init__(self):
        if self.kind not in ("uniform_box", "gaussian_truncated", "two_cluster"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.x_scale < 0 or self.w_scale < 0 or self.separation < 0:
            raise ValueError("measure scales must be >= 0")
        if not self.truncation > 0:
            raise ValueError("truncation must be > 0")


@dataclass
class PointCloud6D:
    points: np.ndarray
    Dx0: float = 0.0
    Dw0: float = 0.0

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float).reshape(-1, 6)
        if self.points.shape[0] < 1 or not np.isfinite(self.points).all():
            raise ValueError("a point cloud needs at least one finite point")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_state(cls, state: EnsembleState) -> "PointCloud6D":
        dx, dw = diameters(state)
        return cls(np.hstack([state.x, state.w]), dx, dw)

    def to_state(self, t: float = 0.0) -> EnsembleState:
        return EnsembleState(t, self.points[:, :3], self.points[:, 3:])


@dataclass
class TransportPlan:
    permutation: np.ndarray
    cost: float


@dataclass
class KineticScanResult:
    c_values: list[float]
    sup_w1: list[float]
    sup_coupling: list[float]
    slope: float
    intercept: float
    r_squared: float
    coupling_ok: bool
    max_coupling_excess: float
    N: int = 0
    perturbation: float = 0.0
    t_end: float = 0.0
    certificates: list[FlockingCertificate] = field(default_factory=list)


@dataclass
class MeanFieldScanResult:
    N_values: list[int]
    pairs: list[tuple[int, int]]
    sup_w1: list[float]
    decreasing_trend: bool
    monotone: bool
    c: float = 0.0


def _truncated_normal(rng, scale, cut, shape):
    out = rng.standard_normal(shape)
    bad = np.abs(out) > cut
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > cut
    return scale * out


def sample_cloud(spec: MeasureSpec, N: int, seed, params: ModelParams | None = None) -> PointCloud6D:
    """Seeded sample with the momentum mean removed.

    ``params`` is accepted for interface symmetry; sampling is done directly
    in momentum variables and does not depend on it.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    if spec.kind == "uniform_box":
        x = rng.uniform(-spec.x_scale, spec.x_scale, (N, 3))
        w = rng.uniform(-spec.w_scale, spec.w_scale, (N, 3))
    elif spec.kind == "gaussian_truncated":
        x = _truncated_normal(rng, spec.x_scale, spec.truncation, (N, 3))
        w = _truncated_normal(rng, spec.w_scale, spec.truncation, (N, 3))
    else:
        x = rng.uniform(-spec.x_scale, spec.x_scale, (N, 3))
        side = np.where(np.arange(N) % 2 == 0, 0.5, -0.5) * spec.separation
        x[:, 0] += side
        w = rng.uniform(-spec.w_scale, spec.w_scale, (N, 3))
    w -= w.mean(axis=0)
    return PointCloud6D.from_state(EnsembleState(0.0, x, w))


def wasserstein1_exact(A: PointCloud6D, B: PointCloud6D) -> tuple[float, TransportPlan]:
    """Exact W1 between two equal-size uniform empirical measures.

    Reduces to the linear assignment problem on Euclidean R^6 distances.
    """
    a = A.points if isinstance(A, PointCloud6D) else np.asarray(A, dtype=float)
    b = B.points if isinstance(B, PointCloud6D) else np.asarray(B, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValueError("clouds differ in size; only balanced transport is supported")
    if a.shape[0] > MAX_EXACT_N:
        raise ValueError(f"exact assignment capped at N={MAX_EXACT_N}")
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].sum() / a.shape[0])
    return value, TransportPlan(cols.copy(), value)


def wasserstein1_uniform(A: PointCloud6D, B: PointCloud6D) -> float:
    """W1 between uniform empirical measures of possibly different sizes.

    Each cloud is repeated up to the least common multiple of the sizes; the
    repeated cloud represents the same measure and the balanced problem is
    again an assignment.
    """
    na, nb = A.n, B.n
    m = math.lcm(na, nb)
    a = np.repeat(A.points, m // na, axis=0)
    b = np.repeat(B.points, m // nb, axis=0)
    return wasserstein1_exact(PointCloud6D(a), PointCloud6D(b))[0]


def wasserstein2_coupling_bound(traj_r: Trajectory, traj_c: Trajectory, at_sample: int) -> float:
    """``sqrt(Delta^c)`` at one sample: the diagonal coupling cost, an upper bound on W2 and W1."""
    if len(traj_r) != len(traj_c):
        raise ValueError("trajectories have different sample counts")
    a, b = traj_r.samples[at_sample], traj_c.samples[at_sample]
    if a.x.shape != b.x.shape:
        raise ValueError("ensembles differ in shape")
    return math.sqrt(delta_c(a, b))


def w1_series(traj_a: Trajectory, traj_b: Trajectory) -> np.ndarray:
    if len(traj_a) != len(traj_b):
        raise ValueError("trajectories have different sample counts")
    out = []
    for sa, sb in zip(traj_a.samples, traj_b.samples):
        A = PointCloud6D(np.hstack([sa.x, sa.w]))
        B = PointCloud6D(np.hstack([sb.x, sb.w]))
        out.append(wasserstein1_uniform(A, B) if A.n != B.n else wasserstein1_exact(A, B)[0])
    return np.array(out)


def kinetic_limit_scan(
    spec: MeasureSpec,
    N: int,
    c_values,
    config: SimConfig,
    seed: int,
    params_template: ModelParams,
    perturbation: float = 0.0,
    models: tuple[str, str] = ("rcs", "cs"),
    extend_horizon: bool = True,
    threads: int = 1,
    observer=None,
) -> KineticScanResult:
    """Sup-in-time W1 between relativistic and classical empirical flows across ``c``.

    Both flows start from the same sampled cloud unless ``perturbation > 0``,
    in which case the relativistic cloud is moved by a seeded perturbation of
    size ``sqrt(perturbation) c^-2`` (diagonal-coupling distance).
    ``observer(c, traj_r, traj_c)``, if given, sees every paired run.
    """
    c_values = sorted(float(c) for c in c_values)
    if len(c_values) < 3:
        raise ValueError("a slope fit needs at least three c values")
    cloud = sample_cloud(spec, N, seed, params_template)
    base = cloud.to_state()
    certs = []
    for c in c_values:
        cert = flocking_certificate(base, params_template.with_c(c), models[0])
        if not cert.satisfied:
            raise CertificateFailure(f"flocking condition fails at c={c}")
        certs.append(cert)
    if extend_horizon:
        config = replace(config, t_end=required_t_end(certs[0], config.t_end))

    def run(c):
        p = params_template.with_c(c)
        init_r = perturb_initial(base, c, perturbation, seed + 1)
        tr = simulate(init_r, p, replace(config, model=models[0]))
        tc = simulate(base, p, replace(config, model=models[1]))
        if observer is not None:
            observer(c, tr, tc)
        w1 = w1_series(tr, tc)
        bound = np.array([wasserstein2_coupling_bound(tr, tc, i) for i in range(len(tr))])
        return c, (w1, bound)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(run, c_values))
    else:
        results = dict(run(c) for c in c_values)
    sup_w1 = [float(np.max(results[c][0])) for c in c_values]
    sup_b = [float(np.max(results[c][1])) for c in c_values]
    excess = max(float(np.max(results[c][0] - results[c][1])) for c in c_values)
    slope, intercept, r2 = loglog_fit(c_values, sup_w1)
    return KineticScanResult(
        c_values=c_values,
        sup_w1=sup_w1,
        sup_coupling=sup_b,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        coupling_ok=excess <= 1e-12,
        max_coupling_excess=excess,
        N=N,
        perturbation=perturbation,
        t_end=config.t_end,
        certificates=certs,
    )


def meanfield_convergence_scan(
    spec: MeasureSpec,
    N_values,
    c: float,
    config: SimConfig,
    seed: int,
    params_template: ModelParams,
    threads: int = 1,
    observer=None,
) -> MeanFieldScanResult:
    """Sup-in-time W1 between empirical flows of adjacent ensemble sizes.

    Each size draws an independent cloud from ``spec`` with a stream seeded
    by ``(seed, N)``. No rate is asserted; only the trend is reported.
    """
    N_values = [int(n) for n in N_values]
    if len(N_values) < 3:
        raise ValueError("need at least three ensemble sizes")
    if any(b < a for a, b in zip(N_values, N_values[1:])):
        raise ValueError("ensemble sizes must be nondecreasing")
    p = params_template.with_c(c)

    def run(n):
        cloud = sample_cloud(spec, n, np.random.SeedSequence([seed, n]), p)
        traj = simulate(cloud.to_state(), p, config)
        if observer is not None:
            observer(n, traj)
        return n, traj

    unique = sorted(set(N_values))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = dict(pool.map(run, unique))
    else:
        trajs = dict(run(n) for n in unique)
    pairs = list(zip(N_values[:-1], N_values[1:]))
    sup = [float(np.max(w1_series(trajs[a], trajs[b]))) for a, b in pairs]
    monotone = all(sup[i + 1] <= sup[i] for i in range(len(sup) - 1))
    return MeanFieldScanResult(
        N_values=N_values,
        pairs=pairs,
        sup_w1=sup,
        decreasing_trend=sup[-1] < sup[0],
        monotone=monotone,
        c=float(c),
    )
