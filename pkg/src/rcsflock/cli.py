"""Command-line entry point.

Exit codes: 0 success or pass, 1 checked condition failed, 2 usage or
config error, 3 numerical abort. ``RCSFLOCK_THREADS`` sets the worker
count for scans (default 1).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .classical_limit import CertificateFailure, c_scan
from .diagnostics import (
    check_sddi,
    flocking_bounds,
    flocking_certificate,
    lyapunov_bound,
    series,
)
from .dynamics import kernel_eval
from .integrator import NumericalAbort, simulate
from .io import (
    CSV_HEADER,
    ConfigError,
    config_hash,
    dumps_report,
    new_manifest,
    parse_config,
    read_trajectory_csv,
    write_manifest,
    write_report_json,
    write_trajectory_csv,
)
from .meanfield import PointCloud6D, kinetic_limit_scan, meanfield_convergence_scan, wasserstein1_exact
from .relativistic import DomainError, F_of_gamma, ensemble_constants, gamma_from_w
from .scenarios import build_initial, measure_spec

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3
THREADS_ENV = "RCSFLOCK_THREADS"


class UsageError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1")
    return n


def _list(text: str, conv=float) -> list:
    try:
        return [conv(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def _band(text: str | None, default) -> tuple[float, float]:
    if text is None:
        return tuple(default)
    vals = _list(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise UsageError("--band must be 'lo,hi' with lo < hi")
    return vals[0], vals[1]


def _pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or any(p not in ("rcs", "cs") for p in parts):
        raise UsageError("--pair must be two of rcs/cs, e.g. 'rcs,cs'")
    return parts[0], parts[1]


def _load(args):
    params, sim, scenario = parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be >= 0")
        sim = dataclasses.replace(sim, seed=args.seed)
    return params, sim, scenario


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_simulate(args) -> int:
    params, sim, scenario = _load(args)
    if args.model:
        sim = dataclasses.replace(sim, model=args.model)
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"--out {out} is not an existing directory")
    init = build_initial(scenario, params, sim.seed)
    manifest = new_manifest(params, sim, scenario)
    chash = manifest.config_hash
    traj = simulate(init, params, sim)
    diag = series(traj)
    cert = flocking_certificate(init, params, sim.model)
    report = {
        "model": sim.model,
        "satisfied": cert.satisfied,
        "certificate": cert,
        "series": diag,
        "steps": traj.steps[-1],
    }
    if len(traj) >= 3 and cert.satisfied:
        report["flocking_bounds"] = flocking_bounds(diag, cert)
        report["lyapunov_bound"] = lyapunov_bound(diag, cert, params.T_star)
        sddi = check_sddi(traj, params, cert)
        report["sddi"] = {"ok": sddi.ok, "max_violation_x": sddi.max_violation_x, "max_violation_w": sddi.max_violation_w}
    manifest.files.append(write_trajectory_csv(traj, out / "trajectory.csv", chash))
    manifest.files.append(write_report_json(report, out / "diagnostics.json", "diagnostics", chash))
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(traj)} samples to {out}")
    return EXIT_OK


def cmd_flock_cert(args) -> int:
    params, sim, scenario = _load(args)
    init = build_initial(scenario, params, sim.seed)
    cert = flocking_certificate(init, params, sim.model)
    _emit(dumps_report(cert, config_hash=config_hash(params, sim, scenario)), args.out)
    return EXIT_OK if cert.satisfied else EXIT_FAIL


def cmd_climit(args) -> int:
    params, sim, scenario = _load(args)
    cs = _list(args.c_list) if args.c_list else list(scenario.c_list)
    if len(cs) < 3:
        raise UsageError("--c-list needs at least three values")
    if any(not c > 0 for c in cs):
        raise UsageError("--c-list values must be > 0")
    K = scenario.K if args.K is None else args.K
    if K < 0:
        raise UsageError("--K must be >= 0")
    band = _band(args.band, scenario.climit_band)
    models = _pair(args.pair)
    base_params = params.with_c(min(cs))
    init = build_initial(scenario, base_params, sim.seed)
    res = c_scan(init, params, sim, cs, K=K, seed=sim.seed, models=models, threads=_threads())
    ok = res.fit_defined and band[0] <= res.slope <= band[1]
    doc = {"scan": res, "band": list(band), "pass": ok}
    if args.out:
        write_report_json(doc, args.out, "limit_scan", config_hash(params, sim, scenario))
    if not res.fit_defined:
        print("slope undefined: fewer than two positive sup deviations "
              f"(sup_delta={res.sup_delta})", file=sys.stderr)
        return EXIT_FAIL
    print(f"slope {res.slope:.6f} r2 {res.r_squared:.6f} band [{band[0]}, {band[1]}] {'pass' if ok else 'fail'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_meanfield_scan(args) -> int:
    if bool(args.c_list) == bool(args.n_list):
        raise UsageError("give exactly one of --c-list and --n-list")
    params, sim, scenario = _load(args)
    spec = measure_spec(scenario)
    chash = config_hash(params, sim, scenario)
    if args.c_list:
        cs = _list(args.c_list)
        if len(cs) < 3:
            raise UsageError("--c-list needs at least three values")
        band = _band(args.band, scenario.kinetic_band)
        res = kinetic_limit_scan(
            spec, scenario.N, cs, sim, sim.seed, params,
            perturbation=scenario.K if args.K is None else args.K,
            models=_pair(args.pair), threads=_threads(),
        )
        defined = np.isfinite(res.slope)
        ok = bool(defined and band[0] <= res.slope <= band[1] and res.coupling_ok)
        if args.out:
            write_report_json({"scan": res, "band": list(band), "pass": ok}, args.out, "kinetic_scan", chash)
        if not defined:
            print(f"slope undefined: sup W1 = {res.sup_w1}", file=sys.stderr)
            return EXIT_FAIL
        print(f"slope {res.slope:.6f} r2 {res.r_squared:.6f} coupling_ok {res.coupling_ok} {'pass' if ok else 'fail'}")
        return EXIT_OK if ok else EXIT_FAIL
    ns = _list(args.n_list, int)
    if len(ns) < 3:
        raise UsageError("--n-list needs at least three values")
    if any(b < a for a, b in zip(ns, ns[1:])) or min(ns) < 1:
        raise UsageError("--n-list must be positive and nondecreasing")
    res = meanfield_convergence_scan(spec, ns, params.c, sim, sim.seed, params, threads=_threads())
    if args.out:
        write_report_json({"scan": res, "pass": res.decreasing_trend}, args.out, "meanfield_scan", chash)
    print(f"sup W1 per pair {res.sup_w1} decreasing_trend {res.decreasing_trend}")
    return EXIT_OK if res.decreasing_trend else EXIT_FAIL


def cmd_constants(args) -> int:
    params, sim, scenario = _load(args)
    W = args.W
    if not (np.isfinite(W) and W >= 0):
        raise UsageError("--W must be a finite number >= 0")
    if not (np.isfinite(args.Dx_inf) and args.Dx_inf >= 0):
        raise UsageError("--Dx-inf must be a finite number >= 0")
    L0, L1, L2 = ensemble_constants(W, params)
    gamma = float(gamma_from_w(W, params))
    phi = kernel_eval(params.kernel, args.Dx_inf)
    doc = {
        "W": W,
        "Lambda0": L0,
        "Lambda1": L1,
        "Lambda2": L2,
        "F": float(F_of_gamma(gamma, params)),
        "Gamma": gamma,
        "Dx_inf": args.Dx_inf,
        "phi": phi,
        "lambda": phi / params.T_star - 2.0 * L2 / (params.c**2 * params.T_star),
    }
    _emit(dumps_report(doc, kind="constants", config_hash=config_hash(params, sim, scenario)), args.out)
    return EXIT_OK


def _read_cloud(path: str, sample: int) -> PointCloud6D:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if lines and lines[0] == CSV_HEADER:
        table = read_trajectory_csv(path)
        if len(table.t) == 0:
            raise UsageError(f"{path} has no samples")
        try:
            return PointCloud6D(np.hstack([table.x[sample], table.w[sample]]))
        except IndexError:
            raise UsageError(f"sample {sample} out of range for {path}") from None
    rows = []
    for ln in lines:
        if ln.replace(" ", "") == "x1,x2,x3,w1,w2,w3":
            continue
        vals = _list(ln)
        if len(vals) != 6:
            raise UsageError(f"{path}: expected 6 numbers per row")
        rows.append(vals)
    if not rows:
        raise UsageError(f"{path} has no points")
    return PointCloud6D(np.array(rows))


def cmd_wasserstein(args) -> int:
    a = _read_cloud(args.a, args.sample)
    b = _read_cloud(args.b, args.sample)
    if a.n != b.n:
        raise UsageError(f"clouds differ in size ({a.n} vs {b.n})")
    value, plan = wasserstein1_exact(a, b)
    _emit(json.dumps({"schema_version": 1, "kind": "wasserstein", "W1": value,
                      "permutation": plan.permutation.tolist()}, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    common.add_argument("--out", default=None, help="output path (directory for simulate)")
    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--config", required=True)

    p = argparse.ArgumentParser(prog="rcsflock", description="Relativistic and classical Cucker-Smale simulations and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[cfg, common], help="integrate one scenario and write CSV/JSON")
    s.add_argument("--model", choices=("rcs", "cs"), default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("flock-cert", parents=[cfg, common], help="print the flocking certificate")
    s.set_defaults(func=cmd_flock_cert)

    s = sub.add_parser("climit", parents=[cfg, common], help="deviation rate scan over c")
    s.add_argument("--c-list", default=None)
    s.add_argument("--K", type=float, default=None)
    s.add_argument("--band", default=None, help="pass band 'lo,hi' for the slope")
    s.add_argument("--pair", default="rcs,cs", help="models compared, e.g. 'cs,cs'")
    s.set_defaults(func=cmd_climit)

    s = sub.add_parser("meanfield-scan", parents=[cfg, common], help="Wasserstein scans over c or N")
    s.add_argument("--c-list", default=None)
    s.add_argument("--n-list", default=None)
    s.add_argument("--K", type=float, default=None, help="initial perturbation size for --c-list")
    s.add_argument("--band", default=None)
    s.add_argument("--pair", default="rcs,cs")
    s.set_defaults(func=cmd_meanfield_scan)

    s = sub.add_parser("constants", parents=[cfg, common], help="print the relativistic constants at W")
    s.add_argument("--W", type=float, required=True)
    s.add_argument("--Dx-inf", dest="Dx_inf", type=float, default=1.0)
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("wasserstein", parents=[common], help="exact W1 between two point files")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--sample", type=int, default=-1, help="sample index for trajectory CSVs")
    s.set_defaults(func=cmd_wasserstein)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except CertificateFailure as exc:
        print(f"condition failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
