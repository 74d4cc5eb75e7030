"""Config parsing, CSV/JSON persistence and run manifests.

Config files are INI-style with three sections::

    [model]       c (required), T_star, k_B, mass, dof, kernel, beta
    [simulation]  dt, t_end, sample_every, model, seed
    [scenario]    N (required), kind, x_scale, w_scale, separation,
                  truncation, mode, positions, velocities, c_list, n_list,
                  K, climit_band, kinetic_band

``mass`` and ``dof`` accept a comma list for heterogeneous agents.
``positions``/``velocities`` (kind ``explicit``) are ``;``-separated
triples. Bands are ``lo,hi``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io as _stdio
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import EnsembleState
from .integrator import SimConfig, Trajectory, default_dt
from .relativistic import KernelSpec, ModelParams

SCHEMA_VERSION = 1
REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class Scenario:
    N: int
    kind: str = "uniform_box"
    x_scale: float = 0.5
    w_scale: float = 0.05
    separation: float = 1.0
    truncation: float = 2.0
    mode: str = "from_w"
    positions: tuple = ()
    velocities: tuple = ()
    c_list: tuple = (10.0, 20.0, 40.0, 80.0)
    n_list: tuple = (16, 32, 64, 128)
    K: float = 0.0
    climit_band: tuple = (-4.4, -3.6)
    kinetic_band: tuple = (-2.5, -1.6)


KINDS = ("uniform_box", "gaussian_truncated", "two_cluster", "explicit")


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _triples(text: str) -> tuple:
    rows = [r for r in text.split(";") if r.strip()]
    out = []
    for r in rows:
        vals = _floats(r)
        if len(vals) != 3:
            raise ValueError(f"expected 3 numbers, got {len(vals)}")
        out.append(vals)
    return tuple(out)


def _fmt_list(vals) -> str:
    return ", ".join(_num(v) for v in vals)


def _num(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


SCHEMA = {
    "model": {
        "c": (float, REQUIRED),
        "T_star": (float, 1.0),
        "k_B": (float, 1.0),
        "mass": (_floats, (1.0,)),
        "dof": (_floats, (3.0,)),
        "kernel": (str, "power_law"),
        "beta": (float, 2.0),
    },
    "simulation": {
        "dt": (float, None),
        "t_end": (float, 40.0),
        "sample_every": (int, 10),
        "model": (str, "rcs"),
        "seed": (int, 0),
    },
    "scenario": {
        "N": (int, REQUIRED),
        "kind": (str, "uniform_box"),
        "x_scale": (float, 0.5),
        "w_scale": (float, 0.05),
        "separation": (float, 1.0),
        "truncation": (float, 2.0),
        "mode": (str, "from_w"),
        "positions": (_triples, ()),
        "velocities": (_triples, ()),
        "c_list": (_floats, (10.0, 20.0, 40.0, 80.0)),
        "n_list": (lambda s: tuple(int(v) for v in _floats(s)), (16, 32, 64, 128)),
        "K": (float, 0.0),
        "climit_band": (_floats, (-4.4, -3.6)),
        "kinetic_band": (_floats, (-2.5, -1.6)),
    },
}


def _read_raw(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep key case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"unparseable config ({exc.__class__.__name__})") from exc
    out = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
        vals = {}
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            conv, _ = SCHEMA[sec][key]
            try:
                vals[key] = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{sec}.{key}", f"cannot parse {raw!r}") from exc
        out[sec] = vals
    return out


def _resolve(raw: dict) -> dict:
    full = {}
    for sec, keys in SCHEMA.items():
        given = raw.get(sec, {})
        vals = {}
        for key, (_, default) in keys.items():
            if key in given:
                vals[key] = given[key]
            elif default is REQUIRED:
                raise ConfigError(f"{sec}.{key}", "missing required key")
            else:
                vals[key] = default
        full[sec] = vals
    return full


def _positive(key, v):
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(key, f"must be a finite number > 0, got {v}")


def _nonneg(key, v):
    if not (math.isfinite(v) and v >= 0):
        raise ConfigError(key, f"must be a finite number >= 0, got {v}")


def _band(key, v):
    if len(v) != 2 or not v[0] < v[1]:
        raise ConfigError(key, "must be 'lo, hi' with lo < hi")


def build(full: dict) -> tuple[ModelParams, SimConfig, Scenario]:
    m, s, sc = full["model"], full["simulation"], full["scenario"]
    for key in ("c", "T_star", "k_B"):
        _positive(f"model.{key}", m[key])
    if m["kernel"] not in ("power_law", "constant"):
        raise ConfigError("model.kernel", f"unknown kernel kind {m['kernel']!r}")
    _positive("model.beta", m["beta"])
    mass, dof = m["mass"], m["dof"]
    if not mass:
        raise ConfigError("model.mass", "empty list")
    if not dof:
        raise ConfigError("model.dof", "empty list")
    for v in mass:
        _positive("model.mass", v)
    for v in dof:
        if not (math.isfinite(v) and v >= 1):
            raise ConfigError("model.dof", f"must be >= 1, got {v}")
    if len(mass) != len(dof):
        if len(mass) == 1:
            mass = mass * len(dof)
        elif len(dof) == 1:
            dof = dof * len(mass)
        else:
            raise ConfigError("model.dof", "length differs from model.mass")
    if len(mass) > 1 and len(mass) != sc["N"]:
        raise ConfigError("model.mass", "per-agent list length must equal scenario.N")
    params = ModelParams(
        c=m["c"],
        T_star=m["T_star"],
        k_B=m["k_B"],
        agents=tuple(zip(mass, dof)),
        kernel=KernelSpec(m["kernel"], m["beta"]),
    )

    dt = s["dt"] if s["dt"] is not None else default_dt(params)
    _positive("simulation.dt", dt)
    _positive("simulation.t_end", s["t_end"])
    if dt > s["t_end"]:
        raise ConfigError("simulation.dt", "must not exceed simulation.t_end")
    if s["sample_every"] < 1:
        raise ConfigError("simulation.sample_every", "must be >= 1")
    if s["model"] not in ("rcs", "cs"):
        raise ConfigError("simulation.model", f"unknown model {s['model']!r}")
    if s["seed"] < 0:
        raise ConfigError("simulation.seed", "must be >= 0")
    sim = SimConfig(dt=dt, t_end=s["t_end"], sample_every=s["sample_every"], model=s["model"], seed=s["seed"])

    if sc["N"] < 1:
        raise ConfigError("scenario.N", "must be >= 1")
    if sc["kind"] not in KINDS:
        raise ConfigError("scenario.kind", f"unknown kind {sc['kind']!r}")
    if sc["mode"] not in ("from_w", "from_v"):
        raise ConfigError("scenario.mode", f"unknown mode {sc['mode']!r}")
    for key in ("x_scale", "w_scale", "separation", "K"):
        _nonneg(f"scenario.{key}", sc[key])
    _positive("scenario.truncation", sc["truncation"])
    if sc["kind"] == "explicit":
        for key in ("positions", "velocities"):
            if len(sc[key]) != sc["N"]:
                raise ConfigError(f"scenario.{key}", f"need {sc['N']} triples, got {len(sc[key])}")
    for v in sc["c_list"]:
        _positive("scenario.c_list", v)
    for v in sc["n_list"]:
        if v < 1:
            raise ConfigError("scenario.n_list", "entries must be >= 1")
    _band("scenario.climit_band", sc["climit_band"])
    _band("scenario.kinetic_band", sc["kinetic_band"])
    scenario = Scenario(**sc)
    return params, sim, scenario


def parse_config_text(text: str) -> tuple[ModelParams, SimConfig, Scenario]:
    return build(_resolve(_read_raw(text)))


def parse_config(path) -> tuple[ModelParams, SimConfig, Scenario]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config_text(text)


def serialize_config(params: ModelParams, sim: SimConfig, scenario: Scenario) -> str:
    """Canonical text form; parsing it back gives equal objects."""
    masses = [m for m, _ in params.agents]
    dofs = [d for _, d in params.agents]
    sections = {
        "model": {
            "c": _num(params.c),
            "T_star": _num(params.T_star),
            "k_B": _num(params.k_B),
            "mass": _fmt_list(masses),
            "dof": _fmt_list(dofs),
            "kernel": params.kernel.kind,
            "beta": _num(params.kernel.beta),
        },
        "simulation": {
            "dt": _num(sim.dt),
            "t_end": _num(sim.t_end),
            "sample_every": str(sim.sample_every),
            "model": sim.model,
            "seed": str(sim.seed),
        },
        "scenario": {},
    }
    for f in dataclasses.fields(Scenario):
        v = getattr(scenario, f.name)
        if f.name in ("positions", "velocities"):
            text = "; ".join(_fmt_list(t) for t in v)
        elif isinstance(v, tuple):
            text = _fmt_list(v)
        elif isinstance(v, str):
            text = v
        else:
            text = _num(v)
        sections["scenario"][f.name] = text
    buf = _stdio.StringIO()
    for sec, vals in sections.items():
        buf.write(f"[{sec}]\n")
        for k, v in vals.items():
            buf.write(f"{k} = {v}\n")
        buf.write("\n")
    return buf.getvalue()


def config_hash(params: ModelParams, sim: SimConfig, scenario: Scenario) -> str:
    text = serialize_config(params, sim, scenario)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------- outputs


@dataclass
class ManifestEntry:
    path: str
    kind: str
    config_hash: str | None
    rows: int | None = None


@dataclass
class RunManifest:
    config_hash: str
    params: dict
    version: str
    seed: int
    started: str
    finished: str = ""
    files: list[ManifestEntry] = field(default_factory=list)


CSV_HEADER = "t,agent,x1,x2,x3,w1,w2,w3"


def write_trajectory_csv(traj: Trajectory, path, config_hash: str | None = None) -> ManifestEntry:
    """One row per agent per sample, 17 significant digits.

    A leading ``# config_hash: ...`` comment is written when a hash is given.
    """
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash: {config_hash}")
    lines.append(CSV_HEADER)
    rows = 0
    for s in traj.samples:
        t = format(float(s.t), ".17g")
        for a in range(s.n):
            vals = [format(float(v), ".17g") for v in (*s.x[a], *s.w[a])]
            lines.append(",".join([t, str(a)] + vals))
            rows += 1
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return ManifestEntry(str(path), "trajectory_csv", config_hash, rows)


@dataclass
class TrajectoryTable:
    t: np.ndarray
    x: np.ndarray  # (samples, N, 3)
    w: np.ndarray
    config_hash: str | None = None

    def states(self) -> list[EnsembleState]:
        return [EnsembleState(float(t), x, w) for t, x, w in zip(self.t, self.x, self.w)]


def read_trajectory_csv(path) -> TrajectoryTable:
    chash = None
    rows = []
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                if line.startswith("# config_hash:"):
                    chash = line.split(":", 1)[1].strip()
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise ValueError(f"unexpected header {line!r}")
                header_seen = True
                continue
            if line:
                rows.append(line.split(","))
    if not header_seen:
        raise ValueError("missing header row")
    if not rows:
        empty = np.zeros((0, 0, 3))
        return TrajectoryTable(np.zeros(0), empty, empty.copy(), chash)
    t = np.array([float(r[0]) for r in rows])
    agent = np.array([int(r[1]) for r in rows])
    n = int(agent.max()) + 1
    if len(rows) % n:
        raise ValueError("ragged trajectory table")
    data = np.array([[float(v) for v in r[2:]] for r in rows]).reshape(-1, n, 6)
    return TrajectoryTable(t.reshape(-1, n)[:, 0], data[:, :, :3], data[:, :, 3:], chash)


_RENAME = {"FlockingCertificate": {"lam": "lambda"}}
_KIND = {
    "FlockingCertificate": "flocking_certificate",
    "LimitScanResult": "limit_scan",
    "KineticScanResult": "kinetic_scan",
    "MeanFieldScanResult": "meanfield_scan",
    "DiagnosticsSeries": "diagnostics_series",
    "RunManifest": "manifest",
}
# fitted slopes of a degenerate scan and the condition side of a failed
# certificate are legitimately undefined; they serialize as null
_NULLABLE = {
    "LimitScanResult": ("slope", "intercept", "r_squared"),
    "KineticScanResult": ("slope", "intercept", "r_squared"),
    "FlockingCertificate": ("condition_lhs", "condition_lhs_alt"),
}


def to_jsonable(obj, where: str = "$"):
    """Convert reports to plain JSON types; non-finite floats raise ``ValueError``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        name = type(obj).__name__
        rename = _RENAME.get(name, {})
        nullable = _NULLABLE.get(name, ())
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if f.name in nullable and isinstance(v, float) and not math.isfinite(v):
                out[rename.get(f.name, f.name)] = None
                continue
            out[rename.get(f.name, f.name)] = to_jsonable(v, f"{where}.{f.name}")
        return out
    if isinstance(obj, dict):
        return {(_num(k) if isinstance(k, (float, int)) else str(k)): to_jsonable(v, f"{where}.{k}") for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v, f"{where}[{i}]") for i, v in enumerate(obj.tolist())]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, f"{where}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value at {where}")
        return v
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} at {where}")


def report_document(report, kind: str | None = None, config_hash: str | None = None) -> dict:
    body = to_jsonable(report)
    if not isinstance(body, dict):
        body = {"value": body}
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind or _KIND.get(type(report).__name__, "report")}
    if config_hash is not None:
        doc["config_hash"] = config_hash
    doc.update(body)
    return doc


def dumps_report(report, kind: str | None = None, config_hash: str | None = None) -> str:
    doc = report_document(report, kind, config_hash)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report_json(report, path, kind: str | None = None, config_hash: str | None = None) -> ManifestEntry:
    text = dumps_report(report, kind, config_hash)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return ManifestEntry(str(path), "report_json", config_hash)


def timestamp() -> str:
    # SOURCE_DATE_EPOCH pins timestamps for reproducible manifests
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def new_manifest(params: ModelParams, sim: SimConfig, scenario: Scenario) -> RunManifest:
    from . import __version__

    return RunManifest(
        config_hash=config_hash(params, sim, scenario),
        params=to_jsonable({"model": dataclasses.asdict(params), "simulation": dataclasses.asdict(sim)}),
        version=__version__,
        seed=sim.seed,
        started=timestamp(),
    )


def write_manifest(manifest: RunManifest, path) -> None:
    for entry in manifest.files:
        if not Path(entry.path).exists():
            raise FileNotFoundError(f"manifest lists missing file {entry.path}")
        if entry.config_hash != manifest.config_hash:
            raise ValueError(f"{entry.path} carries a different config hash")
    if not manifest.finished:
        manifest.finished = timestamp()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_report(manifest))
