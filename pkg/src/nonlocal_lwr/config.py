"""Run configuration: a YAML document with a fixed schema.

Example::

    name: shock
    model: {kind: greenshields, rho_jam: 1.0, params: [1.0], delta_star: 1.0}
    domain: {x_min: -2.0, x_max: 2.0, dx: 0.001, boundary: constant-extension}
    initial: {type: riemann, rho_l: 0.2, rho_r: 0.8, x_jump: 0.0}
    eps: [0.1, 0.05, 0.025, 0.0125]
    t_end: 0.5

Every other key falls back to the dataclass defaults below. Unknown keys
are rejected, and all problems found are reported together in a single
:class:`ConfigError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
import yaml

from .errors import ConfigError, NonlocalLWRError
from .kernel import BOUNDARIES, DensityField
from .model import KINDS, VelocityModel, validate_model

INITIAL_TYPES = {
    "riemann": ("rho_l", "rho_r", "x_jump"),
    "piecewise": ("breakpoints", "values"),
    "sine": ("mean", "amplitude", "wavenumber"),
}
MODEL_KEYS = ("kind", "rho_jam", "params", "delta_star")
DOMAIN_KEYS = ("x_min", "x_max", "dx", "boundary")
AUDIT_KEYS = ("x_centers", "radii", "t_fractions", "snapshots")
TOP_KEYS = (
    "name", "model", "domain", "initial", "eps", "t_end", "cfl", "snapshot_times",
    "window", "reference_dx", "integrator", "audit", "output_dir", "allow_coarse_dx",
)


@dataclass
class ModelSpec:
    kind: str = "greenshields"
    rho_jam: float = 1.0
    params: list = field(default_factory=lambda: [1.0])
    delta_star: float = 1.0

    def build(self) -> VelocityModel:
        return VelocityModel(self.kind, self.rho_jam, tuple(self.params), self.delta_star)


@dataclass
class DomainSpec:
    x_min: float = -2.0
    x_max: float = 2.0
    dx: float = 1e-3
    boundary: str = "constant-extension"

    @property
    def n(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx))


@dataclass
class InitialSpec:
    type: str = "riemann"
    data: dict = field(default_factory=lambda: {"rho_l": 0.2, "rho_r": 0.8, "x_jump": 0.0})

    def density(self, x: np.ndarray) -> np.ndarray:
        d = self.data
        if self.type == "riemann":
            return np.where(x < d["x_jump"], d["rho_l"], d["rho_r"])
        if self.type == "piecewise":
            idx = np.searchsorted(np.asarray(d["breakpoints"], dtype=float), x, side="right")
            return np.asarray(d["values"], dtype=float)[idx]
        if self.type == "sine":
            return d["mean"] + d["amplitude"] * np.sin(d["wavenumber"] * x)
        raise ConfigError(f"unknown initial data type {self.type!r}")

    def densities(self) -> list[float]:
        """Every density value the data can take, for range checks."""
        d = self.data
        if self.type == "riemann":
            return [d["rho_l"], d["rho_r"]]
        if self.type == "piecewise":
            return list(d["values"])
        return [d["mean"] - abs(d["amplitude"]), d["mean"] + abs(d["amplitude"])]

    def jumps(self) -> list[float]:
        d = self.data
        if self.type == "riemann":
            return [d["x_jump"]]
        if self.type == "piecewise":
            return list(d["breakpoints"])
        return []

    def to_dict(self) -> dict:
        return {"type": self.type, **self.data}


@dataclass
class AuditSpec:
    x_centers: list | None = None
    radii: list = field(default_factory=lambda: [0.1, 0.25, 0.4])
    t_fractions: list = field(default_factory=lambda: [0.45, 0.5, 0.55])
    snapshots: int = 201


@dataclass
class RunConfig:
    name: str = "run"
    model: ModelSpec = field(default_factory=ModelSpec)
    domain: DomainSpec = field(default_factory=DomainSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    eps: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    t_end: float = 0.5
    cfl: float = 0.5
    snapshot_times: list | None = None  # None: t = 0, t_end/4, ..., t_end
    window: list | None = None  # None: domain minus the boundary margin
    reference_dx: float | None = None  # None: dx / 4
    integrator: str = "euler"
    audit: AuditSpec = field(default_factory=AuditSpec)
    output_dir: str = "out"
    allow_coarse_dx: bool = False

    # -- derived quantities ---------------------------------------------------

    def velocity_model(self) -> VelocityModel:
        return self.model.build()

    def initial_field(self, dx: float | None = None) -> DensityField:
        d = self.domain
        dx = d.dx if dx is None else dx
        n = int(round((d.x_max - d.x_min) / dx))
        return DensityField.from_function(self.initial.density, d.x_min, d.x_max, n, d.boundary)

    def ref_dx(self) -> float:
        return self.domain.dx / 4 if self.reference_dx is None else self.reference_dx

    def output_times(self) -> list[float]:
        if self.snapshot_times is not None:
            return [float(t) for t in self.snapshot_times]
        return [self.t_end * k / 4 for k in range(5)]

    def run_times(self) -> np.ndarray:
        """Snapshot times used internally: the audit grid plus the requested outputs."""
        grid = np.linspace(0.0, self.t_end, self.audit.snapshots)
        return np.unique(np.concatenate((grid, self.output_times())))

    def boundary_margin(self, v_max: float) -> float:
        return max(self.eps) * 10 + self.t_end * v_max

    def error_window(self) -> tuple[float, float]:
        if self.window is not None:
            return float(self.window[0]), float(self.window[1])
        d = self.domain
        if d.boundary == "periodic":
            return d.x_min, d.x_max
        margin = self.boundary_margin(self.velocity_model().v_max)
        return d.x_min + margin, d.x_max - margin

    def bump_centers(self) -> list[float]:
        if self.audit.x_centers is not None:
            return [float(c) for c in self.audit.x_centers]
        lo, hi = self.error_window()
        mid, quarter = 0.5 * (lo + hi), 0.25 * (hi - lo)
        return [mid - quarter, mid, mid + quarter]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": dict(vars(self.model)),
            "domain": dict(vars(self.domain)),
            "initial": self.initial.to_dict(),
            "eps": list(self.eps),
            "t_end": self.t_end,
            "cfl": self.cfl,
            "snapshot_times": self.snapshot_times,
            "window": self.window,
            "reference_dx": self.reference_dx,
            "integrator": self.integrator,
            "audit": dict(vars(self.audit)),
            "output_dir": self.output_dir,
            "allow_coarse_dx": self.allow_coarse_dx,
        }

    def dump(self) -> str:
        """Canonical YAML document; ``parse_config(cfg.dump()) == cfg``."""
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


# -- parsing -------------------------------------------------------------------


def _num(problems, where, value, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        problems.append(f"{where}: expected a finite number, got {value!r}")
        return None
    if positive and value <= 0:
        problems.append(f"{where}: must be positive, got {value}")
        return None
    return float(value)


def _num_list(problems, where, value, positive=False):
    if not isinstance(value, list):
        problems.append(f"{where}: expected a list of numbers, got {value!r}")
        return None
    out = [_num(problems, f"{where}[{i}]", v, positive) for i, v in enumerate(value)]
    return None if any(v is None for v in out) else out


def _section(problems, where, raw, allowed):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        problems.append(f"{where}: expected a mapping, got {type(raw).__name__}")
        return {}
    for key in raw:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")
    return raw


def _load(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        reason = getattr(exc, "problem", None) or str(exc)
        raise ConfigError([f"syntax error at {where}{reason}"]) from exc


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a YAML run configuration."""
    raw = _load(text)
    if raw is None:
        raw = {}
    problems: list[str] = []
    top = _section(problems, "config", raw, TOP_KEYS)
    cfg = RunConfig()

    if "name" in top:
        cfg.name = str(top["name"])

    m = _section(problems, "model", top.get("model"), MODEL_KEYS)
    if "kind" in m:
        if m["kind"] not in KINDS:
            problems.append(f"model.kind: unknown kind {m['kind']!r}; expected one of {KINDS}")
        cfg.model.kind = m["kind"]
    for key in ("rho_jam", "delta_star"):
        if key in m:
            setattr(cfg.model, key, _num(problems, f"model.{key}", m[key], positive=True))
    if "params" in m:
        cfg.model.params = _num_list(problems, "model.params", m["params"])
    elif cfg.model.kind != "greenshields":
        problems.append(f"model.params: required for kind {cfg.model.kind!r}")

    d = _section(problems, "domain", top.get("domain"), DOMAIN_KEYS)
    for key in ("x_min", "x_max"):
        if key in d:
            setattr(cfg.domain, key, _num(problems, f"domain.{key}", d[key]))
    if "dx" in d:
        cfg.domain.dx = _num(problems, "domain.dx", d["dx"], positive=True)
    if "boundary" in d:
        if d["boundary"] not in BOUNDARIES:
            problems.append(f"domain.boundary: unknown policy {d['boundary']!r}")
        cfg.domain.boundary = d["boundary"]

    init = top.get("initial")
    if init is not None:
        if not isinstance(init, dict) or init.get("type") not in INITIAL_TYPES:
            problems.append(f"initial.type: expected one of {tuple(INITIAL_TYPES)}")
        else:
            keys = INITIAL_TYPES[init["type"]]
            sec = _section(problems, "initial", init, keys + ("type",))
            data = {}
            for key in keys:
                if key not in sec:
                    if key == "x_jump":
                        data[key] = 0.0
                        continue
                    problems.append(f"initial.{key}: required for {init['type']} data")
                elif key in ("breakpoints", "values"):
                    data[key] = _num_list(problems, f"initial.{key}", sec[key])
                else:
                    data[key] = _num(problems, f"initial.{key}", sec[key])
            cfg.initial = InitialSpec(init["type"], data)

    if "eps" in top:
        cfg.eps = _num_list(problems, "eps", top["eps"], positive=True)
    for key in ("t_end", "cfl", "reference_dx"):
        if key in top and top[key] is not None:
            setattr(cfg, key, _num(problems, key, top[key], positive=True))
    if "snapshot_times" in top and top["snapshot_times"] is not None:
        cfg.snapshot_times = _num_list(problems, "snapshot_times", top["snapshot_times"])
    if "window" in top and top["window"] is not None:
        cfg.window = _num_list(problems, "window", top["window"])
    if "integrator" in top:
        if top["integrator"] not in ("euler", "ssprk2"):
            problems.append(f"integrator: unknown integrator {top['integrator']!r}")
        cfg.integrator = top["integrator"]
    if "output_dir" in top:
        cfg.output_dir = str(top["output_dir"])
    if "allow_coarse_dx" in top:
        if not isinstance(top["allow_coarse_dx"], bool):
            problems.append("allow_coarse_dx: expected true or false")
        cfg.allow_coarse_dx = bool(top["allow_coarse_dx"])

    a = _section(problems, "audit", top.get("audit"), AUDIT_KEYS)
    if a.get("x_centers") is not None:
        cfg.audit.x_centers = _num_list(problems, "audit.x_centers", a["x_centers"])
    for key in ("radii", "t_fractions"):
        if key in a:
            setattr(cfg.audit, key, _num_list(problems, f"audit.{key}", a[key], positive=True))
    if "snapshots" in a:
        if isinstance(a["snapshots"], bool) or not isinstance(a["snapshots"], int) or a["snapshots"] < 2:
            problems.append("audit.snapshots: expected an integer >= 2")
        else:
            cfg.audit.snapshots = a["snapshots"]

    if not problems:
        problems.extend(semantic_problems(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def semantic_problems(cfg: RunConfig) -> list[str]:
    """Cross-field checks on an otherwise well-typed configuration."""
    problems = []
    d = cfg.domain
    try:
        model = cfg.velocity_model()
    except NonlocalLWRError as exc:
        return [f"model: {exc}"]
    report = validate_model(model)
    if not report.passed:
        problems.extend(f"model: {msg}" for msg in report.messages)
    if not d.x_min < d.x_max:
        problems.append("domain: x_min must be smaller than x_max")
    else:
        cells = (d.x_max - d.x_min) / d.dx
        if abs(cells - round(cells)) > 1e-9 * cells:
            problems.append(f"domain.dx: {d.dx} does not divide the domain length")
        ref = cfg.ref_dx()
        ratio = d.dx / ref
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            problems.append(f"reference_dx: {ref} must divide dx = {d.dx}")
    for rho in cfg.initial.densities():
        if rho < 0:
            problems.append(f"initial: density {rho} is negative")
        elif rho > model.rho_jam:
            problems.append(f"initial: density {rho} exceeds rho_jam = {model.rho_jam}")
    if cfg.initial.type == "piecewise":
        bp, vals = cfg.initial.data["breakpoints"], cfg.initial.data["values"]
        if len(vals) != len(bp) + 1:
            problems.append("initial: piecewise data needs one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            problems.append("initial: breakpoints must be strictly increasing")
    if len(set(cfg.eps)) != len(cfg.eps) or not cfg.eps:
        problems.append("eps: values must be distinct and non-empty")
    if cfg.cfl > 1:
        problems.append(f"cfl: must lie in (0, 1], got {cfg.cfl}")
    if cfg.eps and not cfg.allow_coarse_dx and d.dx > min(cfg.eps) / 10 * (1 + 1e-12):
        problems.append(
            f"domain.dx: {d.dx} does not resolve eps = {min(cfg.eps)} (need dx <= eps/10; "
            "set allow_coarse_dx to override)"
        )
    if cfg.snapshot_times is not None and any(t < 0 or t > cfg.t_end for t in cfg.snapshot_times):
        problems.append("snapshot_times: every time must lie in [0, t_end]")
    if cfg.window is not None:
        if len(cfg.window) != 2 or cfg.window[0] >= cfg.window[1]:
            problems.append("window: expected [lo, hi] with lo < hi")
        elif d.boundary != "periodic" and not problems:
            margin = cfg.boundary_margin(model.v_max)
            if cfg.window[0] < d.x_min + margin - 1e-12 or cfg.window[1] > d.x_max - margin + 1e-12:
                problems.append(
                    f"window: must stay {margin:g} away from the domain ends "
                    "(10 max(eps) + t_end v(0))"
                )
    elif d.boundary != "periodic" and not problems:
        lo, hi = cfg.error_window()
        if lo >= hi:
            problems.append("domain: too short to leave an error window past the boundary margin")
    return problems


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
