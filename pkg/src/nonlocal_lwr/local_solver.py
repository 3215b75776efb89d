"""Entropy solutions of the local law rho_t + f(rho)_x = 0.

Two independent routes: a Godunov finite-volume scheme (interval min/max
of the flux at every interface) and the exact self-similar Riemann
solution built from the convex/concave envelope of f.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidModelError
from .kernel import DensityField
from .model import CLAMP_SLACK, VelocityModel, validate_model
from .trajectory import Trajectory, march, to_trajectory

ROOT_SCAN_SAMPLES = 1024
ENVELOPE_SAMPLES = 4096
BISECT_TOL = 1e-12


def _bisect(g, a: float, b: float, tol: float = BISECT_TOL) -> float:
    ga = g(a)
    for _ in range(200):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        gm = g(m)
        if gm == 0:
            return m
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


@functools.lru_cache(maxsize=64)
def flux_critical_points(model: VelocityModel) -> np.ndarray:
    """Roots of f' strictly inside (0, rho_jam): sign-change scan plus bisection."""
    rho = np.linspace(0.0, model.rho_jam, ROOT_SCAN_SAMPLES + 1)
    d = model.df(rho)
    roots = []
    for k in range(ROOT_SCAN_SAMPLES):
        if d[k] == 0.0:
            if 0 < k:
                roots.append(rho[k])
        elif d[k] * d[k + 1] < 0:
            roots.append(_bisect(model.df, rho[k], rho[k + 1]))
    return np.array(sorted(roots))


def godunov_flux(model: VelocityModel, rho_l, rho_r, slack: float = CLAMP_SLACK):
    """min f on [rho_l, rho_r] if rho_l <= rho_r, else max f on [rho_r, rho_l].

    Vectorised over array arguments. Candidates are the two endpoints and
    every critical point of f strictly inside the interval; a critical
    point sitting exactly on an endpoint adds nothing.
    """
    a = np.asarray(model.check_range(rho_l, slack), dtype=float)
    b = np.asarray(model.check_range(rho_r, slack), dtype=float)
    a, b = np.broadcast_arrays(a, b)
    fa, fb = model.f(a), model.f(b)
    rising = a <= b
    out = np.where(rising, np.minimum(fa, fb), np.maximum(fa, fb))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    for c in flux_critical_points(model):
        fc = float(model.f(c))
        inside = (lo < c) & (c < hi)
        out = np.where(inside & rising, np.minimum(out, fc), out)
        out = np.where(inside & ~rising, np.maximum(out, fc), out)
    return float(out) if out.ndim == 0 else out


def godunov_interface_fluxes(field: DensityField, model: VelocityModel) -> np.ndarray:
    rho = field.values
    if field.boundary == "periodic":
        left, right = rho[-1], rho[0]
    else:
        left, right = rho[0], rho[-1]
    padded = np.concatenate(([left], rho, [right]))
    return godunov_flux(model, padded[:-1], padded[1:])


def solve_local(
    initial: DensityField,
    model: VelocityModel,
    t_end: float,
    cfl: float = 0.5,
    snapshot_times: Sequence[float] | None = None,
) -> Trajectory:
    """Godunov scheme with dt = cfl dx / max |f'|."""
    if not 0 < cfl <= 1:
        raise DomainError(f"cfl must lie in (0, 1], got {cfl}")
    report = validate_model(model)
    if not report.passed:
        raise InvalidModelError("; ".join(report.messages))
    initial.check_bounds(model.rho_jam)
    dt = cfl * initial.dx / model.max_abs_df()

    def step(values, dt):
        F = godunov_interface_fluxes(initial.with_values(values), model)
        return values - (dt / initial.dx) * np.diff(F), float(F[0]), float(F[-1])

    res = march(initial, model.rho_jam, lambda _: dt, step, t_end, snapshot_times)
    meta = {"solver": "godunov", "model": model.describe(), "cfl": cfl, "eps": 0.0}
    return to_trajectory(initial, res, meta)


# -- exact Riemann solutions ---------------------------------------------------


@dataclass(frozen=True)
class Wave:
    kind: str  # "shock", "contact-of-envelope" or "rarefaction-fan"
    speed_lo: float
    speed_hi: float
    rho_from: float
    rho_to: float


@dataclass
class RiemannSolution:
    model: VelocityModel
    rho_left: float
    rho_right: float
    waves: list[Wave] = field(default_factory=list)

    def __call__(self, xi):
        """Density at similarity coordinate xi = x / t (right-continuous at shocks)."""
        xi = np.asarray(xi, dtype=float)
        out = np.full(xi.shape, self.rho_left)
        for w in self.waves:
            if w.kind == "rarefaction-fan":
                inside = (xi >= w.speed_lo) & (xi <= w.speed_hi)
                if np.any(inside):
                    out[inside] = _invert_df(self.model, xi[inside], w.rho_from, w.rho_to)
                out[xi > w.speed_hi] = w.rho_to
            else:
                out[xi >= w.speed_lo] = w.rho_to
        return float(out) if out.ndim == 0 else out

    def cell_averages(self, t: float, x0: float, dx: float, n: int, x_jump: float = 0.0,
                      sub: int = 16) -> np.ndarray:
        """Average the solution at time t over each grid cell (midpoint sub-sampling)."""
        offsets = (np.arange(sub) + 0.5) / sub
        x = x0 + (np.arange(n)[:, None] + offsets[None, :]) * dx
        return self((x - x_jump) / t).mean(axis=1)


def _invert_df(model: VelocityModel, xi: np.ndarray, rho_a: float, rho_b: float) -> np.ndarray:
    # f' is monotone on the fan; bisect for f'(rho) = xi between its ends
    lo = np.full(xi.shape, min(rho_a, rho_b))
    hi = np.full(xi.shape, max(rho_a, rho_b))
    increasing = model.df(hi[0]) > model.df(lo[0]) if xi.size else True
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        above = model.df(mid) > xi
        go_left = above if increasing else ~above
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
    return 0.5 * (lo + hi)


def _lower_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    hull: list[int] = []
    for k in range(x.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def _refine_tangent(g, a: float, b: float, guess: float, width: float) -> float:
    lo, hi = max(a, guess - width), min(b, guess + width)
    if g(lo) * g(hi) > 0:
        return guess
    return _bisect(g, lo, hi)


def _envelope_segments(h, dh, lo: float, hi: float, samples: int):
    """Lower convex envelope of h on [lo, hi] as (kind, rho_a, rho_b) segments."""
    x = np.linspace(lo, hi, samples + 1)
    y = h(x)
    hull = _lower_hull(x, y)
    spacing = x[1] - x[0]
    raw = []
    for i, j in zip(hull[:-1], hull[1:]):
        kind = "fan" if j == i + 1 else "chord"
        if raw and raw[-1][0] == kind == "fan":
            raw[-1][2] = x[j]
        else:
            raw.append([kind, x[i], x[j]])
    if len(raw) == 1 and raw[0][0] == "fan":
        return [("fan", lo, hi)]
    # pin tangency points of each chord exactly
    for k, seg in enumerate(raw):
        if seg[0] != "chord":
            continue
        a, b = seg[1], seg[2]
        for _ in range(3):
            if b < hi:
                b = _refine_tangent(lambda r: dh(r) * (r - a) - (h(r) - h(a)), a, hi, b, 2 * spacing)
            if a > lo:
                a = _refine_tangent(lambda r: dh(r) * (b - r) - (h(b) - h(r)), lo, b, a, 2 * spacing)
        seg[1], seg[2] = a, b
        if k > 0 and raw[k - 1][0] == "fan":
            raw[k - 1][2] = a
        if k + 1 < len(raw) and raw[k + 1][0] == "fan":
            raw[k + 1][1] = b
    return [tuple(s) for s in raw if s[2] > s[1]]


def riemann_similarity(model: VelocityModel, rho_l: float, rho_r: float,
                       samples: int = ENVELOPE_SAMPLES) -> RiemannSolution:
    """Exact entropy solution of the Riemann problem (rho_l | rho_r) at x = 0."""
    rho_l = float(model.check_range(rho_l))
    rho_r = float(model.check_range(rho_r))
    sol = RiemannSolution(model, rho_l, rho_r)
    if rho_l == rho_r:
        return sol
    if rho_l < rho_r:
        segs = _envelope_segments(model.f, model.df, rho_l, rho_r, samples)
        ordered = segs
    else:
        segs = _envelope_segments(lambda r: -model.f(r), lambda r: -model.df(r), rho_r, rho_l, samples)
        # concave envelope is walked from rho_l downwards
        ordered = [(kind, b, a) for kind, a, b in reversed(segs)]
    for kind, a, b in ordered:
        if kind == "fan":
            s_a, s_b = float(model.df(a)), float(model.df(b))
            sol.waves.append(Wave("rarefaction-fan", s_a, s_b, a, b))
        else:
            s = float((model.f(b) - model.f(a)) / (b - a))
            touches_fan = not ({a, b} <= {rho_l, rho_r})
            sol.waves.append(Wave("contact-of-envelope" if touches_fan else "shock", s, s, a, b))
    return sol


def interface_state(model: VelocityModel, rho_l: float, rho_r: float) -> float:
    """Riemann solution value on the right side of x = 0."""
    return riemann_similarity(model, rho_l, rho_r)(0.0)
