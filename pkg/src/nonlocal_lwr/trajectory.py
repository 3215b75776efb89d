"""Time-stamped density snapshots and the shared time-marching driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CFLViolationError, DomainError
from .kernel import DensityField

log = logging.getLogger(__name__)

MAX_HALVINGS = 20


@dataclass
class Trajectory:
    """Snapshots ``values[k]`` at ``times[k]`` on a single shared grid."""

    x0: float
    dx: float
    boundary: str
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.times.size:
            raise ValueError("one snapshot per time is required")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n) + 0.5) * self.dx

    @property
    def x_end(self) -> float:
        return self.x0 + self.n * self.dx

    def snapshot(self, k: int) -> DensityField:
        return DensityField(self.x0, self.dx, self.values[k], self.boundary)

    def at(self, t: float, atol: float = 1e-12) -> DensityField:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > atol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}; nearest is {self.times[k]}")
        return self.snapshot(k)

    @property
    def final(self) -> DensityField:
        return self.snapshot(-1)


@dataclass
class MarchResult:
    times: list
    snapshots: list
    steps: int = 0
    rejected: int = 0
    inflow: float = 0.0
    outflow: float = 0.0
    min_value: float = np.inf
    max_value: float = -np.inf
    tv_max: float = 0.0


def _targets(t_end: float, snapshot_times: Sequence[float] | None) -> np.ndarray:
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    ts = [] if snapshot_times is None else [float(t) for t in snapshot_times]
    if any(t < 0 or t > t_end * (1 + 1e-12) for t in ts):
        raise DomainError("snapshot times must lie in [0, t_end]")
    ts = sorted(set(t for t in ts if t > 0) | {float(t_end)})
    return np.array(ts)


def _tv(values: np.ndarray, periodic: bool) -> float:
    tv = float(np.sum(np.abs(np.diff(values))))
    if periodic:
        tv += abs(float(values[0] - values[-1]))
    return tv


def march(
    initial: DensityField,
    rho_jam: float,
    max_dt: Callable[[np.ndarray], float],
    step: Callable[[np.ndarray, float], tuple[np.ndarray, float, float]],
    t_end: float,
    snapshot_times: Sequence[float] | None = None,
    slack: float = 1e-9,
) -> MarchResult:
    """Advance with explicit steps, landing exactly on every snapshot time.

    ``step(values, dt)`` returns the updated cell values and the left and
    right boundary fluxes used, so that the caller can account for mass
    leaving or entering the window. A step that leaves [0, rho_jam] by more
    than ``slack`` is retried with half the time step.
    """
    targets = _targets(t_end, snapshot_times)
    periodic = initial.boundary == "periodic"
    rho = np.array(initial.values, dtype=float)
    res = MarchResult(times=[0.0], snapshots=[rho.copy()])
    res.min_value, res.max_value = float(rho.min()), float(rho.max())
    res.tv_max = _tv(rho, periodic)
    t = 0.0
    for target in targets:
        while t < target:
            dt = max_dt(rho)
            remaining = target - t
            landing = dt >= remaining * (1 - 1e-12)
            if landing:
                dt = remaining
            for _ in range(MAX_HALVINGS + 1):
                new, f_left, f_right = step(rho, dt)
                if new.min() >= -slack and new.max() <= rho_jam + slack:
                    break
                res.rejected += 1
                landing = False
                dt *= 0.5
            else:
                raise CFLViolationError(
                    f"density left [0, {rho_jam}] at t={t:.6g} after {MAX_HALVINGS} halvings"
                )
            rho = new
            t = target if landing else t + dt
            res.steps += 1
            res.inflow += dt * f_left
            res.outflow += dt * f_right
            res.min_value = min(res.min_value, float(rho.min()))
            res.max_value = max(res.max_value, float(rho.max()))
            res.tv_max = max(res.tv_max, _tv(rho, periodic))
        res.times.append(float(target))
        res.snapshots.append(rho.copy())
    if res.rejected:
        log.warning("%d steps were rejected and retried with a halved dt", res.rejected)
    return res


def to_trajectory(initial: DensityField, res: MarchResult, meta: dict) -> Trajectory:
    meta = dict(meta)
    meta.update(
        steps=res.steps,
        rejected_steps=res.rejected,
        inflow=res.inflow,
        outflow=res.outflow,
        min_value=res.min_value,
        max_value=res.max_value,
        tv_max=res.tv_max,
        boundary=initial.boundary,
        dx=initial.dx,
    )
    return Trajectory(
        initial.x0, initial.dx, initial.boundary, np.array(res.times), np.array(res.snapshots), meta
    )
