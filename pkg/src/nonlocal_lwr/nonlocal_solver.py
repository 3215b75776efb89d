"""Upwind finite volumes for rho_t + (rho v(q))_x = 0 at fixed eps.

Since v >= 0 the transport is rightward, so the interface flux takes the
upstream cell density times the velocity evaluated with the look-ahead
average at that interface: F_{i+1/2} = rho_i v(q_{i+1/2}), where
q_{i+1/2} is q at the left edge of cell i+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernel import DensityField, QField, exp_average
from .model import VelocityModel, validate_model
from .errors import CFLViolationError, DomainError, InvalidModelError
from .trajectory import Trajectory, march, to_trajectory

INTEGRATORS = ("euler", "ssprk2")


@dataclass(frozen=True)
class NonlocalState:
    t: float
    field: DensityField
    eps: float
    q: QField

    @classmethod
    def from_field(cls, field: DensityField, eps: float, t: float = 0.0) -> "NonlocalState":
        return cls(t, field, eps, exp_average(field, eps))


def default_dt_max(dx: float, model: VelocityModel) -> float:
    return dx / model.v_max


def _speeds(q: QField, model: VelocityModel) -> np.ndarray:
    return model.v(q.at_edges)


def cfl_dt(state: NonlocalState, model: VelocityModel, cfl: float = 0.5, dt_max=None) -> float:
    """dt = cfl dx / max v(q) over all interfaces; dt_max when nothing moves."""
    if not 0 < cfl <= 1:
        raise DomainError(f"cfl must lie in (0, 1], got {cfl}")
    vmax = float(np.max(_speeds(state.q, model)))
    if vmax <= 0:
        return default_dt_max(state.field.dx, model) if dt_max is None else dt_max
    return cfl * state.field.dx / vmax


def interface_fluxes(field: DensityField, q: QField, model: VelocityModel) -> np.ndarray:
    """The n + 1 interface fluxes, boundary interfaces included."""
    rho = field.values
    speeds = _speeds(q, model)
    ghost = rho[-1] if field.boundary == "periodic" else rho[0]
    upstream = np.concatenate(([ghost], rho))
    F = upstream * speeds
    if field.boundary == "periodic":
        # both ends are the same interface; share one value so mass is exact
        F[0] = F[-1]
    return F


def _euler(field, eps, model, dt):
    q = exp_average(field, eps)
    F = interface_fluxes(field, q, model)
    new = field.values - (dt / field.dx) * np.diff(F)
    return new, F[0], F[-1]


def _make_stepper(template: DensityField, eps: float, model: VelocityModel, integrator: str):
    def euler(values, dt):
        return _euler(template.with_values(values), eps, model, dt)

    def ssprk2(values, dt):
        mid, l1, r1 = euler(values, dt)
        end, l2, r2 = euler(mid, dt)
        return 0.5 * (values + end), 0.5 * (l1 + l2), 0.5 * (r1 + r2)

    if integrator == "euler":
        return euler
    if integrator == "ssprk2":
        return ssprk2
    raise ValueError(f"unknown integrator {integrator!r}; expected one of {INTEGRATORS}")


def step_nonlocal(
    state: NonlocalState, model: VelocityModel, dt: float, slack: float = 1e-9
) -> tuple[NonlocalState, float, float]:
    """One forward-Euler step.

    Returns the new state together with the left (inflow) and right
    (outflow) boundary fluxes that were applied over ``dt``.
    """
    new, f_in, f_out = _euler(state.field, state.eps, model, dt)
    if new.min() < -slack or new.max() > model.rho_jam + slack:
        raise CFLViolationError(
            f"step of dt={dt} produced densities in [{new.min()}, {new.max()}]"
        )
    field = state.field.with_values(new)
    return NonlocalState(state.t + dt, field, state.eps, exp_average(field, state.eps)), f_in, f_out


def solve_nonlocal(
    initial: DensityField,
    model: VelocityModel,
    eps: float,
    t_end: float,
    cfl: float = 0.5,
    snapshot_times: Sequence[float] | None = None,
    integrator: str = "euler",
    dt_max: float | None = None,
) -> Trajectory:
    """March the nonlocal model to ``t_end``; the trajectory starts at t = 0."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not 0 < cfl <= 1:
        raise DomainError(f"cfl must lie in (0, 1], got {cfl}")
    report = validate_model(model)
    if not report.passed:
        raise InvalidModelError("; ".join(report.messages))
    initial.check_bounds(model.rho_jam)
    step = _make_stepper(initial, eps, model, integrator)
    cap = default_dt_max(initial.dx, model) if dt_max is None else dt_max

    def max_dt(values):
        q = exp_average(initial.with_values(values), eps)
        vmax = float(np.max(_speeds(q, model)))
        return cap if vmax <= 0 else cfl * initial.dx / vmax

    res = march(initial, model.rho_jam, max_dt, step, t_end, snapshot_times)
    meta = {
        "solver": "nonlocal",
        "model": model.describe(),
        "eps": eps,
        "cfl": cfl,
        "integrator": integrator,
        "positive_data": bool(initial.values.min() > 0),
    }
    return to_trajectory(initial, res, meta)
