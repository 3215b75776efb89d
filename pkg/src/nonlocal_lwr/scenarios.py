"""The standard scenario suite used by the convergence study."""

from __future__ import annotations

import math

from .config import DomainSpec, InitialSpec, RunConfig, AuditSpec


def shock() -> RunConfig:
    """(a) Riemann data 0.2 | 0.8: a stationary entropy shock."""
    return RunConfig(
        name="shock",
        initial=InitialSpec("riemann", {"rho_l": 0.2, "rho_r": 0.8, "x_jump": 0.0}),
        audit=AuditSpec(x_centers=[-0.15, 0.0, 0.15]),
    )


def rarefaction() -> RunConfig:
    """(b) Riemann data 0.8 | 0.2: a centred rarefaction (the stationary jump is not admissible)."""
    return RunConfig(
        name="rarefaction",
        initial=InitialSpec("riemann", {"rho_l": 0.8, "rho_r": 0.2, "x_jump": 0.0}),
        audit=AuditSpec(x_centers=[-0.1, 0.0, 0.1]),
    )


def three_state() -> RunConfig:
    """(c) 0.3 | 0.7 | 0.4: a shock next to a rarefaction that runs into it."""
    return RunConfig(
        name="three-state",
        initial=InitialSpec("piecewise", {"breakpoints": [-0.25, 0.25], "values": [0.3, 0.7, 0.4]}),
        audit=AuditSpec(x_centers=[-0.25, 0.0, 0.25]),
    )


def sine() -> RunConfig:
    """(d) 0.5 + 0.3 sin(pi x) on a periodic domain; breaks at t = 1/(0.6 pi) ~ 0.53.

    Output frames include t = 0.2 (smooth) and t = 1.0 (after the shocks form).
    """
    return RunConfig(
        name="sine",
        domain=DomainSpec(boundary="periodic"),
        initial=InitialSpec("sine", {"mean": 0.5, "amplitude": 0.3, "wavenumber": math.pi}),
        t_end=1.0,
        snapshot_times=[0.0, 0.2, 0.5, 1.0],
        window=[-1.0, 1.0],
        audit=AuditSpec(x_centers=[-0.5, 0.0, 0.5]),
    )


def standard_suite() -> list[RunConfig]:
    return [shock(), rarefaction(), three_state(), sine()]
