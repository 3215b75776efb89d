"""Grid densities and the exponential look-ahead average.

For a piecewise-constant density the average

    q(x) = int_x^inf exp((x - y)/eps) rho(y) dy / eps

obeys an exact two-term recursion between consecutive cell edges, so the
whole field costs one right-to-left linear scan (run through
``scipy.signal.lfilter``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, UsageError

BOUNDARIES = ("constant-extension", "periodic")


@dataclass(frozen=True)
class DensityField:
    """Cell averages ``values`` on cells [x0 + i dx, x0 + (i+1) dx)."""

    x0: float
    dx: float
    values: np.ndarray
    boundary: str = "constant-extension"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("a density field needs at least one cell")
        if not self.dx > 0:
            raise DomainError(f"dx must be positive, got {self.dx}")
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"unknown boundary policy {self.boundary!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x_end(self) -> float:
        return self.x0 + self.n * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        """The n + 1 cell edges, left to right."""
        return self.x0 + np.arange(self.n + 1) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.values) * self.dx)

    def with_values(self, values) -> "DensityField":
        return DensityField(self.x0, self.dx, values, self.boundary)

    def same_grid(self, other: "DensityField", rtol: float = 1e-12) -> bool:
        return (
            self.n == other.n
            and self.boundary == other.boundary
            and abs(self.x0 - other.x0) <= rtol * max(1.0, abs(self.x0))
            and abs(self.dx - other.dx) <= rtol * self.dx
        )

    def check_bounds(self, rho_jam: float, slack: float = 1e-9) -> None:
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < -slack or hi > rho_jam + slack:
            raise DomainError(f"density range [{lo}, {hi}] leaves [0, {rho_jam}]")

    @classmethod
    def from_function(cls, func, x_min, x_max, n, boundary="constant-extension"):
        """Sample ``func`` at cell centers."""
        dx = (x_max - x_min) / n
        centers = x_min + (np.arange(n) + 0.5) * dx
        return cls(x_min, dx, np.asarray(func(centers), dtype=float), boundary)


@dataclass(frozen=True)
class QField:
    """The average q at every cell left edge, plus its value at the right end."""

    x0: float
    dx: float
    values: np.ndarray
    q_right: float
    eps: float
    boundary: str = "constant-extension"

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def at_edges(self) -> np.ndarray:
        """All n + 1 edge values, including the right end of the domain."""
        return np.append(self.values, self.q_right)

    def matches(self, field: DensityField) -> bool:
        return (
            self.n == field.n
            and self.boundary == field.boundary
            and abs(self.x0 - field.x0) <= 1e-12 * max(1.0, abs(field.x0))
            and abs(self.dx - field.dx) <= 1e-12 * field.dx
        )


def decay_factors(dx: float, eps: float) -> tuple[float, float]:
    """Return (alpha, 1 - alpha) with alpha = exp(-dx/eps), both accurate."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    r = dx / eps
    return float(np.exp(-r)), float(-np.expm1(-r))


def _periodic_seed(rho: np.ndarray, ratio: float, one_minus_alpha: float) -> float:
    # q at the left end: one full lap of the geometric series, then wrap
    n = rho.size
    weights = np.exp(-ratio * np.arange(n))
    wrap = -np.expm1(-ratio * n)
    return float(one_minus_alpha * np.dot(weights, rho) / wrap)


def exp_average(field: DensityField, eps: float) -> QField:
    """Exact look-ahead average of a piecewise-constant field at cell left edges.

    Constant extension treats the density beyond the right end as the last
    cell value, which the tail integral reproduces exactly. The periodic
    case wraps around once through a closed-form geometric series.
    """
    alpha, beta = decay_factors(field.dx, eps)
    rho = field.values
    # Shifting by the last cell makes constant data come out exactly constant.
    shift = rho[-1]
    u = rho - shift
    if field.boundary == "periodic":
        seed = _periodic_seed(u, field.dx / eps, beta)
    else:
        seed = 0.0
    scanned, _ = lfilter([beta], [1.0, -alpha], u[::-1], zi=[alpha * seed])
    q = scanned[::-1] + shift
    return QField(field.x0, field.dx, q, float(seed + shift), eps, field.boundary)


def q_at_centers(field: DensityField, q: QField) -> np.ndarray:
    """Exact q at cell centers: half a recursion step back from the right edges."""
    alpha_half, _ = decay_factors(0.5 * field.dx, q.eps)
    right = q.at_edges[1:]
    rho = field.values
    return rho + alpha_half * (right - rho)


@dataclass
class ODEResidual:
    max: float
    l1: float
    residual: np.ndarray


def check_ode_identity(field: DensityField, q: QField) -> ODEResidual:
    """Residual of rho = q - eps q_x with a forward difference for q_x."""
    if not q.matches(field):
        raise UsageError("density field and q field live on different grids")
    edges = q.at_edges
    dq = (edges[1:] - edges[:-1]) / field.dx
    r = field.values - (edges[:-1] - q.eps * dq)
    return ODEResidual(float(np.max(np.abs(r))), float(np.sum(np.abs(r)) * field.dx), r)
