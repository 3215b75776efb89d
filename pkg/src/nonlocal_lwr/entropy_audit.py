"""Entropy-admissibility diagnostics for density trajectories.

Three kinds of checks live here:

* plain grid diagnostics (total variation, windowed L1 distance);
* the weak entropy residual R(phi) = int int eta(rho) phi_t + psi(rho) phi_x
  for the quadratic entropy, which is >= 0 for admissible solutions;
* the per-time-slice decomposition of the entropy production of the
  nonlocal model into the terms J, J1, J21, J22, J23, J3, J4, J5.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import UsageError
from .kernel import DensityField, q_at_centers
from .model import VelocityModel
from .nonlocal_solver import NonlocalState
from .trajectory import Trajectory

GAUSS_POINTS = 12
MIN_SNAPSHOTS_IN_SUPPORT = 8
BUMP_MASS = 32.0 / 35.0  # integral of (1 - s^2)^3 over [-1, 1]


@dataclass(frozen=True)
class Bump:
    """B((x - center)/radius) with B(s) = (1 - s^2)^3 on |s| < 1; C^2 and >= 0."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    def __call__(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)

    def deriv(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.where(np.abs(s) < 1, -6 * s * (1 - s * s) ** 2 / self.radius, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Space-time bump phi(t, x) = B_t(t) B_x(x)."""

    __test__ = False  # not a pytest class

    t0: float
    x0: float
    sigma_t: float
    sigma_x: float
    label: str = ""

    @property
    def in_time(self) -> Bump:
        return Bump(self.t0, self.sigma_t)

    @property
    def in_space(self) -> Bump:
        return Bump(self.x0, self.sigma_x)

    def __call__(self, t, x):
        return self.in_time(t) * self.in_space(x)

    def dt(self, t, x):
        return self.in_time.deriv(t) * self.in_space(x)

    def dx(self, t, x):
        return self.in_time(t) * self.in_space.deriv(x)

    max_value = 1.0


def bump_family(
    t_end: float,
    x_centers,
    window_length: float,
    radii=(0.1, 0.25, 0.4),
    t_fractions=(0.45, 0.5, 0.55),
) -> list[TestFunction]:
    """3 x-centers x 3 t-centers x 3 radii; radii are fractions of the window and of t_end."""
    out = []
    for (i, xc), (j, tf), (k, r) in itertools.product(
        enumerate(x_centers), enumerate(t_fractions), enumerate(radii)
    ):
        out.append(
            TestFunction(tf * t_end, float(xc), r * t_end, r * window_length, f"x{i}t{j}r{k}")
        )
    return out


# -- grid diagnostics ------------------------------------------------------------


def total_variation(field: DensityField) -> float:
    v = field.values
    tv = float(np.sum(np.abs(np.diff(v))))
    if field.boundary == "periodic":
        tv += abs(float(v[0] - v[-1]))
    return tv


def l1_distance(a: DensityField, b: DensityField, window=None) -> float:
    """dx * sum |a_i - b_i| over cells whose centers lie in ``window``."""
    if not a.same_grid(b):
        raise UsageError("L1 distance needs two fields on the same grid")
    diff = np.abs(a.values - b.values)
    if window is not None:
        lo, hi = window
        if lo < a.x0 - 1e-12 or hi > a.x_end + 1e-12 or lo >= hi:
            raise UsageError(f"window {window} is not inside [{a.x0}, {a.x_end}]")
        c = a.centers
        diff = diff[(c >= lo) & (c <= hi)]
    return float(a.dx * np.sum(diff))


# -- weak entropy residual ------------------------------------------------------


def entropy_residual(traj: Trajectory, model: VelocityModel, phi: TestFunction) -> float:
    """R(phi) by midpoint quadrature in x and trapezoids over the snapshots."""
    ta, tb = phi.in_time.support
    xa, xb = phi.in_space.support
    if ta <= 0:
        raise UsageError("test function touches t = 0; the initial-data term would be needed")
    if tb > traj.times[-1] * (1 + 1e-12):
        raise UsageError("test function extends beyond the last snapshot")
    if xa < traj.x0 or xb > traj.x_end:
        raise UsageError("test function leaves the spatial domain")
    inside_t = (traj.times > ta) & (traj.times < tb)
    if np.count_nonzero(inside_t) < MIN_SNAPSHOTS_IN_SUPPORT:
        raise UsageError(
            f"only {np.count_nonzero(inside_t)} snapshots inside the test function support; "
            f"need {MIN_SNAPSHOTS_IN_SUPPORT}"
        )
    # one extra snapshot on each side so the trapezoid sees the zero ends
    k = np.flatnonzero(inside_t)
    k = np.arange(max(k[0] - 1, 0), min(k[-1] + 2, traj.times.size))
    x = traj.centers
    cols = np.flatnonzero((x > xa) & (x < xb))
    x = x[cols]
    t = traj.times[k]
    rho = traj.values[np.ix_(k, cols)]
    eta = 0.5 * rho * rho
    psi = model.psi_poly(rho)
    bt, dbt = phi.in_time(t)[:, None], phi.in_time.deriv(t)[:, None]
    bx, dbx = phi.in_space(x)[None, :], phi.in_space.deriv(x)[None, :]
    integrand = eta * dbt * bx + psi * bt * dbx
    per_slice = traj.dx * integrand.sum(axis=1)
    return float(np.trapezoid(per_slice, t))


def stationary_jump_trajectory(
    x_min: float, x_max: float, n: int, rho_l: float, rho_r: float, times, x_jump: float = 0.0,
    boundary: str = "constant-extension",
) -> Trajectory:
    """The jump (rho_l | rho_r) frozen in place for every snapshot time."""
    field = DensityField.from_function(lambda x: np.where(x < x_jump, rho_l, rho_r), x_min, x_max, n,
                                       boundary)
    times = np.asarray(times, dtype=float)
    values = np.tile(field.values, (times.size, 1))
    meta = {"solver": "synthetic-stationary-jump", "rho_l": rho_l, "rho_r": rho_r, "eps": 0.0}
    return Trajectory(field.x0, field.dx, boundary, times, values, meta)


# -- J decomposition ------------------------------------------------------------


@dataclass
class JDecomposition:
    J: float
    J1: float
    J21: float
    J22: float
    J23: float
    J3: float
    J4: float
    J5: float
    w_check: float  # -int [W(rho) - W(q)] phi_x by cell-midpoint quadrature

    def terms(self) -> dict:
        return asdict(self)

    @property
    def scale(self) -> float:
        return 1.0 + sum(abs(v) for k, v in asdict(self).items() if k != "w_check")

    @property
    def split_defect(self) -> float:
        """|J - (J1 + J21 + J22 + J23)|"""
        return abs(self.J - (self.J1 + self.J21 + self.J22 + self.J23))

    @property
    def substitution_defect(self) -> float:
        """|(J21 + J22) - (J3 + J4 + J5)|"""
        return abs((self.J21 + self.J22) - (self.J3 + self.J4 + self.J5))

    @property
    def parts_defect(self) -> float:
        """|(J3 + J4) - w_check|, the integration-by-parts discrepancy."""
        return abs((self.J3 + self.J4) - self.w_check)


def _gauss_nodes(breaks: np.ndarray, npts: int = GAUSS_POINTS):
    s, w = np.polynomial.legendre.leggauss(npts)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    x = (a + half * (1 + s[None, :])).ravel()
    weights = (half * w[None, :]).ravel()
    return x, weights


def reconstruct(state: NonlocalState):
    """C^2 spline for q through its edge values, and rho_hat = q - eps q_x.

    Returns a function of x giving (rho, rho_x, q, q_x). By construction
    rho = q - eps q_x holds pointwise, so the algebraic steps of the
    decomposition are exact and only the quadrature remains.
    """
    field, q = state.field, state.q
    knots = field.edges
    y = q.at_edges.copy()
    if field.boundary == "periodic":
        y[-1] = y[0]
        spline = CubicSpline(knots, y, bc_type="periodic")
    else:
        spline = CubicSpline(knots, y, bc_type="not-a-knot")
    eps = state.eps

    def evaluate(x):
        qv, qx, qxx = spline(x), spline(x, 1), spline(x, 2)
        return qv - eps * qx, qx - eps * qxx, qv, qx

    return evaluate


def j_decomposition(state: NonlocalState, model: VelocityModel, phi: Bump) -> JDecomposition:
    """Evaluate the entropy-production terms on one time slice for a spatial bump."""
    field = state.field
    a, b = phi.support
    if a <= field.x0 or b >= field.x_end:
        raise UsageError(f"bump support [{a}, {b}] is not inside the domain interior")
    if not state.q.matches(field):
        raise UsageError("cached q does not belong to this density field")
    edges = field.edges
    breaks = np.concatenate(([a], edges[(edges > a) & (edges < b)], [b]))
    x, w = _gauss_nodes(breaks)
    rho, rho_x, q, q_x = reconstruct(state)(x)
    eps = state.eps
    v, dv = model.v, model.dv
    p, p_x = phi(x), phi.deriv(x)
    gap = v(rho) - v(q)

    def integral(f):
        return float(np.dot(w, f))

    J = integral(2 * rho * rho_x * gap * p + 2 * rho**2 * (dv(rho) * rho_x - dv(q) * q_x) * p)
    J1 = -integral(rho**2 * gap * p_x)
    J21 = integral(rho**2 * dv(rho) * rho_x * p)
    J22 = -integral(rho * q * dv(q) * q_x * p)
    J23 = integral(rho * eps * q_x**2 * dv(q) * p)
    J4 = -integral(q**2 * dv(q) * q_x * p)
    J5 = integral(q * eps * q_x**2 * dv(q) * p)

    xc = field.centers
    qc = q_at_centers(field, state.q)
    w_rho, w_q = model.w_poly(field.values), model.w_poly(qc)
    w_check = -float(field.dx * np.sum((w_rho - w_q) * phi.deriv(xc)))
    return JDecomposition(J, J1, J21, J22, J23, J21, J4, J5, w_check)
