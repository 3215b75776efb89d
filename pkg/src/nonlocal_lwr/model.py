"""Velocity laws, the local LWR flux and the quadratic-entropy machinery.

Every built-in velocity law is a polynomial in the density, so the flux
f(rho) = rho v(rho), the entropy flux psi and the auxiliary function W are
all carried around as exact polynomial antiderivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, InvalidModelError

CLAMP_SLACK = 1e-9

KINDS = ("greenshields", "quadratic", "custom-polynomial")


def _velocity_polynomial(kind: str, rho_jam: float, params: Sequence[float]) -> Polynomial:
    if kind == "greenshields":
        # v = v_max (1 - rho / rho_jam)
        (v_max,) = params if params else (1.0,)
        return Polynomial([v_max, -v_max / rho_jam])
    if kind == "quadratic":
        # v = a (rho_jam - rho) + c (rho_jam - rho)^2
        a, c = params
        gap = Polynomial([rho_jam, -1.0])
        return a * gap + c * gap**2
    if kind == "custom-polynomial":
        if len(params) == 0:
            raise InvalidModelError("custom-polynomial needs at least one coefficient")
        return Polynomial(list(params))
    raise InvalidModelError(f"unknown velocity model kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class VelocityModel:
    """A velocity law v on [0, rho_jam] with declared bound v' <= -delta_star.

    ``params`` depends on ``kind``:

    * greenshields: ``[v_max]`` (default ``[1.0]``)
    * quadratic: ``[a, c]`` for v = a (rho_jam - rho) + c (rho_jam - rho)^2
    * custom-polynomial: coefficients of v in ascending powers of rho
    """

    kind: str
    rho_jam: float = 1.0
    params: tuple[float, ...] = ()
    delta_star: float = 1.0
    v_poly: Polynomial = field(init=False, repr=False, compare=False)
    dv_poly: Polynomial = field(init=False, repr=False, compare=False)
    d2v_poly: Polynomial = field(init=False, repr=False, compare=False)
    flux_poly: Polynomial = field(init=False, repr=False, compare=False)
    dflux_poly: Polynomial = field(init=False, repr=False, compare=False)
    psi_poly: Polynomial = field(init=False, repr=False, compare=False)
    w_poly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.rho_jam) or self.rho_jam <= 0:
            raise DomainError(f"rho_jam must be positive, got {self.rho_jam}")
        if not self.delta_star > 0:
            raise InvalidModelError(f"delta_star must be positive, got {self.delta_star}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        v = _velocity_polynomial(self.kind, self.rho_jam, params)
        rho = Polynomial([0.0, 1.0])
        dv = v.deriv()
        flux = rho * v
        object.__setattr__(self, "v_poly", v)
        object.__setattr__(self, "dv_poly", dv)
        object.__setattr__(self, "d2v_poly", dv.deriv())
        object.__setattr__(self, "flux_poly", flux)
        object.__setattr__(self, "dflux_poly", flux.deriv())
        # psi' = rho v + rho^2 v',  W' = rho^2 v'; both vanish at rho = 0
        object.__setattr__(self, "psi_poly", (rho * v + rho**2 * dv).integ(lbnd=0.0))
        object.__setattr__(self, "w_poly", (rho**2 * dv).integ(lbnd=0.0))

    @classmethod
    def greenshields(cls, v_max: float = 1.0, rho_jam: float = 1.0) -> "VelocityModel":
        return cls("greenshields", rho_jam, (v_max,), delta_star=v_max / rho_jam)

    @classmethod
    def quadratic(cls, delta_star: float, c: float, rho_jam: float = 1.0) -> "VelocityModel":
        return cls("quadratic", rho_jam, (delta_star, c), delta_star=delta_star)

    def v(self, rho):
        return self.v_poly(rho)

    def dv(self, rho):
        return self.dv_poly(rho)

    def f(self, rho):
        """Local flux rho v(rho), no range checks."""
        return self.flux_poly(rho)

    def df(self, rho):
        return self.dflux_poly(rho)

    @property
    def v_max(self) -> float:
        return float(self.v_poly(0.0))

    def max_abs_df(self, samples: int = 4097) -> float:
        rho = np.linspace(0.0, self.rho_jam, samples)
        return float(np.max(np.abs(self.dflux_poly(rho))))

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "rho_jam": self.rho_jam,
            "params": list(self.params),
            "delta_star": self.delta_star,
        }

    def check_range(self, rho, slack: float = CLAMP_SLACK):
        """Clamp ``rho`` into [0, rho_jam], refusing anything beyond ``slack``."""
        arr = np.asarray(rho, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError("density is not finite")
        if np.any(arr < -slack) or np.any(arr > self.rho_jam + slack):
            lo, hi = float(np.min(arr)), float(np.max(arr))
            raise DomainError(
                f"density outside [0, {self.rho_jam}] beyond slack {slack}: range [{lo}, {hi}]"
            )
        clipped = np.clip(arr, 0.0, self.rho_jam)
        return float(clipped) if clipped.ndim == 0 else clipped


@dataclass
class ValidationReport:
    passed: bool
    v_at_jam: float
    worst_dv: float
    worst_dv_at: float
    margin: float
    messages: list[str]


def validate_model(model: VelocityModel, samples: int = 10001) -> ValidationReport:
    """Check v(rho_jam) = 0 and v' <= -delta_star on a uniform sample grid."""
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if model.rho_jam <= 0:
        raise DomainError("rho_jam must be positive")
    rho = np.linspace(0.0, model.rho_jam, samples)
    with np.errstate(all="ignore"):
        v = model.v(rho)
        dv = model.dv(rho)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
        raise InvalidModelError("velocity law is not finite on [0, rho_jam]")
    v_jam = float(model.v(model.rho_jam))
    k = int(np.argmax(dv))
    worst = float(dv[k])
    margin = -model.delta_star - worst
    messages = []
    if abs(v_jam) > 1e-12:
        messages.append(f"v(rho_jam) = {v_jam:.3e}, expected 0")
    if worst > -model.delta_star + 1e-12:
        messages.append(
            f"v'({rho[k]:.6g}) = {worst:.6g} exceeds -delta_star = {-model.delta_star:.6g}"
        )
    if np.any(v < -1e-12):
        messages.append("v takes negative values on [0, rho_jam]")
    return ValidationReport(
        passed=not messages,
        v_at_jam=v_jam,
        worst_dv=worst,
        worst_dv_at=float(rho[k]),
        margin=margin,
        messages=messages,
    )


def local_flux(model: VelocityModel, rho, slack: float = CLAMP_SLACK):
    rho = model.check_range(rho, slack)
    out = rho * model.v(rho)
    return out


def entropy_pair_eval(model: VelocityModel, rho, slack: float = CLAMP_SLACK):
    """Return (eta, psi) with eta = rho^2/2 and psi' = eta' f'."""
    rho = model.check_range(rho, slack)
    return 0.5 * rho * rho, model.psi_poly(rho)


def w_eval(model: VelocityModel, rho, slack: float = CLAMP_SLACK):
    """W(rho) = int_0^rho s^2 v'(s) ds (non-positive, non-increasing)."""
    rho = model.check_range(rho, slack)
    return model.w_poly(rho)
