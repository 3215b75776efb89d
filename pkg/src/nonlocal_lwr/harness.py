"""The eps -> 0 convergence study.

One Godunov reference at fine resolution, one nonlocal run per eps, L1
errors on the comparison window, a log-log rate fit, and the entropy
audits, all folded into a :class:`ConvergenceReport`.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .entropy_audit import (
    Bump,
    bump_family,
    entropy_residual,
    j_decomposition,
    l1_distance,
    total_variation,
)
from .errors import DomainError, NonlocalLWRError
from .kernel import DensityField
from .local_solver import solve_local
from .nonlocal_solver import NonlocalState, solve_nonlocal
from .trajectory import Trajectory

log = logging.getLogger(__name__)

CONVERGES = "converges-to-entropy-solution"
INCONCLUSIVE = "inconclusive"
NEGATIVE_CONTROL = "negative-control-detected"

RESIDUAL_TOL = 1e-3  # times max phi (= 1)
NEGATIVE_CONTROL_LEVEL = -1e-2
ERROR_FLOOR = 1e-12


@dataclass
class RateFit:
    slope: float
    intercept: float
    max_residual: float


def fit_rate(eps, errors) -> RateFit:
    """Least-squares line through (log eps, log error)."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if eps.size < 2 or eps.size != errors.size:
        raise DomainError("need at least two (eps, error) pairs")
    if np.any(eps <= 0) or np.any(errors <= 0):
        raise DomainError("rate fits need strictly positive eps and errors")
    lx, ly = np.log(eps), np.log(errors)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return RateFit(float(slope), float(intercept), float(np.max(np.abs(resid))))


@dataclass
class ConvergenceReport:
    scenario: str
    eps: list
    errors: list
    tv_max: list
    residual_min: list
    mass_defect: list = field(default_factory=list)
    j_sign_max: list = field(default_factory=list)
    j_identity_max: list = field(default_factory=list)
    tv_initial: float = 0.0
    reference_residual_min: float = 0.0
    rate: RateFit | None = None
    verdict: str = INCONCLUSIVE
    failure: str | None = None
    audit_rows: list = field(default_factory=list, repr=False)
    runs: dict = field(default_factory=dict, repr=False)

    def rows(self) -> list[dict]:
        out = []
        for k, e in enumerate(self.eps):
            out.append({
                "scenario": self.scenario,
                "eps": e,
                "l1_error": self.errors[k],
                "tv_max": self.tv_max[k],
                "residual_min": self.residual_min[k],
                "mass_defect": self.mass_defect[k] if self.mass_defect else "",
                "j_sign_max": self.j_sign_max[k] if self.j_sign_max else "",
                "j_identity_max": self.j_identity_max[k] if self.j_identity_max else "",
                "rate": "" if self.rate is None else self.rate.slope,
                "reference_residual_min": self.reference_residual_min,
                "verdict": self.verdict,
            })
        return out


def decide_verdict(errors, residual_min, candidate_residual_min, failure=None,
                   tol=RESIDUAL_TOL, negative_level=NEGATIVE_CONTROL_LEVEL,
                   floor=ERROR_FLOOR) -> str:
    """Verdict from the collected numbers alone.

    ``errors`` and ``residual_min`` are ordered by decreasing eps.
    """
    if failure is not None:
        return INCONCLUSIVE
    if candidate_residual_min <= negative_level:
        return NEGATIVE_CONTROL
    errors = list(errors)
    if not errors:
        return INCONCLUSIVE
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    negligible = all(e <= floor for e in errors)
    admissible = residual_min[-1] >= -tol and candidate_residual_min >= -tol
    if (decreasing or negligible) and admissible:
        return CONVERGES
    return INCONCLUSIVE


def coarsen(values: np.ndarray, factor: int) -> np.ndarray:
    """Average blocks of ``factor`` fine cells onto the coarse grid."""
    values = np.asarray(values)
    return values.reshape(values.shape[:-1] + (-1, factor)).mean(axis=-1)


def mass_defect(traj: Trajectory) -> float:
    """|final mass - initial mass - (inflow - outflow)| relative to the initial mass."""
    m0 = float(np.sum(traj.values[0]) * traj.dx)
    m1 = float(np.sum(traj.values[-1]) * traj.dx)
    balance = traj.meta.get("inflow", 0.0) - traj.meta.get("outflow", 0.0)
    return abs(m1 - m0 - balance) / max(abs(m0), 1e-300)


def _run_one(args):
    cfg, eps = args
    try:
        traj = solve_nonlocal(
            cfg.initial_field(), cfg.velocity_model(), eps, cfg.t_end, cfg.cfl,
            snapshot_times=cfg.run_times(), integrator=cfg.integrator,
        )
        return eps, traj, None
    except NonlocalLWRError as exc:
        return eps, None, f"eps={eps}: {type(exc).__name__}: {exc}"


def audit_frames(traj: Trajectory, model, cfg: RunConfig, eps: float) -> list[dict]:
    """J-decomposition rows for every output frame (t > 0) and every audit center."""
    lo, hi = cfg.error_window()
    radius = 0.25 * (hi - lo)
    rows = []
    for t in cfg.output_times():
        if t <= 0:
            continue
        state = NonlocalState.from_field(traj.at(t), eps, t)
        for i, xc in enumerate(cfg.bump_centers()):
            d = j_decomposition(state, model, Bump(xc, radius))
            rows.append({"scenario": cfg.name, "eps": eps, "t": t, "phi_id": f"x{i}",
                         **d.terms(), "residual": "", "tv": total_variation(state.field)})
    return rows


def convergence_study(cfg: RunConfig, limit_candidate: Trajectory | None = None,
                      workers: int = 1, space_time: bool = False,
                      keep_runs: bool = False) -> ConvergenceReport:
    """Run the full eps sweep described by ``cfg``.

    ``limit_candidate`` replaces the Godunov reference as the trajectory
    whose entropy residual decides admissibility of the limit; injecting an
    entropy-violating field there must flip the verdict.
    """
    model = cfg.velocity_model()
    eps_list = sorted(cfg.eps, reverse=True)
    report = ConvergenceReport(cfg.name, eps_list, [], [], [])
    initial = cfg.initial_field()
    report.tv_initial = total_variation(initial)
    window = cfg.error_window()
    lo, hi = window
    family = bump_family(cfg.t_end, cfg.bump_centers(), hi - lo, cfg.audit.radii, cfg.audit.t_fractions)

    try:
        fine = cfg.initial_field(cfg.ref_dx())
        factor = int(round(cfg.domain.dx / cfg.ref_dx()))
        reference = solve_local(fine, model, cfg.t_end, cfg.cfl, snapshot_times=cfg.run_times())
    except NonlocalLWRError as exc:
        report.failure = f"reference: {type(exc).__name__}: {exc}"
        report.verdict = INCONCLUSIVE
        return report
    ref_coarse = coarsen(reference.values, factor)
    candidate = reference if limit_candidate is None else limit_candidate
    report.reference_residual_min = min(entropy_residual(candidate, model, p) for p in family)
    for p in family:
        report.audit_rows.append({"scenario": cfg.name, "eps": 0.0, "t": p.t0,
                                  "phi_id": p.label,
                                  "residual": entropy_residual(reference, model, p)})
    if keep_runs:
        report.runs["reference"] = reference

    jobs = [(cfg, e) for e in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]

    for eps, traj, failure in results:
        if failure is not None:
            report.failure = failure
            log.error("nonlocal run failed: %s", failure)
            break
        final = traj.final
        ref_final = DensityField(final.x0, final.dx, ref_coarse[-1], final.boundary)
        if space_time:
            per_t = [
                l1_distance(traj.snapshot(k), DensityField(final.x0, final.dx, ref_coarse[k],
                                                           final.boundary), window)
                for k in range(traj.times.size)
            ]
            err = float(np.trapezoid(per_t, traj.times))
        else:
            err = l1_distance(final, ref_final, window)
        report.errors.append(err)
        report.tv_max.append(float(traj.meta["tv_max"]))
        residuals = []
        for p in family:
            r = entropy_residual(traj, model, p)
            residuals.append(r)
            report.audit_rows.append({"scenario": cfg.name, "eps": eps, "t": p.t0,
                                      "phi_id": p.label, "residual": r})
        report.residual_min.append(min(residuals))
        report.mass_defect.append(mass_defect(traj))
        rows = audit_frames(traj, model, cfg, eps)
        report.audit_rows.extend(rows)
        report.j_sign_max.append(max(max(r["J23"], r["J5"]) for r in rows) if rows else 0.0)
        report.j_identity_max.append(max(
            (max(abs(r["J"] - (r["J1"] + r["J21"] + r["J22"] + r["J23"])),
                 abs(r["J21"] + r["J22"] - (r["J3"] + r["J4"] + r["J5"])))
             / (1 + sum(abs(r[k]) for k in ("J", "J1", "J21", "J22", "J23", "J3", "J4", "J5"))))
            for r in rows
        ) if rows else 0.0)
        if keep_runs:
            report.runs[eps] = traj

    if report.failure is None and len(report.errors) >= 2 and all(e > 0 for e in report.errors):
        report.rate = fit_rate(report.eps, report.errors)
    report.verdict = decide_verdict(report.errors, report.residual_min,
                                    report.reference_residual_min, report.failure)
    return report
