"""CSV output, plot-script emission and the ``nonlocal-lwr`` command line."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .entropy_audit import bump_family, entropy_residual
from .errors import CFLViolationError, ConfigError, NonlocalLWRError
from .harness import convergence_study
from .local_solver import riemann_similarity, solve_local
from .model import VelocityModel, validate_model
from .nonlocal_solver import solve_nonlocal
from .trajectory import Trajectory

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

TRAJECTORY_COLUMNS = ("t", "x", "rho")
REPORT_COLUMNS = (
    "scenario", "eps", "l1_error", "tv_max", "residual_min", "mass_defect", "j_sign_max",
    "j_identity_max", "rate", "reference_residual_min", "verdict",
)
AUDIT_COLUMNS = (
    "scenario", "eps", "t", "phi_id", "J", "J1", "J21", "J22", "J23", "J3", "J4", "J5",
    "w_check", "residual", "tv",
)


class OutputError(NonlocalLWRError, OSError):
    pass


def _fmt(value) -> str:
    # repr of a binary64 float is the shortest string that reads back bit-exactly
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_csv_trajectory(traj: Trajectory, destination, times=None) -> Path:
    """Rows (t, x, rho), time-major then x ascending; ``times`` selects snapshots."""
    path = Path(destination)
    keep = range(traj.times.size)
    if times is not None:
        wanted = np.asarray(times, dtype=float)
        keep = [k for k, t in enumerate(traj.times) if np.any(np.abs(wanted - t) <= 1e-12 * max(1, t))]
    x = traj.centers
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for k in keep:
            t = _fmt(traj.times[k])
            for xi, r in zip(x, traj.values[k]):
                w.writerow((t, _fmt(xi), _fmt(r)))
    return path


def read_csv_trajectory(source) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (times, x, values[snapshot, cell]) from a trajectory CSV."""
    with open(source, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = [(float(a), float(b), float(c)) for a, b, c in r]
    data = np.array(rows)
    times = np.unique(data[:, 0])
    values = data[:, 2].reshape(times.size, -1)
    return times, data[: values.shape[1], 1], values


def write_rows(rows, columns, destination) -> Path:
    path = Path(destination)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])
    return path


PLOT_TEMPLATE = '''"""Plot the trajectory CSV files written next to this script (needs matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
fig, ax = plt.subplots()
for name in {files!r}:
    series = {{}}
    with open(here / name) as fh:
        for row in csv.DictReader(fh):
            series.setdefault(float(row["t"]), ([], []))
            series[float(row["t"])][0].append(float(row["x"]))
            series[float(row["t"])][1].append(float(row["rho"]))
    t_last = max(series)
    ax.plot(*series[t_last], label=f"{{name}} (t={{t_last:g}})")
ax.set_xlabel("x")
ax.set_ylabel("density")
ax.legend()
fig.savefig(here / "{stem}.png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''


def write_plot_script(out_dir, files, stem="final_profiles") -> Path:
    path = Path(out_dir) / f"plot_{stem}.py"
    with _open_for_write(path) as fh:
        fh.write(PLOT_TEMPLATE.format(files=list(files), stem=stem))
    return path


# -- command implementations ---------------------------------------------------


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    base = args.out if args.out else (cfg.output_dir if cfg else "out")
    return Path(base) / cfg.name if cfg else Path(base)


def _with_cfl(cfg: RunConfig, args) -> RunConfig:
    if args.cfl is not None:
        if not 0 < args.cfl <= 1:
            raise ConfigError([f"--cfl must lie in (0, 1], got {args.cfl}"])
        cfg.cfl = args.cfl
    return cfg


def cmd_run_nonlocal(args) -> int:
    cfg = _with_cfl(load_config(args.config), args)
    out = _out_dir(args, cfg)
    files = []
    for eps in sorted(cfg.eps, reverse=True):
        traj = solve_nonlocal(cfg.initial_field(), cfg.velocity_model(), eps, cfg.t_end, cfg.cfl,
                              snapshot_times=cfg.output_times(), integrator=cfg.integrator)
        name = f"nonlocal_eps{eps:g}.csv"
        write_csv_trajectory(traj, out / name)
        files.append(name)
        print(f"eps={eps:g}: {traj.meta['steps']} steps, TV max {traj.meta['tv_max']:.6g} -> {out / name}")
    write_plot_script(out, files)
    return EXIT_OK


def cmd_run_local(args) -> int:
    cfg = _with_cfl(load_config(args.config), args)
    out = _out_dir(args, cfg)
    traj = solve_local(cfg.initial_field(), cfg.velocity_model(), cfg.t_end, cfg.cfl,
                       snapshot_times=cfg.output_times())
    write_csv_trajectory(traj, out / "godunov.csv")
    write_plot_script(out, ["godunov.csv"])
    print(f"godunov: {traj.meta['steps']} steps -> {out / 'godunov.csv'}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = _with_cfl(load_config(args.config), args)
    out = _out_dir(args, cfg)
    report = convergence_study(cfg, workers=args.workers)
    write_rows(report.rows(), REPORT_COLUMNS, out / "report.csv")
    write_rows(report.audit_rows, AUDIT_COLUMNS, out / "audit.csv")
    for eps, err, tv, res in zip(report.eps, report.errors, report.tv_max, report.residual_min):
        print(f"eps={eps:<8g} L1 error={err:.6e}  TV max={tv:.6g}  min R(phi)={res:.3e}")
    if report.rate is not None:
        print(f"fitted rate {report.rate.slope:.3f}")
    print(f"reference min R(phi)={report.reference_residual_min:.3e}")
    print(f"verdict: {report.verdict}")
    if report.failure:
        print(f"failure: {report.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_entropy_audit(args) -> int:
    cfg = _with_cfl(load_config(args.config), args)
    out = _out_dir(args, cfg)
    model = cfg.velocity_model()
    lo, hi = cfg.error_window()
    family = bump_family(cfg.t_end, cfg.bump_centers(), hi - lo, cfg.audit.radii,
                         cfg.audit.t_fractions)
    eps = min(cfg.eps)
    times = cfg.run_times()
    runs = {
        f"nonlocal eps={eps:g}": solve_nonlocal(cfg.initial_field(), model, eps, cfg.t_end, cfg.cfl,
                                                snapshot_times=times, integrator=cfg.integrator),
        "godunov": solve_local(cfg.initial_field(cfg.ref_dx()), model, cfg.t_end, cfg.cfl,
                               snapshot_times=times),
    }
    rows = []
    ok = True
    for label, traj in runs.items():
        res = [entropy_residual(traj, model, p) for p in family]
        rows.extend({"scenario": f"{cfg.name}:{label}", "eps": traj.meta["eps"], "t": p.t0,
                     "phi_id": p.label, "residual": r} for p, r in zip(family, res))
        passed = min(res) >= -1e-3
        ok &= passed
        print(f"{label:<22} min R(phi) = {min(res):+.3e}  {'PASS' if passed else 'FAIL'}")
    write_rows(rows, AUDIT_COLUMNS, out / "entropy_audit.csv")
    return EXIT_OK if ok else EXIT_VALIDATION


def _model_from_args(args) -> VelocityModel:
    params = tuple(args.params) if args.params else ((1.0,) if args.kind == "greenshields" else ())
    return VelocityModel(args.kind, args.rho_jam, params, args.delta_star)


def cmd_riemann(args) -> int:
    model = _model_from_args(args)
    sol = riemann_similarity(model, args.rho_l, args.rho_r)
    print(json.dumps({
        "rho_left": sol.rho_left,
        "rho_right": sol.rho_right,
        "waves": [vars(w) for w in sol.waves],
    }, indent=2))
    return EXIT_OK


def cmd_validate_model(args) -> int:
    model = _model_from_args(args)
    rep = validate_model(model, args.samples)
    print(f"v(rho_jam) = {rep.v_at_jam:.3e}; max v' = {rep.worst_dv:.6g} at rho = {rep.worst_dv_at:.6g}; "
          f"margin {rep.margin:.6g}")
    for msg in rep.messages:
        print(f"  {msg}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def _add_model_args(p):
    p.add_argument("--kind", default="greenshields", choices=("greenshields", "quadratic", "custom-polynomial"))
    p.add_argument("--rho-jam", type=float, default=1.0)
    p.add_argument("--params", type=float, nargs="*", default=None,
                   help="greenshields: v_max; quadratic: a c; custom-polynomial: ascending coefficients")
    p.add_argument("--delta-star", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-lwr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--cfl", type=float, default=None)
        p.set_defaults(func=func)
        return p

    with_config("run-nonlocal", cmd_run_nonlocal, "nonlocal runs for every eps in the config")
    with_config("run-local", cmd_run_local, "Godunov run of the local conservation law")
    p = with_config("convergence", cmd_convergence, "eps sweep against the Godunov reference")
    p.add_argument("--workers", type=int, default=1)
    with_config("entropy-audit", cmd_entropy_audit, "entropy residual certificate")

    p = sub.add_parser("riemann", help="exact Riemann solution as JSON")
    _add_model_args(p)
    p.add_argument("rho_l", type=float)
    p.add_argument("rho_r", type=float)
    p.set_defaults(func=cmd_riemann, out=None, cfl=None)

    p = sub.add_parser("validate-model", help="check v(rho_jam) = 0 and v' <= -delta_star")
    _add_model_args(p)
    p.add_argument("--samples", type=int, default=10001)
    p.set_defaults(func=cmd_validate_model, out=None, cfl=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except CFLViolationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OutputError, FileNotFoundError, PermissionError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonlocalLWRError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
