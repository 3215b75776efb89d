import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_lwr.entropy_audit import l1_distance, total_variation
from nonlocal_lwr.errors import CFLViolationError, DomainError, InvalidModelError
from nonlocal_lwr.kernel import DensityField
from nonlocal_lwr.local_solver import solve_local
from nonlocal_lwr.model import VelocityModel
from nonlocal_lwr.nonlocal_solver import (
    NonlocalState,
    cfl_dt,
    interface_fluxes,
    solve_nonlocal,
    step_nonlocal,
)

GS = VelocityModel.greenshields()


def riemann_field(rho_l, rho_r, x_min=-1.0, x_max=1.0, dx=1e-2, boundary="constant-extension"):
    return DensityField.from_function(
        lambda x: np.where(x < 0, rho_l, rho_r), x_min, x_max, int(round((x_max - x_min) / dx)),
        boundary,
    )


def test_cfl_dt_unit_speed():
    # a vacuum region somewhere gives q = 0 at some interface, hence max v(q) = 1
    f = DensityField(0.0, 0.01, np.r_[np.zeros(200), np.full(100, 0.5)])
    state = NonlocalState.from_field(f, 0.01)
    assert np.max(GS.v(state.q.at_edges)) == 1.0
    assert cfl_dt(state, GS, 0.5) == pytest.approx(0.005, rel=1e-15)


def test_cfl_dt_unit_cfl_slower_law():
    # v = 0.8 (1 - rho) in vacuum moves at 0.8
    model = VelocityModel.greenshields(v_max=0.8)
    state = NonlocalState.from_field(DensityField(0.0, 0.02, np.zeros(10)), 0.1)
    assert cfl_dt(state, model, 1.0) == pytest.approx(0.025, rel=1e-15)


def test_cfl_dt_all_jam_uses_cap():
    state = NonlocalState.from_field(DensityField(0.0, 0.01, np.ones(50)), 0.05)
    assert cfl_dt(state, GS, 0.5) == pytest.approx(0.01)  # dx / v(0)
    assert cfl_dt(state, GS, 0.5, dt_max=1e-4) == 1e-4


def test_cfl_rejects_bad_number():
    state = NonlocalState.from_field(DensityField(0.0, 0.01, np.ones(5)), 0.05)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            cfl_dt(state, GS, bad)


@pytest.mark.parametrize("c", [0.0, 0.3, 1.0])
def test_constant_states_are_stationary(c):
    f = DensityField(0.0, 0.01, np.full(100, c))
    new, f_in, f_out = step_nonlocal(NonlocalState.from_field(f, 0.05), GS, 0.004)
    assert np.all(new.field.values == c)
    assert f_in == f_out
    assert new.t == 0.004


def test_jam_fluxes_vanish():
    f = DensityField(0.0, 0.01, np.ones(40))
    state = NonlocalState.from_field(f, 0.05)
    assert np.all(interface_fluxes(f, state.q, GS) == 0.0)


def test_single_step_telescopes_to_boundary_fluxes():
    rng = np.random.default_rng(11)
    f = DensityField(0.0, 0.01, rng.uniform(0, 1, 300))
    state = NonlocalState.from_field(f, 0.03)
    dt = cfl_dt(state, GS, 0.5)
    new, f_in, f_out = step_nonlocal(state, GS, dt)
    change = (new.field.mass() - f.mass())
    assert abs(change - dt * (f_in - f_out)) <= 1e-12
    assert np.array_equal(new.q.values, NonlocalState.from_field(new.field, 0.03).q.values)


def test_periodic_step_conserves_mass_exactly():
    f = DensityField.from_function(lambda x: 0.5 + 0.3 * np.sin(np.pi * x), -1, 1, 400, "periodic")
    new, f_in, f_out = step_nonlocal(NonlocalState.from_field(f, 0.05), GS, 0.002)
    assert f_in == f_out
    assert new.field.mass() == pytest.approx(f.mass(), rel=1e-14)


def test_step_with_excessive_dt_is_rejected():
    f = DensityField(0.0, 0.01, np.r_[np.full(50, 0.9), np.zeros(50)])
    with pytest.raises(CFLViolationError):
        step_nonlocal(NonlocalState.from_field(f, 0.05), GS, 0.1)


def test_constant_initial_data_snapshots_identical():
    f = DensityField(0.0, 0.01, np.full(100, 0.35))
    traj = solve_nonlocal(f, GS, 0.05, 1.0, snapshot_times=[0.25, 0.5])
    assert list(traj.times) == [0.0, 0.25, 0.5, 1.0]
    assert np.all(traj.values == 0.35)


def test_snapshot_times_are_hit_exactly():
    f = riemann_field(0.2, 0.8)
    ts = [0.0, 0.013, 0.1, 0.2]
    traj = solve_nonlocal(f, GS, 0.1, 0.2, snapshot_times=ts)
    assert list(traj.times) == ts
    assert traj.meta["steps"] > 0
    assert traj.meta["eps"] == 0.1


def test_invalid_inputs():
    f = riemann_field(0.2, 0.8)
    with pytest.raises(DomainError):
        solve_nonlocal(f, GS, 0.0, 0.1)
    with pytest.raises(DomainError):
        solve_nonlocal(f, GS, 0.1, 0.0)
    with pytest.raises(DomainError):
        solve_nonlocal(f, GS, 0.1, 0.1, cfl=2.0)
    bad = VelocityModel("custom-polynomial", 1.0, (1.0, 0.0, -1.0), delta_star=0.1)
    with pytest.raises(InvalidModelError):
        solve_nonlocal(f, bad, 0.1, 0.1)
    with pytest.raises(DomainError):
        solve_nonlocal(DensityField(0.0, 0.1, [0.5, 1.2]), GS, 0.1, 0.1)
    with pytest.raises(ValueError):
        solve_nonlocal(f, GS, 0.1, 0.1, integrator="rk4")


@pytest.mark.parametrize("integrator", ["euler", "ssprk2"])
@pytest.mark.parametrize("data", [(0.2, 0.8), (0.8, 0.2), (0.0, 1.0), (1.0, 0.0)])
def test_conservation_and_bounds(data, integrator):
    f = riemann_field(*data, dx=5e-3)
    traj = solve_nonlocal(f, GS, 0.05, 0.3, integrator=integrator)
    m = traj.meta
    balance = traj.final.mass() - f.mass() - (m["inflow"] - m["outflow"])
    assert abs(balance) <= 1e-10 * max(f.mass(), 1e-300)
    assert traj.values.min() >= 0.0
    assert traj.values.max() <= 1.0
    assert m["min_value"] >= 0.0 and m["max_value"] <= 1.0
    assert m["tv_max"] <= 2 * total_variation(f) + 1e-12
    assert m["positive_data"] == (min(data) > 0)


@settings(max_examples=25, deadline=None)
@given(
    values=st.lists(st.floats(0, 1), min_size=2, max_size=6),
    eps=st.floats(0.02, 0.5),
)
def test_random_piecewise_data_keep_invariants(values, eps):
    n_piece = 20
    rho = np.repeat(np.array(values), n_piece)
    f = DensityField(0.0, 0.01, rho)
    traj = solve_nonlocal(f, GS, eps, 0.2)
    m = traj.meta
    assert 0.0 <= traj.values.min() and traj.values.max() <= 1.0
    balance = traj.final.mass() - f.mass() - (m["inflow"] - m["outflow"])
    assert abs(balance) <= 1e-10 * max(f.mass(), 1.0)


def test_self_convergence_in_dx():
    # L1 differences between successive resolutions shrink at first order
    eps, t_end = 0.05, 0.25
    finals = []
    for n in (200, 400, 800, 1600):
        f = DensityField.from_function(lambda x: np.where(x < 0, 0.2, 0.8), -1, 1, n)
        finals.append(solve_nonlocal(f, GS, eps, t_end).final.values)

    def coarse(v, k):
        return v.reshape(-1, k).mean(axis=1)

    diffs = [np.sum(np.abs(coarse(finals[i + 1], 2) - finals[i])) * 2 / (200 * 2**i)
             for i in range(3)]
    ratios = [diffs[i] / diffs[i + 1] for i in range(2)]
    assert min(ratios) >= 1.5


def test_smaller_eps_is_closer_to_entropy_solution():
    # scaled-down version of the shock example on a narrower domain
    f = riemann_field(0.2, 0.8, -1.0, 1.0, dx=2e-3)
    ref = solve_local(f, GS, 0.25).final
    window = (-0.5, 0.5)
    errs = [l1_distance(solve_nonlocal(f, GS, eps, 0.25).final, ref, window) for eps in (0.1, 0.05, 0.025)]
    assert errs[0] > errs[1] > errs[2]


def test_ssprk2_agrees_with_euler_to_first_order():
    f = DensityField.from_function(lambda x: 0.5 + 0.3 * np.sin(np.pi * x), -1, 1, 400, "periodic")
    a = solve_nonlocal(f, GS, 0.1, 0.2).final
    b = solve_nonlocal(f, GS, 0.1, 0.2, integrator="ssprk2").final
    assert 0 < l1_distance(a, b) <= 5e-3
    assert b.mass() == pytest.approx(f.mass(), rel=1e-13)
