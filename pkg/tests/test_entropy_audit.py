import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_lwr.entropy_audit import (
    BUMP_MASS,
    Bump,
    TestFunction,
    bump_family,
    entropy_residual,
    j_decomposition,
    l1_distance,
    stationary_jump_trajectory,
    total_variation,
)
from nonlocal_lwr.errors import UsageError
from nonlocal_lwr.harness import fit_rate
from nonlocal_lwr.kernel import DensityField
from nonlocal_lwr.model import VelocityModel
from nonlocal_lwr.nonlocal_solver import NonlocalState, solve_nonlocal
from nonlocal_lwr.trajectory import Trajectory

GS = VelocityModel.greenshields()
QUAD = VelocityModel.quadratic(delta_star=0.5, c=0.25)


def test_bump_profile():
    b = Bump(0.0, 2.0)
    assert b(0.0) == 1.0
    assert b(2.0) == 0.0 and b(-3.0) == 0.0
    assert b(1.0) == pytest.approx((1 - 0.25) ** 3)
    x = np.linspace(-2.5, 2.5, 200001)
    assert np.trapezoid(b(x), x) == pytest.approx(2.0 * BUMP_MASS, rel=1e-8)
    h = 1e-6
    for s in (-1.3, -0.2, 0.7, 1.9):
        assert b.deriv(s) == pytest.approx((b(s + h) - b(s - h)) / (2 * h), rel=1e-6)
    with pytest.raises(ValueError):
        Bump(0.0, 0.0)


def test_bump_family_layout():
    fam = bump_family(0.5, [-0.15, 0.0, 0.15], 2.0)
    assert len(fam) == 27
    assert len({p.label for p in fam}) == 27
    assert sorted({p.sigma_t for p in fam}) == pytest.approx([0.05, 0.125, 0.2])
    assert sorted({p.sigma_x for p in fam}) == pytest.approx([0.2, 0.5, 0.8])
    assert sorted({p.t0 for p in fam}) == pytest.approx([0.225, 0.25, 0.275])


def test_test_function_derivatives():
    p = TestFunction(0.5, 0.1, 0.2, 0.3)
    assert p(0.5, 0.1) == 1.0
    assert p.max_value == 1.0
    h = 1e-6
    assert p.dt(0.55, 0.2) == pytest.approx((p(0.55 + h, 0.2) - p(0.55 - h, 0.2)) / (2 * h), rel=1e-6)
    assert p.dx(0.55, 0.2) == pytest.approx((p(0.55, 0.2 + h) - p(0.55, 0.2 - h)) / (2 * h), rel=1e-6)


def test_total_variation_examples():
    assert total_variation(DensityField(0.0, 1.0, [0.2, 0.8, 0.2])) == pytest.approx(1.2)
    assert total_variation(DensityField(0.0, 1.0, [0.2, 0.8, 0.2], "periodic")) == pytest.approx(1.2)
    assert total_variation(DensityField(0.0, 1.0, [0.2, 0.8], "periodic")) == pytest.approx(1.2)
    assert total_variation(DensityField(0.0, 1.0, [0.4] * 5)) == 0.0


def test_l1_distance_examples():
    a = DensityField(-1.0, 0.01, np.full(200, 0.3))
    b = a.with_values(np.full(200, 0.4))
    assert l1_distance(a, b) == pytest.approx(0.2)
    assert l1_distance(a, b, (-0.5, 0.5)) == pytest.approx(0.1)
    # a unit jump of width half the domain
    c = a.with_values(np.where(a.centers < 0, 0.3, 0.8))
    assert l1_distance(a, c) == pytest.approx(0.5)
    with pytest.raises(UsageError):
        l1_distance(a, DensityField(-1.0, 0.02, np.zeros(100)))
    with pytest.raises(UsageError):
        l1_distance(a, b, (-2.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(0, 1), min_size=2, max_size=30), y=st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_l1_is_a_metric(x, y):
    n = min(len(x), len(y))
    a = DensityField(0.0, 0.1, x[:n])
    b = DensityField(0.0, 0.1, y[:n])
    z = a.with_values(np.full(n, 0.5))
    assert l1_distance(a, a) == 0.0
    assert l1_distance(a, b) == l1_distance(b, a)
    assert l1_distance(a, b) <= l1_distance(a, z) + l1_distance(z, b) + 1e-15


def _constant_traj(c, times):
    f = DensityField(-1.0, 0.01, np.full(200, c))
    return Trajectory(f.x0, f.dx, f.boundary, times, np.tile(f.values, (len(times), 1)))


def test_residual_of_constant_state_vanishes():
    traj = _constant_traj(0.6, np.linspace(0, 1, 101))
    for p in bump_family(1.0, [-0.3, 0.0, 0.3], 1.0):
        assert abs(entropy_residual(traj, GS, p)) <= 1e-12


def test_residual_usage_errors():
    traj = _constant_traj(0.6, np.linspace(0, 1, 101))
    with pytest.raises(UsageError):
        entropy_residual(traj, GS, TestFunction(0.1, 0.0, 0.2, 0.2))  # touches t = 0
    with pytest.raises(UsageError):
        entropy_residual(traj, GS, TestFunction(0.9, 0.0, 0.2, 0.2))  # past the last time
    with pytest.raises(UsageError):
        entropy_residual(traj, GS, TestFunction(0.5, 0.9, 0.2, 0.2))  # leaves the domain
    sparse = _constant_traj(0.6, np.linspace(0, 1, 6))
    with pytest.raises(UsageError):
        entropy_residual(sparse, GS, TestFunction(0.5, 0.0, 0.2, 0.2))


@pytest.mark.parametrize("sigma", [0.25, 0.4])
def test_stationary_expansion_shock_has_closed_form_residual(sigma):
    # eta is constant in time so only the psi term survives:
    # R = (psi(rho_l) - psi(rho_r)) * sigma_t * 32/35
    traj = stationary_jump_trajectory(-2, 2, 4000, 0.8, 0.2, np.linspace(0, 1, 201))
    psi_gap = float(GS.psi_poly(0.8) - GS.psi_poly(0.2))
    assert psi_gap == pytest.approx(-0.036)
    phi = TestFunction(0.5, 0.0, sigma, sigma)
    expected = psi_gap * sigma * BUMP_MASS
    assert entropy_residual(traj, GS, phi) == pytest.approx(expected, rel=1e-4)


def test_admissible_jump_has_positive_residual():
    # the 0.2 | 0.8 standing shock dissipates: R = (psi(0.2) - psi(0.8)) sigma_t 32/35 > 0
    traj = stationary_jump_trajectory(-2, 2, 4000, 0.2, 0.8, np.linspace(0, 1, 201))
    r = entropy_residual(traj, GS, TestFunction(0.5, 0.0, 0.4, 0.4))
    assert r > 0.01


# -- J decomposition ---------------------------------------------------------


def _state(func, eps, n=2000, x_min=-1.0, x_max=1.0, boundary="constant-extension"):
    f = DensityField.from_function(func, x_min, x_max, n, boundary)
    return NonlocalState.from_field(f, eps)


def test_constant_state_gives_zero_terms():
    s = _state(lambda x: np.full_like(x, 0.4), 0.05)
    d = j_decomposition(s, GS, Bump(0.0, 0.5))
    for k, v in d.terms().items():
        assert abs(v) <= 1e-14, k


@pytest.mark.parametrize("model", [GS, QUAD])
@pytest.mark.parametrize("eps", [0.1, 0.02])
def test_signs_and_identities_on_smooth_and_rough_states(model, eps):
    rng = np.random.default_rng(4)
    smooth = _state(lambda x: 0.5 + 0.3 * np.tanh(x / 0.1), eps)
    rough = NonlocalState.from_field(
        DensityField(-1.0, 1e-3, np.repeat(rng.uniform(0, 1, 40), 50)), eps
    )
    for s in (smooth, rough):
        for c, r in ((0.0, 0.4), (0.2, 0.3), (-0.3, 0.5)):
            d = j_decomposition(s, model, Bump(c, r))
            assert d.J23 <= 1e-12 and d.J5 <= 1e-12
            assert d.split_defect <= 1e-6 * d.scale
            assert d.substitution_defect <= 1e-6 * d.scale
            assert d.J3 == d.J21


def test_j_decomposition_usage_errors():
    s = _state(lambda x: 0.5 + 0.1 * x, 0.05)
    with pytest.raises(UsageError):
        j_decomposition(s, GS, Bump(0.9, 0.2))
    coarse = _state(lambda x: 0.5 + 0.1 * x, 0.05, n=1000)
    other = NonlocalState(0.0, s.field, 0.05, coarse.q)
    with pytest.raises(UsageError):
        j_decomposition(other, GS, Bump(0.0, 0.2))


def test_integration_by_parts_defect_converges_in_dx():
    defects = []
    for n in (1000, 2000, 4000, 8000):
        s = _state(lambda x: 0.5 + 0.3 * np.tanh(x / 0.1), 0.05, n=n)
        defects.append(j_decomposition(s, GS, Bump(0.05, 0.4)).parts_defect)
    ratios = [defects[i] / defects[i + 1] for i in range(3)]
    assert min(ratios) >= 1.5
    assert defects[-1] <= 1e-7


def test_periodic_reconstruction():
    s = _state(lambda x: 0.5 + 0.3 * np.sin(np.pi * x), 0.05, boundary="periodic")
    d = j_decomposition(s, GS, Bump(0.9 - 1.0, 0.5))
    assert d.split_defect <= 1e-6 * d.scale
    assert d.parts_defect <= 1e-5


def test_coupling_terms_vanish_at_first_order_for_fixed_state():
    f = DensityField.from_function(lambda x: 0.5 + 0.3 * np.sin(np.pi * x), -1, 1, 4000, "periodic")
    eps = [0.1, 0.05, 0.025, 0.0125]
    for c in (-0.4, 0.4):
        ds = [j_decomposition(NonlocalState.from_field(f, e), GS, Bump(c, 0.5)) for e in eps]
        assert fit_rate(eps, [abs(d.J1) for d in ds]).slope >= 0.9
        assert fit_rate(eps, [abs(d.J3 + d.J4) for d in ds]).slope >= 0.9


def test_coupling_rate_becomes_first_order_for_evolved_state():
    # with a bump where the leading coefficient nearly cancels, the ratio
    # e(2 eps)/e(eps) creeps up towards 2 only at small eps
    f = DensityField.from_function(lambda x: 0.5 + 0.3 * np.sin(np.pi * x), -1, 1, 8000, "periodic")
    eps = [0.0125, 0.00625, 0.003125]
    vals = []
    for e in eps:
        s = NonlocalState.from_field(solve_nonlocal(f, GS, e, 0.2).final, e, 0.2)
        vals.append(abs(j_decomposition(s, GS, Bump(0.0, 0.5)).J1))
    assert 1.7 <= vals[0] / vals[1] <= vals[1] / vals[2] <= 2.1
