import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prandtl_lab.crocco import (
    CorruptedStateError,
    CroccoGrid,
    CroccoState,
    MonotonicityBreakdown,
    NotMonotoneError,
    check_assumption_O,
    crocco_coeffs,
    crocco_dt,
    exponential_datum,
    from_crocco,
    reconstruct_ux,
    run_crocco,
    step_crocco,
    to_crocco,
    verify_bounds,
)
from prandtl_lab.numerics import Field2D, PeriodicGridX, build_grid
from prandtl_lab.shear import OuterFlow, bernoulli_pressure, make_profile


@pytest.fixture(scope="module")
def xg():
    return PeriodicGridX(8)


@pytest.fixture(scope="module")
def yg():
    return build_grid(20.0, 256)


@pytest.fixture(scope="module")
def cg(xg):
    return CroccoGrid(256, xg)


@pytest.fixture(scope="module")
def outer(xg):
    return OuterFlow.constant(xg)


def _linear_state(cg, outer, slope=1.0):
    return CroccoState(0.0, cg, slope * np.tile(1.0 - cg.eta, (cg.xgrid.n_x, 1)), outer)


def test_grid_layout(cg):
    eta = cg.eta
    assert eta[0] == 0.0 and eta[-1] == 1.0
    assert eta[-2] == pytest.approx(1.0 - 1.0 / 512)
    assert np.all(np.diff(eta) > 0)


def test_state_pins_eta_one(cg, outer):
    w = np.ones(cg.shape)
    assert np.all(CroccoState(0.0, cg, w, outer).w[:, -1] == 0.0)


@pytest.mark.parametrize("rate", [1.0, 2.0])
def test_assumption_O_constants(rate, xg, yg, outer):
    u0, du0 = exponential_datum(xg, yg, rate)
    b = check_assumption_O(u0, outer, du0=du0)
    # ratios are clipped where U - u0 < 1e-10 U, leaving ~1e-6 relative round-off
    assert b.theta0 == pytest.approx(rate, rel=1e-6)
    assert b.C0 == pytest.approx(rate, rel=1e-6)
    fd = check_assumption_O(u0, outer)
    assert fd.theta0 == pytest.approx(rate, rel=2e-2) and fd.C0 == pytest.approx(rate, rel=2e-2)


def test_assumption_O_rejects_critical_point(xg, yg, outer):
    p = make_profile("gd_nonmonotone", yg)
    with pytest.raises(NotMonotoneError, match="not monotone"):
        check_assumption_O(Field2D(np.tile(p.u_s, (xg.n_x, 1)), xg, yg), outer)


def test_assumption_O_requires_wall_zero(xg, yg, outer):
    u0, _ = exponential_datum(xg, yg)
    with pytest.raises(ValueError):
        check_assumption_O(u0.with_values(u0.values + 0.1), outer)


@pytest.mark.parametrize("rate", [1.0, 2.0])
def test_to_crocco_linear_profiles(rate, xg, yg, cg, outer):
    u0, du0 = exponential_datum(xg, yg, rate)
    st_ = to_crocco(u0, outer, cg, du=du0)
    np.testing.assert_allclose(st_.w, np.broadcast_to(rate * (1 - cg.eta), st_.w.shape), atol=1e-6)
    # derivative taken from the interpolant instead of exact samples
    approx = to_crocco(u0, outer, cg)
    np.testing.assert_allclose(approx.w, np.broadcast_to(rate * (1 - cg.eta), approx.w.shape), atol=2e-3)


def test_to_crocco_x_independent(xg, yg, cg, outer):
    u0, _ = exponential_datum(xg, yg)
    w = to_crocco(u0, outer, cg).w
    assert np.all(w == w[0])


def test_to_crocco_aborts_on_non_monotone(xg, yg, cg, outer):
    p = make_profile("gd_nonmonotone", yg)
    with pytest.raises(NotMonotoneError):
        to_crocco(Field2D(np.tile(p.u_s, (xg.n_x, 1)), xg, yg), outer, cg)


@pytest.mark.parametrize("slope", [1.0, 2.0])
def test_from_crocco_linear_w(slope, yg, cg, outer):
    u = from_crocco(_linear_state(cg, outer, slope), yg)
    assert np.max(np.abs(u.values - (1 - np.exp(-slope * yg.nodes)))) <= 1e-4


def test_round_trip(xg, yg, cg, outer):
    u0, du0 = exponential_datum(xg, yg)
    back = from_crocco(to_crocco(u0, outer, cg, du=du0), yg)
    assert np.max(np.abs(back.values - u0.values)) <= 1e-6


@given(st.floats(0.8, 3.0), st.floats(0.0, 0.4))
def test_round_trip_family(rate, mod):
    xg, yg = PeriodicGridX(4), build_grid(20.0, 128)
    cg = CroccoGrid(128, xg)
    u0, du0 = exponential_datum(xg, yg, rate, mod)
    back = from_crocco(to_crocco(u0, OuterFlow.constant(xg), cg, du=du0), yg)
    assert np.max(np.abs(back.values - u0.values)) <= 1e-6


def test_from_crocco_rejects_corrupted(cg, outer, yg):
    w = np.tile(1.0 - cg.eta, (cg.xgrid.n_x, 1))
    w[2, 40] = -0.1
    with pytest.raises(CorruptedStateError):
        from_crocco(CroccoState(0.0, cg, w, outer), yg)


def test_coefficients(xg, cg, outer):
    co = crocco_coeffs(outer, cg)
    assert np.all(co.A == 0) and np.all(co.B == 0)
    x = xg.nodes[:, None]
    eta = cg.eta[None, :]
    flow = bernoulli_pressure((1 + 0.1 * np.sin(xg.nodes))[None, :], xg)
    co = crocco_coeffs(flow, cg)
    np.testing.assert_allclose(co.A, (eta**2 - 1) * 0.1 * np.cos(x), atol=1e-14)
    np.testing.assert_allclose(co.B, -eta * 0.1 * np.cos(x), atol=1e-14)
    assert np.all(co.A[:, -1] == 0)
    with pytest.raises(ValueError):
        crocco_coeffs(bernoulli_pressure(-np.ones((1, xg.n_x)), xg), cg)


def test_time_dependent_coefficients(xg, cg):
    times = np.linspace(0, 1, 5)
    U = np.tile(1 + 0.1 * times[:, None], (1, xg.n_x))
    co = crocco_coeffs(bernoulli_pressure(U, xg, times), cg, t=0.5)
    r = 0.1 / 1.05
    np.testing.assert_allclose(co.A, np.broadcast_to((cg.eta - 1) * r, co.A.shape), atol=1e-13)
    np.testing.assert_allclose(co.B, np.full(co.B.shape, -r), atol=1e-13)


def test_step_pins_boundary_and_x_independence(cg, outer, xg, yg):
    u0, du0 = exponential_datum(xg, yg)
    s = to_crocco(u0, outer, cg, du=du0)
    for _ in range(25):
        s = step_crocco(s, 2e-3)
        assert np.all(s.w[:, -1] == 0.0)
    assert np.max(np.abs(s.w - s.w[0])) <= 1e-14


def test_shift_equivariance(xg, yg, outer):
    cg = CroccoGrid(64, xg)
    u0, du0 = exponential_datum(xg, yg, 1.1, 0.1)
    s = to_crocco(u0, outer, cg, du=du0)
    shifted = CroccoState(0.0, cg, np.roll(s.w, 3, axis=0), outer)
    a = run_crocco(s, 0.1, 5e-3)[-1]
    b = run_crocco(shifted, 0.1, 5e-3)[-1]
    np.testing.assert_allclose(np.roll(a.w, 3, axis=0), b.w, atol=1e-14)


def test_constant_stationary_profile_is_stationary_for_zero_slope_at_wall(cg, outer):
    # w = 1 - eta^2 has w_eta(0) = 0 but is not stationary; the Robin ghost keeps the slope at zero
    w = np.tile(1 - cg.eta**2, (cg.xgrid.n_x, 1))
    s = run_crocco(CroccoState(0.0, cg, w, outer), 0.05, 1e-3)[-1]
    h = cg.eta[1]
    assert abs(s.w[0, 1] - s.w[0, 0]) / h <= 5 * h


def test_monotonicity_breakdown_reported(cg, xg):
    # violent deceleration drives the wall shear through zero
    times = np.linspace(0, 1, 201)
    flow = bernoulli_pressure(np.tile(np.exp(-20 * times)[:, None], (1, xg.n_x)), xg, times)
    s = CroccoState(0.0, cg, np.tile(1.0 - cg.eta, (cg.xgrid.n_x, 1)), flow)
    with pytest.raises(MonotonicityBreakdown, match="monotonicity breakdown") as info:
        for _ in range(50):
            s = step_crocco(s, 5e-3)
    assert info.value.eta == 0.0 and info.value.t > 0


def test_cfl_enforced(cg, outer, xg, yg):
    u0, du0 = exponential_datum(xg, yg)
    s = to_crocco(u0, outer, cg, du=du0)
    lim = crocco_dt(s)
    assert lim == pytest.approx(0.5 * xg.dx)
    with pytest.raises(ValueError):
        run_crocco(s, 10 * lim, 2 * lim)


def test_verify_bounds_examples(cg, outer, yg):
    for slope in (1.0, 2.0):
        rep = verify_bounds([_linear_state(cg, outer, slope)], ygrid=yg)
        assert rep.theta1 == pytest.approx(slope) and rep.theta2 == pytest.approx(slope)
        assert rep.passed and rep.sandwich_ok
    w = np.tile(1.0 - cg.eta, (cg.xgrid.n_x, 1))
    w[0, 50] = 0.0
    rep = verify_bounds([CroccoState(0.0, cg, w, outer)])
    assert rep.theta1 <= 0 and not rep.passed


def test_reconstruct_ux_examples(xg, yg, cg, outer):
    zero = reconstruct_ux(_linear_state(cg, outer), yg)
    assert np.max(np.abs(zero.values)) <= 1e-14
    a = 1 + 0.1 * np.sin(xg.nodes)[:, None]
    s = CroccoState(0.0, cg, a * (1 - cg.eta)[None, :], outer)
    y = yg.nodes[None, :]
    exact = 0.1 * np.cos(xg.nodes)[:, None] * y * np.exp(-a * y)
    assert np.max(np.abs(reconstruct_ux(s, yg).values - exact)) <= 1e-3


def test_reconstruct_ux_matches_spectral_derivative(xg, yg, outer):
    from prandtl_lab.numerics import diff_x

    cg = CroccoGrid(256, xg)
    u0, du0 = exponential_datum(xg, yg, 1.2, 0.15)
    s = to_crocco(u0, outer, cg, du=du0)
    ux = reconstruct_ux(s, yg).values
    assert np.max(np.abs(ux - diff_x(u0.values, xg))) <= 1e-3
