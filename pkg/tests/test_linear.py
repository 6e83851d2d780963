import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prandtl_lab.linear import (
    FourierModeState,
    FrozenShear,
    ModeTrajectory,
    ShearHistory,
    amplification_experiment,
    default_initial_mode,
    fit_sqrt_law,
    gronwall_check,
    growth_rate,
    growth_scan,
    mode_rhs,
    nonlinear_residual,
    solve_mode,
    solve_modes,
    step_mode,
)
from prandtl_lab.numerics import Field2D, PeriodicGridX, WeightedNormSpec, build_grid, mode_l2
from prandtl_lab.shear import evolve_heat, make_profile, shear_admissibility


@pytest.fixture(scope="module")
def grid():
    return build_grid(20.0, 128)


@pytest.fixture(scope="module")
def gd(grid):
    return make_profile("gd_nonmonotone", grid)


@pytest.fixture(scope="module")
def erf_p(grid):
    return make_profile("erf_monotone", grid)


def test_state_requires_wall_zero(grid):
    w = np.ones(grid.n, complex)
    with pytest.raises(ValueError):
        FourierModeState(3, 0.0, grid, w)


def test_default_initial_mode(grid):
    w = default_initial_mode(grid)
    assert w[0] == 0 and mode_l2(w, grid) == pytest.approx(1.0)


def test_zero_data_stays_zero(grid, gd):
    tr = solve_mode(8, np.zeros(grid.n, complex), ShearHistory(gd, 1e-2), grid, (0.0, 0.3), 1e-2)
    assert np.all(tr.norms == 0.0)


def test_empty_span_returns_data(grid, gd):
    w0 = default_initial_mode(grid)
    tr = solve_mode(8, w0, FrozenShear(gd), grid, (0.0, 0.0), 1e-2)
    assert tr.norms[0] == pytest.approx(1.0) and tr.times.size == 1


def test_k0_reduces_to_heat(grid, erf_p):
    y = grid.nodes
    data = (1 - np.exp(-y)) * np.exp(-0.1 * y)
    data[-1] = 0.0
    tr = solve_mode(0, data.astype(complex), FrozenShear(erf_p), grid, (0.0, 0.2), 1e-3, store_every=200)
    heat = evolve_heat(make_profile("custom_table", grid, Y=y, u=data, U=0.0), 0.2, 1e-3)
    w_end = tr.last_stored()
    assert np.max(np.abs(w_end.real - heat.u_s)) <= 1e-10 * np.max(np.abs(heat.u_s))
    assert growth_rate(tr) < 0


def test_single_step_matches_rhs(grid, gd):
    y = grid.nodes
    w = (y * np.exp(-((y - 2) ** 2))).astype(complex)
    st0 = FourierModeState(4, 0.0, grid, w)
    rhs = mode_rhs(w, 4, gd.u_s, gd.du_s, grid)
    errs = []
    for dt in (1e-4, 5e-5):
        new = step_mode(st0, FrozenShear(gd), dt)
        errs.append(np.max(np.abs((new.w_hat - w) - dt * rhs)[1:-1]))
    assert errs[1] < 0.3 * errs[0]


@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_linearity(a, b):
    g = build_grid(12.0, 48)
    p = make_profile("gd_nonmonotone", g)
    y = g.nodes
    w1 = (y * np.exp(-y)).astype(complex)
    w2 = (1j * y**2 * np.exp(-y)).astype(complex)
    w1[-1] = w2[-1] = 0
    shear = FrozenShear(p)
    runs = solve_modes([6, 6, 6], np.array([w1, w2, a * w1 + b * w2]), shear, g, (0.0, 0.1), 1e-2, store_every=10)
    combo = a * runs[0].last_stored() + b * runs[1].last_stored()
    scale = max(np.max(np.abs(combo)), 1e-300)
    assert np.max(np.abs(runs[2].last_stored() - combo)) <= 1e-10 * scale + 1e-300


def test_reality_constraint(grid, gd):
    y = grid.nodes
    w = ((1 + 2j) * y * np.exp(-y)).astype(complex)
    w[-1] = 0
    pos, neg = solve_modes([5, -5], np.array([w, np.conj(w)]), FrozenShear(gd), grid, (0.0, 0.2), 5e-3, store_every=40)
    np.testing.assert_allclose(neg.last_stored(), np.conj(pos.last_stored()), atol=1e-13)


def test_norm_scaling(grid, gd):
    w0 = default_initial_mode(grid)
    a = solve_mode(8, w0, FrozenShear(gd), grid, (0.0, 0.2), 5e-3)
    b = solve_mode(8, 3.5 * w0, FrozenShear(gd), grid, (0.0, 0.2), 5e-3)
    np.testing.assert_allclose(b.norms, 3.5 * a.norms, rtol=1e-12)


def test_growth_rate_exact_exponential():
    t = np.linspace(0, 1, 51)
    tr = ModeTrajectory(1, t, np.exp(2 * t))
    assert growth_rate(tr) == pytest.approx(2.0, abs=1e-12)
    assert growth_rate(ModeTrajectory(1, t, np.ones_like(t))) == pytest.approx(0.0, abs=1e-12)


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        ModeTrajectory(1, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        ModeTrajectory(1, np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_fit_sqrt_law():
    ks = np.array([4, 9, 16, 25])
    a, b, r2 = fit_sqrt_law(ks, 0.3 * np.sqrt(ks) - 1)
    assert (a, b, r2) == pytest.approx((0.3, -1.0, 1.0))
    assert fit_sqrt_law([16], [2.0]) == pytest.approx((0.5, 0.0, 1.0))


def test_single_k_scan(grid, gd):
    res = growth_scan([16], gd, horizon=0.3)
    assert res.r2 == 1.0 and res.a == pytest.approx(res.sigma[0] / 4)


def test_gronwall_examples(grid, erf_p):
    zero = ModeTrajectory(8, np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    rep = gronwall_check(zero, 1.3)
    assert rep.margin == 0.0 and rep.passed
    tr0 = solve_mode(0, default_initial_mode(grid), FrozenShear(erf_p), grid, (0.0, 0.3), 1e-3)
    assert gronwall_check(tr0, shear_admissibility(erf_p)).margin <= 1.0
    hist = ShearHistory(erf_p, 2e-3)
    tr8 = solve_mode(8, default_initial_mode(grid), hist, grid, (0.0, 0.5), 2e-3)
    assert gronwall_check(tr8, 1 + 1 / np.pi).margin <= 1.01


def test_amplification_examples(grid, erf_p):
    spec = WeightedNormSpec(2, 0.25)
    eps0 = 0.25
    cells = amplification_experiment(erf_p, [0.0, 0.5], [4], spec, eps0)
    C = shear_admissibility(erf_p)
    assert all(c.ratio <= np.exp(C * 4 * eps0) for c in cells)
    zero = amplification_experiment(erf_p, [0.0], [4, 8], spec, eps0, w0=np.zeros(grid.n))
    assert all(c.ratio == 0.0 for c in zero)
    with pytest.raises(ValueError):
        amplification_experiment(erf_p, [-1.0], [4], spec, eps0)


def test_nonlinear_residual_examples(grid):
    xg = PeriodicGridX(16)
    x = xg.nodes[:, None]
    y = grid.nodes[None, :]
    u = Field2D(np.sin(x) * y * np.exp(-y), xg, grid)
    zero = Field2D(np.zeros_like(u.values), xg, grid)
    assert nonlinear_residual(zero, 1.0) == 0.0
    assert nonlinear_residual(u, 0.5) == pytest.approx(0.5 * nonlinear_residual(u, 1.0), rel=1e-15)
    flat = Field2D(np.tile(y * np.exp(-y), (16, 1)), xg, grid)
    assert nonlinear_residual(flat, 1.0) == pytest.approx(0.0, abs=1e-14)
