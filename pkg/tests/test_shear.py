import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from prandtl_lab.numerics import PeriodicGridX, build_grid, diff_y
from prandtl_lab.shear import (
    OuterFlow,
    ShearProfile,
    bernoulli_pressure,
    critical_points,
    evolve_heat,
    gd_critical_point,
    make_profile,
    shear_admissibility,
)


def test_erf_profile_basics(ygrid):
    p = make_profile("erf_monotone", ygrid, U=1.0, t0=1.0)
    assert p.u_s[0] == 0.0
    assert np.all(np.diff(p.u_s) >= 0) and np.all(np.diff(p.u_s[:100]) > 0)
    assert p.u_s[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(p.du_s, diff_y(p.u_s, ygrid, 1), rtol=0, atol=1e-15)


def test_profile_invariants_enforced(ygrid):
    u = 1 - np.exp(-ygrid.nodes)
    with pytest.raises(ValueError):
        ShearProfile(0.0, ygrid, u + 0.1, 1.0)
    with pytest.raises(ValueError):
        ShearProfile(0.0, ygrid, u, 2.0)


def test_gd_profile_has_one_nondegenerate_critical_point(ygrid):
    p = make_profile("gd_nonmonotone", ygrid)
    rep = critical_points(p)
    y0, curv = gd_critical_point()
    assert len(rep) == 1
    assert rep.locations[0] == pytest.approx(y0, abs=5e-3)
    assert rep.curvatures[0] < 0
    assert rep.curvatures[0] == pytest.approx(curv, rel=1e-2)


def test_gd_analytic_root_is_a_root():
    y0, _ = gd_critical_point(1.0, 0.5)
    assert np.exp(-y0) * (1.0 + 0.5 * (2 * y0 - y0**2)) == pytest.approx(0.0, abs=1e-14)


def test_erf_has_no_critical_points(ygrid):
    assert len(critical_points(make_profile("erf_monotone", ygrid))) == 0


def test_sine_table_critical_point():
    g = build_grid(np.pi, 201)
    y = g.nodes
    u = np.sin(y)
    u[-1] = 0.0
    p = make_profile("custom_table", g, Y=y, u=u, U=0.0)
    rep = critical_points(p)
    assert len(rep) == 1
    assert rep.locations[0] == pytest.approx(np.pi / 2, abs=1e-4)
    assert rep.curvatures[0] == pytest.approx(-1.0, abs=1e-3)


def test_custom_table_exact_at_nodes(ygrid, tmp_path):
    y = ygrid.nodes
    u = 1 - np.exp(-y)
    p = make_profile("custom_table", ygrid, Y=y, u=u)
    np.testing.assert_array_equal(p.u_s[1:], u[1:])
    path = tmp_path / "table.txt"
    np.savetxt(path, np.column_stack([y, u]), header="Y u")
    q = make_profile("custom_table", ygrid, path=path)
    np.testing.assert_allclose(q.u_s, u, atol=1e-15)


def test_unknown_kind(ygrid):
    with pytest.raises(ValueError):
        make_profile("blasius", ygrid)


def test_heat_oracle(ygrid):
    p = make_profile("erf_monotone", ygrid, U=1.0, t0=1.0)
    out = evolve_heat(p, 1.0, 1e-3)
    assert out.t == pytest.approx(1.0)
    assert np.max(np.abs(out.u_s - erf(ygrid.nodes / (2 * np.sqrt(2.0))))) <= 1e-3


def test_heat_zero_span_and_zero_flow(ygrid):
    p = make_profile("erf_monotone", ygrid)
    assert evolve_heat(p, p.t, 1e-3) is p
    z = ShearProfile(0.0, ygrid, np.zeros(ygrid.n), 0.0)
    assert np.all(evolve_heat(z, 0.3, 1e-2).u_s == 0.0)


def test_heat_semigroup(ygrid):
    p = make_profile("gd_nonmonotone", ygrid)
    direct = evolve_heat(p, 0.4, 1e-3)
    split = evolve_heat(evolve_heat(p, 0.25, 1e-3), 0.4, 1e-3)
    assert np.max(np.abs(direct.u_s - split.u_s)) <= 1e-6


def test_heat_rejects_bad_steps(ygrid):
    p = make_profile("erf_monotone", ygrid)
    with pytest.raises(ValueError):
        evolve_heat(p, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve_heat(p.at_time(1.0, p.u_s), 0.5, 1e-3)


@given(st.floats(0.2, 3.0), st.floats(0.3, 3.0))
def test_maximum_principle_and_monotonicity(t0, U):
    g = build_grid(20.0, 96)
    p = make_profile("erf_monotone", g, U=U, t0=t0)
    for q in evolve_heat(p, 0.5, 5e-3, keep_every=10):
        assert np.all(q.u_s >= -1e-12) and np.all(q.u_s <= U * (1 + 1e-12))
        assert np.all(q.du_s >= -1e-10 * U)


def test_admissibility_values(ygrid):
    assert shear_admissibility(make_profile("erf_monotone", ygrid)) == pytest.approx(1 + 1 / np.pi, rel=1e-3)
    assert shear_admissibility(ShearProfile(0.0, ygrid, np.zeros(ygrid.n), 0.0)) == 0.0
    p = make_profile("custom_table", ygrid, Y=ygrid.nodes, u=1 - np.exp(-ygrid.nodes), U=1.0)
    assert shear_admissibility(p) == pytest.approx(1.25, rel=1e-3)


def test_admissibility_refinement():
    vals = [shear_admissibility(make_profile("erf_monotone", build_grid(20.0, n))) for n in (64, 128, 256)]
    assert abs(vals[2] - vals[1]) <= 4 * abs(vals[1] - vals[0])


def test_bernoulli_pressure_oracles():
    xg = PeriodicGridX(32)
    x = xg.nodes
    assert np.all(OuterFlow.constant(xg).P_x == 0.0)
    U = 1 + 0.1 * np.sin(x)
    flow = bernoulli_pressure(U[None, :], xg)
    np.testing.assert_allclose(flow.P_x[0], -U * 0.1 * np.cos(x), atol=1e-13)
    times = np.linspace(0, 1, 5)
    flow = bernoulli_pressure(np.tile(1 + 0.1 * times[:, None], (1, 32)), xg, times)
    np.testing.assert_allclose(flow.P_x, -0.1, atol=1e-13)
    U_t = flow.sample(0.3)[2]
    np.testing.assert_allclose(U_t, 0.1, atol=1e-13)
