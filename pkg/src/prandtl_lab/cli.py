"""``prandtl-lab <scenario> --config <path> --out <dir> [--format csv|json|both]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import erf

from . import __version__, crocco, linear, shear, stability
from .config import SCENARIOS, ConfigError, RunConfig, parse_config
from .numerics import Field2D, PeriodicGridX, WeightedNormSpec, build_grid
from .reports import RunManifest, emit_csv, emit_json, load_run, save_run

log = logging.getLogger("prandtl_lab")


class Outputs:
    """Single writer for one run directory; remembers every file it writes."""

    def __init__(self, root: Path, fmt: str):
        self.root = root
        self.fmt = fmt
        self.files: list = []
        self.series_json: dict = {}
        root.mkdir(parents=True, exist_ok=True)

    def series(self, name: str, cols: dict):
        if self.fmt in ("csv", "both"):
            self.files.append(emit_csv(cols, self.root / f"{name}.csv").name)
        if self.fmt in ("json", "both"):
            self.series_json[name] = {k: np.asarray(v).tolist() for k, v in cols.items()}

    def archive(self, name: str, run, norms=None):
        self.files.append(save_run(run, self.root / f"{name}.npz", norms).name)
        return self.root / f"{name}.npz"

    def finish(self):
        if self.series_json:
            self.files.append(emit_json(self.series_json, self.root / "series.json").name)


def _ygrid(cfg: RunConfig):
    return build_grid(cfg["grid.y_max"], cfg["grid.n_y"], cfg["grid.grading"])


def _profile(cfg: RunConfig, grid):
    kind = cfg["shear.kind"]
    if kind == "erf_monotone":
        return shear.make_profile(kind, grid, U=cfg["shear.U"], t0=cfg["shear.t0"])
    if kind == "gd_nonmonotone":
        return shear.make_profile(kind, grid, U=cfg["shear.U"], c=cfg["shear.c"])
    return shear.make_profile(kind, grid, path=cfg["shear.table"])


def _initial_mode(cfg: RunConfig, grid):
    if cfg["linear.init"] == "bump":
        return linear.default_initial_mode(grid)
    rng = np.random.default_rng(cfg["scenario.seed"])
    y = grid.nodes
    coef = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w = sum(c * y ** (j + 1) for j, c in enumerate(coef)) * np.exp(-y)
    w[0] = 0.0
    return w / linear.mode_l2(w, grid)


def run_shear(cfg, out: Outputs, man: RunManifest):
    grid = _ygrid(cfg)
    prof = _profile(cfg, grid)
    t_end = cfg["time.t_end"]
    t0 = time.perf_counter()
    final = shear.evolve_heat(prof, prof.t + t_end, cfg["time.dt"])
    man.metrics["heat_seconds"] = time.perf_counter() - t0
    cols = {"Y": grid.nodes, "u_initial": prof.u_s, "u_final": final.u_s}
    if cfg["shear.kind"] == "erf_monotone":
        exact = prof.U * erf(grid.nodes / (2.0 * np.sqrt(cfg["shear.t0"] + t_end)))
        err = float(np.max(np.abs(final.u_s - exact)))
        cols["u_exact"] = exact
        man.metrics["max_error_vs_erf"] = err
        man.checks["erf_oracle"] = err <= 1e-3
    out.series("profile", cols)
    cps = shear.critical_points(prof)
    man.metrics["critical_points"] = list(cps.locations)
    man.metrics["critical_curvatures"] = list(cps.curvatures)
    man.metrics["admissibility_C"] = shear.shear_admissibility(prof)
    man.checks["finite"] = bool(np.all(np.isfinite(final.u_s)))


def _shear_provider(cfg, prof, dt):
    return linear.ShearHistory(prof, dt) if cfg["linear.evolve_shear"] else linear.FrozenShear(prof)


def run_linear(cfg, out, man):
    grid = _ygrid(cfg)
    prof = _profile(cfg, grid)
    k = cfg["linear.k"]
    dt = min(cfg["time.dt"], linear.mode_dt(k, prof, cfg["linear.cfl"]))
    shear_at = _shear_provider(cfg, prof, dt)
    traj = linear.solve_mode(k, _initial_mode(cfg, grid), shear_at, grid, (prof.t, prof.t + cfg["time.t_end"]), dt)
    out.series("mode_norms", {"t": traj.times, "norm": traj.norms})
    man.metrics["blew_up"] = traj.blew_up
    man.metrics["growth_rate"] = linear.growth_rate(traj) if traj.times.size > 5 else float("nan")
    if cfg["shear.kind"] == "erf_monotone":
        rep = linear.gronwall_check(traj, shear_at.profiles() if cfg["linear.evolve_shear"] else shear.shear_admissibility(prof), k)
        man.metrics["gronwall_C"] = rep.C
        man.metrics["gronwall_margin"] = rep.margin
        man.checks["gronwall"] = rep.passed
    man.checks["no_blowup"] = not traj.blew_up


def run_growth_scan(cfg, out, man):
    grid = _ygrid(cfg)
    prof = _profile(cfg, grid)
    ks = cfg["linear.ks"]
    dt = min(cfg["time.dt"], linear.mode_dt(max(ks), prof, cfg["linear.cfl"]))
    fit, trajs = linear.growth_scan(
        ks, prof, horizon=cfg["time.t_end"], dt=dt, w0=_initial_mode(cfg, grid),
        cfl=cfg["linear.cfl"], evolve_shear=cfg["linear.evolve_shear"], return_trajectories=True,
    )
    out.series("growth", {"k": np.asarray(fit.ks), "sigma": fit.sigma})
    man.metrics.update({"a": fit.a, "b": fit.b, "r2": fit.r2, "theta0_proxy": fit.theta0_proxy})
    if cfg["shear.kind"] == "erf_monotone":
        C = shear.shear_admissibility(prof)
        margins = [linear.gronwall_check(tr, C, k).margin for k, tr in zip(ks, trajs)]
        man.metrics["gronwall_C"] = C
        man.metrics["gronwall_margins"] = margins
        man.checks["gronwall"] = all(m <= 1.01 for m in margins)
    else:
        man.checks["sqrt_law"] = fit.a > 0 and fit.r2 >= 0.9
    man.checks["finite"] = bool(np.all(np.isfinite(fit.sigma)))


def run_amplify(cfg, out, man):
    grid = _ygrid(cfg)
    prof = _profile(cfg, grid)
    spec = WeightedNormSpec(m=cfg["norm.m"], alpha=cfg["norm.alpha"])
    ks = cfg["linear.ks"]
    cells = linear.amplification_experiment(
        prof, cfg["linear.shifts"], ks, spec, cfg["linear.horizon"],
        w0=_initial_mode(cfg, grid), heat_dt=cfg["time.dt"], cfl=cfg["linear.cfl"],
    )
    out.series(
        "amplification",
        {"shift": [c.shift for c in cells], "k": [c.k for c in cells], "ratio": [c.ratio for c in cells]},
    )
    incr = {}
    for s in cfg["linear.shifts"]:
        r = [c.ratio for c in cells if c.shift == s]
        incr[str(s)] = bool(np.all(np.diff(r) > 0))
    man.metrics["increasing_in_k"] = incr
    man.checks["finite"] = all(np.isfinite(c.ratio) for c in cells)


def _crocco_datum(cfg, xg, yg, rate=None, eps=0.0):
    init = cfg["crocco.init"]
    U = cfg["shear.U"]
    if init == "exponential":
        u0, du0 = crocco.exponential_datum(xg, yg, rate or cfg["crocco.rate"], cfg["crocco.modulation"], U)
        if eps:
            y = yg.nodes[None, :]
            s = np.sin(xg.nodes)[:, None]
            e2 = np.exp(-2.0 * y)
            u0 = u0.with_values(u0.values - U * eps * s * y * e2)
            du0 = du0 - U * eps * s * (1.0 - 2.0 * y) * e2
        return u0, du0
    if init == "shear":
        prof = _profile(cfg, yg)
    else:
        prof = shear.make_profile("custom_table", yg, path=cfg["crocco.table"])
    return Field2D(np.tile(prof.u_s, (xg.n_x, 1)), xg, yg), None


def _w_table_state(cfg, cg, outer):
    eta, w = shear.read_table(cfg["crocco.table"])
    vals = np.interp(cg.eta, eta, w)
    if np.any(vals[:-1] <= 0):
        raise ConfigError("crocco.table", "w must be positive below eta = 1")
    return crocco.CroccoState(0.0, cg, np.tile(vals, (cg.xgrid.n_x, 1)), outer)


def _crocco_run(cfg, xg, yg, rate=None, eps=0.0):
    outer = shear.OuterFlow.constant(xg, cfg["shear.U"])
    cg = crocco.CroccoGrid(cfg["grid.n_eta"], xg)
    if cfg["crocco.init"] == "w_table":
        st = _w_table_state(cfg, cg, outer)
        u0 = crocco.from_crocco(st, yg)
        U = cfg["shear.U"]
        du0 = U * np.vstack([np.interp(row / U, cg.eta, wr) for row, wr in zip(u0.values, st.w)])
    else:
        u0, du0 = _crocco_datum(cfg, xg, yg, rate, eps)
    try:
        bounds = crocco.check_assumption_O(u0, outer, du0=du0)
    except crocco.AssumptionOViolation as exc:
        raise ConfigError("crocco.init", f"initial data rejected: {exc}") from None
    if cfg["crocco.init"] != "w_table":
        st = crocco.to_crocco(u0, outer, cg, du=du0)
    T = cfg["time.t_end"]
    dt = min(cfg["time.dt"], crocco.crocco_dt(st, cfg["crocco.cfl"]))
    nsteps = max(int(np.ceil(T / dt - 1e-9)), 1) if T > 0 else 0
    h = T / nsteps if nsteps else 0.0
    run, nt, nv = [st], [st.t], [float(np.sqrt(np.mean(st.w**2)))]
    cur = st
    for step in range(1, nsteps + 1):
        cur = crocco.step_crocco(cur, h)
        nt.append(cur.t)
        nv.append(float(np.sqrt(np.mean(cur.w**2))))
        if step % cfg["time.store_every"] == 0 or step == nsteps:
            run.append(cur)
    return u0, bounds, run, (np.array(nt), np.array(nv))


def run_crocco_scenario(cfg, out, man):
    yg = _ygrid(cfg)
    xg = PeriodicGridX(cfg["grid.n_x"])
    u0, b0, run, norms = _crocco_run(cfg, xg, yg)
    out.archive("crocco_run", run, norms)
    rep = crocco.verify_bounds(run, b0, yg)
    out.series(
        "bounds", {"t": [s.t for s in run], "theta1": rep.theta1_per_state, "theta2": rep.theta2_per_state}
    )
    final = crocco.from_crocco(run[-1], yg)
    out.series("final_profile_x0", {"y": yg.nodes, "u": final.values[0]})
    man.metrics.update(
        {"theta0": b0.theta0, "C0": b0.C0, "theta1": rep.theta1, "theta2": rep.theta2,
         "dxw_ratio": rep.dxw_ratio, "sandwich_violation": rep.sandwich_violation}
    )
    x_free = cfg["crocco.init"] != "exponential" or cfg["crocco.modulation"] == 0.0
    if cfg["crocco.init"] == "w_table":
        x_free = False
    if x_free and run[-1].t > 0:
        prof = shear.make_profile("custom_table", yg, Y=yg.nodes, u=u0.values[0], U=cfg["shear.U"])
        ref = shear.evolve_heat(prof, run[-1].t, cfg["time.dt"])
        man.metrics["heat_cross_error"] = float(np.max(np.abs(final.values - ref.u_s[None, :])))
    man.checks["theta1_positive"] = rep.passed
    man.checks["sandwich"] = bool(rep.sandwich_ok)


def run_stability(cfg, out, man):
    yg = _ygrid(cfg)
    xg = PeriodicGridX(cfg["grid.n_x"])
    spec = stability.StabilityFunctionalSpec(cfg["stability.beta"], cfg["stability.k_w"], cfg["stability.use_weight"])
    u01, b1, r1, n1 = _crocco_run(cfg, xg, yg)
    u02, b2, r2, n2 = _crocco_run(cfg, xg, yg, rate=cfg["stability.rate2"], eps=cfg["stability.eps"])
    # post-processing reads the archives back, as an external consumer would
    run1 = load_run(out.archive("run1", r1, n1))
    run2 = load_run(out.archive("run2", r2, n2))
    trace = stability.track_functional(run1, run2, spec)
    out.series("functional", {"t": trace.times, "I": trace.I, "ratio": trace.ratio})
    f1 = [crocco.from_crocco(s, yg) for s in run1]
    f2 = [crocco.from_crocco(s, yg) for s in run2]
    rep = crocco.verify_bounds(run1 + run2)
    alpha = stability.lipschitz_alpha(spec.beta, rep.theta2)
    R = stability.stability_ratio(run1, run2, yg, alpha, u01=u01, u02=u02)
    man.metrics.update(
        {"C_hat": trace.C_hat, "C_fit": trace.C_fit, "C_fit_stderr": trace.C_fit_stderr,
         "I0": trace.I[0], "alpha": alpha, "R": R, "theta1": rep.theta1, "theta2": rep.theta2}
    )
    if len(run1) >= 3:
        eb = stability.energy_identity_residual(f1, f2, trace.times)
        out.series("energy_residual", {"t": eb.times, "residual": eb.residual})
        man.metrics["energy_residual_max"] = float(np.max(eb.residual))
    dz = stability.difference_fields(f1[-1], f2[-1])
    zx = stability.zx_bound_check(dz, run1[-1], run2[-1], spec, rep.theta1, rep.theta2)
    man.metrics["zx_ratio"] = zx.ratio
    man.metrics["zx_skipped"] = zx.reason
    man.checks["functional_bound"] = trace.passed
    man.checks["ratio_finite"] = bool(np.isfinite(R))


RUNNERS = {
    "shear": run_shear,
    "linear": run_linear,
    "growth-scan": run_growth_scan,
    "amplify": run_amplify,
    "crocco": run_crocco_scenario,
    "stability": run_stability,
}


def run_scenario(cfg: RunConfig, out_dir, fmt: str = "both") -> RunManifest:
    """Run one configured scenario and write its outputs plus manifest.json."""
    out = Outputs(Path(out_dir), fmt)
    man = RunManifest(cfg.scenario, cfg.echo(), __version__, time.time())
    try:
        RUNNERS[cfg.scenario](cfg, out, man)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        log.error("%s failed: %s", cfg.scenario, exc)
        man.error = f"{type(exc).__name__}: {exc}"
    out.finish()
    man.finished = time.time()
    man.files = sorted(out.files + ["manifest.json"])
    emit_json(man.to_dict(), out.root / "manifest.json")
    return man


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="prandtl-lab", description=__doc__)
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--format", choices=("csv", "json", "both"), default="both")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, args.scenario)
        man = run_scenario(cfg, args.out, args.format)
    except ConfigError as exc:
        print(f"prandtl-lab: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"prandtl-lab: {exc}", file=sys.stderr)
        return 3
    status = "PASS" if man.passed else "FAIL"
    print(f"{cfg.scenario}: {status} ({len(man.files)} files in {args.out})")
    if man.error:
        print(f"  error: {man.error}", file=sys.stderr)
    return 0 if man.passed else 1


if __name__ == "__main__":
    sys.exit(main())
