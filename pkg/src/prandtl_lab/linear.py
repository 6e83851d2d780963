"""Linearized Prandtl equation around shear flows, one Fourier mode at a time.

For each tangential frequency k the amplitude w_hat(t, Y) solves

    w_t + ik u_s w - ik u_s' int_0^Y w - w_YY = 0,   w(0) = w(Y_max) = 0.

Diffusion is Crank-Nicolson; the transport and nonlocal terms are explicit
(Adams-Bashforth 2, Heun on the first step).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    Field2D,
    Grid1D,
    WeightedNormSpec,
    cumulative_integral,
    diff_x,
    diff_y,
    integrate_y,
    mode_l2,
    real_mode_norm,
)
from .shear import ShearProfile, cn_diffusion_rhs, cn_solve, evolve_heat, heat_step_bands, shear_admissibility

log = logging.getLogger(__name__)

DEFAULT_CFL = 0.05
TRANSIENT_FRACTION = 0.2
GRONWALL_TOL = 1e-2


class BlowUpError(FloatingPointError):
    def __init__(self, t, k):
        super().__init__(f"blow-up at t={t:.6g} for k={k}")
        self.t = t
        self.k = k


class DecayedToZeroError(ValueError):
    pass


@dataclass(frozen=True)
class FourierModeState:
    k: int
    t: float
    grid: Grid1D
    w_hat: np.ndarray
    # explicit term and step size of the previous step (AB2 history)
    explicit_prev: np.ndarray | None = field(default=None, repr=False, compare=False)
    dt_prev: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w_hat, dtype=complex)
        if w.shape != (self.grid.n,):
            raise ValueError("w_hat does not match the grid")
        if w[0] != 0:
            raise ValueError("w_hat must vanish at the wall")
        object.__setattr__(self, "w_hat", w)


@dataclass
class ModeTrajectory:
    k: int
    times: np.ndarray
    norms: np.ndarray
    states: dict = field(default_factory=dict, repr=False)
    blew_up: bool = False
    blowup_time: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if np.any(self.norms < 0):
            raise ValueError("trajectory norms must be non-negative")

    def last_stored(self) -> np.ndarray:
        return self.states[max(self.states)]


@dataclass(frozen=True)
class GrowthFitResult:
    ks: tuple
    sigma: tuple
    a: float
    b: float
    r2: float
    excluded: tuple = ()

    @property
    def theta0_proxy(self) -> float:
        return self.a

    def sigma_at(self, k) -> float:
        return self.sigma[self.ks.index(k)]


@dataclass(frozen=True)
class GronwallReport:
    C: float
    k: int
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin <= 1.0 + GRONWALL_TOL


class ShearHistory:
    """Shear layer provider on a fixed time lattice, evolved lazily by CN.

    ``history(t)`` returns ``(u_s, du_s)`` at time ``t``; times between
    lattice points are linearly interpolated.
    """

    def __init__(self, profile: ShearProfile, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.t0 = profile.t
        self._profiles = [profile]
        self._A, self._B = heat_step_bands(profile.grid, self.dt)

    def profile_at_index(self, j: int) -> ShearProfile:
        while len(self._profiles) <= j:
            last = self._profiles[-1]
            u = last.u_s[None, :]
            inner = cn_solve(self._A, cn_diffusion_rhs(u, self._B), 0.0, last.U)
            nxt = np.empty(last.grid.n)
            nxt[0] = 0.0
            nxt[1:-1] = inner[0]
            nxt[-1] = last.U
            self._profiles.append(last.at_time(self.t0 + len(self._profiles) * self.dt, nxt))
        return self._profiles[j]

    def profile(self, t: float) -> ShearProfile:
        s = (t - self.t0) / self.dt
        j = int(round(s))
        if abs(s - j) < 1e-9:
            return self.profile_at_index(max(j, 0))
        j = int(np.floor(s))
        a = self.profile_at_index(j)
        b = self.profile_at_index(j + 1)
        frac = s - j
        return a.at_time(t, (1 - frac) * a.u_s + frac * b.u_s)

    def __call__(self, t: float):
        p = self.profile(t)
        return p.u_s, p.du_s

    def profiles(self):
        return list(self._profiles)


class FrozenShear:
    """Time-independent shear provider (no heat evolution)."""

    def __init__(self, profile: ShearProfile):
        self._p = profile

    def __call__(self, t):
        return self._p.u_s, self._p.du_s

    def profiles(self):
        return [self._p]


def mode_dt(k, profile: ShearProfile, cfl: float = DEFAULT_CFL, dt_max: float = 1e-2) -> float:
    """Advective step limit cfl / (|k| sup |u_s|), capped at ``dt_max``."""
    kmax = np.max(np.abs(np.atleast_1d(k)))
    speed = np.max(np.abs(profile.u_s))
    if kmax == 0 or speed == 0:
        return dt_max
    return min(dt_max, cfl / (kmax * speed))


def default_initial_mode(grid: Grid1D) -> np.ndarray:
    """Y exp(-(Y-2)^2), scaled to unit L2 in Y."""
    y = grid.nodes
    w = y * np.exp(-((y - 2.0) ** 2))
    w[-1] = 0.0
    return (w / mode_l2(w, grid)).astype(complex)


def mode_operator(w: np.ndarray, ks: np.ndarray, u_s: np.ndarray, du_s: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Explicit part -ik(u_s w - u_s' int_0^Y w) for rows of w with frequencies ks."""
    kk = (1j * np.asarray(ks, dtype=float))[:, None]
    return -kk * (u_s * w - du_s * cumulative_integral(w, grid))


def mode_rhs(w, k, u_s, du_s, grid: Grid1D) -> np.ndarray:
    """Full time derivative of one mode: explicit part plus w_YY."""
    w = np.asarray(w, dtype=complex)
    lin = mode_operator(w[None, :], np.array([k]), u_s, du_s, grid)[0]
    out = lin + diff_y(w, grid, 2)
    out[0] = 0.0
    out[-1] = 0.0
    return out


def _imex_step(w, ks, t, dt, shear_at, grid, E_prev, bands):
    """Advance rows of w by one step; returns (w_new, E_now)."""
    A, B = bands
    u_s, du_s = shear_at(t)
    E = mode_operator(w, ks, u_s, du_s, grid)
    if E_prev is None:
        # Heun start: predictor with E(t), corrector with the average
        rhs = cn_diffusion_rhs(w, B) + dt * E[:, 1:-1]
        pred = np.zeros_like(w)
        pred[:, 1:-1] = cn_solve(A, rhs, 0.0, 0.0)
        u1, du1 = shear_at(t + dt)
        E_star = 0.5 * (E + mode_operator(pred, ks, u1, du1, grid))
    else:
        E_star = 1.5 * E - 0.5 * E_prev
    rhs = cn_diffusion_rhs(w, B) + dt * E_star[:, 1:-1]
    new = np.zeros_like(w)
    new[:, 1:-1] = cn_solve(A, rhs, 0.0, 0.0)
    return new, E


def step_mode(state: FourierModeState, shear_at, dt: float) -> FourierModeState:
    """One IMEX step of the per-mode linearized equation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    E_prev = state.explicit_prev
    if E_prev is not None and state.dt_prev is not None and not np.isclose(state.dt_prev, dt, rtol=1e-12):
        E_prev = None
    bands = heat_step_bands(state.grid, dt)
    new, E = _imex_step(
        state.w_hat[None, :],
        np.array([state.k]),
        state.t,
        dt,
        shear_at,
        state.grid,
        None if E_prev is None else E_prev[None, :],
        bands,
    )
    if not np.all(np.isfinite(new)):
        raise BlowUpError(state.t + dt, state.k)
    return FourierModeState(state.k, state.t + dt, state.grid, new[0], E[0], dt)


def solve_modes(ks, w0s, shear_at, grid: Grid1D, t_span, dt: float, store_every: int = 0):
    """Evolve several modes side by side on a shared time lattice.

    Returns one ModeTrajectory per k. A mode that overflows is frozen with
    its partial history retained and ``blew_up`` set.
    """
    ks = np.asarray(ks)
    w = np.array(np.broadcast_to(np.asarray(w0s, dtype=complex), (ks.size, grid.n)))
    if np.any(w[:, 0] != 0):
        raise ValueError("initial data must vanish at the wall")
    s, t_end = map(float, t_span)
    if t_end < s:
        raise ValueError("t_span must be increasing")
    nsteps = int(np.ceil((t_end - s) / dt - 1e-9)) if t_end > s else 0
    h = (t_end - s) / nsteps if nsteps else dt
    norms = np.full((nsteps + 1, ks.size), np.nan)
    norms[0] = [mode_l2(row, grid) for row in w]
    times = s + h * np.arange(nsteps + 1)
    stored = [dict() for _ in ks]
    if store_every:
        for j in range(ks.size):
            stored[j][times[0]] = w[j].copy()
    alive = np.ones(ks.size, dtype=bool)
    blow_t = [None] * ks.size
    bands = heat_step_bands(grid, h)
    E_prev = None
    for n in range(1, nsteps + 1):
        t = times[n - 1]
        with np.errstate(over="ignore", invalid="ignore"):
            w_new, E = _imex_step(w, ks, t, h, shear_at, grid, E_prev, bands)
        bad = ~np.all(np.isfinite(w_new), axis=1) & alive
        for j in np.flatnonzero(bad):
            blow_t[j] = times[n]
            log.info("mode k=%s blew up at t=%.6g", ks[j], times[n])
        alive &= ~bad
        w_new[~alive] = 0.0
        E[~alive] = 0.0
        w, E_prev = w_new, E
        nrm = np.sqrt(integrate_y(np.abs(w) ** 2, grid))
        norms[n, alive] = nrm[alive]
        if store_every and (n % store_every == 0 or n == nsteps):
            for j in np.flatnonzero(alive):
                stored[j][times[n]] = w[j].copy()
    trajs = []
    for j, k in enumerate(ks):
        keep = np.isfinite(norms[:, j])
        trajs.append(
            ModeTrajectory(int(k), times[keep], norms[keep, j], stored[j], blow_t[j] is not None, blow_t[j])
        )
    return trajs


def solve_mode(k, w0, shear_at, grid: Grid1D, t_span, dt: float, store_every: int = 0) -> ModeTrajectory:
    """Realise T(s, t) w0 for a single frequency, with the L2 norm at every step."""
    return solve_modes([k], np.asarray(w0)[None, :], shear_at, grid, t_span, dt, store_every)[0]


def growth_rate(traj: ModeTrajectory, window=None) -> float:
    """Least-squares slope of log ||w_hat(t)|| over ``window`` (default: drop first 20%)."""
    times, norms = traj.times, traj.norms
    if window is None:
        t0, t1 = times[0], times[-1]
        window = (t0 + TRANSIENT_FRACTION * (t1 - t0), t1)
    sel = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    if sel.sum() < 2:
        raise ValueError("window holds fewer than two samples")
    if np.any(norms[sel] <= 0):
        raise DecayedToZeroError(f"mode k={traj.k} decayed to zero inside the window")
    slope, _ = np.polyfit(times[sel], np.log(norms[sel]), 1)
    return float(slope)


def fit_sqrt_law(ks, sigma):
    """Least-squares fit sigma = a sqrt(k) + b with R^2."""
    ks = np.asarray(ks, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if ks.size == 1:
        return float(sigma[0] / np.sqrt(ks[0])), 0.0, 1.0
    X = np.column_stack([np.sqrt(ks), np.ones_like(ks)])
    (a, b), *_ = np.linalg.lstsq(X, sigma, rcond=None)
    resid = sigma - X @ np.array([a, b])
    ss_tot = float(np.sum((sigma - sigma.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(resid @ resid) / ss_tot)
    return float(a), float(b), r2


def growth_scan(
    ks,
    profile: ShearProfile,
    horizon: float = 1.0,
    dt: float | None = None,
    w0=None,
    cfl: float = DEFAULT_CFL,
    evolve_shear: bool = True,
    return_trajectories: bool = False,
):
    """Measure sigma(k) for each k from the same initial shape and fit a sqrt(k) + b."""
    ks = [int(k) for k in ks]
    if any(k <= 0 for k in ks) or ks != sorted(ks):
        raise ValueError("ks must be positive and increasing")
    grid = profile.grid
    if dt is None:
        dt = mode_dt(max(ks), profile, cfl)
    if w0 is None:
        w0 = default_initial_mode(grid)
    shear_at = ShearHistory(profile, dt) if evolve_shear else FrozenShear(profile)
    trajs = solve_modes(ks, w0, shear_at, grid, (profile.t, profile.t + horizon), dt)
    sig, used, excluded = [], [], []
    for k, tr in zip(ks, trajs):
        try:
            sig.append(growth_rate(tr))
            used.append(k)
        except (DecayedToZeroError, ValueError):
            excluded.append(k)
    a, b, r2 = fit_sqrt_law(used, sig) if used else (np.nan, np.nan, 0.0)
    result = GrowthFitResult(tuple(used), tuple(sig), a, b, r2, tuple(excluded))
    if return_trajectories:
        return result, trajs
    return result


def gronwall_check(traj: ModeTrajectory, C, k=None) -> GronwallReport:
    """margin = max_t ||w(t)|| / (e^{C|k|(t-t0)} ||w(t0)||).

    ``C`` is either a number or an iterable of ShearProfiles, in which case the
    sup of shear_admissibility over them is used.
    """
    if not np.isscalar(C):
        C = max(shear_admissibility(p) for p in C)
    k = traj.k if k is None else k
    n0 = traj.norms[0]
    if n0 == 0:
        return GronwallReport(float(C), int(k), 0.0)
    env = np.exp(C * abs(k) * (traj.times - traj.times[0])) * n0
    return GronwallReport(float(C), int(k), float(np.max(traj.norms / env)))


@dataclass(frozen=True)
class AmplificationCell:
    shift: float
    k: int
    ratio: float
    blew_up: bool = False


def amplification_experiment(
    profile0: ShearProfile,
    shifts,
    ks,
    spec: WeightedNormSpec,
    horizon: float,
    dt: float | None = None,
    w0=None,
    heat_dt: float = 1e-3,
    cfl: float = DEFAULT_CFL,
):
    """Amplification max_t ||u(t)||_L2 of unit-normalized data around u_{s0}(. + s).

    The physical datum is u0 = 2 Re(w0(Y) e^{ikx}) scaled so that
    ||e^{alpha Y} u0||_{H^m} = 1; the L2 norm of the evolved real field is
    2 sqrt(pi) ||w_hat(t)||.
    """
    grid = profile0.grid
    shape = default_initial_mode(grid) if w0 is None else np.asarray(w0, dtype=complex)
    cells = []
    for s in shifts:
        if s < 0:
            raise ValueError("shifts must be non-negative")
        base = evolve_heat(profile0, profile0.t + s, heat_dt) if s > 0 else profile0
        step = mode_dt(max(ks), base, cfl) if dt is None else dt
        shear_at = ShearHistory(base, step)
        data = []
        for k in ks:
            nrm = real_mode_norm(shape, k, grid, spec)
            data.append(shape / nrm if nrm > 0 else shape)
        trajs = solve_modes(ks, np.array(data), shear_at, grid, (base.t, base.t + horizon), step)
        for k, tr in zip(ks, trajs):
            ratio = float(np.max(tr.norms)) * 2.0 * np.sqrt(np.pi) if tr.norms.size else 0.0
            cells.append(AmplificationCell(float(s), int(k), ratio, tr.blew_up))
    return cells


def nonlinear_residual(u_pert: Field2D, delta: float) -> float:
    """delta |int N(u) phi| over T x [0, Y_max/2], N(u) = -u u_x - v u_Y, v = -int_0^Y u_x."""
    u = np.asarray(u_pert.values, dtype=float)
    xg, yg = u_pert.xgrid, u_pert.ygrid
    ux = diff_x(u, xg)
    v = -cumulative_integral(ux, yg)
    N = -u * ux - v * diff_y(u, yg, 1)
    phi = bump_weight(xg, yg)
    total = xg.dx * np.sum(integrate_y(N * phi, yg))
    return float(abs(delta) * abs(total))


def bump_weight(xgrid, ygrid) -> np.ndarray:
    """Smooth bump compactly supported in Y in (0, Y_max/2), modulated in x."""
    y = ygrid.nodes
    L = 0.5 * ygrid.y_max
    s = y / L
    inside = (s > 0) & (s < 1)
    b = np.zeros_like(y)
    b[inside] = np.exp(-1.0 / (s[inside] * (1.0 - s[inside])) + 4.0)
    return (1.0 + 0.5 * np.cos(xgrid.nodes))[:, None] * b[None, :]
