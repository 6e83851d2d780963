"""Shear layers u_s(t, Y): construction, heat evolution and admissibility data."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erf

from . import _accel
from .numerics import (
    Grid1D,
    PeriodicGridX,
    diff_x,
    diff_y,
    integrate_y,
    second_derivative_bands,
)

DEFAULT_BUMP = 0.5


class HeatSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShearProfile:
    t: float
    grid: Grid1D
    u_s: np.ndarray
    U: float
    du_s: np.ndarray = field(init=False, repr=False)
    d2u_s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u_s, dtype=float)
        if u.shape != (self.grid.n,):
            raise ValueError("u_s does not match the grid")
        if not np.all(np.isfinite(u)):
            raise ValueError("u_s must be finite")
        if u[0] != 0.0:
            raise ValueError("shear profile must vanish at the wall")
        if abs(u[-1] - self.U) > 1e-6 * abs(self.U):
            raise ValueError(f"u_s(Y_max) = {u[-1]!r} is not within 1e-6 of U = {self.U!r}")
        u.setflags(write=False)
        object.__setattr__(self, "u_s", u)
        object.__setattr__(self, "du_s", diff_y(u, self.grid, 1))
        object.__setattr__(self, "d2u_s", diff_y(u, self.grid, 2))

    def at_time(self, t: float, u_s) -> "ShearProfile":
        return ShearProfile(t, self.grid, u_s, self.U)


@dataclass(frozen=True)
class CriticalPointReport:
    locations: tuple
    curvatures: tuple

    def __len__(self):
        return len(self.locations)


@dataclass(frozen=True)
class OuterFlow:
    """Euler trace U(t, x) sampled on (times, x) with derived P_x."""

    times: np.ndarray
    xgrid: PeriodicGridX
    U: np.ndarray
    U_x: np.ndarray
    U_t: np.ndarray
    P_x: np.ndarray

    @classmethod
    def constant(cls, xgrid: PeriodicGridX, U: float = 1.0) -> "OuterFlow":
        return bernoulli_pressure(np.full((1, xgrid.n_x), float(U)), xgrid)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.U_x == 0.0) and np.all(self.U_t == 0.0))

    def sample(self, t: float):
        """(U, U_x, U_t) rows at time t, linear in t between samples."""
        if self.times.size == 1:
            return self.U[0], self.U_x[0], self.U_t[0]
        tt = np.clip(t, self.times[0], self.times[-1])
        j = int(np.clip(np.searchsorted(self.times, tt) - 1, 0, self.times.size - 2))
        s = (tt - self.times[j]) / (self.times[j + 1] - self.times[j])

        def lerp(a):
            return (1.0 - s) * a[j] + s * a[j + 1]

        return lerp(self.U), lerp(self.U_x), lerp(self.U_t)


def read_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column whitespace table (Y, value); '#' starts a comment."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
    return data[:, 0], data[:, 1]


def make_profile(kind: str, grid: Grid1D, **params) -> ShearProfile:
    """Build a shear layer on ``grid``.

    kinds: ``erf_monotone`` (U, t0), ``gd_nonmonotone`` (U, c),
    ``custom_table`` (Y, u, or path).
    """
    y = grid.nodes
    t = float(params.get("t", 0.0))
    if kind == "erf_monotone":
        U = float(params.get("U", 1.0))
        t0 = float(params.get("t0", 1.0))
        if not (np.isfinite(U) and np.isfinite(t0)) or t0 <= 0:
            raise ValueError("erf_monotone needs finite U and t0 > 0")
        u = U * erf(y / (2.0 * np.sqrt(t0)))
    elif kind == "gd_nonmonotone":
        U = float(params.get("U", 1.0))
        c = float(params.get("c", DEFAULT_BUMP))
        if not (np.isfinite(U) and np.isfinite(c)) or c <= 0:
            raise ValueError("gd_nonmonotone needs bump amplitude c > 0")
        u = U * (1.0 - np.exp(-y)) + c * y**2 * np.exp(-y)
    elif kind == "custom_table":
        if "path" in params:
            ys, us = read_table(params["path"])
        else:
            ys, us = np.asarray(params["Y"], float), np.asarray(params["u"], float)
        if not (np.all(np.isfinite(ys)) and np.all(np.isfinite(us))):
            raise ValueError("custom_table samples must be finite")
        if ys.size == y.size and np.array_equal(ys, y):
            u = us.copy()
        else:
            u = CubicSpline(ys, us)(y)
        U = float(params.get("U", u[-1]))
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    u = np.array(u, dtype=float)
    u[0] = 0.0
    if kind != "custom_table":
        u[-1] = U
    profile = ShearProfile(t, grid, u, U)
    if kind == "gd_nonmonotone":
        report = critical_points(profile)
        if len(report) != 1 or report.curvatures[0] == 0.0:
            raise ValueError(f"c = {c} does not give exactly one non-degenerate critical point")
    return profile


def gd_critical_point(U: float = 1.0, c: float = DEFAULT_BUMP) -> tuple[float, float]:
    """Analytic critical point of U(1-e^-Y) + cY^2 e^-Y and its curvature.

    u' = e^-Y (U + c(2Y - Y^2)) vanishes at Y = 1 + sqrt(1 + U/c).
    """
    y0 = 1.0 + np.sqrt(1.0 + U / c)
    curv = np.exp(-y0) * c * (2.0 - 2.0 * y0)
    return float(y0), float(curv)


def heat_step_bands(grid: Grid1D, dt: float):
    """Crank-Nicolson matrices for the interior unknowns with Dirichlet ends."""
    lo, di, up = second_derivative_bands(grid)
    half = 0.5 * dt
    A = (-half * lo, 1.0 - half * di, -half * up)
    B = (half * lo, 1.0 + half * di, half * up)
    return A, B


def cn_diffusion_rhs(f: np.ndarray, B) -> np.ndarray:
    """Explicit half of a CN step on full (m, n) columns, boundary nodes included."""
    lo, di, up = B
    return lo * f[:, :-2] + di * f[:, 1:-1] + up * f[:, 2:]


def cn_solve(A, rhs: np.ndarray, left, right) -> np.ndarray:
    """Solve the implicit half; ``left``/``right`` are the new Dirichlet values."""
    lo, di, up = A
    rhs = rhs.copy()
    rhs[:, 0] -= lo[0] * left
    rhs[:, -1] -= up[-1] * right
    m = rhs.shape[0]
    shape = (m, lo.size)
    return _accel.thomas_batch(
        np.broadcast_to(lo, shape), np.broadcast_to(di, shape), np.broadcast_to(up, shape), rhs
    )


def evolve_heat(profile: ShearProfile, t_target: float, dt: float, keep_every: int | None = None):
    """Crank-Nicolson evolution of u_t = u_YY with u(0) = 0, u(Y_max) = U.

    Returns the profile at ``t_target``; with ``keep_every`` set, returns
    the list of profiles every ``keep_every`` steps (first and last included).
    """
    if dt <= 0 or not np.isfinite(dt):
        raise ValueError("dt must be positive")
    if t_target < profile.t:
        raise ValueError("t_target must not precede the profile time")
    span = t_target - profile.t
    nsteps = int(np.ceil(span / dt - 1e-9)) if span > 0 else 0
    if nsteps == 0:
        return [profile] if keep_every else profile
    h = span / nsteps
    A, B = heat_step_bands(profile.grid, h)
    u = profile.u_s[None, :].copy()
    U = profile.U
    kept = [profile]
    for step in range(1, nsteps + 1):
        rhs = cn_diffusion_rhs(u, B)
        inner = cn_solve(A, rhs, 0.0, U)
        if not np.all(np.isfinite(inner)):
            raise HeatSolveError(f"non-finite heat solution at step {step}")
        u[:, 1:-1] = inner
        u[:, 0] = 0.0
        u[:, -1] = U
        if keep_every and (step % keep_every == 0 or step == nsteps):
            kept.append(profile.at_time(profile.t + step * h, u[0].copy()))
    if keep_every:
        return kept
    return profile.at_time(t_target, u[0].copy())


def critical_points(profile: ShearProfile) -> CriticalPointReport:
    """Interior sign changes of du_s, refined with a local quadratic fit."""
    y = profile.grid.nodes
    du = profile.du_s
    n = y.size
    locs, curvs = [], []
    # round-off in saturated far fields must not count as sign changes
    floor = 1e-8 * float(np.max(np.abs(du))) if du.size else 0.0
    signs = np.where(np.abs(du) <= floor, 0.0, np.sign(du))
    i = 1
    while i < n - 2:
        j = i + 1
        # step over exact zeros so a root sitting on a node is seen once
        while j < n - 2 and signs[j] == 0:
            j += 1
        if signs[i] != 0 and signs[j] != 0 and signs[i] != signs[j]:
            lo = min(max(i - 1, 0), n - 3)
            sl = slice(lo, lo + 3) if j == i + 1 else slice(i, j + 1)
            coeffs = np.polyfit(y[sl], du[sl], 2)
            roots = np.roots(coeffs)
            roots = roots[np.abs(roots.imag) < 1e-12].real
            roots = roots[(roots >= y[i]) & (roots <= y[j])]
            if roots.size:
                y0 = float(roots[0])
            else:
                y0 = float(y[i] - du[i] * (y[j] - y[i]) / (du[j] - du[i]))
            locs.append(y0)
            curvs.append(float(np.interp(y0, y, profile.d2u_s)))
        i = j
    return CriticalPointReport(tuple(locs), tuple(curvs))


def shear_admissibility(profile: ShearProfile) -> float:
    """sup |u_s| + int_0^inf Y |du_s|^2 dY."""
    integrand = profile.grid.nodes * profile.du_s**2
    if not np.all(np.isfinite(integrand)):
        raise ValueError("non-finite admissibility integrand")
    return float(np.max(np.abs(profile.u_s)) + integrate_y(integrand, profile.grid))


def bernoulli_pressure(U, xgrid: PeriodicGridX, times=None) -> OuterFlow:
    """OuterFlow with P_x = -(U_t + U U_x) from U samples of shape (n_t, n_x)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != xgrid.n_x:
        raise ValueError("U samples must have n_x columns")
    if times is None:
        times = np.arange(U.shape[0], dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size != U.shape[0]:
        raise ValueError("times must match the first axis of U")
    U_x = diff_x(U.T, xgrid).T
    if U.shape[0] >= 3:
        U_t = np.gradient(U, times, axis=0, edge_order=2)
    elif U.shape[0] == 2:
        U_t = np.repeat((U[1:] - U[:1]) / (times[1] - times[0]), 2, axis=0)
    else:
        U_t = np.zeros_like(U)
    P_x = -(U_t + U * U_x)
    return OuterFlow(times, xgrid, U, U_x, U_t, P_x)
