"""Stability audits for pairs of monotone Crocco runs.

The weighted distance I(t) between two Crocco solutions, the physical
difference z = u1 - u2 with its energy balance, the z_x control and the
H^1 / weighted-H^2 Lipschitz ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .crocco import CroccoState, from_crocco
from .numerics import (
    Field2D,
    Grid1D,
    WeightedNormSpec,
    WeightIncompatibleError,
    cumulative_integral,
    diff_x,
    diff_y,
    integrate_y,
    weighted_norm,
)

BETA_MAX = 3.0


@dataclass(frozen=True)
class StabilityFunctionalSpec:
    beta: float = 2.5
    k_w: float = 8.0
    # the e^{-k_w eta} multiplier is a proof device; off unless asked for
    use_weight: bool = False

    def __post_init__(self):
        if not (0.0 <= self.beta < BETA_MAX):
            raise ValueError(f"beta must be < 3 (and >= 0), got {self.beta}")
        if not (self.k_w >= 0.0 and np.isfinite(self.k_w)):
            raise ValueError("k_w must be non-negative")


@dataclass(frozen=True)
class DifferenceState:
    z: Field2D
    h: Field2D


@dataclass(frozen=True)
class FunctionalTrace:
    times: np.ndarray
    I: np.ndarray
    C_hat: float
    C_fit: float
    C_fit_stderr: float
    prefactor: float
    identical: bool = False

    @property
    def ratio(self) -> np.ndarray:
        if self.identical:
            return np.zeros_like(self.I)
        return self.I / self.I[0]

    @property
    def passed(self) -> bool:
        if self.identical:
            return True
        bound = np.exp(self.C_hat * self.times) * (1.0 + 1e-12)
        return bool(np.all(np.isfinite(self.I)) and np.all(self.ratio <= bound))


@dataclass(frozen=True)
class ZxBoundReport:
    ratio: float
    zx_sq: float
    rhs: float
    skipped: bool = False
    reason: str = ""

    @property
    def degenerate(self) -> bool:
        return self.rhs == 0.0 and self.zx_sq == 0.0

    @property
    def passed(self) -> bool:
        return self.skipped or self.degenerate or bool(np.isfinite(self.ratio))


def _check_shared(s1: CroccoState, s2: CroccoState):
    if s1.grid != s2.grid:
        raise ValueError("states must share a Crocco grid")


def stability_functional(w1: CroccoState, w2: CroccoState, spec: StabilityFunctionalSpec = StabilityFunctionalSpec()) -> float:
    """I = int int (|d_x(w1 - w2)|^2 + |w1 - w2|^2) / (1 - eta)^beta.

    Trapezoid over the resolved nodes; the last cell [1 - delta, 1] uses the
    linear vanishing of the difference, which integrates in closed form.
    """
    _check_shared(w1, w2)
    g = w1.grid
    eta = g.eta[:-1]
    d = w1.w[:, :-1] - w2.w[:, :-1]
    with np.errstate(invalid="ignore", over="ignore"):
        dx = diff_x(w1.w[:, :-1], g.xgrid) - diff_x(w2.w[:, :-1], g.xgrid)
        sq = d**2 + dx**2
    weight = (1.0 - eta) ** (-spec.beta)
    if spec.use_weight:
        weight = weight * np.exp(-spec.k_w * eta)
    f = sq * weight
    if not np.all(np.isfinite(f)):
        ix, ie = np.argwhere(~np.isfinite(f))[0]
        raise WeightIncompatibleError(
            f"weight-incompatible states: non-finite integrand at x={g.xgrid.nodes[ix]:.4g}, eta={eta[ie]:.6g}"
        )
    body = np.trapezoid(f, eta, axis=1)
    # difference ~ c (1 - eta) on the end cell
    c2 = sq[:, -1] / g.delta**2
    end = c2 * g.delta ** (3.0 - spec.beta) / (3.0 - spec.beta)
    if spec.use_weight:
        end = end * np.exp(-spec.k_w * (1.0 - g.delta))
    return float(np.sum(body + end) * g.xgrid.dx)


def track_functional(run1, run2, spec: StabilityFunctionalSpec = StabilityFunctionalSpec()) -> FunctionalTrace:
    """I(t) along two aligned runs with two growth constants.

    ``C_hat`` is the smallest rate with I(t) <= I(0) e^{C t} on the samples;
    ``C_fit`` is the least-squares slope of log(I/I(0)) against t.
    """
    if len(run1) != len(run2):
        raise ValueError("runs must have the same number of stored states")
    times = np.array([s.t for s in run1])
    if not np.allclose(times, [s.t for s in run2], rtol=0, atol=1e-12):
        raise ValueError("runs must share stored times")
    I = np.array([stability_functional(a, b, spec) for a, b in zip(run1, run2)])
    if I[0] == 0.0:
        if np.all(I == 0.0):
            return FunctionalTrace(times, I, 0.0, 0.0, 0.0, 1.0, identical=True)
        return FunctionalTrace(times, I, np.inf, np.inf, np.inf, np.inf)
    logr = np.log(I / I[0])
    rel = times - times[0]
    later = rel > 0
    C_hat = float(np.max(logr[later] / rel[later])) if np.any(later) else 0.0
    if np.count_nonzero(later) >= 2:
        fit = stats.linregress(rel, logr)
        C_fit, err = float(fit.slope), float(fit.stderr)
    else:
        C_fit, err = C_hat, 0.0
    prefactor = float(np.exp(np.max(logr - C_fit * rel)))
    return FunctionalTrace(times, I, C_hat, C_fit, err, prefactor)


def difference_fields(u1: Field2D, u2: Field2D) -> DifferenceState:
    """z = u1 - u2 and h = -int_0^y z_x from incompressibility."""
    if u1.xgrid != u2.xgrid or u1.ygrid != u2.ygrid:
        raise ValueError("fields must share grids")
    z = u1.values - u2.values
    h = -cumulative_integral(diff_x(z, u1.xgrid), u1.ygrid)
    return DifferenceState(u1.with_values(z), u1.with_values(h))


def _xy_integral(values: np.ndarray, field: Field2D) -> float:
    return float(np.sum(integrate_y(values, field.ygrid)) * field.xgrid.dx)


@dataclass(frozen=True)
class EnergyBalance:
    times: np.ndarray
    residual: np.ndarray
    terms: dict


def energy_identity_residual(u1_run, u2_run, times, k_exp: float = 0.0, floor: float = 1e-12) -> EnergyBalance:
    """Discrete check of 1/2 d/dt int z^2 + int[(k + u2_x) z^2 + u2_y h z + z_y^2] = 0.

    ``u*_run`` are physical fields sampled at uniformly spaced ``times``;
    z carries the factor e^{-k t}. The derivative uses centred differences,
    so the residual is reported at interior samples only. It is normalised
    by the largest term or by ``floor`` times the base-flow shear energy,
    whichever is larger, so runs differing only by round-off give ~0.
    """
    times = np.asarray(times, dtype=float)
    if len(u1_run) != len(u2_run) or len(u1_run) != times.size or times.size < 3:
        raise ValueError("need at least three aligned samples")
    f0 = u2_run[0]
    scale_ref = _xy_integral(diff_y(f0.values, f0.ygrid) ** 2, f0)
    energy, damp, adv, coup, diss = [], [], [], [], []
    for t, a, b in zip(times, u1_run, u2_run):
        dz = difference_fields(a, b)
        e = np.exp(-k_exp * t)
        z = dz.z.values * e
        h = dz.h.values * e
        u2x = diff_x(b.values, b.xgrid)
        u2y = diff_y(b.values, b.ygrid)
        zy = diff_y(z, b.ygrid)
        energy.append(0.5 * _xy_integral(z**2, b))
        damp.append(k_exp * _xy_integral(z**2, b))
        adv.append(_xy_integral(u2x * z**2, b))
        coup.append(_xy_integral(u2y * h * z, b))
        diss.append(_xy_integral(zy**2, b))
    energy = np.array(energy)
    dEdt = np.gradient(energy, times)
    terms = {
        "dEdt": dEdt[1:-1],
        "k_z2": np.array(damp)[1:-1],
        "u2x_z2": np.array(adv)[1:-1],
        "u2y_hz": np.array(coup)[1:-1],
        "zy2": np.array(diss)[1:-1],
    }
    stack = np.vstack(list(terms.values()))
    lhs = stack.sum(axis=0)
    scale = np.maximum(np.max(np.abs(stack), axis=0), floor * scale_ref)
    with np.errstate(invalid="ignore"):
        res = np.where(scale > 0, np.abs(lhs) / np.where(scale > 0, scale, 1.0), 0.0)
    return EnergyBalance(times[1:-1], res, terms)


def zx_bound_check(
    dz: DifferenceState,
    w1: CroccoState,
    w2: CroccoState,
    spec: StabilityFunctionalSpec,
    theta1: float,
    theta2: float,
) -> ZxBoundReport:
    """||z_x||^2 against ||z||^2 + ||y z_y||^2 + I, valid when (3 - beta) theta2 <= theta1."""
    if (3.0 - spec.beta) * theta2 > theta1:
        return ZxBoundReport(
            np.nan, np.nan, np.nan, skipped=True,
            reason=f"(3 - beta) theta2 = {(3.0 - spec.beta) * theta2:.4g} exceeds theta1 = {theta1:.4g}",
        )
    z = dz.z
    zx = diff_x(z.values, z.xgrid)
    zy = diff_y(z.values, z.ygrid)
    y = z.ygrid.nodes[None, :]
    zx_sq = _xy_integral(zx**2, z)
    rhs = _xy_integral(z.values**2, z) + _xy_integral((y * zy) ** 2, z) + stability_functional(w1, w2, spec)
    if rhs == 0.0:
        ratio = 0.0 if zx_sq == 0.0 else np.inf
    else:
        ratio = zx_sq / rhs
    return ZxBoundReport(float(ratio), zx_sq, rhs)


def lipschitz_alpha(beta: float, theta2: float) -> float:
    """Exponential weight rate (beta - 1) theta2 / 2 of the data norm."""
    return 0.5 * (beta - 1.0) * theta2


def stability_ratio(run1, run2, ygrid: Grid1D, alpha: float, horizon: float | None = None, u01=None, u02=None) -> float:
    """sup_t ||u1 - u2||_{H^1} / ||e^{alpha y}(u01 - u02)||_{H^2}.

    Fields come from ``from_crocco`` on ``ygrid``; ``u01``/``u02`` override the
    data used in the denominator (e.g. analytic initial fields).
    """
    if len(run1) != len(run2):
        raise ValueError("runs must have the same number of stored states")
    a0 = u01 if u01 is not None else from_crocco(run1[0], ygrid)
    b0 = u02 if u02 is not None else from_crocco(run2[0], ygrid)
    data = a0.with_values(a0.values - b0.values)
    if np.all(data.values == 0.0):
        return 0.0
    den = weighted_norm(data, WeightedNormSpec(m=2, alpha=alpha))
    num_spec = WeightedNormSpec(m=1, alpha=0.0, weighted=False)
    sup = 0.0
    for s1, s2 in zip(run1, run2):
        if horizon is not None and s1.t > horizon + 1e-12:
            break
        z = difference_fields(from_crocco(s1, ygrid), from_crocco(s2, ygrid)).z
        sup = max(sup, weighted_norm(z, num_spec))
    return sup / den
