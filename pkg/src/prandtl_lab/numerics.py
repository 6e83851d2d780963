"""Grids, finite differences, quadrature and weighted Sobolev norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid


class WeightIncompatibleError(ValueError):
    """Raised when an exponential weight overwhelms the decay of a field."""


TANH_STRETCH = 2.0


@dataclass(frozen=True)
class Grid1D:
    """Nodes on the truncated half-line [0, y_max]."""

    nodes: np.ndarray
    grading: str = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 16:
            raise ValueError("Grid1D needs at least 16 nodes")
        if nodes[0] != 0.0:
            raise ValueError("first node must be 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def y_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        h = self.spacing
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))


@dataclass(frozen=True)
class PeriodicGridX:
    """Uniform grid on the torus [0, 2*pi)."""

    n_x: int

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 4 or self.n_x % 2:
            raise ValueError("n_x must be an even integer >= 4")

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n_x

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x)


@dataclass(frozen=True)
class WeightedNormSpec:
    """Descriptor of the norm ||e^{alpha Y} f||_{H^m}."""

    m: int = 0
    alpha: float = 0.0
    weighted: bool = True

    def __post_init__(self):
        if int(self.m) != self.m or not 0 <= self.m <= 3:
            raise ValueError("Sobolev order m must be an integer in [0, 3]")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")

    @property
    def rate(self) -> float:
        return self.alpha if self.weighted else 0.0


@dataclass(frozen=True)
class Field2D:
    """Samples on PeriodicGridX x Grid1D, stored as an (n_x, n_y) array."""

    values: np.ndarray
    xgrid: PeriodicGridX
    ygrid: Grid1D
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.xgrid.n_x, self.ygrid.n):
            raise ValueError(
                f"values shape {values.shape} does not match grids "
                f"({self.xgrid.n_x}, {self.ygrid.n})"
            )
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "Field2D":
        return Field2D(values, self.xgrid, self.ygrid)


def build_grid(y_max: float, n: int, grading: Literal["uniform", "tanh-stretched"] = "uniform") -> Grid1D:
    """Build a half-line grid; the tanh map clusters nodes near the wall."""
    if not np.isfinite(y_max) or y_max <= 0:
        raise ValueError(f"y_max must be finite and positive, got {y_max!r}")
    if int(n) != n or n < 16:
        raise ValueError(f"n must be an integer >= 16, got {n!r}")
    xi = np.linspace(0.0, 1.0, int(n))
    if grading == "uniform":
        nodes = y_max * xi
    elif grading == "tanh-stretched":
        s = TANH_STRETCH
        nodes = y_max * (1.0 - np.tanh(s * (1.0 - xi)) / np.tanh(s))
        nodes[0] = 0.0
    else:
        raise ValueError(f"unknown grading {grading!r}")
    nodes[-1] = y_max
    return Grid1D(nodes, grading)


def fd_weights(x0: float, xs: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0`` (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _stencils(nodes: np.ndarray, order: int):
    """Per-node (offset, weights) for the Y-derivative operator."""
    n = nodes.size
    interior = np.empty((n, 3))
    for i in range(1, n - 1):
        interior[i] = fd_weights(nodes[i], nodes[i - 1 : i + 2], order)
    width = 3 if order == 1 else 4
    left = fd_weights(nodes[0], nodes[:width], order)
    right = fd_weights(nodes[-1], nodes[-width:], order)
    return interior, left, right


_STENCIL_CACHE: dict = {}


def _cached_stencils(grid: Grid1D, order: int):
    key = (grid.nodes.tobytes(), order)
    hit = _STENCIL_CACHE.get(key)
    if hit is None:
        if len(_STENCIL_CACHE) > 64:
            _STENCIL_CACHE.clear()
        hit = _stencils(grid.nodes, order)
        _STENCIL_CACHE[key] = hit
    return hit


def diff_y(values, grid: Grid1D, order: int = 1) -> np.ndarray:
    """Y-derivative along the last axis.

    Centered three-point stencils in the interior; one-sided stencils
    (three points for order 1, four for order 2) at the two ends, all
    exact on quadratics.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    if isinstance(values, Field2D):
        return values.with_values(diff_y(values.values, values.ygrid, order))
    f = np.asarray(values)
    if f.shape[-1] != grid.n:
        raise ValueError("last axis does not match the grid")
    interior, left, right = _cached_stencils(grid, order)
    out = np.empty(f.shape, dtype=np.result_type(f, np.float64))
    w = interior[1:-1]
    out[..., 1:-1] = w[:, 0] * f[..., :-2] + w[:, 1] * f[..., 1:-1] + w[:, 2] * f[..., 2:]
    k = left.size
    out[..., 0] = np.tensordot(f[..., :k], left, axes=([-1], [0]))
    out[..., -1] = np.tensordot(f[..., -k:], right, axes=([-1], [0]))
    return out


def second_derivative_bands(grid: Grid1D):
    """Tridiagonal bands (lower, diag, upper) of the interior 3-point d2/dY2."""
    nodes = grid.nodes
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    lower = 2.0 / (hm * (hm + hp))
    upper = 2.0 / (hp * (hm + hp))
    diag = -(lower + upper)
    return lower, diag, upper


def cumulative_integral(values, grid: Grid1D) -> np.ndarray:
    """Trapezoidal running integral from Y = 0 along the last axis."""
    f = np.asarray(values)
    if not np.all(np.isfinite(f)):
        raise ValueError("cumulative_integral received non-finite input")
    return cumulative_trapezoid(f, grid.nodes, axis=-1, initial=0.0)


def integrate_y(values, grid: Grid1D) -> np.ndarray:
    return trapezoid(np.asarray(values), grid.nodes, axis=-1)


def diff_x(values, xgrid: PeriodicGridX, order: int = 1, spectral: bool = True) -> np.ndarray:
    """x-derivative along axis 0 on the torus."""
    f = np.asarray(values)
    if spectral:
        k = xgrid.wavenumbers
        mult = (1j * k) ** order
        if order % 2 == 1:
            # the Nyquist mode has no well-defined odd derivative
            mult[xgrid.n_x // 2] = 0.0
        shape = (xgrid.n_x,) + (1,) * (f.ndim - 1)
        out = np.fft.ifft(mult.reshape(shape) * np.fft.fft(f, axis=0), axis=0)
        return out if np.iscomplexobj(f) else out.real
    out = f
    for _ in range(order):
        out = (np.roll(out, -1, axis=0) - np.roll(out, 1, axis=0)) / (2.0 * xgrid.dx)
    return out


def _y_derivatives(g: np.ndarray, grid: Grid1D, upto: int) -> list:
    ders = [g]
    if upto >= 1:
        ders.append(diff_y(g, grid, 1))
    if upto >= 2:
        ders.append(diff_y(g, grid, 2))
    if upto >= 3:
        ders.append(diff_y(ders[2], grid, 1))
    return ders


def _l2(values, xgrid: PeriodicGridX, ygrid: Grid1D) -> float:
    dens = integrate_y(np.abs(values) ** 2, ygrid)
    return float(np.sqrt(xgrid.dx * np.sum(dens)))


def _weighted(values: np.ndarray, grid: Grid1D, rate: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.exp(rate * grid.nodes) * values
    if not np.all(np.isfinite(g)):
        raise WeightIncompatibleError("weight-incompatible field: e^{alpha Y} f is not finite")
    return g


def weighted_norm(field: Field2D, spec: WeightedNormSpec, spectral: bool = True) -> float:
    """Discrete ||e^{alpha Y} f||_{H^m}: sum over i + j <= m of ||d_x^i d_Y^j (e^{alpha Y} f)||."""
    f = np.asarray(field.values)
    if not np.all(np.isfinite(f)):
        raise ValueError("field must be finite")
    g = _weighted(f, field.ygrid, spec.rate)
    total = 0.0
    ydirs = _y_derivatives(g, field.ygrid, spec.m)
    for j, gj in enumerate(ydirs):
        gij = gj
        for i in range(0, spec.m - j + 1):
            if i > 0:
                gij = diff_x(gij, field.xgrid, 1, spectral=spectral)
            total += _l2(gij, field.xgrid, field.ygrid)
    return total


def mode_l2(w_hat, grid: Grid1D) -> float:
    """L2 norm in Y of one Fourier amplitude."""
    return float(np.sqrt(integrate_y(np.abs(np.asarray(w_hat)) ** 2, grid)))


def real_mode_norm(w_hat, k: int, grid: Grid1D, spec: WeightedNormSpec) -> float:
    """weighted_norm of the real field 2 Re(w_hat(Y) e^{ikx}) without sampling x.

    For k != 0 the torus integral of |2 Re(g e^{ikx})|^2 is 2*pi*2|g|^2,
    and each x-derivative multiplies by |k|.
    """
    g = _weighted(np.asarray(w_hat), grid, spec.rate)
    factor = np.sqrt(4.0 * np.pi) if k != 0 else np.sqrt(2.0 * np.pi) * 2.0
    total = 0.0
    ak = abs(k)
    for j, gj in enumerate(_y_derivatives(g, grid, spec.m)):
        base = mode_l2(gj if k != 0 else gj.real, grid)
        for i in range(0, spec.m - j + 1):
            if i > 0 and k == 0:
                break
            total += factor * base * ak**i
    return total


def mode_to_field(w_hat, k: int, xgrid: PeriodicGridX, ygrid: Grid1D) -> Field2D:
    """Sample the real field 2 Re(w_hat e^{ikx})."""
    phase = np.exp(1j * k * xgrid.nodes)[:, None]
    return Field2D(2.0 * np.real(phase * np.asarray(w_hat)[None, :]), xgrid, ygrid)
