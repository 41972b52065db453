"""Shared value types: wave systems, spectra, moment hierarchies, rate fields."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

DEFAULT_KZ_CONSTANT = 13.98
CAPILLARY_ZF_EXPONENT = 17.0 / 4.0


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# dispersion laws and vertices (picklable callables)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawDispersion:
    """omega(k) = coefficient * k**exponent."""
    coefficient: float
    exponent: float

    def __call__(self, k):
        return self.coefficient * np.power(k, self.exponent)

    def derivative(self, k):
        return self.coefficient * self.exponent * np.power(k, self.exponent - 1.0)

    def inverse(self, w):
        return np.power(np.asarray(w, dtype=float) / self.coefficient, 1.0 / self.exponent)


@dataclass(frozen=True)
class ConstantVertex:
    value: float = 1.0

    def __call__(self, k, k1, k2, gap=None):
        return self.value * np.ones(np.broadcast(k, k1, k2).shape)


@dataclass(frozen=True)
class CapillaryVertex:
    """Three-wave vertex of deep-water capillary waves.

    Evaluated on a closed triangle k = k1 + k2 given only the magnitudes.
    With L(a, b) = a.b + |a||b| the vertex is

        prefactor * [L(k1,k2) (k1 k2/k)^(1/4) - L(-k,k1) (k k1/k2)^(1/4)
                     - L(-k,k2) (k k2/k1)^(1/4)]

    where, in magnitudes, L(k1,k2) = (k-k1+k2)(k+k1-k2)/2 and
    L(-k,k1) = e (k+k2-k1)/2 with the triangle excess e = k1 + k2 - k.

    When one partner b is small the first term and the term carrying
    (k b/a)^(1/4) cancel to leading order; their difference is proportional to
    the gap k - a between the sum wave and the larger partner a.  On resonant
    triads that gap is O(b^(3/2)) and cannot be recovered from rounded
    magnitudes, so callers that know it analytically pass it as ``gap``.
    """
    prefactor: float

    def __call__(self, k, k1, k2, gap=None):
        k, k1, k2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, k1, k2)))
        a = np.maximum(k1, k2)
        b = np.minimum(k1, k2)
        gap = k - a if gap is None else np.broadcast_to(np.asarray(gap, dtype=float), k.shape)
        e = b - gap
        sk, sa = np.sqrt(k), np.sqrt(a)
        x2 = sa / sk
        # L(k1,k2)(ab/k)^(1/4) - L(-k,b)(kb/a)^(1/4), combined analytically
        near = 0.5 * (k + a - b) * b**0.25 * gap * (x2 + 1.0 - b / (sk * (sa + sk))) / np.sqrt(x2)
        far = 0.5 * e * (k + b - a) * (k * a / b) ** 0.25
        return self.prefactor * (near - far)


# --------------------------------------------------------------------------
# wave systems
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveSystem:
    """A three-wave medium.

    ``vertex(k, k1, k2)`` is the interaction coefficient for the closed triad
    k = k1 + k2 expressed through the three magnitudes; it must be symmetric in
    its last two arguments.  ``rate_unit`` is the dimensional factor divided out
    when a dimensionless rate constant is reported.
    """
    dispersion: Callable
    dispersion_derivative: Callable
    vertex: Callable
    vertex_homogeneity: float
    dimension: int = 2
    epsilon: float = 1.0
    name: str = "custom"
    dispersion_exponent: Optional[float] = None
    dispersion_coefficient: Optional[float] = None
    rate_unit: float = 1.0

    def __post_init__(self):
        if self.dimension != 2:
            raise ValueError("only two-dimensional isotropic systems are supported")

    @property
    def is_power_law(self) -> bool:
        return self.dispersion_exponent is not None

    def omega(self, k):
        return self.dispersion(k)


def power_law_system(exponent: float, coefficient: float = 1.0, vertex: float = 1.0,
                     epsilon: float = 1.0) -> WaveSystem:
    """Toy system with omega = c k**exponent and a constant vertex."""
    if exponent <= 0 or coefficient <= 0:
        raise ValueError("dispersion must be increasing and positive")
    disp = PowerLawDispersion(coefficient, exponent)
    return WaveSystem(
        dispersion=disp,
        dispersion_derivative=disp.derivative,
        vertex=ConstantVertex(vertex),
        vertex_homogeneity=0.0,
        epsilon=epsilon,
        name=f"powerlaw(alpha={exponent:g})",
        dispersion_exponent=exponent,
        dispersion_coefficient=coefficient,
    )


def capillary_system(sigma: float = 1.0, rho: float = 1.0) -> WaveSystem:
    """Deep-water capillary waves: omega = sqrt(sigma/rho) k^(3/2), d = 2.

    The vertex carries the prefactor (sigma/rho^3)^(1/4) / (8 pi sqrt 2)
    and is homogeneous of degree 9/4.
    """
    if sigma <= 0 or rho <= 0:
        raise ValueError("surface tension and density must be positive")
    disp = PowerLawDispersion(math.sqrt(sigma / rho), 1.5)
    pref = (sigma / rho**3) ** 0.25 / (8.0 * math.pi * math.sqrt(2.0))
    return WaveSystem(
        dispersion=disp,
        dispersion_derivative=disp.derivative,
        vertex=CapillaryVertex(pref),
        vertex_homogeneity=9.0 / 4.0,
        epsilon=1.0,
        name="capillary",
        dispersion_exponent=1.5,
        dispersion_coefficient=disp.coefficient,
        rate_unit=1.0 / rho,
    )


# --------------------------------------------------------------------------
# grids and spectra
# --------------------------------------------------------------------------

def geometric_grid(k_min: float, k_max: float, n: int) -> np.ndarray:
    if not (0 < k_min < k_max) or n < 2:
        raise ValueError("need 0 < k_min < k_max and at least two nodes")
    return np.geomspace(k_min, k_max, n)


def _check_grid(grid: np.ndarray):
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two nodes")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly increasing")


def _fit_edge_power_law(grid, values, at_end: bool):
    """Least-squares log-log slope over the last decade at one end of the grid."""
    if at_end:
        sel = grid >= grid[-1] / 10.0
    else:
        sel = grid <= grid[0] * 10.0
    x, y = grid[sel], values[sel]
    pos = y > 0
    x, y = x[pos], y[pos]
    if x.size < 2:
        return None
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    edge = grid[-1] if at_end else grid[0]
    edge_val = values[-1] if at_end else values[0]
    if edge_val <= 0:
        return None
    # anchor the fit at the edge node so the extension is continuous
    return slope, edge, edge_val


@dataclass(frozen=True)
class PowerLawSpectrum:
    """Analytic spectrum n(k) = amplitude * k**(-exponent) on (0, inf)."""
    amplitude: float
    exponent: float

    support = (0.0, math.inf)

    def __call__(self, k):
        return self.amplitude * np.power(np.asarray(k, dtype=float), -self.exponent)

    def on_grid(self, grid) -> "IsotropicSpectrum":
        grid = np.asarray(grid, dtype=float)
        return IsotropicSpectrum(grid, self(grid))


@dataclass(frozen=True, eq=False)
class IsotropicSpectrum:
    """Mean waveaction on a radial grid.

    Between nodes the spectrum is interpolated linearly in log n vs log k.
    Outside the grid it is either extended by a power law fitted to the
    outermost decade (``extrapolation="powerlaw"``) or set to zero.
    """
    grid: np.ndarray
    values: np.ndarray
    extrapolation: str = "powerlaw"
    _lo: Optional[tuple] = field(default=None, init=False, repr=False)
    _hi: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        _check_grid(grid)
        if values.shape != grid.shape:
            raise ValueError("grid and values must have equal lengths")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("spectrum values must be finite and non-negative")
        if self.extrapolation not in ("powerlaw", "zero"):
            raise ValueError(f"unknown extrapolation {self.extrapolation!r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.extrapolation == "powerlaw":
            object.__setattr__(self, "_lo", _fit_edge_power_law(grid, values, at_end=False))
            object.__setattr__(self, "_hi", _fit_edge_power_law(grid, values, at_end=True))

    def __len__(self):
        return self.grid.size

    @property
    def support(self):
        if self.extrapolation == "zero":
            return (float(self.grid[0]), float(self.grid[-1]))
        lo = 0.0 if self._lo is not None else float(self.grid[0])
        hi = math.inf if self._hi is not None else float(self.grid[-1])
        return (lo, hi)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        scalar = k.ndim == 0
        k = np.atleast_1d(k)
        out = np.zeros_like(k)
        g, v = self.grid, self.values
        inside = (k >= g[0]) & (k <= g[-1])
        if np.any(inside):
            ki = k[inside]
            j = np.clip(np.searchsorted(g, ki, side="right") - 1, 0, g.size - 2)
            x0, x1, y0, y1 = g[j], g[j + 1], v[j], v[j + 1]
            t = np.log(ki / x0) / np.log(x1 / x0)
            with np.errstate(divide="ignore", invalid="ignore"):
                loglog = y0 * np.power(y1 / y0, t)
            lin = y0 + (y1 - y0) * (ki - x0) / (x1 - x0)
            out[inside] = np.where((y0 > 0) & (y1 > 0), loglog, lin)
        for mask, fit in ((k < g[0], self._lo), (k > g[-1], self._hi)):
            if np.any(mask) and fit is not None:
                slope, edge, val = fit
                out[mask] = val * np.power(k[mask] / edge, slope)
        return out[0] if scalar else out

    def with_values(self, values) -> "IsotropicSpectrum":
        return IsotropicSpectrum(self.grid, values, self.extrapolation)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "n"])
        for k, n in zip(self.grid, self.values):
            w.writerow([repr(float(k)), repr(float(n))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_csv(cls, path, extrapolation="powerlaw") -> "IsotropicSpectrum":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["k", "n"]:
            raise ValueError(f"{path}: expected header 'k,n'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        return cls(data[:, 0], data[:, 1], extrapolation)


# --------------------------------------------------------------------------
# physical parameters and the ZF spectrum
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    sigma: float = 1.0
    rho: float = 1.0
    flux: float = 1.0
    kz_constant: float = DEFAULT_KZ_CONSTANT

    def __post_init__(self):
        for name in ("sigma", "rho", "flux", "kz_constant"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def amplitude(self) -> float:
        """A = sqrt(P) rho^(3/2) C / sigma^(1/4)."""
        return math.sqrt(self.flux) * self.rho**1.5 * self.kz_constant / self.sigma**0.25


def zf_spectrum(params: PhysicalParams, grid) -> IsotropicSpectrum:
    """Capillary constant-flux spectrum n = A k^(-17/4) sampled on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    return PowerLawSpectrum(params.amplitude, CAPILLARY_ZF_EXPONENT).on_grid(grid)


# --------------------------------------------------------------------------
# hierarchy, rates, deviations
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentHierarchy:
    """values[p-1, i] = M^(p)(k_i) for p = 1..P."""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(np.atleast_2d(self.values))
        _check_grid(grid)
        if values.shape[1] != grid.size:
            raise ValueError("hierarchy must have one column per grid node")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("moments must be finite and non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def max_order(self) -> int:
        return self.values.shape[0]

    def moment(self, p: int) -> np.ndarray:
        if p == 0:
            return np.ones_like(self.grid)
        return self.values[p - 1]

    @property
    def spectrum(self) -> IsotropicSpectrum:
        return IsotropicSpectrum(self.grid, self.values[0])

    def log_convexity_violations(self, rtol: float = 1e-12) -> np.ndarray:
        """Boolean mask [p-3, i] of nodes where M^p M^(p-2) < (M^(p-1))^2."""
        P = self.max_order
        if P < 3:
            return np.zeros((0, self.grid.size), dtype=bool)
        full = np.vstack([np.ones_like(self.grid), self.values])
        lhs = full[2:] * full[:-2]
        rhs = full[1:-1] ** 2
        return (lhs < rhs * (1.0 - rtol))[1:]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "p", "M"])
        for i, k in enumerate(self.grid):
            for p in range(1, self.max_order + 1):
                w.writerow([repr(float(k)), p, repr(float(self.values[p - 1, i]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_csv(cls, path) -> "MomentHierarchy":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if [c.strip() for c in rows[0]] != ["k", "p", "M"]:
            raise ValueError(f"{path}: expected header 'k,p,M'")
        recs = [(float(k), int(p), float(m)) for k, p, m in rows[1:]]
        grid = np.array(sorted({r[0] for r in recs}))
        P = max(r[1] for r in recs)
        vals = np.full((P, grid.size), np.nan)
        idx = {k: i for i, k in enumerate(grid)}
        for k, p, m in recs:
            vals[p - 1, idx[k]] = m
        if np.isnan(vals).any():
            raise ValueError(f"{path}: incomplete hierarchy table")
        return cls(grid, vals)


@dataclass(frozen=True, eq=False)
class RateField:
    grid: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    gamma_err: np.ndarray
    eta_err: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        for name in ("grid", "gamma", "eta", "gamma_err", "eta_err"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        _check_grid(self.grid)
        if np.any(self.eta < 0):
            raise ValueError("eta must be non-negative")

    @property
    def quadrature_error(self) -> np.ndarray:
        return np.maximum(self.gamma_err, self.eta_err)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "gamma", "eta", "gamma_err", "eta_err"])
        for row in zip(self.grid, self.gamma, self.eta, self.gamma_err, self.eta_err):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text


@dataclass(frozen=True, eq=False)
class DeviationField:
    """values[p-2, i] = F^(p)(k_i) for p = 2..P."""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _frozen(self.grid))
        object.__setattr__(self, "values", _frozen(np.atleast_2d(self.values)))
        floor = np.array([1.0 / math.factorial(p) - 1.0 for p in range(2, self.max_order + 1)])
        if np.any(self.values < floor[:, None] - 1e-12):
            raise ValueError("deviation below 1/p! - 1 implies a negative moment")

    @property
    def max_order(self) -> int:
        return self.values.shape[0] + 1

    def order(self, p: int) -> np.ndarray:
        if p == 1:
            return np.zeros_like(self.grid)
        return self.values[p - 2]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "p", "F"])
        for i, k in enumerate(self.grid):
            for p in range(2, self.max_order + 1):
                w.writerow([repr(float(k)), p, repr(float(self.values[p - 2, i]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text
