"""Moment hierarchy M^(p)_k = <|a_k|^(2p)>, its deviations from Gaussianity, and their dynamics.

    dM^(p)/dt = -p gamma M^(p) + p^2 eta M^(p-1),       M^(0) = 1

In terms of F^(p) = M^(p) / (p! n^p) - 1 and the renormalised time
theta = int eta/n dt (with n stationary) this becomes

    dF^(p)/dtheta = p (F^(p-1) - F^(p)),                F^(1) = 0

whose solution is a binomial average of the initial deviations,
F^(p)(theta) = sum_j C(p, j) q^j (1 - q)^(p - j) F^(j)(0) with q = e^-theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import comb, gammaln
from scipy.stats import binom

from .core import (CAPILLARY_ZF_EXPONENT, DeviationField, IsotropicSpectrum,
                   MomentHierarchy, PhysicalParams)
from .integrate import IntegratorControls, dormand_prince
from .kinetic import kinetic_rate

REFERENCE_GAMMA_CONSTANT = 1.20


class InvalidStateError(ValueError):
    pass


# --------------------------------------------------------------------------
# construction and derived quantities
# --------------------------------------------------------------------------

def _factorials(P):
    return np.array([math.factorial(p) for p in range(1, P + 1)], dtype=float)


def init_hierarchy(spectrum: IsotropicSpectrum, P: int, kind: str = "gaussian",
                   f_table=None) -> MomentHierarchy:
    """Initial moments: gaussian (p! n^p), deterministic (n^p) or custom (p! n^p (1 + F))."""
    if P < 1:
        raise ValueError("P must be at least 1")
    n = np.asarray(spectrum.values, dtype=float)
    p = np.arange(1, P + 1)[:, None]
    powers = n[None, :] ** p
    if kind == "deterministic":
        return MomentHierarchy(spectrum.grid, powers)
    gauss = _factorials(P)[:, None] * powers
    if kind == "gaussian":
        return MomentHierarchy(spectrum.grid, gauss)
    if kind != "custom":
        raise ValueError(f"unknown initial condition {kind!r}")
    if f_table is None:
        raise ValueError("custom initial condition needs an F-table for p = 2..P")
    f = np.asarray(f_table, dtype=float)
    if f.ndim == 1:
        f = np.repeat(f[:, None], n.size, axis=1)
    if f.shape != (P - 1, n.size):
        raise ValueError(f"F-table must have shape ({P - 1}, {n.size}) or ({P - 1},)")
    floor = np.array([1.0 / math.factorial(q) - 1.0 for q in range(2, P + 1)])
    if np.any(f < floor[:, None]):
        raise ValueError("F-table entry below 1/p! - 1 would give a negative moment")
    full = np.vstack([np.zeros((1, n.size)), f])
    return MomentHierarchy(spectrum.grid, gauss * (1.0 + full))


def deviations(h: MomentHierarchy) -> DeviationField:
    """F^(p) = M^(p) / (p! n^p) - 1 for p = 2..P (nan where n = 0)."""
    if h.max_order < 2:
        raise ValueError("deviations need P >= 2")
    n = h.moment(1)
    p = np.arange(2, h.max_order + 1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        gauss = np.exp(gammaln(p + 1.0) + p * np.log(n)[None, :])
        f = h.values[1:] / gauss - 1.0
    f = np.where(n[None, :] > 0, f, np.nan)
    return DeviationField(h.grid, f)


def cumulant_q(h: MomentHierarchy) -> np.ndarray:
    """Q = M^(2) - 2 n^2, zero for a Gaussian field."""
    if h.max_order < 2:
        raise ValueError("Q needs P >= 2")
    return h.moment(2) - 2.0 * h.moment(1) ** 2


def xi(h: MomentHierarchy, rtol: float = 1e-12) -> np.ndarray:
    """Fluctuation level xi = sqrt(M^(2) - n^2)."""
    if h.max_order < 2:
        raise ValueError("xi needs P >= 2")
    n2 = h.moment(1) ** 2
    var = h.moment(2) - n2
    if np.any(var < -rtol * n2):
        bad = int(np.argmin(var))
        raise InvalidStateError(f"M2 < n^2 at node {bad} (k={h.grid[bad]:g}); xi undefined")
    return np.sqrt(np.maximum(var, 0.0))


# --------------------------------------------------------------------------
# time integration of the hierarchy
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HierarchySolution:
    times: np.ndarray
    theta: np.ndarray            # [n_times, n_nodes], theta = int eta/n dt
    trajectory: tuple            # MomentHierarchy per checkpoint
    controls: IntegratorControls
    steps_accepted: int
    steps_rejected: int

    @property
    def deviations(self) -> tuple:
        return tuple(deviations(h) for h in self.trajectory) if self.trajectory[0].max_order >= 2 else ()

    def theta_of_t(self, t):
        """Renormalised time at arbitrary t (per node), interpolated between checkpoints."""
        return np.array([np.interp(t, self.times, self.theta[:, i])
                         for i in range(self.theta.shape[1])])

    def log_convexity_flags(self) -> list:
        """Checkpoint indices where log-convexity of the moments is violated."""
        return [i for i, h in enumerate(self.trajectory) if h.log_convexity_violations().any()]

    def manifest(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "theta": [[float(x) for x in row] for row in self.theta],
            "steps_accepted": self.steps_accepted,
            "steps_rejected": self.steps_rejected,
            "log_convexity_violations": self.log_convexity_flags(),
        }


def hierarchy_rhs(rates, P):
    """RHS for the stacked state [M^1..M^P, theta]; row p = 1 is the KE right-hand side."""
    p = np.arange(2, P + 1)[:, None]

    def rhs(t, y):
        m = y[:P]
        n = m[0]
        gamma, eta = rates(n)
        out = np.empty_like(y)
        out[0] = kinetic_rate(gamma, eta, n)
        if P > 1:
            out[1:P] = p * p * eta * m[:-1] - p * gamma * m[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[P] = np.where(n > 0, eta / n, 0.0)
        return out
    return rhs


def evolve_hierarchy(rates, hierarchy: MomentHierarchy, t_end: float,
                     controls: Optional[IntegratorControls] = None,
                     checkpoint_times: Optional[Sequence[float]] = None) -> HierarchySolution:
    """Integrate p = 1..P of the hierarchy together with theta.

    ``rates`` maps the current spectrum n = M^(1) to (gamma, eta); use
    FrozenRates for the linear analysis or SelfConsistentRates for full runs.
    theta rides along as an extra state row that is excluded from error control
    and positivity checks, so P = 1 follows exactly the kinetic-equation steps.
    """
    controls = controls or IntegratorControls()
    P = hierarchy.max_order
    y0 = np.vstack([hierarchy.values, np.zeros((1, hierarchy.grid.size))])
    mask = np.ones(y0.shape, dtype=bool)
    mask[P] = False
    res = dormand_prince(hierarchy_rhs(rates, P), y0, t_end, controls,
                         error_mask=mask, nonnegative_mask=mask,
                         checkpoint_times=checkpoint_times)
    traj = tuple(MomentHierarchy(hierarchy.grid, s[:P]) for s in res.states)
    return HierarchySolution(res.times, res.states[:, P, :], traj, controls,
                             res.steps_accepted, res.steps_rejected)


# --------------------------------------------------------------------------
# deviations in renormalised time
# --------------------------------------------------------------------------

def _as_f0(F0) -> np.ndarray:
    f0 = np.asarray(F0, dtype=float)
    if f0.ndim != 1 or f0.size < 1:
        raise ValueError("F0 must list F^(p)(0) for p = 2..P")
    return f0


def exact_deviation_solution(F0, theta) -> np.ndarray:
    """F^(p)(theta), p = 2..P, from F0[p-2] = F^(p)(0).

    Evaluated as the binomial average with q = e^-theta, which is numerically
    stable up to large p.  Returns shape (P-1,) for scalar theta, else (P-1, len(theta)).
    """
    f0 = _as_f0(F0)
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0):
        raise ValueError("theta must be non-negative")
    q = np.exp(-np.atleast_1d(th))
    P = f0.size + 1
    p = np.arange(2, P + 1)
    j = np.arange(2, P + 1)
    # weights[p, j, theta] = C(p, j) q^j (1-q)^(p-j)
    w = binom.pmf(j[None, :, None], p[:, None, None], q[None, None, :])
    out = np.einsum("pjt,j->pt", w, f0)
    return out[:, 0] if th.ndim == 0 else out


def deviation_coefficients(F0) -> np.ndarray:
    """Coefficients a[p-2, j-2] of F^(p)(theta) = sum_j a_pj e^(-j theta).

    Built by variation of constants, one order at a time:
    a_pj = p a_(p-1)j / (p - j) for j < p and a_pp = F^(p)(0) - sum_(j<p) a_pj.
    The coefficients alternate in sign and grow combinatorially, so this route
    is only accurate for modest P (a few tens); prefer the binomial form.
    """
    f0 = _as_f0(F0)
    P = f0.size + 1
    a = np.zeros((P - 1, P - 1))
    for p in range(2, P + 1):
        for j in range(2, p):
            a[p - 2, j - 2] = p * a[p - 3, j - 2] / (p - j)
        a[p - 2, p - 2] = f0[p - 2] - a[p - 2, : p - 2].sum()
    return a


def deviation_solution_from_coefficients(F0, theta) -> np.ndarray:
    a = deviation_coefficients(F0)
    j = np.arange(2, a.shape[0] + 2)
    th = np.asarray(theta, dtype=float)
    basis = np.exp(-np.outer(j, np.atleast_1d(th)))
    out = a @ basis
    return out[:, 0] if th.ndim == 0 else out


def truncated_closed_form(F0, theta) -> np.ndarray:
    """F^(p) = e^(-p theta) sum_j theta^(p-j) p! / (j! (p-j)!) F^(j)(0).

    Exact at p = 2 and to first order in theta for every p; for p >= 3 it
    departs from the true solution at finite theta (it stands in theta for
    e^theta - 1 in the binomial form).
    """
    f0 = _as_f0(F0)
    th = np.asarray(theta, dtype=float)
    t = np.atleast_1d(th)
    P = f0.size + 1
    out = np.zeros((P - 1, t.size))
    for p in range(2, P + 1):
        acc = np.zeros(t.size)
        for j in range(2, p + 1):
            acc += t ** (p - j) * comb(p, j, exact=True) * f0[j - 2]
        out[p - 2] = np.exp(-p * t) * acc
    return out[:, 0] if th.ndim == 0 else out


def evolve_deviations(F0, theta_end: float, controls: Optional[IntegratorControls] = None,
                      checkpoint_times=None):
    """Direct integration of dF^(p)/dtheta = p (F^(p-1) - F^(p)), p = 2..P.

    Returns (thetas, values[n_checkpoints, P-1]); used for large P, where the
    moments themselves overflow.
    """
    controls = controls or IntegratorControls()
    f0 = _as_f0(F0)
    p = np.arange(2, f0.size + 2, dtype=float)

    def rhs(t, f):
        prev = np.concatenate([[0.0], f[:-1]])
        return p * (prev - f)

    res = dormand_prince(rhs, f0, theta_end, controls,
                         nonnegative_mask=np.zeros(f0.shape, dtype=bool),
                         checkpoint_times=checkpoint_times)
    return res.times, res.states


# --------------------------------------------------------------------------
# capillary fluctuation growth
# --------------------------------------------------------------------------

def capillary_gamma(params: PhysicalParams, k, gamma_source: str = "reference",
                    rate_constant: Optional[float] = None):
    """Damping rate on the capillary ZF spectrum.

    "reference": 1.20 sqrt(P) sigma^(1/4) k^(3/4);
    "computed": I A / (16 pi rho) k^(3/4) with I the computed dimensionless
                constant (pass it as ``rate_constant`` to avoid recomputing).
    """
    k = np.asarray(k, dtype=float)
    if gamma_source == "reference":
        return REFERENCE_GAMMA_CONSTANT * math.sqrt(params.flux) * params.sigma**0.25 * k**0.75
    if gamma_source == "computed":
        if rate_constant is None:
            from .core import capillary_system
            from .rates import dimensionless_rate_constant
            rate_constant = dimensionless_rate_constant(capillary_system(params.sigma, params.rho)).value
        return rate_constant * params.amplitude / (16 * math.pi * params.rho) * k**0.75
    raise ValueError(f"unknown gamma source {gamma_source!r}")


def xi_growth_curve(params: PhysicalParams, k, t, gamma_source: str = "reference",
                    rate_constant: Optional[float] = None):
    """xi^2 = A^2 k^(-17/2) (1 - e^(-2 gamma_k t)) after a deterministic start on ZF."""
    k = np.asarray(k, dtype=float)
    t = np.asarray(t, dtype=float)
    g = capillary_gamma(params, k, gamma_source, rate_constant)
    n2 = params.amplitude**2 * k ** (-2 * CAPILLARY_ZF_EXPONENT)
    return n2 * -np.expm1(-2.0 * g * t)


# --------------------------------------------------------------------------
# transport of a bump towards large p
# --------------------------------------------------------------------------

def log_gaussian_bump(P: int, p0: float, width: float, amplitude: float = 1.0) -> np.ndarray:
    """F0 for p = 2..P: a Gaussian bump in ln p centred on ln p0."""
    p = np.arange(2, P + 1, dtype=float)
    return amplitude * np.exp(-0.5 * ((np.log(p) - math.log(p0)) / width) ** 2)


@dataclass(frozen=True, eq=False)
class DeviationTrajectory:
    """F^(p)(theta_i) for p = 2..P at one wavenumber."""
    theta: np.ndarray
    values: np.ndarray           # [n_theta, P-1]

    @property
    def max_order(self) -> int:
        return self.values.shape[1] + 1

    @classmethod
    def exact(cls, F0, thetas) -> "DeviationTrajectory":
        thetas = np.asarray(thetas, dtype=float)
        return cls(thetas, exact_deviation_solution(F0, thetas).T)

    @classmethod
    def from_solution(cls, sol: HierarchySolution, node: int) -> "DeviationTrajectory":
        vals = np.array([d.values[:, node] for d in sol.deviations])
        return cls(sol.theta[:, node], vals)


class TransportReport(NamedTuple):
    theta: np.ndarray
    position_x: np.ndarray       # ln p of the bump maximum
    width_x: np.ndarray          # full width at half maximum in ln p
    amplitude: np.ndarray        # bump maximum
    speed: float                 # d(ln p_max)/d(theta), nan with fewer than two samples
    speed_stderr: float
    truncated: bool
    fixed_p: int
    fixed_p_decay_rate: float    # mean -d ln F^(fixed_p) / d theta

    @property
    def position_p(self) -> np.ndarray:
        return np.exp(self.position_x)

    @property
    def width_variation(self) -> float:
        return float(np.max(np.abs(self.width_x / self.width_x[0] - 1.0)))

    @property
    def amplitude_decay_per_unit_theta(self) -> float:
        """Largest fractional loss of peak amplitude per unit theta."""
        span = self.theta[-1] - self.theta[0]
        if span <= 0:
            return 0.0
        return float(1.0 - (self.amplitude[-1] / self.amplitude[0]) ** (1.0 / span))


def _peak(x, y):
    """Parabolic vertex through the discrete maximum and its neighbours."""
    i = int(np.argmax(y))
    if i == 0 or i == y.size - 1:
        return x[i], y[i], True
    c = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
    if c[0] >= 0:
        return x[i], y[i], False
    xv = -c[1] / (2 * c[0])
    return xv, float(np.polyval(c, xv)), False


def _fwhm(x, y, peak_x, peak_y):
    half = 0.5 * peak_y
    i = int(np.argmax(y))
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < y.size - 1 and y[hi] > half:
        hi += 1
    if y[lo] > half or y[hi] > half:
        return math.nan, True
    xl = np.interp(half, [y[lo], y[lo + 1]], [x[lo], x[lo + 1]])
    xr = np.interp(half, [y[hi], y[hi - 1]], [x[hi], x[hi - 1]])
    return float(xr - xl), False


def transport_wave_diagnostic(traj: DeviationTrajectory, fixed_p: Optional[int] = None) -> TransportReport:
    """Track the maximum of F^(p) over x = ln p as theta advances."""
    p = np.arange(2, traj.max_order + 1, dtype=float)
    x = np.log(p)
    pos, wid, amp = [], [], []
    truncated = False
    for row in traj.values:
        xv, yv, edge = _peak(x, row)
        w, cut = _fwhm(x, row, xv, yv)
        truncated |= edge or cut
        pos.append(xv)
        wid.append(w)
        amp.append(yv)
    pos, wid, amp = map(np.array, (pos, wid, amp))
    if traj.theta.size >= 3:
        c, cov = np.polyfit(traj.theta, pos, 1, cov=True)
        speed, speed_se = float(c[0]), float(math.sqrt(max(cov[0, 0], 0.0)))
    elif traj.theta.size == 2:
        speed, speed_se = float((pos[1] - pos[0]) / (traj.theta[1] - traj.theta[0])), math.nan
    else:
        speed, speed_se = math.nan, math.nan
    if fixed_p is None:
        fixed_p = int(round(math.exp(pos[0])))
    series = traj.values[:, fixed_p - 2]
    span = traj.theta[-1] - traj.theta[0]
    if span > 0 and series[0] > 0 and series[-1] > 0:
        decay = float(math.log(series[0] / series[-1]) / span)
    else:
        decay = math.nan
    return TransportReport(traj.theta, pos, wid, amp, speed, speed_se,
                           bool(truncated), fixed_p, decay)


# --------------------------------------------------------------------------
# probability density probed by the p-th moment
# --------------------------------------------------------------------------

class PdfProbe(NamedTuple):
    lam: float
    width: float


def rayleigh_density(lam, n: float):
    """Waveaction density of a Gaussian field, P(lambda) = e^(-lambda/n) / n."""
    if not n > 0:
        raise ValueError("n must be positive")
    lam = np.asarray(lam, dtype=float)
    return np.where(lam >= 0, np.exp(-lam / n) / n, 0.0)


def pdf_probe(n: float, p: int) -> PdfProbe:
    """Waveaction range lambda_p = p n, of width ~ n, that dominates M^(p)."""
    if not n > 0 or p < 1:
        raise ValueError("need n > 0 and p >= 1")
    return PdfProbe(p * n, n)
