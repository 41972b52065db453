"""Damping and forcing rates of the moment hierarchy by resonant-manifold quadrature.

For an isotropic 2D spectrum every triad integral is reduced to 1D:

* the momentum delta is integrated over both angles, leaving k1 k2 (2/S);
* the frequency delta eliminates one magnitude through its resonant partner,
  leaving the Jacobian 1/|omega'|.

The remaining integral runs over the *smaller* wavenumber of the triad in the
log variable s = ln(q/k).  Endpoint singularities of the physical integrand
(q^-3/4 for capillary waves on the ZF spectrum) become exponentially decaying
tails in s, and whatever lies beyond the explored span is added as an
extrapolated exponential tail.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import qmc

from .core import PowerLawSpectrum, RateField, WaveSystem
from .resonance import _invert_dispersion, _pow2_at_least, resonant_partner, sum_partner, twice_area


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureSettings:
    """Controls for the reduced 1D quadrature.

    Each smooth segment is integrated by composite Gauss-Legendre, doubling the
    number of panels until two successive results agree to ``epsrel`` (relative
    to the largest component); ``max_panels`` caps the doubling.
    """
    epsrel: float = 1e-10
    max_panels: int = 1024
    order: int = 16
    cutoff_rel: float = 1e-13   # stop extending once |f| < cutoff_rel * peak
    span: float = 1e10          # explore q/k down to 1/span and up to span

    def refined(self, factor: float = 0.1) -> "QuadratureSettings":
        return replace(self, epsrel=self.epsrel * factor, max_panels=self.max_panels * 4,
                       cutoff_rel=self.cutoff_rel * factor)


TOLERANCE_PROFILES = {
    "strict": QuadratureSettings(),
    "fast": QuadratureSettings(epsrel=1e-7, max_panels=256, cutoff_rel=1e-10, span=1e8),
}


class Estimate(NamedTuple):
    value: float
    rel_error: float


@dataclass(frozen=True)
class RateComponents:
    """All three collision-integral reductions at one wavenumber."""
    k: float
    n_k: float
    eta: float
    gamma: float
    collision: float
    abs_error: float      # absolute error on the waveaction-rate scale
    gamma_scale: float = 1.0
    warnings: tuple = ()

    @property
    def eta_rel_error(self) -> float:
        return self.abs_error / abs(self.eta) if self.eta else 0.0

    @property
    def gamma_rel_error(self) -> float:
        scale = abs(self.gamma * self.gamma_scale)
        return self.abs_error / scale if scale else 0.0


# --------------------------------------------------------------------------
# vectorised 1D quadrature
# --------------------------------------------------------------------------

_GL_CACHE: dict = {}


def _gl_nodes(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _composite_gl(f, a, b, panels, order):
    x, w = _gl_nodes(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = f(s)                                      # [ncomp, npts]
    wts = (half[:, None] * w[None, :]).ravel()
    return vals @ wts


def _integrate_segment(f, a, b, settings):
    """Returns (value, abs_error, converged)."""
    panels = 1
    prev = _composite_gl(f, a, b, panels, settings.order)
    history = []
    while True:
        panels *= 2
        cur = _composite_gl(f, a, b, panels, settings.order)
        diff = float(np.max(np.abs(cur - prev)))
        scale = float(np.max(np.abs(cur)))
        if diff <= settings.epsrel * scale or diff == 0.0:
            return cur, diff, True
        history.append(diff)
        # roundoff floor: refinement has stopped paying off
        stalled = len(history) >= 3 and min(history[-2:]) > 0.5 * history[-3]
        if stalled or panels >= settings.max_panels:
            return cur, diff, diff <= 1e3 * settings.epsrel * scale
        prev = cur


def _integrate_log_piece(f, s_end, direction, s_stop, settings, breaks, ncomp):
    """Integrate f(s) from s_end outward to where it has decayed (or to s_stop).

    Returns (value, abs_error, warning or None).
    """
    step = math.log(10.0)
    probe = lambda s: np.abs(f(np.array([s]))[:, 0])
    peak = float(np.max(probe(s_end)))
    s_cut = s_end
    hit_stop = False
    j = 0
    while True:
        j += 1
        s_new = s_end + direction * j * step
        if direction * (s_new - s_stop) >= 0:
            s_cut, hit_stop = s_stop, True
            break
        val = float(np.max(probe(s_new)))
        s_cut = s_new
        peak = max(peak, val)
        if j >= 2 and val <= settings.cutoff_rel * peak:
            break
    lo, hi = sorted((s_cut, s_end))
    knots = [lo] + sorted(b for b in set(breaks) if lo + 1e-12 < b < hi - 1e-12) + [hi]
    total = np.zeros(ncomp)
    err = 0.0
    warn = None
    for a, b in zip(knots[:-1], knots[1:]):
        v, e, ok = _integrate_segment(f, a, b, settings)
        total += v
        err += e
        if not ok:
            warn = f"segment [{a:.3g}, {b:.3g}] did not reach the requested tolerance"
    if hit_stop:
        f_cut = f(np.array([s_cut]))[:, 0]
        if np.any(f_cut != 0):
            tail, tail_err, tail_warn = _exponential_tail(f, s_cut, direction, f_cut)
            total += tail
            err += tail_err
            warn = tail_warn or warn
    return total, err, warn


def _exponential_tail(f, s_cut, direction, f_cut):
    """Analytic tail beyond s_cut assuming f ~ exp(-beta |s|) per component."""
    f1 = f(np.array([s_cut - direction * 1.0]))[:, 0]
    f2 = f(np.array([s_cut - direction * 2.0]))[:, 0]
    tails = np.zeros_like(f_cut)
    errs = np.zeros_like(f_cut)
    warn = None
    for c in range(f_cut.size):
        a, b, d = f_cut[c], f1[c], f2[c]
        if a == 0:
            continue
        if a * b <= 0 or b * d <= 0 or abs(b) <= abs(a):
            warn = "integrand does not decay at the edge of the explored span"
            errs[c] = abs(a) * 1e3
            continue
        beta1 = math.log(b / a)
        beta2 = math.log(d / a) / 2.0
        tails[c] = a / beta1
        # the two decay-rate estimates agree when the tail is already exponential
        errs[c] = 10.0 * abs(a / beta1 - a / beta2) + 1e-12 * abs(tails[c])
    return tails, float(np.max(errs)), warn


# --------------------------------------------------------------------------
# integrands
# --------------------------------------------------------------------------

def _partners(system, k, q, kind):
    """Vectorised resonant partner, Jacobian 1/omega'(partner) and triad gap.

    kind="sum":  omega(k) = omega(q) + omega(p), requires omega(q) < omega(k);
    kind="diff": omega(p) = omega(k) + omega(q).
    The gap is (largest magnitude) - (larger of the other two), evaluated
    without cancellation for power-law dispersion (None otherwise).
    """
    q = np.asarray(q, dtype=float)
    gap = None
    if system.is_power_law:
        a = system.dispersion_exponent
        if kind == "sum":
            r = np.minimum((q / k) ** a, 1.0)
            with np.errstate(divide="ignore"):
                t = np.log1p(-r) / a
                p = k * np.exp(t)
                gap = np.where(q <= p, -k * np.expm1(t), k - q)
        else:
            big, small = np.maximum(q, k), np.minimum(q, k)
            t = np.log1p((small / big) ** a) / a
            p = big * np.exp(t)
            gap = big * np.expm1(t)
    else:
        fn = resonant_partner if kind == "sum" else sum_partner
        p = np.array([fn(system, k, float(x)).k2 for x in q])
    with np.errstate(divide="ignore"):
        jac = 1.0 / np.abs(system.dispersion_derivative(p))
    return p, jac, gap


def _half_point(system, k):
    """Wavenumber carrying half the frequency of k."""
    w = 0.5 * float(system.dispersion(k))
    if system.is_power_law:
        return float((w / system.dispersion_coefficient) ** (1.0 / system.dispersion_exponent))
    return _invert_dispersion(system, w, k)


def _kinks(spectrum):
    """Wavenumbers where the spectrum is not smooth (interpolation nodes, support edges)."""
    pts = list(np.asarray(getattr(spectrum, "grid", ()), dtype=float))
    pts += [e for e in getattr(spectrum, "support", ()) if 0 < e < math.inf]
    return sorted(set(pts))


def _breaks(system, spectrum, k, kind):
    """Log-variable points where q or its partner crosses a spectrum kink."""
    qs = []
    for e in _kinks(spectrum):
        if kind == "sum":
            if e < k:
                qs.append(e)
                p = resonant_partner(system, k, e)
                if p is not None:
                    qs.append(p.k2)
        else:
            qs.append(e)
            if e > k:
                p = resonant_partner(system, e, k)
                if p is not None:
                    qs.append(p.k2)
    return [math.log(q / k) for q in qs if q > 0]


def rate_components(system: WaveSystem, spectrum, k: float,
                    settings: Optional[QuadratureSettings] = None) -> RateComponents:
    """eta_k, gamma_k and the collision rate at one wavenumber by reduced quadrature."""
    settings = settings or QuadratureSettings()
    if not k > 0:
        raise ValueError("k must be positive")
    nk = float(spectrum(k))
    # gamma is integrated as scale * gamma so all components share one scale
    scale = nk if nk > 0 else 1.0
    eps2 = system.epsilon**2
    s_min, s_max = -math.log(settings.span), math.log(settings.span)
    s_half = math.log(_half_point(system, k) / k)

    def sum_piece(small_is_k1):
        def f(s):
            q = k * np.exp(s)
            p, jac, gap = _partners(system, k, q, "sum")
            k1, k2 = (q, p) if small_is_k1 else (p, q)
            with np.errstate(divide="ignore", invalid="ignore"):
                area = twice_area(k, k1, k2)
                v = system.vertex(k, k1, k2, gap=gap)
                w = q * k1 * k2 * (2.0 / area) * jac * v * v
            w = np.where(np.isfinite(w), w, 0.0)
            n1, n2 = spectrum(k1), spectrum(k2)
            # eta part, gamma part (n2 only), collision kernel
            return w * np.stack([n1 * n2, scale * n2, n1 * n2 - nk * (n1 + n2)])
        return f

    def diff_piece(s):
        q = k * np.exp(s)
        p, jac, gap = _partners(system, k, q, "diff")
        with np.errstate(divide="ignore", invalid="ignore"):
            area = twice_area(p, k, q)
            v = system.vertex(p, k, q, gap=gap)
            w = q * q * p * (2.0 / area) * jac * v * v
        w = np.where(np.isfinite(w), w, 0.0)
        n1, n2 = spectrum(q), spectrum(p)
        return w * np.stack([n1 * n2, scale * (n1 - n2), n1 * n2 - nk * (n1 - n2)])

    breaks_sum = _breaks(system, spectrum, k, "sum")
    breaks_diff = _breaks(system, spectrum, k, "diff")
    total_sum = np.zeros(3)
    total_diff = np.zeros(3)
    err = 0.0
    warns = []
    for small_is_k1 in (True, False):
        v, e, w = _integrate_log_piece(sum_piece(small_is_k1), s_half, -1, s_min,
                                       settings, breaks_sum, 3)
        total_sum += v
        err += e
        if w:
            warns.append(f"k={k:g} sum branch: {w}")
    for direction, s_stop in ((-1, s_min), (+1, s_max)):
        v, e, w = _integrate_log_piece(diff_piece, 0.0, direction, s_stop,
                                       settings, breaks_diff, 3)
        total_diff += v
        err += 2 * e
        if w:
            warns.append(f"k={k:g} difference branch: {w}")

    eta = 4 * math.pi * eps2 * (total_sum[0] + 2 * total_diff[0])
    gamma = 8 * math.pi * eps2 * (total_sum[1] + total_diff[1]) / scale
    coll = 4 * math.pi * eps2 * (total_sum[2] + 2 * total_diff[2])
    abs_err = 8 * math.pi * eps2 * err
    return RateComponents(k, nk, float(max(eta, 0.0)), float(gamma), float(coll),
                          float(abs_err), scale, tuple(warns))


def eta(system: WaveSystem, spectrum, k: float,
        settings: Optional[QuadratureSettings] = None) -> Estimate:
    rc = rate_components(system, spectrum, k, settings)
    return Estimate(rc.eta, rc.eta_rel_error)


def gamma(system: WaveSystem, spectrum, k: float,
          settings: Optional[QuadratureSettings] = None) -> Estimate:
    rc = rate_components(system, spectrum, k, settings)
    return Estimate(rc.gamma, rc.gamma_rel_error)


def _node_job(args):
    system, spectrum, k, settings = args
    return rate_components(system, spectrum, float(k), settings)


def node_components(system, spectrum, grid, settings=None, threads=1):
    """rate_components at every node; worker processes when threads > 1."""
    settings = settings or QuadratureSettings()
    jobs = [(system, spectrum, float(k), settings) for k in grid]
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_node_job, jobs))
    return [_node_job(j) for j in jobs]


def rate_field(system: WaveSystem, spectrum, grid=None,
               settings: Optional[QuadratureSettings] = None, threads: int = 1) -> RateField:
    """gamma and eta at every grid node, with relative error estimates."""
    grid = np.asarray(spectrum.grid if grid is None else grid, dtype=float)
    comps = []
    for i, rc in enumerate(node_components(system, spectrum, grid, settings, threads)):
        if not (math.isfinite(rc.eta) and math.isfinite(rc.gamma)):
            raise QuadratureError(f"non-finite rate at node {i} (k={grid[i]:g})")
        comps.append(rc)
    warns = tuple(w for rc in comps for w in rc.warnings)
    return RateField(
        grid=grid,
        gamma=np.array([c.gamma for c in comps]),
        eta=np.array([c.eta for c in comps]),
        gamma_err=np.array([c.gamma_rel_error for c in comps]),
        eta_err=np.array([c.eta_rel_error for c in comps]),
        warnings=warns,
    )


# --------------------------------------------------------------------------
# dimensionless constants of scale-invariant systems
# --------------------------------------------------------------------------

def kz_exponent(system: WaveSystem) -> float:
    return system.vertex_homogeneity + system.dimension


def _require_scale_invariant(system):
    if not system.is_power_law:
        raise ValueError("system must have a power-law dispersion and a homogeneous vertex")


def dimensionless_rate_constant(system: WaveSystem, k: float = 1.0,
                                settings: Optional[QuadratureSettings] = None) -> Estimate:
    """I in  gamma_k = I A rate_unit / (16 pi) k^(m - alpha)  on the KZ spectrum A k^-(m+d).

    For capillary waves (m = 9/4, alpha = 3/2, rate_unit = 1/rho) this is the
    constant in  gamma = I A / (16 pi rho) k^(3/4).
    """
    _require_scale_invariant(system)
    x = kz_exponent(system)
    g = gamma(system, PowerLawSpectrum(1.0, x), k, settings)
    scale = k ** (system.vertex_homogeneity - system.dispersion_exponent)
    return Estimate(16 * math.pi * g.value / (system.rate_unit * scale), g.rel_error)


def collision_scaling_integral(system: WaveSystem, exponent: float,
                               settings: Optional[QuadratureSettings] = None) -> float:
    """Collision rate at k = 1 for the unit power-law spectrum k^-exponent."""
    _require_scale_invariant(system)
    return rate_components(system, PowerLawSpectrum(1.0, exponent), 1.0, settings).collision


def kz_constant(system: WaveSystem, settings: Optional[QuadratureSettings] = None,
                h: float = 1e-3) -> float:
    """Kolmogorov-Zakharov constant C = A / sqrt(P) implied by the system's vertex.

    The energy flux through k of n = A k^-x is 0/0 at the KZ exponent; the
    limit is  P = pi c A^2 dJ/dx  with c the dispersion coefficient (2D).
    """
    _require_scale_invariant(system)
    x0 = kz_exponent(system)
    dj = (collision_scaling_integral(system, x0 + h, settings)
          - collision_scaling_integral(system, x0 - h, settings)) / (2 * h)
    c = system.dispersion_coefficient
    if dj <= 0:
        raise QuadratureError("flux derivative is not positive; no forward cascade")
    return 1.0 / math.sqrt(math.pi * c * dj)


# --------------------------------------------------------------------------
# Monte-Carlo oracle over the full 2D integral
# --------------------------------------------------------------------------

class RateOracle(NamedTuple):
    eta: float
    eta_stderr: float
    gamma: float
    gamma_stderr: float
    width: float


def mc_rate_oracle(system: WaveSystem, spectrum, k: float, samples: int = 2**22,
                   seed: int = 0, width_factor: float = 0.03,
                   r_range: Optional[tuple] = None, replicates: int = 16) -> RateOracle:
    """Brute-force estimate of eta_k and gamma_k from the unreduced 2D integrals.

    The momentum delta is used to set k2 = k -+ k1 as a vector; k1 ranges over
    the plane (log-uniform radius, uniform angle, randomised Sobol points) and
    the frequency delta is a Gaussian of width h = width_factor * omega(k),
    extrapolated from h and h/2.  Shares nothing with the reduced quadrature
    except the dispersion law, the vertex and the spectrum.
    """
    if r_range is None:
        lo, hi = getattr(spectrum, "support", (0.0, math.inf))
        r_range = (max(lo, 1e-3 * k), min(hi, 1e2 * k))
    r0, r1 = r_range
    L = math.log(r1 / r0)
    wk = float(system.dispersion(k))
    h = width_factor * wk
    per_rep = _pow2_at_least(math.ceil(samples / replicates))
    rows = []
    for child in np.random.SeedSequence(seed).spawn(replicates):
        u = qmc.Sobol(2, scramble=True, seed=np.random.default_rng(child)).random_base2(int(math.log2(per_rep)))
        r = r0 * np.exp(L * u[:, 0])
        th = 2 * np.pi * u[:, 1]
        jac = 2 * np.pi * L * r * r
        c, s = np.cos(th), np.sin(th)
        n1 = spectrum(r)
        # k = k1 + k2
        ks = np.hypot(k - r * c, r * s)
        ds = wk - system.dispersion(r) - system.dispersion(ks)
        vs = system.vertex(k, r, ks)
        # k2 = k + k1
        kd = np.hypot(k + r * c, r * s)
        dd = system.dispersion(kd) - wk - system.dispersion(r)
        vd = system.vertex(kd, k, r)
        ns, nd = spectrum(ks), spectrum(kd)
        est = []
        for w in (h, 0.5 * h):
            gs = np.exp(-0.5 * (ds / w) ** 2) / (math.sqrt(2 * math.pi) * w)
            gd = np.exp(-0.5 * (dd / w) ** 2) / (math.sqrt(2 * math.pi) * w)
            a_s = jac * gs * vs * vs
            a_d = jac * gd * vd * vd
            e_val = 4 * math.pi * (np.mean(a_s * n1 * ns) + 2 * np.mean(a_d * n1 * nd))
            g_val = 8 * math.pi * (np.mean(a_s * ns) + np.mean(a_d * (n1 - nd)))
            est.append((e_val, g_val))
        rows.append(est)
    rows = np.array(rows) * system.epsilon**2          # [rep, width, quantity]
    rich = (4 * rows[:, 1, :] - rows[:, 0, :]) / 3
    mean = rich.mean(axis=0)
    se = rich.std(axis=0, ddof=1) / math.sqrt(replicates)
    return RateOracle(float(mean[0]), float(se[0]), float(mean[1]), float(se[1]), h)
