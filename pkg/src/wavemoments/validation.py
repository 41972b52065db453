"""Acceptance checks shared by the ``validate`` command and the test-suite.

Each check returns a CheckResult with the measured values that decided it, so
the same numbers appear in the run manifest and in the test log.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (PhysicalParams, PowerLawSpectrum, capillary_system, geometric_grid,
                   zf_spectrum)
from .integrate import IntegratorControls
from .kinetic import FrozenRates, rayleigh_jeans_kernel
from .moments import (DeviationTrajectory, capillary_gamma, deviation_solution_from_coefficients,
                      deviations, evolve_deviations, evolve_hierarchy,
                      exact_deviation_solution, init_hierarchy, log_gaussian_bump,
                      truncated_closed_form, transport_wave_diagnostic, xi, xi_growth_curve)
from .rates import (QuadratureSettings, dimensionless_rate_constant, kz_constant,
                    mc_rate_oracle, rate_components, rate_field)
from .resonance import mc_angular_oracle, resonant_partner, sum_partner

REFERENCE_RATE_CONSTANT = 4.30
REFERENCE_PREFACTOR = 1.20
REFERENCE_KZ_CONSTANT = 13.98


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict
    requirement: str
    note: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.number:2d} {self.name}: {shown} (requirement: {self.requirement})"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "measured": {k: _jsonable(v) for k, v in self.measured.items()},
                "requirement": self.requirement, "note": self.note,
                "seconds": round(self.seconds, 3)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    return v


def _timed(fn: Callable[..., CheckResult]):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        return CheckResult(**{**res.__dict__, "seconds": time.perf_counter() - t0})
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --------------------------------------------------------------------------
# capillary constants
# --------------------------------------------------------------------------

class _LogNormalBump:
    """Smooth spectrum vanishing fast at both ends, used for the brute-force check."""
    support = (0.0, math.inf)

    def __init__(self, centre=1.0, width=0.5):
        self.centre, self.width = centre, width

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return np.exp(-0.5 * (np.log(k / self.centre) / self.width) ** 2)


@dataclass(frozen=True)
class NormalizationVerdict:
    rate_constant: float
    factor_to_reference: float
    eta_ratio: float
    eta_z: float
    gamma_ratio: float
    gamma_z: float
    measure_confirmed: bool

    def text(self) -> str:
        if self.measure_confirmed:
            return (f"full 2D Monte-Carlo agrees with the reduced quadrature "
                    f"(eta ratio {self.eta_ratio:.5f}, z={self.eta_z:+.2f}; gamma ratio "
                    f"{self.gamma_ratio:.5f}, z={self.gamma_z:+.2f}); the angular/frequency "
                    f"measure is confirmed, so the factor {self.factor_to_reference:.4f} "
                    f"to the reference constant is not a measure-convention factor")
        return (f"full 2D Monte-Carlo disagrees with the reduced quadrature "
                f"(eta z={self.eta_z:+.2f}, gamma z={self.gamma_z:+.2f})")


def normalization_verdict(seed: int = 0, samples: int = 2**22,
                          rate_constant: Optional[float] = None) -> NormalizationVerdict:
    """Brute-force check of the reduction on the capillary system (smooth spectrum)."""
    system = capillary_system()
    if rate_constant is None:
        rate_constant = dimensionless_rate_constant(system).value
    spec = _LogNormalBump()
    rc = rate_components(system, spec, 1.0)
    mc = mc_rate_oracle(system, spec, 1.0, samples=samples, seed=seed, r_range=(1e-3, 1e2))
    ez = (mc.eta - rc.eta) / mc.eta_stderr
    gz = (mc.gamma - rc.gamma) / mc.gamma_stderr
    return NormalizationVerdict(rate_constant, REFERENCE_RATE_CONSTANT / rate_constant,
                                mc.eta / rc.eta, ez, mc.gamma / rc.gamma, gz,
                                bool(abs(ez) < 3 and abs(gz) < 3))


@_timed
def check_rate_constant(seed: int = 0, settings: Optional[QuadratureSettings] = None,
                        verdict: bool = True) -> CheckResult:
    """1: dimensionless capillary damping constant."""
    t0 = time.perf_counter()
    est = dimensionless_rate_constant(capillary_system(), settings=settings)
    runtime = time.perf_counter() - t0
    rel = est.value / REFERENCE_RATE_CONSTANT - 1.0
    measured = {"I": est.value, "I_rel_error": est.rel_error,
                "relative_deviation": rel, "runtime_s": runtime,
                "factor_reference_over_computed": REFERENCE_RATE_CONSTANT / est.value}
    note = ""
    if verdict:
        v = normalization_verdict(seed=seed, rate_constant=est.value)
        measured.update(mc_eta_ratio=v.eta_ratio, mc_eta_z=v.eta_z,
                        mc_gamma_ratio=v.gamma_ratio, mc_gamma_z=v.gamma_z,
                        mc_measure_confirmed=v.measure_confirmed)
        note = v.text()
    return CheckResult(1, "capillary rate constant", abs(rel) <= 0.05 and runtime < 60,
                       measured, "I = 4.30 within 5%, runtime < 60 s", note)


@_timed
def check_prefactor_identity(rate_constant: Optional[float] = None) -> CheckResult:
    """2: the reference constants combine to the reference prefactor."""
    arithmetic = REFERENCE_RATE_CONSTANT * REFERENCE_KZ_CONSTANT / (16 * math.pi)
    rel = arithmetic / REFERENCE_PREFACTOR - 1.0
    measured = {"I_ref*C/(16pi)": arithmetic, "relative_to_1.20": rel}
    if rate_constant is not None:
        measured["I_computed*C/(16pi)"] = rate_constant * REFERENCE_KZ_CONSTANT / (16 * math.pi)
    return CheckResult(2, "prefactor identity", abs(rel) <= 0.005 and abs(arithmetic - 1.196) < 5e-4,
                       measured, "4.30*13.98/(16 pi) = 1.196, within 0.5% of 1.20",
                       "arithmetic cross-check of the two reference constants; the product "
                       "with the computed constant is reported for information")


@_timed
def check_zf_stationarity(settings: Optional[QuadratureSettings] = None, nodes: int = 33,
                          threads: int = 1) -> CheckResult:
    """3: the ZF spectrum is a stationary point of the kinetic equation."""
    system = capillary_system()
    grid = geometric_grid(1.0, 100.0, nodes)
    spec = zf_spectrum(PhysicalParams(), grid)
    f = rate_field(system, spec, grid, settings, threads)
    n = spec.values
    resid = np.abs(f.eta - f.gamma * n) / (f.gamma * n)
    slope = float(np.polyfit(np.log(grid), np.log(f.gamma), 1)[0])
    ok = resid.max() < 0.05 and abs(slope - 0.75) <= 0.01
    return CheckResult(3, "ZF stationarity", bool(ok),
                       {"max_rel_residual": float(resid.max()), "gamma_slope": slope,
                        "nodes": nodes},
                       "max |eta - gamma n|/(gamma n) < 5% over 2 decades; slope 0.75 +- 0.01")


def random_triads(count: int, seed: int, margin: float = 0.1):
    """Random non-degenerate triangles with sides in [0.2, 2]."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        k1, k2 = rng.uniform(0.2, 2.0, 2)
        u = rng.uniform(margin, 1 - margin)
        lo, hi = abs(k1 - k2), k1 + k2
        out.append((lo + u * (hi - lo), k1, k2))
    return out


@_timed
def check_angular_oracle(seed: int = 0, count: int = 50, samples: int = 10**6) -> CheckResult:
    """4: analytic angular weight 2/S against randomised quasi-Monte-Carlo."""
    from .resonance import angular_weight
    zs = []
    t0 = time.perf_counter()
    for i, (k, k1, k2) in enumerate(random_triads(count, seed)):
        o = mc_angular_oracle(k, k1, k2, samples=samples, seed=seed + i)
        zs.append((o.estimate - angular_weight(k, k1, k2)) / o.stderr)
    runtime = time.perf_counter() - t0
    zs = np.abs(zs)
    return CheckResult(4, "angular-weight oracle", bool(zs.max() < 3 and runtime < 120),
                       {"triads": count, "max_abs_z": float(zs.max()),
                        "mean_abs_z": float(zs.mean()), "runtime_s": runtime},
                       "all triads within 3 sigma, runtime < 120 s")


@_timed
def check_rayleigh_jeans(seed: int = 0, count: int = 10_000) -> CheckResult:
    """5: the collision kernel vanishes on thermal spectra n = T/omega."""
    system = capillary_system()
    rng = np.random.default_rng(seed)
    T = 1.7
    worst = 0.0
    for _ in range(count):
        k = float(np.exp(rng.uniform(np.log(1e-2), np.log(1e2))))
        k1 = k * float(rng.uniform(0.01, 0.99))
        if rng.random() < 0.5:
            p = resonant_partner(system, k, k1)
            big, a, b = k, k1, p.k2
        else:
            # the 2 = k + 1 arrangement: the largest wave is the partner
            p = sum_partner(system, k, k1)
            big, a, b = p.k2, k, k1
        n = lambda q: T / float(system.dispersion(q))
        na, nb, nbig = n(a), n(b), n(big)
        r = abs(rayleigh_jeans_kernel(nbig, na, nb)) / (na * nb)
        worst = max(worst, r)
    return CheckResult(5, "Rayleigh-Jeans null", worst < 1e-12,
                       {"triads": count, "max_rel_kernel": worst}, "< 1e-12 relative")


@_timed
def check_gaussian_fixed_point(P: int = 8, theta_end: float = 5.0) -> CheckResult:
    """6: Gaussian moments are stationary under stationary frozen rates."""
    grid = geometric_grid(1.0, 100.0, 9)
    spec = PowerLawSpectrum(1.0, 17 / 4).on_grid(grid)
    gamma = grid**0.75
    rates = FrozenRates.stationary(gamma, spec.values)
    h0 = init_hierarchy(spec, P)
    sol = evolve_hierarchy(rates, h0, theta_end / gamma.min())
    drift = max(float(np.max(np.abs(h.values / h0.values - 1))) for h in sol.trajectory)
    return CheckResult(6, "Gaussian fixed point", drift < 1e-6,
                       {"max_rel_drift": drift, "P": P, "theta_max": float(sol.theta[-1].max())},
                       "relative drift < 1e-6 for theta in [0, 5]")


@_timed
def check_deviation_dynamics(P: int = 10, theta_end: float = 3.0) -> CheckResult:
    """7: integrated hierarchy against the exact deviation solution."""
    grid = geometric_grid(1.0, 100.0, 5)
    spec = PowerLawSpectrum(1.0, 17 / 4).on_grid(grid)
    gamma = grid**0.75
    rates = FrozenRates.stationary(gamma, spec.values)
    F0 = np.array([1.0, 0.3, -0.2, 0.5, 0.1, 0.0, 0.2, 0.4, -0.1])[: P - 1]
    h0 = init_hierarchy(spec, P, "custom", F0)
    times = np.linspace(0, theta_end / gamma.max(), 31)
    sol = evolve_hierarchy(rates, h0, times[-1], IntegratorControls(rtol=1e-12),
                           checkpoint_times=times)
    err = 0.0
    f2_err = 0.0
    for th, dv in zip(sol.theta, sol.deviations):
        for i in range(grid.size):
            ex = exact_deviation_solution(F0, th[i])
            err = max(err, float(np.max(np.abs(dv.values[:, i] - ex) / np.maximum(1.0, np.abs(ex)))))
            f2_err = max(f2_err, abs(dv.values[0, i] - F0[0] * math.exp(-2 * th[i])))
    return CheckResult(7, "deviation dynamics", err < 1e-8 and f2_err < 1e-8,
                       {"max_err_vs_exact": err, "max_err_F2_decay": f2_err, "P": P},
                       "integrator matches exact solution and e^-2theta to 1e-8")


@_timed
def check_closed_form_audit() -> CheckResult:
    """8: compare the θ-polynomial closed form with the exact solution."""
    rng = np.random.default_rng(0)
    F0 = rng.uniform(-0.4, 1.0, 5)                # p = 2..6
    p2 = max(abs(float(truncated_closed_form(F0, t)[0] - exact_deviation_solution(F0, t)[0]))
             for t in (0.1, 0.5, 1.0, 3.0))
    # remainder order for p = 3..6: fit log(gap) against log(theta)
    thetas = np.array([1e-3, 5e-4, 2.5e-4, 1.25e-4])
    gaps = np.abs(truncated_closed_form(F0, thetas) - exact_deviation_solution(F0, thetas))[1:]
    orders = [float(np.polyfit(np.log(thetas), np.log(g), 1)[0]) for g in gaps]
    f0 = [1.0, 0.0]
    exact_b = float(exact_deviation_solution(f0, 0.1)[1])
    exact_r = float(deviation_solution_from_coefficients(f0, 0.1)[1])
    truncated = float(truncated_closed_form(f0, 0.1)[1])
    gap_b = (exact_b - truncated) / exact_b
    gap_r = (exact_r - truncated) / exact_r
    ok = (p2 < 1e-15 and all(abs(o - 2) < 0.1 for o in orders)
          and abs(gap_b - 0.049) <= 0.001 and abs(gap_r - 0.049) <= 0.001)
    return CheckResult(8, "closed-form audit", bool(ok),
                       {"p2_max_abs_diff": p2, "remainder_orders_p3_to_p6": [round(o, 3) for o in orders],
                        "exact_p3": exact_b, "closed_form_p3": truncated,
                        "gap_binomial": gap_b, "gap_recursion": gap_r},
                       "p=2 exact; O(theta^2) remainder; gap 4.9% +- 0.1% at p=3, theta=0.1",
                       "the closed form is first-order accurate only; the discrepancy is reported")


def fluctuation_experiment(params: PhysicalParams = PhysicalParams(), nodes: int = 9,
                           k_range=(1.0, 100.0), gamma_source: str = "reference",
                           rate_constant: Optional[float] = None, checkpoints: int = 201,
                           controls: Optional[IntegratorControls] = None):
    """Deterministic start on ZF with frozen stationary rates; returns (grid, times, xi2, theory)."""
    grid = geometric_grid(k_range[0], k_range[1], nodes)
    spec = zf_spectrum(params, grid)
    gamma = np.asarray(capillary_gamma(params, grid, gamma_source, rate_constant))
    rates = FrozenRates.stationary(gamma, spec.values)
    h0 = init_hierarchy(spec, 2, "deterministic")
    times = np.linspace(0.0, 3.0 / gamma.min(), checkpoints)
    sol = evolve_hierarchy(rates, h0, times[-1], controls or IntegratorControls(rtol=1e-12),
                           checkpoint_times=times)
    xi2 = np.array([xi(h) ** 2 for h in sol.trajectory])
    theory = np.array([xi_growth_curve(params, grid, t, gamma_source, rate_constant) for t in times])
    return grid, times, xi2, theory, spec.values


def saturation_times(grid, times, xi2, n):
    """Time at which xi^2 / n^2 reaches 1 - e^-2 (gamma t = 1), per node."""
    out = []
    level = math.exp(-2.0)
    for i in range(grid.size):
        rem = 1.0 - xi2[:, i] / n[i] ** 2          # = e^(-2 gamma t)
        j = int(np.argmax(rem < level))
        a, b = rem[j - 1], rem[j]
        # log of the remainder is linear in t
        frac = (math.log(a) - math.log(level)) / (math.log(a) - math.log(b))
        out.append(times[j - 1] + frac * (times[j] - times[j - 1]))
    return np.array(out)


@_timed
def check_fluctuation_growth(seed: int = 0) -> CheckResult:
    """9: fluctuation growth from a deterministic start reproduces the closed form."""
    grid, times, xi2, theory, n = fluctuation_experiment()
    rng = np.random.default_rng(seed)
    idx = [(int(rng.integers(0, grid.size)), int(rng.integers(1, times.size))) for _ in range(20)]
    rel = max(abs(xi2[t, i] / theory[t, i] - 1) for i, t in idx)
    ts = saturation_times(grid, times, xi2, n)
    slope = float(np.polyfit(np.log(grid), np.log(ts), 1)[0])
    ok = rel < 1e-6 and abs(slope / -0.75 - 1) < 0.02 and bool(np.all(np.diff(ts) < 0))
    return CheckResult(9, "fluctuation growth", bool(ok),
                       {"max_rel_err_20_samples": rel, "saturation_slope": slope},
                       "xi^2 within 1e-6 of closed form; saturation time ~ k^-0.75 within 2%")


@_timed
def check_transport_wave(P: int = 512, p0: float = 32.0, width: float = 0.5,
                         theta_end: float = 1.0) -> CheckResult:
    """10: a bump in ln p travels at unit speed without changing shape."""
    F0 = log_gaussian_bump(P, p0, width)
    thetas = np.linspace(0.0, theta_end, 21)
    _, vals = evolve_deviations(F0, theta_end, IntegratorControls(rtol=1e-10),
                                checkpoint_times=thetas)
    exact = DeviationTrajectory.exact(F0, thetas)
    route_gap = float(np.max(np.abs(vals - exact.values)))
    rep = transport_wave_diagnostic(DeviationTrajectory(thetas, vals))
    # late-time decay of the fixed-p value approaches e^(-2 theta)
    late = exact_deviation_solution(F0, np.array([12.0, 14.0]))[rep.fixed_p - 2]
    late_rate = float(math.log(late[0] / late[1]) / 2.0)
    ok = (abs(rep.speed - 1.0) <= 0.05 and rep.width_variation <= 0.10
          and rep.amplitude_decay_per_unit_theta < 0.10 and not rep.truncated
          and rep.fixed_p_decay_rate > 10 * rep.amplitude_decay_per_unit_theta
          and route_gap < 1e-8)
    return CheckResult(10, "transport wave", bool(ok),
                       {"speed": rep.speed, "width_variation": rep.width_variation,
                        "peak_amplitude_loss_per_theta": rep.amplitude_decay_per_unit_theta,
                        "fixed_p": rep.fixed_p, "fixed_p_decay_rate": rep.fixed_p_decay_rate,
                        "fixed_p_late_decay_rate": late_rate, "truncated": rep.truncated,
                        "integrator_vs_exact": route_gap},
                       "speed 1.00 +- 0.05; width within 10%; peak loss < 10%/theta; fixed p decays")


def artifact_digest(seed: int = 0) -> str:
    """sha256 over a representative set of seeded artifacts."""
    h = hashlib.sha256()
    grid = geometric_grid(1.0, 10.0, 8)
    spec = zf_spectrum(PhysicalParams(), grid)
    h.update(rate_field(capillary_system(), spec, grid, QuadratureSettings(epsrel=1e-8)).to_csv().encode())
    o = mc_angular_oracle(1.0, 0.8, 0.7, samples=10**5, seed=seed)
    h.update(repr(tuple(o)).encode())
    grid, times, xi2, theory, n = fluctuation_experiment(nodes=4, checkpoints=11)
    h.update(np.ascontiguousarray(xi2).tobytes())
    return h.hexdigest()


@_timed
def check_determinism(seed: int = 0) -> CheckResult:
    """11: repeated seeded runs give byte-identical artifacts."""
    a, b = artifact_digest(seed), artifact_digest(seed)
    return CheckResult(11, "determinism", a == b, {"digest": a[:16], "repeat_equal": a == b},
                       "identical digests for identical seeds")


def run_all(seed: int = 0, settings: Optional[QuadratureSettings] = None, threads: int = 1,
            skip: tuple = ()) -> list:
    checks = [
        lambda: check_rate_constant(seed, settings),
        None,  # filled below: needs the computed constant
        lambda: check_zf_stationarity(settings, threads=threads),
        lambda: check_angular_oracle(seed),
        lambda: check_rayleigh_jeans(seed),
        check_gaussian_fixed_point,
        check_deviation_dynamics,
        check_closed_form_audit,
        lambda: check_fluctuation_growth(seed),
        check_transport_wave,
        lambda: check_determinism(seed),
    ]
    results = []
    rate_constant = None
    for i, fn in enumerate(checks, start=1):
        if i in skip:
            continue
        if i == 2:
            res = check_prefactor_identity(rate_constant)
        else:
            res = fn()
        if i == 1:
            rate_constant = res.measured["I"]
        results.append(res)
    return results


def implied_kz_constant(settings: Optional[QuadratureSettings] = None) -> float:
    """KZ constant implied by the capillary vertex normalisation (diagnostic)."""
    return kz_constant(capillary_system(), settings)
