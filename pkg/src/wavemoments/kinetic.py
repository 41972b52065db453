"""Kinetic equation for the mean spectrum: dn/dt = eta - gamma n = eps^2 J(n)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .core import IsotropicSpectrum, RateField, WaveSystem
from .integrate import IntegratorControls, dormand_prince
from .rates import QuadratureSettings, node_components, rate_components, rate_field


class CollisionEstimate(NamedTuple):
    value: float
    abs_error: float


def collision_term(system: WaveSystem, spectrum, k: float,
                   settings: Optional[QuadratureSettings] = None) -> CollisionEstimate:
    """J(n_k) from the full collision kernel, integrated directly (not as eta - gamma n)."""
    rc = rate_components(system, spectrum, k, settings)
    return CollisionEstimate(rc.collision, rc.abs_error)


def rayleigh_jeans_kernel(n_k, n1, n2):
    """Collision kernel n1 n2 - n_k (n1 + n2) of the k = 1 + 2 arrangement."""
    return n1 * n2 - n_k * (n1 + n2)


class ConsistencyReport(NamedTuple):
    residual: np.ndarray     # (eta - gamma n) - J per node
    bound: np.ndarray        # combined quadrature error of both routes

    @property
    def ok(self) -> bool:
        return bool(np.all(np.abs(self.residual) <= self.bound))


def consistency_check(field: RateField, spectrum, system: WaveSystem,
                      settings: Optional[QuadratureSettings] = None,
                      threads: int = 1) -> ConsistencyReport:
    """Compare the two routes to dn/dt at every node of the field's grid."""
    n = np.asarray(spectrum(field.grid), dtype=float)
    comps = node_components(system, spectrum, field.grid, settings, threads)
    j = np.array([c.collision for c in comps])
    j_err = np.array([c.abs_error for c in comps])
    lhs = field.eta - field.gamma * n
    bound = (field.eta_err * np.abs(field.eta) + field.gamma_err * np.abs(field.gamma * n)
             + j_err + 64 * np.finfo(float).eps * (np.abs(field.eta) + np.abs(field.gamma * n)))
    return ConsistencyReport(lhs - j, bound)


# --------------------------------------------------------------------------
# rate providers
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrozenRates:
    """Rates fixed once and for all (the linear analysis of the hierarchy)."""
    gamma: np.ndarray
    eta: np.ndarray

    def __call__(self, n):
        return self.gamma, self.eta

    @classmethod
    def stationary(cls, gamma, n) -> "FrozenRates":
        """eta = gamma n: the spectrum n is a fixed point of the kinetic equation."""
        gamma = np.asarray(gamma, dtype=float)
        return cls(gamma, gamma * np.asarray(n, dtype=float))

    @classmethod
    def from_field(cls, field: RateField) -> "FrozenRates":
        return cls(np.array(field.gamma), np.array(field.eta))


@dataclass(frozen=True, eq=False)
class SelfConsistentRates:
    """Rates recomputed from the current spectrum at every stage."""
    system: WaveSystem
    grid: np.ndarray
    settings: Optional[QuadratureSettings] = None
    threads: int = 1

    def __call__(self, n):
        spec = IsotropicSpectrum(self.grid, np.maximum(n, 0.0), extrapolation="powerlaw")
        f = rate_field(self.system, spec, self.grid, self.settings, self.threads)
        return np.array(f.gamma), np.array(f.eta)


# --------------------------------------------------------------------------
# time stepping
# --------------------------------------------------------------------------

def energy(system: WaveSystem, grid, n) -> float:
    """E = int omega n d^2k on the grid (trapezoid in ln k)."""
    grid = np.asarray(grid, dtype=float)
    integrand = 2 * math.pi * grid**2 * system.dispersion(grid) * np.asarray(n, dtype=float)
    return float(np.trapezoid(integrand, np.log(grid)))


@dataclass(frozen=True, eq=False)
class KETrajectory:
    times: np.ndarray
    spectra: tuple
    energy: np.ndarray
    controls: IntegratorControls
    steps_accepted: int
    steps_rejected: int

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / abs(e0)) if e0 else 0.0

    def write(self, outdir) -> list:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = []
        for i, s in enumerate(self.spectra):
            name = f"spectrum_{i:04d}.csv"
            s.to_csv(outdir / name)
            files.append(name)
        manifest = {
            "times": [float(t) for t in self.times],
            "files": files,
            "controls": asdict(self.controls),
            "energy": [float(e) for e in self.energy],
            "energy_drift": self.energy_drift,
            "steps_accepted": self.steps_accepted,
            "steps_rejected": self.steps_rejected,
        }
        (outdir / "trajectory.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return files + ["trajectory.json"]


def kinetic_rate(gamma, eta, n):
    """dn/dt; also row p = 1 of the moment hierarchy, so both advance identically."""
    return eta - gamma * n


def ke_rhs(rates):
    def rhs(t, n):
        gamma, eta = rates(n)
        return kinetic_rate(gamma, eta, n)
    return rhs


def evolve_ke(system: WaveSystem, spectrum: IsotropicSpectrum, t_end: float,
              controls: Optional[IntegratorControls] = None, rates=None) -> KETrajectory:
    """Integrate dn/dt = eta - gamma n on the spectrum's grid.

    ``rates`` is a provider n -> (gamma, eta); the default recomputes them from
    the current spectrum at every stage.
    """
    controls = controls or IntegratorControls()
    grid = spectrum.grid
    if np.any(spectrum.values < 0):
        raise ValueError("spectrum must be non-negative")
    if rates is None:
        rates = SelfConsistentRates(system, grid)
    res = dormand_prince(ke_rhs(rates), spectrum.values, t_end, controls)
    spectra = tuple(IsotropicSpectrum(grid, s, spectrum.extrapolation) for s in res.states)
    en = np.array([energy(system, grid, s) for s in res.states])
    return KETrajectory(res.times, spectra, en, controls, res.steps_accepted, res.steps_rejected)
