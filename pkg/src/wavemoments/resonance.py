"""Geometry of the 2D three-wave resonant manifold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .core import WaveSystem


def twice_area(k, k1, k2):
    """Vectorised triangle factor S (twice the triangle area); nan off the triangle domain.

    Uses Kahan's ordering of Heron's formula, which stays accurate for needle-like
    triangles (one side much shorter than the other two).
    """
    k, k1, k2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, k1, k2)))
    s = np.sort(np.stack([k, k1, k2]), axis=0)
    c, b, a = s[0], s[1], s[2]
    rad = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    with np.errstate(invalid="ignore"):
        return np.where(rad >= 0, 0.5 * np.sqrt(np.abs(rad)), np.nan)


def _check_positive(*ks):
    for x in ks:
        if not x > 0:
            raise ValueError(f"wavenumbers must be positive, got {x!r}")


def triangle_factor(k: float, k1: float, k2: float) -> Optional[float]:
    """S = 1/2 sqrt(2((k k1)^2 + (k k2)^2 + (k1 k2)^2) - k^4 - k1^4 - k2^4).

    Returns None when the three lengths do not close a triangle.
    """
    _check_positive(k, k1, k2)
    s = float(twice_area(k, k1, k2))
    return None if math.isnan(s) else s


def angular_weight(k: float, k1: float, k2: float) -> Optional[float]:
    """Value of the double angular integral of the 2D momentum delta, 2/S.

    The map (theta1, theta2) -> k1 e1 + k2 e2 has Jacobian k1 k2 |sin| = S and
    hits any admissible target twice (mirror triangles).
    """
    s = triangle_factor(k, k1, k2)
    if s is None:
        return None
    return math.inf if s == 0 else 2.0 / s


@dataclass(frozen=True)
class TriadGeometry:
    k: float
    k1: float
    k2: float
    s: float
    angular_weight: float


def triad_geometry(k: float, k1: float, k2: float) -> Optional[TriadGeometry]:
    s = triangle_factor(k, k1, k2)
    if s is None:
        return None
    return TriadGeometry(k, k1, k2, s, math.inf if s == 0 else 2.0 / s)


def _pow2_at_least(n: int) -> int:
    """Smallest power of two >= n (scrambled Sobol points are balanced only in such blocks)."""
    return 1 << max(0, int(n - 1).bit_length())


class AngularOracle(NamedTuple):
    estimate: float
    stderr: float
    converged: bool
    coarse: float
    fine: float
    width: float


def mc_angular_oracle(k: float, k1: float, k2: float, samples: int = 10**6,
                      seed: int = 0, width_factor: float = 0.1,
                      replicates: int = 16) -> AngularOracle:
    """Randomised quasi-Monte-Carlo estimate of  int dtheta1 dtheta2 delta^2(k - k1 - k2).

    The 2D delta is replaced by a Gaussian of width h; angles are drawn from
    scrambled Sobol sequences, one independent scramble per replicate, and the
    standard error comes from the spread between replicates.  Estimates at h
    and h/2 are combined by Richardson extrapolation.  A coarse/fine mismatch
    much larger than the h^2 bias (as at a degenerate triad, where the target
    is infinite) is reported as ``converged=False``.
    """
    _check_positive(k, k1, k2)
    if samples < 10**4:
        raise ValueError("need at least 1e4 samples")
    # keep the mollifier well inside the admissible band |k1-k2| <= k <= k1+k2
    gap = min(k1 + k2 - k, k - abs(k1 - k2))
    h = width_factor * min(k, k1, k2)
    if gap > 0:
        h = min(h, width_factor * gap)
    per_rep = _pow2_at_least(math.ceil(samples / replicates))
    children = np.random.SeedSequence(seed).spawn(replicates)
    rows = []
    for child in children:
        engine = qmc.Sobol(2, scramble=True, seed=np.random.default_rng(child))
        u = engine.random_base2(int(math.log2(per_rep)))
        t1, t2 = 2 * np.pi * u[:, 0], 2 * np.pi * u[:, 1]
        rx = k - k1 * np.cos(t1) - k2 * np.cos(t2)
        ry = -k1 * np.sin(t1) - k2 * np.sin(t2)
        r2 = rx * rx + ry * ry
        ests = []
        for w in (h, 0.5 * h):
            ests.append(np.mean(np.exp(-r2 / (2 * w * w))) * 4 * np.pi**2 / (2 * np.pi * w * w))
        rows.append(ests)
    rows = np.array(rows)
    coarse, fine = rows.mean(axis=0)
    rich = (4 * rows[:, 1] - rows[:, 0]) / 3
    est = float(rich.mean())
    se = float(rich.std(ddof=1) / math.sqrt(replicates))
    # an O(h^2) bias shrinks 4x on halving; anything far larger means divergence
    converged = gap > 0 and abs(fine - coarse) <= 0.05 * abs(fine) + 6 * se
    return AngularOracle(est, se, bool(converged), float(coarse), float(fine), h)


class Partner(NamedTuple):
    k2: float
    jacobian: float


def _invert_dispersion(system: WaveSystem, w: float, hi_guess: float) -> float:
    if system.is_power_law:
        return float((w / system.dispersion_coefficient) ** (1.0 / system.dispersion_exponent))
    hi = hi_guess
    while float(system.dispersion(hi)) < w:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("dispersion does not reach the target frequency")
    lo = hi
    while float(system.dispersion(lo)) > w:
        lo *= 0.5
        if lo < 1e-300:
            raise ArithmeticError("dispersion does not fall below the target frequency")
    try:
        return brentq(lambda q: float(system.dispersion(q)) - w, lo, hi,
                      xtol=1e-300, rtol=1e-14, maxiter=500)
    except RuntimeError as exc:
        raise ArithmeticError(f"root finder did not converge: {exc}") from exc


def resonant_partner(system: WaveSystem, k: float, k1: float) -> Optional[Partner]:
    """Solve omega(k) = omega(k1) + omega(k2) for k2.

    Returns the partner and the frequency-delta Jacobian 1/|omega'(k2)|, or None
    when omega(k1) >= omega(k).
    """
    _check_positive(k, k1)
    if system.is_power_law:
        a = system.dispersion_exponent
        r = (k1 / k) ** a
        if r >= 1.0:
            return None
        # k (1 - r)^(1/a), accurate for r -> 1 and r -> 0
        k2 = k * math.exp(math.log1p(-r) / a)
    else:
        w = float(system.dispersion(k)) - float(system.dispersion(k1))
        if w <= 0:
            return None
        k2 = _invert_dispersion(system, w, k)
    return Partner(k2, 1.0 / abs(float(system.dispersion_derivative(k2))))


def sum_partner(system: WaveSystem, k: float, k1: float) -> Partner:
    """Solve omega(k2) = omega(k) + omega(k1) for k2 (the k2 = k + k1 branch)."""
    _check_positive(k, k1)
    if system.is_power_law:
        a = system.dispersion_exponent
        big, small = max(k, k1), min(k, k1)
        k2 = big * math.exp(math.log1p((small / big) ** a) / a)
    else:
        w = float(system.dispersion(k)) + float(system.dispersion(k1))
        k2 = _invert_dispersion(system, w, k + k1)
    return Partner(k2, 1.0 / abs(float(system.dispersion_derivative(k2))))
