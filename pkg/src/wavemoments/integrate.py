"""Adaptive explicit Runge-Kutta (Dormand-Prince 5(4)) shared by the kinetic and moment solvers.

A hand-rolled stepper rather than ``scipy.integrate.solve_ivp`` because step
acceptance must also reject states that leave the admissible (non-negative)
set, auxiliary components (accumulated renormalised time) must be excluded from
the error norm, and the kinetic equation and the p = 1 row of the hierarchy
must be advanced by literally the same arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class StiffnessError(RuntimeError):
    """Step size fell below the floor; carries the state at failure."""

    def __init__(self, message, t, h, y, err_norm):
        super().__init__(message)
        self.t, self.h, self.y, self.err_norm = t, h, y, err_norm


@dataclass(frozen=True)
class IntegratorControls:
    rtol: float = 1e-10
    atol: float = 1e-300
    h0: Optional[float] = None     # initial step; default t_end / 100
    h_min_rel: float = 1e-14       # underflow floor relative to t_end
    max_steps: int = 1_000_000
    safety: float = 0.9
    checkpoints: int = 11          # evenly spaced output times including 0 and t_end

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.checkpoints < 2:
            raise ValueError("need at least two checkpoints")


# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegrationResult:
    times: np.ndarray          # checkpoint times
    states: np.ndarray         # [n_checkpoints, *state_shape]
    steps_accepted: int
    steps_rejected: int
    positivity_rejections: int


def dormand_prince(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
                   t_end: float, controls: IntegratorControls,
                   error_mask: Optional[np.ndarray] = None,
                   nonnegative_mask: Optional[np.ndarray] = None,
                   checkpoint_times: Optional[Sequence[float]] = None) -> IntegrationResult:
    """Integrate y' = rhs(t, y) from 0 to t_end, landing exactly on each checkpoint.

    A step is accepted when the scaled local error (over ``error_mask``
    components) is at most one *and* every ``nonnegative_mask`` component of
    the new state is >= 0; otherwise the step is retried with a smaller h.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    y = np.array(y0, dtype=float, copy=True)
    if error_mask is None:
        error_mask = np.ones(y.shape, dtype=bool)
    if nonnegative_mask is None:
        nonnegative_mask = np.ones(y.shape, dtype=bool)
    if np.any(y[nonnegative_mask] < 0):
        raise ValueError("initial state violates non-negativity")
    if checkpoint_times is None:
        checkpoint_times = np.linspace(0.0, t_end, controls.checkpoints)
    checkpoint_times = np.asarray(checkpoint_times, dtype=float)
    if checkpoint_times[0] != 0.0 or checkpoint_times[-1] != t_end or np.any(np.diff(checkpoint_times) <= 0):
        raise ValueError("checkpoints must increase from 0 to t_end")

    h = controls.h0 if controls.h0 is not None else t_end / 100.0
    h_min = controls.h_min_rel * t_end
    t = 0.0
    out = [y.copy()]
    acc = rej = pos_rej = 0
    k1 = rhs(t, y)
    for target in checkpoint_times[1:]:
        while t < target:
            if acc + rej >= controls.max_steps:
                raise StiffnessError("maximum number of steps exceeded", t, h, y, math.nan)
            last = t + h >= target * (1 - 1e-15)
            step = target - t if last else h
            ks = [k1]
            # overflow in a trial step surfaces as a non-finite state and is rejected below
            with np.errstate(over="ignore", invalid="ignore"):
                for i in range(1, 7):
                    yi = y + step * sum(a * kk for a, kk in zip(_A[i], ks))
                    ks.append(rhs(t + _C[i] * step, yi))
                y_new = y + step * sum(b * kk for b, kk in zip(_B5, ks) if b != 0.0)
                err = step * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
            scale = controls.atol + controls.rtol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = np.abs(err) / scale
            err_norm = float(np.max(ratio[error_mask])) if np.any(error_mask) else 0.0
            negative = bool(np.any(y_new[nonnegative_mask] < 0))
            if err_norm <= 1.0 and not negative and np.all(np.isfinite(y_new)):
                t = target if last else t + step
                y = y_new
                k1 = ks[6]          # first-same-as-last
                acc += 1
                fac = 5.0 if err_norm == 0 else min(5.0, controls.safety * err_norm ** -0.2)
                if not last or fac < 1:
                    h = step * max(0.2, fac)
            else:
                rej += 1
                if negative:
                    pos_rej += 1
                    h = 0.5 * step
                else:
                    h = step * max(0.1, controls.safety * err_norm ** -0.2) if np.isfinite(err_norm) else 0.1 * step
                if h < h_min:
                    raise StiffnessError(
                        f"step size {h:.3e} fell below {h_min:.3e} at t={t:.6g} "
                        f"(error norm {err_norm:.3e}, negative state: {negative})",
                        t, h, y, err_norm)
        out.append(y.copy())
    return IntegrationResult(checkpoint_times, np.array(out), acc, rej, pos_rej)
