"""Scalar functionals of fields and trajectories.

Total mass, L^p norms on the unit-measure circle, hitting times, the
moment-bound multiplier K(alpha), and the empirical coupled-pair distance
built from space-time power sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridSpec, _check_field


@dataclass
class FunctionalSeries:
    name: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) != len(self.values):
            raise ValueError("times and values must be 1-d and of equal length")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", np.asarray(self.values))


def total_mass(u: np.ndarray, spec: GridSpec) -> float:
    """h * sum of the field: the integral over the unit circle."""
    u = _check_field(u, spec)
    out = spec.h * u.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def lp_norm(u: np.ndarray, p: float, spec: GridSpec) -> float:
    """(h * sum u^p)^(1/p); monotone nondecreasing in p since the circle
    has total measure 1."""
    if p < 1:
        raise ValueError(f"order must be at least 1, got {p}")
    u = _check_field(u, spec)
    if np.any(u < 0):
        raise ValueError("lp_norm expects a nonnegative field")
    out = (spec.h * np.sum(u**p, axis=-1)) ** (1.0 / p)
    return float(out) if np.ndim(out) == 0 else out


def hitting_time(series: FunctionalSeries, level: float):
    """First sampled time with value >= level, or None."""
    hits = np.nonzero(series.values >= level)[0]
    if len(hits) == 0:
        return None
    return float(series.times[hits[0]])


def k_alpha(alpha: float, c_alpha: float) -> float:
    """Moment-bound multiplier (2 - alpha) / (c * (1 - alpha)) for the
    quadratic-variation estimate, with c the lower Burkholder constant."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if c_alpha <= 0:
        raise ValueError(f"constant must be positive, got {c_alpha}")
    return (2.0 - alpha) / (c_alpha * (1.0 - alpha))


def dpalpha_estimate(power_sums, p: float, alpha: float) -> float:
    """Empirical coupled distance: (mean over pairs of S^{alpha/2})^{1/p},
    where S is each pair's space-time sum of |u1 - u2|^p.

    The estimator scales as |c|^{alpha/2} when both inputs are scaled by
    c, matching the stated homogeneity of the underlying norm.
    """
    if p < 1:
        raise ValueError(f"power must be at least 1, got {p}")
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    s = np.asarray(power_sums, dtype=float)
    if s.size == 0:
        raise ValueError("need at least one coupled pair")
    if np.any(s < 0):
        raise ValueError("power sums must be nonnegative")
    return float(np.mean(s ** (alpha / 2.0)) ** (1.0 / p))


def pair_power_sum(fields1, fields2, dt: float, spec: GridSpec, p: float) -> float:
    """S = sum_k dt * h * sum_x |u1 - u2|^p over a shared step schedule.

    Left-endpoint convention: the last time slice is excluded.
    """
    f1 = np.asarray(fields1, dtype=float)
    f2 = np.asarray(fields2, dtype=float)
    if f1.shape != f2.shape:
        raise ValueError(f"mismatched schedules: shapes {f1.shape} vs {f2.shape}")
    if f1.shape[-1] != spec.m:
        raise ValueError(f"field length {f1.shape[-1]} does not match grid with m={spec.m}")
    diff = np.abs(f1[:-1] - f2[:-1])
    return float(dt * spec.h * np.sum(diff**p))
