"""The scalar equation du = u^gamma dW (Ito), gamma > 1.

Two samplers are provided: a cheap Euler-Maruyama scheme (clamped at 0,
which is absorbing for the scheme) and an exact terminal sampler through
the Bessel reduction -- u^{1-gamma}(t) is a Bessel process of dimension
(2*gamma - 1)/(gamma - 1) in a rescaled clock, and its square has exact
noncentral chi-square transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .noise import NoiseStream


def _pow(u, gamma: float):
    """u**gamma with fast paths for the common small integer exponents."""
    if gamma == 2.0:
        return u * u
    if float(gamma).is_integer():
        return u ** int(gamma)
    return np.power(u, gamma)


@dataclass
class SodeConfig:
    gamma: float
    u0: float
    dt: float
    T: float
    scheme: str = "euler"

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.u0 <= 0:
            raise ValueError(f"initial value must be positive, got {self.u0}")
        if not 0 < self.dt <= self.T:
            raise ValueError(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if self.scheme not in ("euler", "exact-bessel"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))


@dataclass
class SodePath:
    times: np.ndarray
    values: np.ndarray
    running_max: float
    exploded: bool = False
    exploded_step: int | None = None

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def bessel_dimension(gamma: float) -> float:
    """Dimension (2*gamma - 1)/(gamma - 1) of the reduced Bessel process.

    Always exceeds 2 for gamma > 1, so the reduced process never hits 0.
    """
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    return (2.0 * gamma - 1.0) / (gamma - 1.0)


def simulate_euler(cfg: SodeConfig, stream: NoiseStream, noise_scale: float = 1.0) -> SodePath:
    """Explicit scheme u_{k+1} = u_k + u_k^gamma * dW_k, clamped at 0.

    `noise_scale` is a test hook; 0 turns the path deterministic.
    Overflow marks the path as numerically exploded (value frozen at +inf
    from the offending step on) rather than raising.
    """
    n = cfg.n_steps
    z = stream.normals(n) * (np.sqrt(cfg.dt) * noise_scale)
    values = np.empty(n + 1)
    values[0] = u = cfg.u0
    exploded = False
    exploded_step = None
    for k in range(n):
        if u > 0:
            u = u + _pow(u, cfg.gamma) * z[k]
            if not np.isfinite(u):
                exploded = True
                exploded_step = k
                values[k + 1 :] = np.inf
                break
            if u < 0:
                u = 0.0
        values[k + 1] = u
    times = np.arange(n + 1) * cfg.dt
    return SodePath(
        times=times,
        values=values,
        running_max=float(np.max(values)),
        exploded=exploded,
        exploded_step=exploded_step,
    )


def euler_ensemble(
    cfg: SodeConfig,
    master_seed: int,
    path_indices,
    collect_qv: bool = False,
    block_steps: int = 1024,
) -> dict:
    """Vectorised Euler ensemble; one Philox stream per path.

    Returns per-path arrays: terminal value, running max, absorbed and
    exploded flags, and (optionally) the accumulated quadratic variation
    sum_k u_k^{2 gamma} dt.  A path whose update overflows is flagged
    "exploded" and frozen at its last finite state, so every reported
    statistic stays finite.  Results are independent of `block_steps`.
    """
    path_indices = list(path_indices)
    npaths = len(path_indices)
    streams = [NoiseStream(master_seed, i) for i in path_indices]
    n = cfg.n_steps
    sqdt = np.sqrt(cfg.dt)

    u = np.full(npaths, cfg.u0)
    rmax = np.full(npaths, cfg.u0)
    qv = np.zeros(npaths) if collect_qv else None
    exploded = np.zeros(npaths, dtype=bool)
    exploded_step = np.full(npaths, -1, dtype=np.int64)

    done = 0
    z = np.empty((npaths, block_steps))
    with np.errstate(over="ignore", invalid="ignore"):
        while done < n:
            k_block = min(block_steps, n - done)
            for j, s in enumerate(streams):
                z[j, :k_block] = s.normals(k_block)
            for k in range(k_block):
                active = ~exploded
                w = _pow(u, cfg.gamma)
                if collect_qv:
                    dqv = w * w * cfg.dt
                    qv = np.where(active & np.isfinite(dqv), qv + dqv, qv)
                u_next = np.maximum(u + w * (z[:, k] * sqdt), 0.0)
                bad = ~np.isfinite(u_next) & active
                if bad.any():
                    exploded |= bad
                    exploded_step[bad] = done + k
                u = np.where(active & ~bad, u_next, u)
                np.maximum(rmax, u, out=rmax)
            done += k_block

    out = {
        "terminal": u,
        "running_max": rmax,
        "absorbed": (u == 0.0) & ~exploded,
        "exploded": exploded,
        "exploded_step": exploded_step,
    }
    if collect_qv:
        out["qv"] = qv
    return out


def simulate_exact_bessel(cfg: SodeConfig, stream: NoiseStream, t: float) -> float:
    """Exact sample of u(t) via the squared-Bessel transition.

    Z(0) = u0^{1-gamma}; Z^2 is a squared Bessel process of dimension
    delta = bessel_dimension(gamma), sampled at s = (gamma-1)^2 t through
    its noncentral chi-square transition X_s = s * chi'^2(delta, X_0/s).
    The output u(t) = X_s^{-1/(2(gamma-1))} is strictly positive.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0:
        return cfg.u0
    delta = bessel_dimension(cfg.gamma)
    s = (cfg.gamma - 1.0) ** 2 * t
    x0 = cfg.u0 ** (2.0 * (1.0 - cfg.gamma))
    gen = stream.detached_generator()
    x = s * gen.noncentral_chisquare(delta, x0 / s)
    return float(x ** (-0.5 / (cfg.gamma - 1.0)))


def exact_bessel_ensemble(cfg: SodeConfig, master_seed: int, path_indices, t: float) -> np.ndarray:
    """Terminal samples u(t), path i drawn from its own stream."""
    return np.array(
        [simulate_exact_bessel(cfg, NoiseStream(master_seed, i), t) for i in path_indices]
    )


def asymptotic_pdf(gamma: float, y, variant: str = "chi-square"):
    """Density of the limit of u^{2(1-gamma)}(t) / ((gamma-1)^2 t).

    Two variants are provided because the printed exponent and the
    Bessel-reduction exponent disagree; the sampler oracle adjudicates.

    - "chi-square": chi-square density with bessel_dimension(gamma)
      degrees of freedom, i.e. exponent +1/(2 gamma - 2) on y.
    - "paper-literal": same normalising constant but exponent
      -1/(2 gamma - 2), as printed.

    Both vanish for y < 0.
    """
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    c = 1.0 / (2.0 * gamma - 2.0)
    shape = (2.0 * gamma - 1.0) / (2.0 * gamma - 2.0)  # = delta/2
    lognorm = shape * np.log(2.0) + special.gammaln(shape)
    out = np.zeros_like(y)
    pos = y > 0
    if variant == "chi-square":
        expo = c
    elif variant == "paper-literal":
        expo = -c
    else:
        raise ValueError(f"unknown variant {variant!r}")
    # exponent convention: density ~ y^(shape-1) e^{-y/2} for chi-square,
    # where shape - 1 = c; the literal variant flips the sign of c.
    out[pos] = np.exp(expo * np.log(y[pos]) - 0.5 * y[pos] - lognorm)
    return float(out[0]) if scalar else out


def asymptotic_cdf(gamma: float, y, variant: str = "chi-square"):
    """Integral of asymptotic_pdf from 0 to y (not normalised for the
    literal variant unless it happens to integrate to 1)."""
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    y = np.asarray(y, dtype=float)
    c = 1.0 / (2.0 * gamma - 2.0)
    shape = (2.0 * gamma - 1.0) / (2.0 * gamma - 2.0)
    if variant == "chi-square":
        return special.gammainc(shape, np.maximum(y, 0.0) / 2.0)
    if variant == "paper-literal":
        a = 1.0 - c
        # integral of y^{-c} e^{-y/2} / (2^{1+c} Gamma(1+c))
        total = np.exp(
            a * np.log(2.0) + special.gammaln(a) - shape * np.log(2.0) - special.gammaln(shape)
        )
        return total * special.gammainc(a, np.maximum(y, 0.0) / 2.0)
    raise ValueError(f"unknown variant {variant!r}")


def rescaled_statistic(u_T, gamma: float, T: float):
    """y = u(T)^{2(1-gamma)} / ((gamma-1)^2 T), the quantity with a
    chi-square limit law as T grows."""
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    u_T = np.asarray(u_T, dtype=float)
    if np.any(u_T <= 0):
        raise ValueError("terminal value must be positive (0 means the Euler scheme absorbed)")
    out = u_T ** (2.0 * (1.0 - gamma)) / ((gamma - 1.0) ** 2 * T)
    return float(out) if out.ndim == 0 else out
