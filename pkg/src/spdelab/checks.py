"""Statistical oracles for the martingale inequalities.

Every check consumes plain sample vectors and emits a CheckReport with an
empirical value, its uncertainty, the theoretical bound, and a verdict.
Inequality checks are one-sided with 3-sigma margins; only the drift test
is two-sided.  Verdicts are deterministic functions of the samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import k_alpha

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass
class CheckReport:
    name: str
    empirical: dict
    bounds: dict
    verdict: str
    sample_size: int
    notes: str = ""

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "name": self.name,
            "empirical": clean(self.empirical),
            "bounds": clean(self.bounds),
            "verdict": self.verdict,
            "sample_size": int(self.sample_size),
            "notes": self.notes,
        }


def _proportion_margin(successes: int, n: int) -> float:
    """3-sigma one-sided margin for a proportion estimate.

    Normal approximation; Wilson interval fallback when the success count
    is small enough that the normal stderr is unreliable.
    """
    phat = successes / n
    if successes >= 10 and n - successes >= 10:
        return 3.0 * np.sqrt(phat * (1.0 - phat) / n)
    z = 3.0
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return center + half - phat


def check_hitting_bound(sup_samples, x: float, levels) -> CheckReport:
    """Exceedance probabilities of the running max against 1 ^ (x/n).

    One-sided: pass when the empirical frequency sits at or below the
    bound, inconclusive when it exceeds the bound by less than the
    3-sigma margin, fail beyond that.  Horizon truncation only lowers the
    running max, so the one-sided form stays valid.
    """
    sup = np.asarray(sup_samples, dtype=float)
    if sup.size == 0:
        raise ValueError("need at least one sample")
    if x <= 0:
        raise ValueError(f"initial value must be positive, got {x}")
    n_samples = sup.size
    per_level = []
    verdicts = []
    for lev in levels:
        bound = min(1.0, x / lev)
        hits = int(np.count_nonzero(sup >= lev))
        phat = hits / n_samples
        margin = _proportion_margin(hits, n_samples)
        if phat <= bound:
            v = "pass"
        elif phat <= bound + margin:
            v = "inconclusive"
        else:
            v = "fail"
        verdicts.append(v)
        per_level.append(
            {
                "level": float(lev),
                "empirical": phat,
                "margin": float(margin),
                "bound": bound,
                "verdict": v,
            }
        )
    overall = "fail" if "fail" in verdicts else ("inconclusive" if "inconclusive" in verdicts else "pass")
    return CheckReport(
        name="hitting-bound",
        empirical={"levels": per_level},
        bounds={"formula": "min(1, x/n)", "x": float(x)},
        verdict=overall,
        sample_size=n_samples,
    )


def check_sup_moment(sup_samples, x, alpha: float) -> CheckReport:
    """Sandwich x^a <= E[sup^a] <= x^a/(1-a) for 0 < a < 1.

    `x` may be a scalar initial value or a per-path vector; the bracket
    then uses mean(x^a).  Pass when the 99% confidence interval meets the
    bracket and does not overshoot the upper edge by more than 3 stderr.
    A confidence interval entirely below the lower edge is flagged as a
    harness bug, since sup >= initial pathwise.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    sup = np.asarray(sup_samples, dtype=float)
    if sup.size == 0:
        raise ValueError("need at least one sample")
    xa = np.asarray(x, dtype=float) ** alpha
    lo = float(np.mean(xa))
    hi = lo / (1.0 - alpha)
    vals = sup**alpha
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    ci = (mean - _Z99 * se, mean + _Z99 * se)
    notes = ""
    if se >= abs(mean) and mean > 0:
        notes = (
            "stderr comparable to the mean: heavy-tailed samples, the "
            "interval check is dominated by its lower edge"
        )
    if ci[1] < lo:
        verdict = "fail"
        notes = "confidence interval below the exact lower bound: harness bug"
    elif mean > hi + 3.0 * se:
        verdict = "fail"
    elif ci[0] <= hi and ci[1] >= lo:
        verdict = "pass"
    else:
        verdict = "inconclusive"
    return CheckReport(
        name="sup-moment-sandwich",
        empirical={"mean": mean, "stderr": se, "ci99": list(ci)},
        bounds={"lower": lo, "upper": hi, "alpha": alpha},
        verdict=verdict,
        sample_size=sup.size,
        notes=notes,
    )


def check_qv_moment(qv_samples, initial_samples, alpha: float, c_alpha: float) -> CheckReport:
    """Ratio E[QV^{a/2}] / E[M(0)^a] against (2-a)/(c(1-a)).

    The lower Burkholder constant c is a configured guess, so the verdict
    is informational: pass when the ratio sits below the threshold by the
    3-sigma margin, inconclusive otherwise.  The c-free factor
    (2-a)/(1-a) is reported alongside.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    qv = np.asarray(qv_samples, dtype=float)
    init = np.asarray(initial_samples, dtype=float)
    if qv.size == 0 or init.size == 0:
        raise ValueError("need at least one sample")
    num_vals = qv ** (alpha / 2.0)
    with np.errstate(invalid="ignore"):
        num = float(np.mean(num_vals))
        den = float(np.mean(init**alpha))
        if den == 0:
            raise ValueError("initial samples give a zero denominator")
        ratio = num / den
        se = float(np.std(num_vals, ddof=1) / np.sqrt(num_vals.size)) if num_vals.size > 1 else 0.0
    se_ratio = se / den
    threshold = k_alpha(alpha, c_alpha)
    verdict = "pass" if ratio + 3.0 * se_ratio <= threshold else "inconclusive"
    if not np.isfinite(ratio):
        verdict = "fail"
    return CheckReport(
        name="qv-moment",
        empirical={"ratio": ratio, "stderr": se_ratio},
        bounds={
            "threshold": threshold,
            "c_alpha": float(c_alpha),
            "c_free_factor": (2.0 - alpha) / (1.0 - alpha),
            "alpha": alpha,
        },
        verdict=verdict,
        sample_size=qv.size,
        notes="threshold depends on the configured lower Burkholder constant",
    )


def drift_test(terminal_values, initial_values) -> CheckReport:
    """Two-sided z-test that mean(terminal - initial) is zero."""
    term = np.asarray(terminal_values, dtype=float)
    init = np.asarray(initial_values, dtype=float)
    if term.shape != init.shape:
        raise ValueError(f"mismatched lengths: {term.shape} vs {init.shape}")
    if term.size == 0:
        raise ValueError("need at least one sample")
    d = term - init
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / np.sqrt(d.size)) if d.size > 1 else 0.0
    if se == 0.0:
        z = 0.0 if mean == 0.0 else np.inf * np.sign(mean)
    else:
        z = mean / se
    verdict = "pass" if np.isfinite(z) and abs(z) <= 3.0 else "fail"
    return CheckReport(
        name="drift-test",
        empirical={"mean_drift": mean, "stderr": se, "z": float(z)},
        bounds={"z_max": 3.0},
        verdict=verdict,
        sample_size=term.size,
    )


def ks_statistic_one_sample(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical distribution of
    `samples` and the (possibly unnormalised) cdf callable."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValueError("need at least one sample")
    n = s.size
    f = np.asarray(cdf(s), dtype=float)
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(max(np.max(ecdf_hi - f), np.max(f - ecdf_lo)))
