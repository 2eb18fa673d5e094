import numpy as np
import pytest

from spdelab.functionals import (
    FunctionalSeries,
    dpalpha_estimate,
    hitting_time,
    k_alpha,
    lp_norm,
    pair_power_sum,
    total_mass,
)
from spdelab.lattice import GridSpec


def test_series_validation():
    FunctionalSeries("ok", [0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        FunctionalSeries("bad", [0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        FunctionalSeries("bad", [1.0, 1.0], [1.0, 2.0])


def test_total_mass_examples():
    spec = GridSpec(8)
    assert total_mass(np.ones(8), spec) == 1.0
    spike = np.zeros(8)
    spike[3] = 8.0  # height m, h = 1/m
    assert total_mass(spike, spec) == 1.0
    assert total_mass(np.zeros(8), spec) == 0.0


def test_lp_norm_examples():
    spec = GridSpec(4)
    for p in (1.0, 2.0, 4.0):
        assert lp_norm(np.full(4, 2.5), p, spec) == pytest.approx(2.5)
    # (h * sum u^2)^(1/2) with u = (2, 2, 0, 0), h = 1/4
    assert lp_norm(np.array([2.0, 2.0, 0.0, 0.0]), 2.0, spec) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        lp_norm(np.ones(4), 0.5, spec)
    with pytest.raises(ValueError):
        lp_norm(np.array([1.0, -1.0, 0.0, 0.0]), 2.0, spec)


def test_lp_norm_monotone_in_p():
    spec = GridSpec(16)
    rng = np.random.default_rng(2)
    for _ in range(10):
        u = rng.random(16) * 3.0
        assert lp_norm(u, 2.0, spec) <= lp_norm(u, 4.0, spec) + 1e-12


def test_hitting_time_examples():
    assert hitting_time(FunctionalSeries("c", [0, 1, 2], [1, 1, 1]), 2.0) is None
    s = FunctionalSeries("s", [0, 1, 2], [0.5, 1.5, 2.5])
    assert hitting_time(s, 2.0) == 2.0
    assert hitting_time(s, 0.0) == 0.0


def test_k_alpha_values():
    assert k_alpha(0.5, 1.0) == pytest.approx(3.0)
    assert k_alpha(0.9, 1.0) == pytest.approx(11.0)
    assert k_alpha(1e-9, 2.0) == pytest.approx(1.0, rel=1e-6)  # limit 2/c
    with pytest.raises(ValueError):
        k_alpha(1.0, 1.0)
    with pytest.raises(ValueError):
        k_alpha(0.5, 0.0)


def test_dpalpha_identity_and_closed_form():
    assert dpalpha_estimate([0.0, 0.0], 4.0, 0.5) == 0.0
    # one pair differing by a constant c over space-time measure tau:
    # S = tau * c^p, estimate = (tau * c^p)^(alpha / (2p))
    tau, c, p, alpha = 0.25, 3.0, 4.0, 0.5
    s = tau * c**p
    assert dpalpha_estimate([s], p, alpha) == pytest.approx((tau * c**p) ** (alpha / (2 * p)))
    with pytest.raises(ValueError):
        dpalpha_estimate([], 4.0, 0.5)
    with pytest.raises(ValueError):
        dpalpha_estimate([-1.0], 4.0, 0.5)


def test_dpalpha_scaling_homogeneity():
    # scaling both fields by c scales the estimate by |c|^{alpha/2}
    rng = np.random.default_rng(3)
    s = rng.random(50)
    p, alpha, c = 4.0, 0.5, 2.5
    base = dpalpha_estimate(s, p, alpha)
    scaled = dpalpha_estimate(s * c**p, p, alpha)
    assert scaled == pytest.approx(base * c ** (alpha / 2.0))


def test_dpalpha_triangle_inequality():
    spec = GridSpec(8)
    rng = np.random.default_rng(4)
    p, alpha, dt = 4.0, 0.5, 0.1
    for _ in range(20):
        f, g, k = rng.random((3, 6, 8)) * 2.0
        d_fg = dpalpha_estimate([pair_power_sum(f, g, dt, spec, p)], p, alpha)
        d_gk = dpalpha_estimate([pair_power_sum(g, k, dt, spec, p)], p, alpha)
        d_fk = dpalpha_estimate([pair_power_sum(f, k, dt, spec, p)], p, alpha)
        assert d_fk <= d_fg + d_gk + 1e-12


def test_pair_power_sum_validation():
    spec = GridSpec(8)
    f = np.zeros((4, 8))
    assert pair_power_sum(f, f, 0.1, spec, 4.0) == 0.0
    with pytest.raises(ValueError):
        pair_power_sum(f, np.zeros((3, 8)), 0.1, spec, 4.0)
    with pytest.raises(ValueError):
        pair_power_sum(np.zeros((4, 7)), np.zeros((4, 7)), 0.1, spec, 4.0)
