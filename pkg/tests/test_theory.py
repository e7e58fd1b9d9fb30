"""Closed-form transition predictions."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from nlspike.coefficients import info_index, nonlinearity
from nlspike.distributions import noise_spec, signal_spec
from nlspike.theory import (
    bbp_eigenvalue,
    bbp_overlap,
    critical_gamma0,
    effective_spike,
    predict,
    relevant_gamma,
)

GAUSS = noise_spec("gaussian")
GSIG = signal_spec("gaussian")


def test_bbp_eigenvalue_values():
    assert bbp_eigenvalue(2.0, 1.0) == pytest.approx(2.5)
    assert bbp_eigenvalue(0.5, 1.0) == pytest.approx(2.0)
    assert bbp_eigenvalue(-2.0, 1.0) == pytest.approx(-2.5)
    # sign(0) := +1 makes the zero-spike limit stick to the upper edge
    assert bbp_eigenvalue(0.0, 0.7) == pytest.approx(1.4)


def test_bbp_overlap_values():
    assert bbp_overlap(2.0, 1.0) == pytest.approx(0.75)
    assert bbp_overlap(0.9, 1.0) == 0.0
    for sigma in (0.3, 1.0, 4.5):
        assert bbp_overlap(sigma, sigma) == 0.0


def test_bbp_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        bbp_eigenvalue(1.0, 0.0)
    with pytest.raises(ValueError):
        bbp_overlap(1.0, -1.0)


def test_bbp_continuity_at_threshold():
    sigma = 1.3
    eps = 1e-6
    assert bbp_eigenvalue(sigma + eps, sigma) == pytest.approx(2 * sigma, abs=1e-5)
    assert bbp_eigenvalue(sigma - eps, sigma) == pytest.approx(2 * sigma, abs=1e-5)


def test_bbp_monotonicity():
    sigma = 0.8
    grid = np.linspace(0.01, 5.0, 400)
    lam = [bbp_eigenvalue(g, sigma) for g in grid]
    assert all(b >= a - 1e-12 for a, b in zip(lam, lam[1:]))
    olap = [bbp_overlap(g, sigma) for g in grid]
    assert all(b >= a - 1e-12 for a, b in zip(olap, olap[1:]))


def test_bbp_scale_covariance():
    for c in (0.1, 2.0, 17.0):
        for g in (-2.0, 0.4, 1.5):
            assert bbp_eigenvalue(c * g, c * 1.0) == pytest.approx(
                c * bbp_eigenvalue(g, 1.0), rel=1e-12
            )


def test_bbp_edge_bound():
    sigma = 1.1
    for g in np.linspace(-4, 4, 101):
        assert abs(bbp_eigenvalue(g, sigma)) >= 2 * sigma - 1e-12


def test_relevant_gamma():
    for g0 in (0.3, 1.0, 2.5):
        for n in (10, 1000):
            assert relevant_gamma(g0, n, 1) == g0
    assert relevant_gamma(1.0, 16, 2) == pytest.approx(2.0)
    assert relevant_gamma(1.0, 8, 3) == pytest.approx(2.0)


def test_effective_spike_values():
    rep_id = info_index(nonlinearity("identity"), GAUSS)
    for g0 in (0.5, 2.0):
        assert effective_spike(g0, rep_id, GSIG) == pytest.approx(g0, rel=1e-10)

    rep_abs = info_index(nonlinearity("abs"), GAUSS)
    g0 = 1.2
    expected = g0**2 * (math.sqrt(2 / math.pi) / 2.0) * 3.0
    assert effective_spike(g0, rep_abs, GSIG) == pytest.approx(expected, rel=1e-9)

    rep_cub = info_index(nonlinearity("poly:0,-3,0,1"), GAUSS)
    for g0 in (0.4, 1.0):
        assert effective_spike(g0, rep_cub, GSIG) == pytest.approx(15.0 * g0**3, rel=1e-9)


def test_predict_classical():
    pred = predict(2.0, nonlinearity("identity"), GAUSS, GSIG)
    assert pred.k_star == 1
    assert pred.lambda_limit == pytest.approx(2.5, rel=1e-10)
    assert pred.overlap_limit == pytest.approx(0.75, rel=1e-10)
    assert pred.supercritical


def test_predict_subcritical_abs():
    sigma = math.sqrt(1 - 2 / math.pi)
    pred = predict(0.4, nonlinearity("abs"), GAUSS, GSIG)
    assert not pred.supercritical
    assert pred.lambda_limit == pytest.approx(2 * sigma, rel=1e-9)
    assert pred.overlap_limit == 0.0


def test_critical_gamma0_matches_root_solve():
    rep = info_index(nonlinearity("abs"), GAUSS)
    sigma = rep.sigma
    closed = critical_gamma0(rep, GSIG)
    # independent oracle: root of |effective_spike(g0)| - sigma
    root = brentq(lambda g0: abs(effective_spike(g0, rep, GSIG)) - sigma, 1e-6, 10.0)
    assert closed == pytest.approx(root, abs=1e-10)
    # closed form sqrt(2 sigma / (3 sqrt(2/pi)))
    assert closed == pytest.approx(math.sqrt(2 * sigma / (3 * math.sqrt(2 / math.pi))), rel=1e-12)
    pred = predict(closed * 1.0001, nonlinearity("abs"), GAUSS, GSIG)
    assert pred.supercritical
    pred = predict(closed * 0.9999, nonlinearity("abs"), GAUSS, GSIG)
    assert not pred.supercritical


def test_predict_requires_detected_index():
    with pytest.raises(ValueError):
        predict(1.0, nonlinearity("hermite(9)"), GAUSS, GSIG, k_max=8)


def test_threshold_is_closed_supercritical():
    # |gamma_eff| == sigma counts as super-critical with overlap exactly 0
    assert bbp_overlap(1.0, 1.0) == 0.0
    assert bbp_eigenvalue(1.0, 1.0) == pytest.approx(2.0)
