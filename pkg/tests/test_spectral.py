"""Eigen-solver, overlaps and spectrum summaries.

The Lanczos path is validated against the dense LAPACK path throughout.
"""

import math

import numpy as np
import pytest

from nlspike.distributions import SeededStream, noise_spec, sample_noise_symmetric
from nlspike.spectral import (
    NotConvergedError,
    SpectrumHistogram,
    full_spectrum,
    ks_distance_semicircle,
    leading_eigenpair,
    operator_norm,
    overlap,
    semicircle_cdf,
    semicircle_density,
)


def _random_symmetric(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return scale * (a + a.T) / math.sqrt(2 * n)


# ---------------------------------------------------------------------------
# leading_eigenpair
# ---------------------------------------------------------------------------

def test_diagonal_matrix():
    res = leading_eigenpair(np.diag([3.0, -5.0, 1.0]))
    assert res.lambda1 == pytest.approx(-5.0, abs=1e-12)
    assert abs(res.v1[1]) == pytest.approx(1.0, abs=1e-12)
    assert abs(res.v1[0]) < 1e-10 and abs(res.v1[2]) < 1e-10


def test_rank_one_matrix():
    rng = np.random.default_rng(11)
    u = rng.standard_normal(64)
    u /= np.linalg.norm(u)
    res = leading_eigenpair(7.0 * np.outer(u, u))
    assert res.lambda1 == pytest.approx(7.0, abs=1e-10)
    assert abs(np.dot(res.v1, u)) == pytest.approx(1.0, abs=1e-10)


def test_pure_wigner_edge():
    z = sample_noise_symmetric(noise_spec("gaussian"), 2000, SeededStream(5))
    res = leading_eigenpair(z / math.sqrt(2000), tol=1e-8, max_iter=1500)
    assert abs(abs(res.lambda1) - 2.0) < 0.1  # within 5% of the edge


def test_unit_vector_and_residual_contract():
    m = _random_symmetric(300, 3)
    res = leading_eigenpair(m, tol=1e-10, max_iter=600)
    assert np.linalg.norm(res.v1) == pytest.approx(1.0, abs=1e-12)
    assert res.residual <= 1e-10 * abs(res.lambda1) + 1e-12
    # explicit recomputation agrees
    assert np.linalg.norm(m @ res.v1 - res.lambda1 * res.v1) == pytest.approx(
        res.residual, abs=1e-12
    )


def test_sign_convention():
    m = _random_symmetric(120, 8)
    res = leading_eigenpair(m, max_iter=600)
    assert res.v1[int(np.argmax(np.abs(res.v1)))] > 0


@pytest.mark.parametrize("n", [2, 3, 32, 101, 512])
def test_agrees_with_dense_solver(n):
    m = _random_symmetric(n, 100 + n)
    res = leading_eigenpair(m, tol=1e-10, max_iter=2000)
    ev = full_spectrum(m)
    lam_abs_max = max(abs(ev[0]), abs(ev[-1]))
    assert abs(res.lambda1) == pytest.approx(lam_abs_max, abs=1e-8)


def test_not_converged_raises():
    m = _random_symmetric(400, 2)
    with pytest.raises(NotConvergedError):
        leading_eigenpair(m, tol=1e-14, max_iter=3)


def test_rejects_asymmetric():
    m = np.array([[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(ValueError):
        leading_eigenpair(m)


def test_tie_flag_on_symmetric_pair():
    res = leading_eigenpair(np.diag([4.0, -4.0, 1.0]))
    assert res.tie
    assert res.lambda1 == pytest.approx(4.0)  # positive end wins a tie


def test_restart_path_converges():
    # budget forces several restart cycles
    m = _random_symmetric(500, 21)
    res = leading_eigenpair(m, tol=1e-10, max_iter=260)
    ev = np.linalg.eigvalsh(m)
    assert abs(res.lambda1) == pytest.approx(max(abs(ev[0]), abs(ev[-1])), abs=1e-8)


def test_n_equals_one():
    res = leading_eigenpair(np.array([[-2.5]]))
    assert res.lambda1 == -2.5


# ---------------------------------------------------------------------------
# operator_norm
# ---------------------------------------------------------------------------

def test_operator_norm_basics():
    assert operator_norm(np.zeros((5, 5))) == 0.0
    assert operator_norm(np.eye(7)) == pytest.approx(1.0, abs=1e-12)


def test_operator_norm_known_spectrum():
    # fixed spectrum {-4, 1, 2} under a known rotation
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    m = q @ np.diag([-4.0, 1.0, 2.0]) @ q.T
    m = (m + m.T) / 2
    assert operator_norm(m) == pytest.approx(4.0, abs=1e-10)
    # dense oracle
    assert max(abs(np.linalg.eigvalsh(m))) == pytest.approx(4.0, abs=1e-10)


# ---------------------------------------------------------------------------
# overlap
# ---------------------------------------------------------------------------

def test_overlap_alignment():
    x = np.array([1.0, -2.0, 3.0, 0.5])
    t = x**3
    v = t / np.linalg.norm(t)
    assert overlap(v, x, 3) == pytest.approx(1.0, abs=1e-12)


def test_overlap_orthogonal():
    x = np.array([1.0, 1.0])
    v = np.array([1.0, -1.0]) / math.sqrt(2)
    assert overlap(v, x, 1) == pytest.approx(0.0, abs=1e-15)


def test_overlap_uniform_sphere_mean():
    # E <v, u>^2 = 1/n for v uniform on the sphere
    n, draws = 1000, 200
    rng = np.random.default_rng(42)
    x = rng.standard_normal(n)
    vals = []
    for _ in range(draws):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        vals.append(overlap(v, x, 1))
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / math.sqrt(draws)
    assert abs(vals.mean() - 1.0 / n) < 3.0 * se


def test_overlap_rejects_zero_target():
    with pytest.raises(ValueError):
        overlap(np.ones(3) / math.sqrt(3), np.zeros(3), 2)


# ---------------------------------------------------------------------------
# full_spectrum
# ---------------------------------------------------------------------------

def test_full_spectrum_basics():
    assert np.allclose(full_spectrum(np.diag([1.0, 2.0, 3.0])), [1, 2, 3])
    assert np.allclose(full_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]])), [-1, 1])


def test_full_spectrum_trace_identities():
    m = _random_symmetric(50, 9)
    ev = full_spectrum(m)
    assert np.sum(ev) == pytest.approx(np.trace(m), abs=1e-9)
    assert np.sum(ev**2) == pytest.approx(np.sum(m * m), rel=1e-8)


def test_full_spectrum_cap():
    with pytest.raises(ValueError):
        full_spectrum(np.zeros((10, 10)), cap=8)


# ---------------------------------------------------------------------------
# histogram and semicircle
# ---------------------------------------------------------------------------

def test_histogram_invariants():
    vals = np.linspace(-3, 3, 101)
    h = SpectrumHistogram.from_values(vals, bins=12, lo=-2.0, hi=2.0)
    assert h.counts.sum() == 101  # clipped into edge bins, never dropped
    assert np.all(np.diff(h.edges) > 0)
    assert h.densities().shape == (12,)


def test_semicircle_density_normalization():
    sigma = 0.8
    xs = np.linspace(-2 * sigma, 2 * sigma, 20001)
    mass = np.trapezoid(semicircle_density(xs, sigma), xs)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert semicircle_cdf(-2 * sigma, sigma) == pytest.approx(0.0, abs=1e-12)
    assert semicircle_cdf(0.0, sigma) == pytest.approx(0.5, abs=1e-12)
    assert semicircle_cdf(2 * sigma, sigma) == pytest.approx(1.0, abs=1e-12)


def test_semicircle_ks_on_wigner_bulk():
    n = 1500
    z = sample_noise_symmetric(noise_spec("gaussian"), n, SeededStream(9))
    ev = full_spectrum(z / math.sqrt(n))
    assert ks_distance_semicircle(ev, 1.0) < 0.08


def test_ks_detects_wrong_scale():
    n = 800
    z = sample_noise_symmetric(noise_spec("gaussian"), n, SeededStream(10))
    ev = full_spectrum(z / math.sqrt(n))
    assert ks_distance_semicircle(ev, 2.0) > 0.2
