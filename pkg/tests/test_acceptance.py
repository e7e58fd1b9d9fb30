"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS line (visible with ``pytest -s``); a failing
criterion fails its test.  The heavy criteria run the full n = 4000 grids
and take a few minutes total.

Sub-critical cells compare the leading eigenvalue in magnitude: the
|.|-largest eigenvalue of a near-symmetric bulk has an asymptotically
random sign (the two spectrum ends agree in the limit), so the
edge-sticking statement is about |lambda_1|.  Super-critical cells also
assert the deterministic positive sign.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from nlspike.coefficients import info_coefficient, info_index, nonlinearity
from nlspike.distributions import SeededStream, noise_spec, signal_spec
from nlspike.harness import ExperimentConfig, run_equivalence, run_rectangular, run_sweep
from nlspike.models import (
    SpikedModelConfig,
    build_spiked,
    equivalent_perturbation_rank_k,
)
from nlspike.spectral import full_spectrum, ks_distance_semicircle
from nlspike.theory import critical_gamma0, relevant_gamma

BASE_SEED = 20260810
WORKERS = 2

GAUSS = noise_spec("gaussian")
GSIG = signal_spec("gaussian")

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SIGMA_ABS = math.sqrt(1.0 - 2.0 / math.pi)

CUBIC = "poly:0,-3,0,1"


def _report(name: str, detail: str):
    print(f"ACCEPTANCE {name}: PASS  ({detail})", flush=True)


def _medians(rows, gamma0):
    cell = [r for r in rows if r.gamma0 == gamma0]
    assert cell and not any(r.error for r in cell)
    lam_abs = float(np.median([abs(r.lambda1) for r in cell]))
    lam_signed = float(np.median([r.lambda1 for r in cell]))
    olap = float(np.median([r.overlap_sq for r in cell]))
    return lam_abs, lam_signed, olap


def _sweep(f, gamma0s, n=4000, max_iter=2500):
    cfg = ExperimentConfig(
        experiment="sweep", f=f, n_grid=(n,), gamma0_grid=tuple(gamma0s),
        replicas=8, base_seed=BASE_SEED, tol=1e-8, max_iter=max_iter,
    )
    return run_sweep(cfg, workers=WORKERS)


# ---------------------------------------------------------------------------

def test_criterion_1_coefficient_exactness():
    start = time.perf_counter()
    rep_abs = info_index(nonlinearity("abs"), GAUSS)
    assert rep_abs.theta[0] == pytest.approx(SQRT_2_OVER_PI, abs=1e-8)
    assert rep_abs.theta[1] == pytest.approx(0.0, abs=1e-8)
    assert rep_abs.theta[2] == pytest.approx(SQRT_2_OVER_PI, abs=1e-8)
    assert rep_abs.k_star == 2

    rep_cub = info_index(nonlinearity(CUBIC), GAUSS)
    assert rep_cub.theta[1] == pytest.approx(0.0, abs=1e-8)
    assert rep_cub.theta[2] == pytest.approx(0.0, abs=1e-8)
    assert rep_cub.theta[3] == pytest.approx(6.0, abs=1e-8)
    assert rep_cub.sigma == pytest.approx(math.sqrt(6.0), abs=1e-8)
    assert rep_cub.k_star == 3
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _report("1 coefficient exactness", f"runtime {elapsed * 1000:.0f} ms")


def test_criterion_2_classical_bbp():
    rows = _sweep("identity", (0.5, 2.0))
    lam_abs, lam_signed, olap = _medians(rows, 2.0)
    assert abs(lam_abs - 2.5) < 0.1
    assert lam_signed > 0
    assert abs(olap - 0.75) < 0.05
    sup = (lam_abs, olap)
    lam_abs, _, olap = _medians(rows, 0.5)
    assert abs(lam_abs - 2.0) < 0.1
    assert olap < 0.05
    _report(
        "2 classical BBP",
        f"super lam={sup[0]:.3f}/2.5 overlap={sup[1]:.3f}/0.75; "
        f"sub lam={lam_abs:.3f}/2.0 overlap={olap:.4f}",
    )


def test_criterion_3_nonlinear_transition_k2():
    rows = _sweep("abs", (0.4, 1.2))
    cell = [r for r in rows if r.gamma0 == 1.2]
    lam_pred, olap_pred = cell[0].lambda_pred, cell[0].overlap_pred
    lam_abs, lam_signed, olap = _medians(rows, 1.2)
    assert abs(lam_abs - lam_pred) < 0.10 * lam_pred
    assert lam_signed > 0
    assert abs(olap - olap_pred) < 0.1
    sup = (lam_abs, lam_pred, olap, olap_pred)

    lam_abs, _, olap = _medians(rows, 0.4)
    edge = 2.0 * SIGMA_ABS
    assert abs(lam_abs - edge) < 0.10 * edge
    assert olap < 0.05
    _report(
        "3 non-linear transition k*=2",
        f"super lam={sup[0]:.3f}/{sup[1]:.3f} overlap={sup[2]:.3f}/{sup[3]:.3f}; "
        f"sub lam={lam_abs:.3f}/{edge:.3f} overlap={olap:.4f}",
    )


def test_criterion_4_nonlinear_transition_k3():
    rep = info_index(nonlinearity(CUBIC), GAUSS)
    g0c = critical_gamma0(rep, GSIG)
    g_super, g_sub = 1.8 * g0c, 0.7 * g0c
    rows = _sweep(CUBIC, (g_sub, g_super))

    cell = [r for r in rows if r.gamma0 == g_super]
    lam_pred, olap_pred = cell[0].lambda_pred, cell[0].overlap_pred
    lam_abs, lam_signed, olap = _medians(rows, g_super)
    assert abs(lam_abs - lam_pred) < 0.15 * lam_pred
    assert lam_signed > 0
    assert abs(olap - olap_pred) < 0.15
    sup = (lam_abs, lam_pred, olap, olap_pred)

    lam_abs, _, olap = _medians(rows, g_sub)
    edge = 2.0 * math.sqrt(6.0)
    assert abs(lam_abs - edge) < 0.15 * edge
    assert olap < 0.15
    _report(
        "4 non-linear transition k*=3",
        f"threshold g0*={g0c:.4f}; super lam={sup[0]:.3f}/{sup[1]:.3f} "
        f"overlap={sup[2]:.3f}/{sup[3]:.3f}; sub lam={lam_abs:.3f}/{edge:.3f}",
    )


def test_criterion_5_equivalence_residual():
    cfg_id = ExperimentConfig(
        experiment="equivalence", f="identity", n_grid=(1000,), gamma0_grid=(1.5,),
        replicas=8, base_seed=BASE_SEED,
    )
    rows_id = run_equivalence(cfg_id, workers=WORKERS)
    assert all(r.residual_norm <= 1e-12 for r in rows_id)

    cfg_abs = ExperimentConfig(
        experiment="equivalence", f="abs", n_grid=(500, 1000, 2000, 4000),
        gamma0_grid=(1.0,), replicas=8, base_seed=BASE_SEED, tol=1e-6, max_iter=2500,
    )
    rows = run_equivalence(cfg_abs, workers=WORKERS)
    medians = [
        float(np.median([r.residual_norm for r in rows if r.n == n]))
        for n in (500, 1000, 2000, 4000)
    ]
    assert all(b < a for a, b in zip(medians, medians[1:]))
    _report(
        "5 rank-one equivalence residual",
        "identity <= 1e-12; abs medians " + " > ".join(f"{m:.4f}" for m in medians),
    )


def test_criterion_6_rank_k_structure():
    n, k_star = 500, 2
    f = nonlinearity("abs")
    x1 = SeededStream(BASE_SEED).substream("acc6", 1)
    x2 = SeededStream(BASE_SEED).substream("acc6", 2)
    from nlspike.distributions import sample_signal

    xs = (sample_signal(GSIG, n, x1), sample_signal(GSIG, n, x2))
    g0s = (1.0, 0.7)
    gammas = tuple(relevant_gamma(g, n, k_star) for g in g0s)
    pk = equivalent_perturbation_rank_k(f, GAUSS, xs, gammas, k_star)

    s = np.linalg.svd(pk, compute_uv=False)
    assert s[2] >= 1e-8 * s[0]
    assert s[3] < 1e-8 * s[0]

    theta = info_coefficient(f, GAUSS, k_star)
    t1, t2 = xs[0] ** 2 / math.sqrt(n), xs[1] ** 2 / math.sqrt(n)
    t12 = xs[0] * xs[1] / math.sqrt(n)
    ref = (theta / 2.0) * (
        g0s[0] ** 2 * np.outer(t1, t1)
        + g0s[1] ** 2 * np.outer(t2, t2)
        + 2 * g0s[0] * g0s[1] * np.outer(t12, t12)
    )
    defect = np.abs(pk - ref).max()
    assert defect <= 1e-12 * np.abs(pk).max()
    _report(
        "6 rank-K structure",
        f"singular values {s[0]:.3e} {s[1]:.3e} {s[2]:.3e} | {s[3]:.3e}; "
        f"termwise defect {defect:.2e}",
    )


def test_criterion_7_rectangular_identities():
    cfg = ExperimentConfig(
        experiment="rectangular", f="abs", n_grid=(200,), m_grid=(300,),
        gamma0_grid=(1.0,), replicas=3, base_seed=BASE_SEED,
    )
    rows = run_rectangular(cfg, workers=WORKERS)
    for r in rows:
        assert r.pairing_defect <= 1e-8
        assert r.zero_count == 100
        assert r.gram_sq_defect <= 1e-8
    _report(
        "7 rectangular identities",
        f"max pairing defect {max(r.pairing_defect for r in rows):.2e}; "
        f"zeros 100/100; max gram defect {max(r.gram_sq_defect for r in rows):.2e}",
    )


def test_criterion_8_bulk_semicircle():
    n = 4000
    model = build_spiked(
        SpikedModelConfig(
            n=n, f=nonlinearity("abs"), noise=GAUSS, signal=GSIG, gamma=0.0,
            seed=SeededStream(BASE_SEED).substream("acc8"),
        )
    )
    evals = full_spectrum(model.matrix)
    ks = ks_distance_semicircle(evals, SIGMA_ABS)
    assert ks < 0.05
    _report("8 bulk semicircle law", f"KS distance {ks:.4f} < 0.05 at n={n}")


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(
        "experiment = sweep\nf = abs\nnoise = gaussian\nsignal = gaussian\n"
        "n_grid = 80, 120\ngamma0_grid = 0.5, 1.1\nreplicas = 3\nbase_seed = 101\n"
        "tol = 1e-8\nmax_iter = 800\n"
    )
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "nlspike.cli", "sweep", "--config", str(cfg),
             "--out", str(out), "--workers", "2"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]

    base = ExperimentConfig(
        experiment="sweep", f="abs", n_grid=(80, 120), gamma0_grid=(0.5, 1.1),
        replicas=3, base_seed=101, tol=1e-8, max_iter=800,
    )
    reordered = ExperimentConfig(
        experiment="sweep", f="abs", n_grid=(120, 80), gamma0_grid=(1.1, 0.5),
        replicas=3, base_seed=101, tol=1e-8, max_iter=800,
    )
    assert run_sweep(base) == run_sweep(reordered)
    _report("9 determinism", "byte-identical reruns; grid reordering invariant")
