"""Experiment orchestration: grids, replicas, aggregation and emission.

An experiment is described by a flat ``key = value`` config file (one pair
per line, ``#`` comments).  Runs fan out over the (size, gamma0) grid with
``replicas`` independent repetitions per cell; the stream id of replica r
of a cell is a stable hash of the cell values, so reordering the grids
never changes per-cell results and reruns are byte-identical.

Failed replicas (eigensolver non-convergence) are recorded as rows with an
error flag and NaN measurements, never dropped.

Timing is opt-in (``timing = true``): by default the wall_time_ms column
is written as 0 so that outputs are byte-for-byte reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coefficients import DEFAULT_K_MAX, info_index, nonlinearity
from .distributions import SeededStream, noise_spec, signal_spec
from .models import (
    RankKConfig,
    RectangularConfig,
    SpikedModelConfig,
    build_rank_k,
    build_rectangular,
    build_spiked,
    equivalent_perturbation,
    symmetrize_rectangular,
)
from .spectral import (
    NotConvergedError,
    SpectrumHistogram,
    full_spectrum,
    ks_distance_semicircle,
    leading_eigenpair,
    operator_norm,
    overlap,
)
from .theory import bbp_eigenvalue, bbp_overlap, effective_spike, relevant_gamma

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepRow",
    "EquivalenceRow",
    "RankReportRow",
    "RectangularRow",
    "SpectrumResult",
    "parse_config",
    "load_config",
    "run_sweep",
    "run_equivalence",
    "run_rank_k",
    "run_rectangular",
    "run_spectrum",
    "spectrum_csv",
    "emit",
]

EXPERIMENTS = ("sweep", "equivalence", "spectrum", "rank_k", "rectangular")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description (see README for the key reference)."""

    experiment: str
    f: str = "identity"
    noise: str = "gaussian"
    signal: str = "gaussian"
    n_grid: tuple[int, ...] = ()
    gamma0_grid: tuple[float, ...] = ()
    replicas: int = 8
    base_seed: int = 0
    k_max: int = DEFAULT_K_MAX
    tol: float = 1e-10
    max_iter: int = 300
    timing: bool = False
    out: str | None = None
    # rank_k only
    signals: tuple[str, ...] = ()
    gamma0s: tuple[float, ...] = ()
    # rectangular only
    m_grid: tuple[int, ...] = ()
    signal_u: str | None = None
    signal_v: str | None = None
    # spectrum only
    bins: int = 40

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.n_grid:
            raise ConfigError("n_grid must be a nonempty list of sizes")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.experiment == "rank_k":
            if not self.signals or not self.gamma0s:
                raise ConfigError("rank_k needs 'signals' and 'gamma0s' lists")
            if len(self.signals) != len(self.gamma0s):
                raise ConfigError("'signals' and 'gamma0s' must have the same length")
        elif self.experiment == "rectangular":
            if not self.gamma0_grid:
                raise ConfigError("gamma0_grid must be nonempty")
            if len(self.m_grid) != len(self.n_grid):
                raise ConfigError("rectangular needs m_grid matching n_grid")
            for n, m in zip(self.n_grid, self.m_grid):
                if not 1 <= n <= m:
                    raise ConfigError(f"need n <= m, got n={n} m={m}")
        elif self.experiment != "spectrum" and not self.gamma0_grid:
            raise ConfigError("gamma0_grid must be a nonempty list")


_LIST_KEYS = {"n_grid", "m_grid", "gamma0_grid", "signals", "gamma0s"}
_INT_KEYS = {"replicas", "base_seed", "k_max", "max_iter", "bins"}
_FLOAT_KEYS = {"tol"}
_BOOL_KEYS = {"timing"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` format into an ExperimentConfig."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value

    valid = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(mapping) - valid
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in mapping:
        raise ConfigError("missing required key 'experiment'")

    kwargs: dict = {}
    for key, value in mapping.items():
        try:
            if key in _LIST_KEYS:
                parts = [p.strip() for p in value.split(",") if p.strip()]
                if key in ("n_grid", "m_grid"):
                    kwargs[key] = tuple(int(p) for p in parts)
                elif key == "signals":
                    kwargs[key] = tuple(parts)
                else:
                    kwargs[key] = tuple(float(p) for p in parts)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false"):
                    raise ValueError("expected true/false")
                kwargs[key] = value.lower() == "true"
            else:
                kwargs[key] = value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from exc
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _resolve(config: ExperimentConfig):
    try:
        f = nonlinearity(config.f)
        noise = noise_spec(config.noise)
        signal = signal_spec(config.signal)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return f, noise, signal


def _resolved_report(config: ExperimentConfig):
    f, noise, signal = _resolve(config)
    report = info_index(f, noise, k_max=config.k_max)
    if report.k_star is None:
        raise ConfigError(
            f"no information index detected for f={config.f!r} under {config.noise!r} "
            f"noise up to k_max={config.k_max}; cannot scale the spike"
        )
    return f, noise, signal, report


# ---------------------------------------------------------------------------
# Row types (CSV column order is the public contract)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    n: int
    gamma0: float
    replica: int
    seed: int
    lambda1: float
    overlap_sq: float
    lambda_pred: float
    overlap_pred: float
    sigma: float
    k_star: int
    wall_time_ms: int
    error: str = ""


@dataclass(frozen=True)
class EquivalenceRow:
    n: int
    gamma0: float
    replica: int
    seed: int
    residual_norm: float
    wall_time_ms: int
    error: str = ""


@dataclass(frozen=True)
class RankReportRow:
    n: int
    gamma0: float
    replica: int
    seed: int
    p_rank: int
    expected_rank: int
    top_eigenvalues: str
    error: str = ""


@dataclass(frozen=True)
class RectangularRow:
    n: int
    m: int
    gamma0: float
    replica: int
    seed: int
    pairing_defect: float
    zero_count: int
    expected_zeros: int
    gram_sq_defect: float
    gram_lambda1: float
    overlap_u_sq: float
    overlap_v_sq: float
    wall_time_ms: int
    error: str = ""


@dataclass(frozen=True)
class SpectrumResult:
    histogram: SpectrumHistogram
    eigenvalues: np.ndarray
    sigma: float
    ks_distance: float


def _cell_stream(config: ExperimentConfig, *parts) -> SeededStream:
    # keyed by the cell *values* (not grid positions): reordering the grids
    # in the config leaves every cell's stream unchanged
    return SeededStream(config.base_seed).substream("cell", *parts)


def _ms(elapsed: float, config: ExperimentConfig) -> int:
    return int(round(elapsed * 1000.0)) if config.timing else 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_cell(args) -> SweepRow:
    config, n, gamma0, replica, lambda_pred, overlap_pred, sigma, k_star = args
    f, noise, signal = _resolve(config)
    stream = _cell_stream(config, n, float(gamma0), replica)
    start = time.perf_counter()
    gamma = relevant_gamma(gamma0, n, k_star)
    model = build_spiked(
        SpikedModelConfig(n=n, f=f, noise=noise, signal=signal, gamma=gamma, seed=stream)
    )
    try:
        pair = leading_eigenpair(model.matrix, tol=config.tol, max_iter=config.max_iter)
        lam, olap, err = pair.lambda1, overlap(pair.v1, model.signal, k_star), ""
    except NotConvergedError as exc:
        lam, olap, err = math.nan, math.nan, str(exc)
    return SweepRow(
        n=n, gamma0=gamma0, replica=replica, seed=stream.stream_id,
        lambda1=lam, overlap_sq=olap,
        lambda_pred=lambda_pred, overlap_pred=overlap_pred,
        sigma=sigma, k_star=k_star,
        wall_time_ms=_ms(time.perf_counter() - start, config), error=err,
    )


def _run_cells(job, payloads, workers: int):
    if workers <= 1:
        return [job(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, payloads))


def run_sweep(config: ExperimentConfig, workers: int = 1) -> list[SweepRow]:
    """Replica fan-out over the (n, gamma0) grid for the rank-one model.

    Rows are sorted by (n, gamma0, replica); prediction columns are
    constant within a cell.
    """
    f, noise, signal, report = _resolved_report(config)
    k_star, sigma = report.k_star, report.sigma
    preds = {}
    for g0 in config.gamma0_grid:
        ge = effective_spike(g0, report, signal)
        preds[g0] = (bbp_eigenvalue(ge, sigma), bbp_overlap(ge, sigma))
    payloads = [
        (config, n, g0, r, preds[g0][0], preds[g0][1], sigma, k_star)
        for n in config.n_grid
        for g0 in config.gamma0_grid
        for r in range(config.replicas)
    ]
    rows = _run_cells(_sweep_cell, payloads, workers)
    return sorted(rows, key=lambda row: (row.n, row.gamma0, row.replica))


# ---------------------------------------------------------------------------
# equivalence
# ---------------------------------------------------------------------------

def _equivalence_cell(args) -> EquivalenceRow:
    config, n, gamma0, replica, k_star = args
    f, noise, signal = _resolve(config)
    stream = _cell_stream(config, n, float(gamma0), replica)
    start = time.perf_counter()
    gamma = relevant_gamma(gamma0, n, k_star)
    model = build_spiked(
        SpikedModelConfig(
            n=n, f=f, noise=noise, signal=signal, gamma=gamma, seed=stream, couple_to_null=True
        )
    )
    p = equivalent_perturbation(f, noise, model.signal, gamma, k_star)
    try:
        res = operator_norm(
            model.matrix - model.null_matrix - p, tol=config.tol, max_iter=config.max_iter
        )
        err = ""
    except NotConvergedError as exc:
        res, err = math.nan, str(exc)
    return EquivalenceRow(
        n=n, gamma0=gamma0, replica=replica, seed=stream.stream_id,
        residual_norm=res, wall_time_ms=_ms(time.perf_counter() - start, config), error=err,
    )


def run_equivalence(config: ExperimentConfig, workers: int = 1) -> list[EquivalenceRow]:
    """Operator norm of Y - Y0 - P per replica (noise coupled between Y and Y0)."""
    _, _, _, report = _resolved_report(config)
    payloads = [
        (config, n, g0, r, report.k_star)
        for n in config.n_grid
        for g0 in config.gamma0_grid
        for r in range(config.replicas)
    ]
    rows = _run_cells(_equivalence_cell, payloads, workers)
    return sorted(rows, key=lambda row: (row.n, row.gamma0, row.replica))


# ---------------------------------------------------------------------------
# rank-K
# ---------------------------------------------------------------------------

def _rank_k_factors(signals, gammas, k_star: int):
    """Monomial factor representation of P_K (without the scalar prefactor):
    columns t_alpha with weights c_alpha so that sum_a c_a t_a t_a^T equals
    [sum_l gamma_l x_l x_l^T]^{Hadamard k}."""
    from itertools import combinations_with_replacement

    K = len(signals)
    cols, weights = [], []
    for combo in combinations_with_replacement(range(K), k_star):
        counts = [combo.count(l) for l in range(K)]
        multinom = math.factorial(k_star)
        for c in counts:
            multinom //= math.factorial(c)
        coeff = float(multinom)
        t = np.ones_like(signals[0])
        for l, c in enumerate(counts):
            coeff *= gammas[l] ** c
            if c:
                t = t * signals[l] ** c
        cols.append(t)
        weights.append(coeff)
    return np.column_stack(cols), np.asarray(weights)


def _rank_k_structure(f, noise, signals, gammas, k_star: int):
    """Nonzero eigenvalues of P_K via its small factor Gram problem."""
    n = signals[0].size
    from .coefficients import info_coefficient

    theta = info_coefficient(f, noise, k_star)
    pref = theta / (float(n) ** ((k_star + 1) / 2.0) * math.factorial(k_star))
    T, w = _rank_k_factors(signals, gammas, k_star)
    # eigenvalues of sum_a w_a t_a t_a^T = eigenvalues of diag(w) (T^T T)
    small = np.diag(w) @ (T.T @ T)
    eig = np.linalg.eigvals(small)
    eig = np.real(eig) * pref
    order = np.argsort(-np.abs(eig))
    eig = eig[order]
    top = np.abs(eig[0]) if eig.size else 0.0
    rank = int(np.sum(np.abs(eig) >= 1e-8 * top)) if top > 0 else 0
    return eig, rank


def _rank_k_cell(args):
    config, n, replica, k_star, sigma = args
    f, noise, _ = _resolve(config)
    signals = tuple(signal_spec(name) for name in config.signals)
    g0s = tuple(config.gamma0s)
    stream = _cell_stream(config, n, *(float(g) for g in g0s), replica)
    start = time.perf_counter()
    gammas = tuple(relevant_gamma(g0, n, k_star) for g0 in g0s)
    model = build_rank_k(
        RankKConfig(n=n, f=f, noise=noise, signals=signals, gammas=gammas, seed=stream)
    )
    K = len(signals)
    gamma0_col = max(abs(g) for g in g0s)
    eigs, rank = _rank_k_structure(f, noise, model.signals, gammas, k_star)
    expected_rank = math.comb(K + k_star - 1, K - 1)

    if K == 1:
        report = info_index(f, noise, k_max=config.k_max)
        ge = effective_spike(g0s[0], report, signal_spec(config.signals[0]))
        lambda_pred, overlap_pred = bbp_eigenvalue(ge, sigma), bbp_overlap(ge, sigma)
        target = model.signals[0]
        target_k = k_star
    else:
        # no closed-form limit is produced for K >= 2; alignment is
        # measured against the top eigenvector of P_K itself
        lambda_pred, overlap_pred = math.nan, math.nan
        T, w = _rank_k_factors(model.signals, gammas, k_star)
        small = np.diag(w) @ (T.T @ T)
        vals, vecs = np.linalg.eig(small)
        lead = np.argmax(np.abs(np.real(vals)))
        target = np.real(T @ vecs[:, lead])
        target_k = 1

    try:
        pair = leading_eigenpair(model.matrix, tol=config.tol, max_iter=config.max_iter)
        lam, olap, err = pair.lambda1, overlap(pair.v1, target, target_k), ""
    except NotConvergedError as exc:
        lam, olap, err = math.nan, math.nan, str(exc)

    sweep_row = SweepRow(
        n=n, gamma0=gamma0_col, replica=replica, seed=stream.stream_id,
        lambda1=lam, overlap_sq=olap,
        lambda_pred=lambda_pred, overlap_pred=overlap_pred,
        sigma=sigma, k_star=k_star,
        wall_time_ms=_ms(time.perf_counter() - start, config), error=err,
    )
    rank_row = RankReportRow(
        n=n, gamma0=gamma0_col, replica=replica, seed=stream.stream_id,
        p_rank=rank, expected_rank=expected_rank,
        top_eigenvalues=";".join(repr(float(v)) for v in eigs[:expected_rank]),
        error=err,
    )
    return sweep_row, rank_row


def run_rank_k(config: ExperimentConfig, workers: int = 1):
    """Sweep table plus the rank report of the equivalent perturbation P_K."""
    try:
        f = nonlinearity(config.f)
        noise = noise_spec(config.noise)
        for name in config.signals:
            signal_spec(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = info_index(f, noise, k_max=config.k_max)
    if report.k_star is None:
        raise ConfigError("no information index detected; cannot scale the spike")
    payloads = [
        (config, n, r, report.k_star, report.sigma)
        for n in config.n_grid
        for r in range(config.replicas)
    ]
    results = _run_cells(_rank_k_cell, payloads, workers)
    sweep_rows = sorted((a for a, _ in results), key=lambda r: (r.n, r.gamma0, r.replica))
    rank_rows = sorted((b for _, b in results), key=lambda r: (r.n, r.gamma0, r.replica))
    return sweep_rows, rank_rows


# ---------------------------------------------------------------------------
# rectangular
# ---------------------------------------------------------------------------

def _rectangular_cell(args) -> RectangularRow:
    config, n, m, gamma0, replica, k_star = args
    f, noise, signal = _resolve(config)
    sig_u = signal_spec(config.signal_u) if config.signal_u else signal
    sig_v = signal_spec(config.signal_v) if config.signal_v else signal
    stream = _cell_stream(config, n, m, float(gamma0), replica)
    start = time.perf_counter()
    gamma = relevant_gamma(gamma0, n, k_star)
    model = build_rectangular(
        RectangularConfig(
            n=n, m=m, f=f, noise=noise, signal_u=sig_u, signal_v=sig_v, gamma=gamma, seed=stream
        )
    )
    sym = symmetrize_rectangular(model.matrix)
    evals, evecs = np.linalg.eigh(sym)

    pairing = float(np.abs(evals + evals[::-1]).max())
    zero_count = int(np.sum(np.abs(evals) < 1e-8))
    gram = np.linalg.eigvalsh(model.matrix @ model.matrix.T / m)
    # each Gram eigenvalue appears twice among the 2n nonzero +- pairs
    nonzero_sq = np.sort(np.abs(evals))[m - n :] ** 2
    gram_defect = float(np.abs(nonzero_sq - np.repeat(np.sort(gram), 2)).max())

    lead = int(np.argmax(np.abs(evals)))
    w = evecs[:, lead]
    wu, wv = w[:n], w[n:]
    nu, nv = np.linalg.norm(wu), np.linalg.norm(wv)
    olap_u = overlap(wu / nu, model.signal_u, k_star) if nu > 0 else 0.0
    olap_v = overlap(wv / nv, model.signal_v, k_star) if nv > 0 else 0.0

    return RectangularRow(
        n=n, m=m, gamma0=gamma0, replica=replica, seed=stream.stream_id,
        pairing_defect=pairing, zero_count=zero_count, expected_zeros=m - n,
        gram_sq_defect=gram_defect, gram_lambda1=float(gram[-1]),
        overlap_u_sq=olap_u, overlap_v_sq=olap_v,
        wall_time_ms=_ms(time.perf_counter() - start, config), error="",
    )


def run_rectangular(config: ExperimentConfig, workers: int = 1) -> list[RectangularRow]:
    """Symmetrization identities (pairing, zero multiplicity, Gram match)
    plus Gram leading eigenvalue and signal overlaps."""
    _, _, _, report = _resolved_report(config)
    payloads = [
        (config, n, m, g0, r, report.k_star)
        for n, m in zip(config.n_grid, config.m_grid)
        for g0 in config.gamma0_grid
        for r in range(config.replicas)
    ]
    rows = _run_cells(_rectangular_cell, payloads, workers)
    return sorted(rows, key=lambda row: (row.n, row.gamma0, row.replica))


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def run_spectrum(config: ExperimentConfig) -> SpectrumResult:
    """Full spectrum of one realization, histogrammed, with the KS distance
    to the semicircle law of the noise scale sigma.

    Uses the first entries of n_grid / gamma0_grid (gamma0 = 0 gives the
    pure-noise bulk).  The histogram range always covers [-2 sigma, 2 sigma]
    and every eigenvalue, so counts sum to n.
    """
    f, noise, signal = _resolve(config)
    report = info_index(f, noise, k_max=config.k_max)
    sigma = report.sigma
    n = config.n_grid[0]
    gamma0 = config.gamma0_grid[0] if config.gamma0_grid else 0.0
    if gamma0 != 0.0 and report.k_star is None:
        raise ConfigError("no information index detected; use gamma0 = 0 for pure noise")
    gamma = relevant_gamma(gamma0, n, report.k_star) if gamma0 != 0.0 else 0.0
    stream = _cell_stream(config, n, float(gamma0), 0)
    model = build_spiked(
        SpikedModelConfig(n=n, f=f, noise=noise, signal=signal, gamma=gamma, seed=stream)
    )
    evals = full_spectrum(model.matrix)
    lo = min(float(evals.min()), -2.0 * sigma)
    hi = max(float(evals.max()), 2.0 * sigma)
    hist = SpectrumHistogram.from_values(evals, bins=config.bins, lo=lo, hi=hi)
    ks = ks_distance_semicircle(evals, sigma) if sigma > 0 else math.nan
    return SpectrumResult(histogram=hist, eigenvalues=evals, sigma=sigma, ks_distance=ks)


def spectrum_csv(result: SpectrumResult) -> str:
    """Histogram CSV with columns bin_left,bin_right,count,density."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_left", "bin_right", "count", "density"])
    dens = result.histogram.densities()
    edges = result.histogram.edges
    for i, count in enumerate(result.histogram.counts):
        writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(count), repr(float(dens[i]))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(rows, fmt: str, path=None, row_type=None) -> str:
    """Serialize a row table to csv / json / plotdata.

    ``row_type`` is needed only for empty tables (to produce the header).
    Returns the serialized text; writes it to ``path`` when given.
    """
    if rows:
        row_type = type(rows[0])
    if row_type is None:
        raise ValueError("row_type is required for an empty table")
    names = [f.name for f in dataclasses.fields(row_type)]

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_format_value(getattr(row, n)) for n in names])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([dataclasses.asdict(row) for row in rows], indent=1) + "\n"
    elif fmt == "plotdata":
        buf = io.StringIO()
        groups: dict = {}
        for row in rows:
            groups.setdefault(getattr(row, "n", 0), []).append(row)
        for key in sorted(groups):
            buf.write(f"# n = {key}\n")
            buf.write(",".join(names) + "\n")
            for row in groups[key]:
                buf.write(",".join(_format_value(getattr(row, n)) for n in names) + "\n")
            buf.write("\n")
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown emit format {fmt!r}")

    if path is not None:
        Path(path).write_text(text, newline="")
    return text
