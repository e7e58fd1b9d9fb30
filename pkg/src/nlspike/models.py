"""Builders for every matrix family in the laboratory.

The central object is the symmetric model

    Y_ij = [ f(Z_ij + gamma x_i x_j / sqrt(n)) - E f(Z) ] / sqrt(n),

together with its rank-K generalization, a block-constant variance-profile
mask, and the rectangular (non-symmetric) variant with its Girko
symmetrization.  Alongside the random models, the module constructs the
deterministic low-rank perturbations P and P_K that the models are
asymptotically equivalent to; their normalization is pinned down by the
identity non-linearity, for which Y - Y0 - P vanishes identically.

All builders are deterministic functions of their config: the noise matrix
and signal vectors come from counter-addressed streams, and the centering
constant E f(Z) is the quadrature value, not a per-run empirical mean.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .coefficients import NonlinearitySpec, info_coefficient
from .distributions import (
    NoiseSpec,
    SeededStream,
    SignalSpec,
    sample_noise_rectangular,
    sample_noise_symmetric,
    sample_signal,
)

__all__ = [
    "SpikedModelConfig",
    "RankKConfig",
    "RectangularConfig",
    "VarianceProfile",
    "SpikedModel",
    "RankKModel",
    "RectangularModel",
    "build_spiked",
    "build_rank_k",
    "build_rectangular",
    "symmetrize_rectangular",
    "equivalent_perturbation",
    "equivalent_perturbation_rank_k",
    "apply_variance_profile",
    "numerical_rank",
    "save_matrix",
    "load_matrix",
]

# singular values above this fraction of the largest count toward the rank
RANK_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SpikedModelConfig:
    """One symmetric rank-one model realization.

    ``gamma`` is the realized spike strength gamma(n) (already scaled with
    the size); ``couple_to_null`` additionally materializes the gamma = 0
    matrix built from the identical noise realization.
    """

    n: int
    f: NonlinearitySpec
    noise: NoiseSpec
    signal: SignalSpec
    gamma: float
    seed: SeededStream
    couple_to_null: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")


@dataclass(frozen=True)
class RankKConfig:
    """Rank-K symmetric model; reduces to SpikedModelConfig when K = 1."""

    n: int
    f: NonlinearitySpec
    noise: NoiseSpec
    signals: tuple[SignalSpec, ...]
    gammas: tuple[float, ...]
    seed: SeededStream
    couple_to_null: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if len(self.signals) < 1:
            raise ValueError("need K >= 1 signal laws")
        if len(self.signals) != len(self.gammas):
            raise ValueError("signals and gammas must have the same length")


@dataclass(frozen=True)
class RectangularConfig:
    """Rectangular n x m model with independent row and column signals."""

    n: int
    m: int
    f: NonlinearitySpec
    noise: NoiseSpec
    signal_u: SignalSpec
    signal_v: SignalSpec
    gamma: float
    seed: SeededStream

    def __post_init__(self):
        if not (1 <= self.n <= self.m):
            raise ValueError("need 1 <= n <= m")


class SpikedModel(NamedTuple):
    matrix: np.ndarray
    signal: np.ndarray
    null_matrix: np.ndarray | None


class RankKModel(NamedTuple):
    matrix: np.ndarray
    signals: tuple[np.ndarray, ...]
    null_matrix: np.ndarray | None


class RectangularModel(NamedTuple):
    matrix: np.ndarray
    signal_u: np.ndarray
    signal_v: np.ndarray


def build_spiked(config: SpikedModelConfig) -> SpikedModel:
    """Materialize Y (and optionally the coupled null model Y0).

    The noise realization Z is shared bitwise between Y and Y0, so the
    difference isolates the spike contribution.
    """
    n = config.n
    x = sample_signal(config.signal, n, config.seed.substream("signal", 0))
    z = sample_noise_symmetric(config.noise, n, config.seed.substream("noise"))
    mean = info_coefficient(config.f, config.noise, 0)
    sqrt_n = math.sqrt(n)
    spike = (config.gamma * np.outer(x, x)) / sqrt_n
    y = (np.asarray(config.f(z + spike), dtype=np.float64) - mean) / sqrt_n
    y0 = None
    if config.couple_to_null:
        y0 = (np.asarray(config.f(z), dtype=np.float64) - mean) / sqrt_n
    return SpikedModel(y, x, y0)


def build_rank_k(config: RankKConfig) -> RankKModel:
    """Materialize the rank-K model; bit-identical to build_spiked at K=1."""
    n = config.n
    xs = tuple(
        sample_signal(spec, n, config.seed.substream("signal", l))
        for l, spec in enumerate(config.signals)
    )
    z = sample_noise_symmetric(config.noise, n, config.seed.substream("noise"))
    mean = info_coefficient(config.f, config.noise, 0)
    sqrt_n = math.sqrt(n)
    acc = config.gammas[0] * np.outer(xs[0], xs[0])
    for g, x in zip(config.gammas[1:], xs[1:]):
        acc += g * np.outer(x, x)
    y = (np.asarray(config.f(z + acc / sqrt_n), dtype=np.float64) - mean) / sqrt_n
    y0 = None
    if config.couple_to_null:
        y0 = (np.asarray(config.f(z), dtype=np.float64) - mean) / sqrt_n
    return RankKModel(y, xs, y0)


def equivalent_perturbation(
    f: NonlinearitySpec,
    noise: NoiseSpec,
    x: np.ndarray,
    gamma: float,
    k_star: int | None,
) -> np.ndarray:
    """The rank-one matrix P the spiked model reduces to:

        P = gamma^k / n^{(k-1)/2} * theta_k / k! * (x^k/sqrt(n)) (x^k/sqrt(n))^T
    """
    if k_star is None or k_star < 1:
        raise ValueError("k_star must be a detected index >= 1")
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    theta = info_coefficient(f, noise, k_star)
    t = x**k_star
    pref = gamma**k_star / float(n) ** ((k_star - 1) / 2.0) * theta / math.factorial(k_star)
    return pref * np.outer(t, t) / n


def equivalent_perturbation_rank_k(
    f: NonlinearitySpec,
    noise: NoiseSpec,
    signals: tuple[np.ndarray, ...],
    gammas: tuple[float, ...],
    k_star: int | None,
) -> np.ndarray:
    """The finite-rank matrix P_K for the rank-K model:

        P_K = theta_k / (n^{(k+1)/2} k!) * [sum_l gamma_l x_l x_l^T]^{Hadamard k}

    The n^{(k+1)/2} normalization makes K = 1 coincide with the rank-one P
    and matches the termwise expansion of the K = k = 2 case.  Its rank is
    the number of distinct monomials, binom(K + k - 1, K - 1).
    """
    if k_star is None or k_star < 1:
        raise ValueError("k_star must be a detected index >= 1")
    if not signals:
        raise ValueError("need at least one signal vector")
    n = np.asarray(signals[0]).size
    theta = info_coefficient(f, noise, k_star)
    acc = gammas[0] * np.outer(signals[0], signals[0])
    for g, x in zip(gammas[1:], signals[1:]):
        acc += g * np.outer(x, x)
    pref = theta / (float(n) ** ((k_star + 1) / 2.0) * math.factorial(k_star))
    return pref * acc**k_star


@dataclass(frozen=True)
class VarianceProfile:
    """Block-constant mask: block s x t of the matrix is scaled by
    values[s, t].  ``block_sizes`` partitions the index range."""

    block_sizes: tuple[int, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        s = len(self.block_sizes)
        if s == 0 or any(b < 1 for b in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if len(self.values) != s or any(len(row) != s for row in self.values):
            raise ValueError(f"values must be a {s} x {s} table")
        for a in range(s):
            for b in range(s):
                v = self.values[a][b]
                if v < 0:
                    raise ValueError("profile values must be nonnegative")
                if v != self.values[b][a]:
                    raise ValueError("profile values must be symmetric across blocks")

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    def expand(self) -> np.ndarray:
        """The full n x n mask matrix."""
        out = np.empty((self.n, self.n), dtype=np.float64)
        offsets = np.cumsum((0,) + self.block_sizes)
        for a in range(len(self.block_sizes)):
            for b in range(len(self.block_sizes)):
                out[offsets[a] : offsets[a + 1], offsets[b] : offsets[b + 1]] = self.values[a][b]
        return out


def apply_variance_profile(profile: VarianceProfile, M: np.ndarray) -> np.ndarray:
    """Entrywise product of the expanded profile with M."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (profile.n, profile.n):
        raise ValueError(f"profile covers size {profile.n}, matrix has shape {M.shape}")
    return profile.expand() * M


def build_rectangular(config: RectangularConfig) -> RectangularModel:
    """The unnormalized rectangular factor f(Z + gamma u v^T / sqrt(n)) - E f(Z).

    Normalization by sqrt(m) is applied by the symmetrization / Gram step.
    """
    n, m = config.n, config.m
    u = sample_signal(config.signal_u, n, config.seed.substream("signal_u"))
    v = sample_signal(config.signal_v, m, config.seed.substream("signal_v"))
    z = sample_noise_rectangular(config.noise, n, m, config.seed.substream("noise"))
    mean = info_coefficient(config.f, config.noise, 0)
    spike = (config.gamma / math.sqrt(n)) * np.outer(u, v)
    y = np.asarray(config.f(z + spike), dtype=np.float64) - mean
    return RectangularModel(y, u, v)


def symmetrize_rectangular(y_rect: np.ndarray, m: int | None = None) -> np.ndarray:
    """Girko block embedding [[0, A], [A^T, 0]] / sqrt(m).

    The 2n nonzero eigenvalues come in +- pairs equal to the square roots
    of the eigenvalues of the Gram matrix A A^T / m; the remaining m - n
    eigenvalues vanish.
    """
    a = np.asarray(y_rect, dtype=np.float64)
    n_rows, n_cols = a.shape
    if m is None:
        m = n_cols
    elif m != n_cols:
        raise ValueError(f"m={m} does not match the factor's column count {n_cols}")
    size = n_rows + n_cols
    out = np.zeros((size, size), dtype=np.float64)
    scaled = a / math.sqrt(m)
    out[:n_rows, n_rows:] = scaled
    out[n_rows:, :n_rows] = scaled.T
    return out


def numerical_rank(M: np.ndarray, threshold: float = RANK_THRESHOLD) -> int:
    """Number of singular values above threshold * largest."""
    s = np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s >= threshold * s[0]))


# ---------------------------------------------------------------------------
# Matrix dump (debugging / golden tests)
# ---------------------------------------------------------------------------

_MAGIC = int.from_bytes(b"NLSPKMTX", "little")


def save_matrix(path, M: np.ndarray, fmt: str = "binary") -> None:
    """Dump a matrix: binary layout is three little-endian uint64 header
    words {magic, n, m} followed by row-major float64 data; the text
    variant is an ``n m`` header line followed by one row per line."""
    M = np.ascontiguousarray(np.asarray(M, dtype=np.float64))
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQQ", _MAGIC, M.shape[0], M.shape[1]))
            fh.write(M.astype("<f8").tobytes(order="C"))
    elif fmt == "text":
        with open(path, "w", newline="\n") as fh:
            fh.write(f"{M.shape[0]} {M.shape[1]}\n")
            for row in M:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown dump format {fmt!r}")


def load_matrix(path) -> np.ndarray:
    """Load a matrix dumped by :func:`save_matrix` (format auto-detected)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) == 24:
            magic, n, m = struct.unpack("<QQQ", head)
            if magic == _MAGIC:
                data = np.frombuffer(fh.read(8 * n * m), dtype="<f8")
                if data.size != n * m:
                    raise ValueError("truncated matrix dump")
                return data.reshape(n, m).copy()
    with open(path, "r") as fh:
        n, m = (int(t) for t in fh.readline().split())
        rows = [[float(t) for t in fh.readline().split()] for _ in range(n)]
    out = np.asarray(rows, dtype=np.float64)
    if out.shape != (n, m):
        raise ValueError("text matrix dump does not match its header")
    return out
