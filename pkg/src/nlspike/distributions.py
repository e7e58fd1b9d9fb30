"""Seeded sampling and law data for signal and noise distributions.

Every supported law is standardized to mean zero and unit variance, so the
noise scale of a model is carried entirely by the non-linearity (see
:mod:`nlspike.coefficients`).  Sampling is driven by a counter-based
generator (Philox) keyed by ``(seed, stream_id, row)``: every matrix entry
is addressed by its position, which makes samples bit-reproducible and
independent of generation order, and lets disjoint row ranges be filled
concurrently.

The module also exposes densities, density derivatives and closed-form
moments of the supported laws; these feed the quadratures in
:mod:`nlspike.coefficients`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtri

__all__ = [
    "SeededStream",
    "NoiseSpec",
    "SignalSpec",
    "noise_spec",
    "signal_spec",
    "sample_signal",
    "sample_noise_symmetric",
    "sample_noise_rectangular",
    "density_derivative",
    "moment",
    "expectation",
]

NOISE_KINDS = ("gaussian", "uniform_sym", "rademacher", "laplace")
SIGNAL_KINDS = ("gaussian", "rademacher", "uniform_sym", "user_discrete")

# Uniform(-SQRT3, SQRT3) has unit variance; Laplace with scale 1/sqrt(2) too.
_SQRT3 = math.sqrt(3.0)
_LAPLACE_B = 1.0 / math.sqrt(2.0)

# Counter units reserved per matrix row.  Philox yields 4 uint64 per counter
# increment, so one block covers ~2**72 draws, far beyond any row length.
_ROW_STRIDE = 1 << 70

_MASK64 = (1 << 64) - 1


def _mix64(*parts) -> int:
    """Stable 64-bit hash of a tuple of ints, floats and strings.

    Used to derive stream ids; hashlib-based so the value is identical
    across processes and platforms (unlike the builtin ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode("utf-8") + b"\x00")
        elif isinstance(p, (bool, int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, (float, np.floating)):
            h.update(b"f" + np.float64(p).tobytes())
        else:
            raise TypeError(f"cannot mix value of type {type(p).__name__}")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class SeededStream:
    """Immutable handle naming one independent random stream.

    ``(seed, stream_id)`` fully determines every sample drawn from the
    stream; distinct stream ids give statistically independent streams.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def substream(self, *parts) -> "SeededStream":
        """Derive a child stream keyed by ``parts`` (ints/floats/strings)."""
        return SeededStream(self.seed, _mix64(self.stream_id, *parts))


def _uniform_open01(stream: SeededStream, counter: int, size: int) -> np.ndarray:
    """``size`` uniforms in the open interval (0, 1) at a counter address.

    One raw 64-bit word is consumed per variate, so the i-th variate of a
    block depends only on (seed, stream_id, counter + position).
    """
    key = (int(stream.seed) & _MASK64) | ((int(stream.stream_id) & _MASK64) << 64)
    raw = np.random.Philox(key=key, counter=counter).random_raw(size)
    # (k + 1/2) * 2^-53 with k on 53 bits: avoids both endpoints exactly.
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """A standardized noise law (mean 0, variance 1).

    ``has_smooth_density`` is set only for kinds whose density derivatives
    are implemented; ``tail_exponent`` is the stretched-exponential tail
    exponent alpha in P(|Z| > M) <= C exp(-c M^alpha).
    """

    kind: str
    has_smooth_density: bool
    tail_exponent: float

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.tail_exponent <= 0:
            raise ValueError("tail_exponent must be positive")


@dataclass(frozen=True)
class SignalSpec:
    """The law of the signal entries.  Discrete user laws carry their atoms.

    The law must not be the point mass at zero (at least one nonzero
    support point with positive weight).
    """

    kind: str
    support: tuple[float, ...] = field(default=())
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        if self.kind == "user_discrete":
            if not self.support:
                raise ValueError("user_discrete signal needs a nonempty support")
            if len(self.support) != len(self.weights):
                raise ValueError("support and weights must have the same length")
            if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
                raise ValueError("weights must be nonnegative with positive total")
            if not any(s != 0 and w > 0 for s, w in zip(self.support, self.weights)):
                raise ValueError("signal law must put positive weight on a nonzero point")


_NOISE_ALPHA = {"gaussian": 2.0, "laplace": 1.0, "uniform_sym": 2.0, "rademacher": 2.0}


@lru_cache(maxsize=None)
def noise_spec(kind: str) -> NoiseSpec:
    """Registry constructor for noise laws."""
    kind = {"uniform": "uniform_sym"}.get(kind, kind)
    if kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    # laplace derivatives exist only almost everywhere; exposed best-effort.
    smooth = kind in ("gaussian", "laplace")
    return NoiseSpec(kind=kind, has_smooth_density=smooth, tail_exponent=_NOISE_ALPHA[kind])


@lru_cache(maxsize=None)
def signal_spec(kind: str, support: tuple[float, ...] = (), weights: tuple[float, ...] = ()) -> SignalSpec:
    """Registry constructor for signal laws."""
    kind = {"uniform": "uniform_sym"}.get(kind, kind)
    if kind == "user_discrete":
        total = float(sum(weights))
        weights = tuple(float(w) / total for w in weights)
        return SignalSpec(kind=kind, support=tuple(float(s) for s in support), weights=weights)
    return SignalSpec(kind=kind)


# ---------------------------------------------------------------------------
# Quantile transforms (exactly one uniform consumed per sample)
# ---------------------------------------------------------------------------

def _quantile(kind: str, u: np.ndarray, spec: SignalSpec | None = None) -> np.ndarray:
    if kind == "gaussian":
        return ndtri(u)
    if kind == "uniform_sym":
        return _SQRT3 * (2.0 * u - 1.0)
    if kind == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    if kind == "laplace":
        s = u - 0.5
        return -_LAPLACE_B * np.sign(s) * np.log1p(-2.0 * np.abs(s))
    if kind == "user_discrete":
        cum = np.cumsum(spec.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return np.asarray(spec.support, dtype=np.float64)[idx]
    raise ValueError(f"unknown kind {kind!r}")


def sample_signal(spec: SignalSpec, n: int, stream: SeededStream) -> np.ndarray:
    """Draw ``n`` iid signal entries; deterministic given (spec, n, stream)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = _uniform_open01(stream, counter=0, size=n)
    return _quantile(spec.kind, u, spec)


def _noise_row(spec: NoiseSpec, n: int, stream: SeededStream, i: int, width: int) -> np.ndarray:
    """Entries ``(i, n-width) .. (i, n-1)`` of the noise matrix, i.e. one
    row segment drawn from the row's private counter block."""
    u = _uniform_open01(stream, counter=(i + 1) * _ROW_STRIDE, size=width)
    return _quantile(spec.kind, u)


def sample_noise_symmetric(spec: NoiseSpec, n: int, stream: SeededStream) -> np.ndarray:
    """Symmetric n x n matrix with iid entries for i <= j, mirrored below.

    Row ``i`` owns the counter block addressing entries ``(i, j >= i)``, so
    the value of an entry depends only on (spec, stream, i, j).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        out[i, i:] = _noise_row(spec, n, stream, i, n - i)
    lower = np.tril_indices(n, k=-1)
    out[lower] = out.T[lower]
    return out


def sample_noise_rectangular(spec: NoiseSpec, n: int, m: int, stream: SeededStream) -> np.ndarray:
    """n x m matrix with iid entries, row-addressed like the symmetric case."""
    if n < 1 or m < 1:
        raise ValueError("matrix dimensions must be >= 1")
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        u = _uniform_open01(stream, counter=(i + 1) * _ROW_STRIDE, size=m)
        out[i] = _quantile(spec.kind, u)
    return out


# ---------------------------------------------------------------------------
# Densities and their derivatives
# ---------------------------------------------------------------------------

def _hermite_value(k: int, x):
    """Probabilists' Hermite polynomial He_k via the three-term recurrence
    He_{k+1} = x He_k - k He_{k-1}, He_0 = 1, He_1 = x."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev
    h = x.copy()
    for j in range(1, k):
        h, h_prev = x * h - j * h_prev, h
    return h


def _gaussian_density(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def density_derivative(spec: NoiseSpec, k: int, x):
    """k-th derivative of the noise density at ``x``.

    Gaussian: w^(k)(x) = (-1)^k He_k(x) w(x) (Stein identity).  Laplace:
    the almost-everywhere derivative (+-1/b)^k w(x) away from the origin;
    results involving it are best-effort since the distributional
    derivative carries extra mass at 0.
    """
    if k < 0:
        raise ValueError("derivative order must be >= 0")
    if not spec.has_smooth_density:
        raise ValueError(f"noise kind {spec.kind!r} has no smooth density")
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "gaussian":
        return (-1.0) ** k * _hermite_value(k, x) * _gaussian_density(x)
    if spec.kind == "laplace":
        w = np.exp(-np.abs(x) / _LAPLACE_B) / (2.0 * _LAPLACE_B)
        if k == 0:
            return w
        return (-np.sign(x) / _LAPLACE_B) ** k * w
    raise ValueError(f"density derivatives not implemented for {spec.kind!r}")


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def moment(spec: SignalSpec | NoiseSpec, k: int) -> float:
    """k-th raw moment of the law, closed form where available."""
    if k < 0:
        raise ValueError("moment order must be >= 0")
    kind = spec.kind
    if kind == "gaussian":
        if k % 2 == 1:
            return 0.0
        # (k-1)!! for even k
        return float(math.factorial(k) // (2 ** (k // 2) * math.factorial(k // 2)))
    if kind == "rademacher":
        return 0.0 if k % 2 == 1 else 1.0
    if kind == "uniform_sym":
        return 0.0 if k % 2 == 1 else float(3.0 ** (k / 2.0) / (k + 1))
    if kind == "laplace":
        return 0.0 if k % 2 == 1 else float(math.factorial(k) * 2.0 ** (-k / 2.0))
    if kind == "user_discrete":
        s = np.asarray(spec.support, dtype=np.float64)
        w = np.asarray(spec.weights, dtype=np.float64)
        return float(np.dot(w, s**k))
    # fallback: adaptive quadrature against the density
    return expectation(spec, lambda x: x**k)


# ---------------------------------------------------------------------------
# Expectations against the noise law
# ---------------------------------------------------------------------------

# Truncation points chosen so the neglected tail mass is below 1e-300 even
# against polynomial integrands of the degrees used here.
_TRUNCATION = {"gaussian": 40.0, "laplace": 150.0, "uniform_sym": _SQRT3}

_GH_NODES = 200


@lru_cache(maxsize=4)
def _gauss_hermite_half(n_nodes: int):
    """Positive Gauss-Hermite(e) nodes and weights.

    Folding g(x) + g(-x) over the positive nodes makes expectations of odd
    functions vanish exactly in floating point.
    """
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    pos = x > 0
    return x[pos], w[pos]


def _gh_expectation(g: Callable[[np.ndarray], np.ndarray]) -> float:
    xs, ws = _gauss_hermite_half(_GH_NODES)
    folded = np.asarray(g(xs), dtype=np.float64) + np.asarray(g(-xs), dtype=np.float64)
    ones = np.full_like(xs, 2.0)
    return float(np.dot(ws, folded) / np.dot(ws, ones))


def _piecewise_quad(g, density, lo: float, hi: float, kinks: tuple[float, ...]) -> float:
    pts = sorted({lo, hi, *(float(t) for t in kinks if lo < t < hi)})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda x: g(x) * density(x), a, b,
                                epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
    return total


def expectation(spec: NoiseSpec, g: Callable, kinks: tuple[float, ...] = ()) -> float:
    """E[g(Z)] for Z ~ spec, accurate to ~1e-10.

    Gaussian without kinks goes through 200-node Gauss-Hermite quadrature
    (exact for polynomials up to degree 399); all other cases use adaptive
    quadrature split at the integrand's kinks, or a discrete sum.
    """
    if spec.kind == "rademacher":
        return 0.5 * (float(g(-1.0)) + float(g(1.0)))
    if spec.kind == "gaussian":
        if not kinks:
            return _gh_expectation(g)
        L = _TRUNCATION["gaussian"]
        return _piecewise_quad(g, _gaussian_density, -L, L, kinks)
    if spec.kind == "uniform_sym":
        dens = lambda x: 1.0 / (2.0 * _SQRT3)
        return _piecewise_quad(g, dens, -_SQRT3, _SQRT3, kinks)
    if spec.kind == "laplace":
        dens = lambda x: math.exp(-abs(x) / _LAPLACE_B) / (2.0 * _LAPLACE_B)
        L = _TRUNCATION["laplace"]
        # the density itself has a kink at the origin
        return _piecewise_quad(g, dens, -L, L, tuple(kinks) + (0.0,))
    raise ValueError(f"unknown noise kind {spec.kind!r}")
