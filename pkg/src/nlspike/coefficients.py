"""Generalized information coefficients of a non-linearity against a noise law.

The k-th coefficient is theta_k(f) = E f^(k)(Z).  When f is not smooth but
the noise density w is, integration by parts gives the equivalent form
theta_k(f) = (-1)^k Integral f(x) w^(k)(x) dx, which is how the non-smooth
registry functions (abs, sign, relu) are handled.  Under Gaussian noise the
density form reduces, via w^(k) = (-1)^k He_k w, to the Hermite coefficient
E[f(Z) He_k(Z)].

The information index is the first k >= 1 with theta_k != 0 (up to a
numerical tolerance); it controls the size scaling at which a spike planted
inside the non-linearity survives, see :mod:`nlspike.theory`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .distributions import _TRUNCATION, NoiseSpec, _hermite_value, density_derivative, expectation

__all__ = [
    "NonlinearitySpec",
    "CoefficientReport",
    "NoApplicableMethodError",
    "hermite_polynomial",
    "nonlinearity",
    "polynomial_nonlinearity",
    "hermite_nonlinearity",
    "shifted_nonlinearity",
    "info_coefficient",
    "info_index",
    "noise_scale",
]

HERMITE_ORDER_CAP = 30

# derivative_order_available sentinel for functions smooth to any order we use
SMOOTH = 1_000_000

DEFAULT_K_MAX = 8


class NoApplicableMethodError(ValueError):
    """Raised when neither coefficient quadrature path applies."""


def hermite_polynomial(k: int, x):
    """Probabilists' Hermite polynomial He_k(x).

    Uses the stable three-term recurrence He_{k+1} = x He_k - k He_{k-1}
    with He_0 = 1, He_1 = x.  Capped at k <= 30 for numerical stability.
    Accepts scalars or arrays.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > HERMITE_ORDER_CAP:
        raise ValueError(f"k={k} above the stability cap {HERMITE_ORDER_CAP}")
    out = _hermite_value(k, x)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class NonlinearitySpec:
    """An entrywise scalar function with optional closed-form derivatives.

    ``derivative_order_available`` is the highest derivative order with an
    implemented closed form (0 for non-smooth functions like abs);
    ``kinks`` lists the points where f or a derivative fails to be smooth,
    used to split adaptive quadratures.
    """

    name: str
    fn: Callable
    derivative_order_available: int
    kinks: tuple[float, ...] = ()
    derivative_factory: Callable[[int], Callable] | None = None

    def __call__(self, x):
        return self.fn(x)

    def derivative(self, k: int) -> Callable:
        if k == 0:
            return self.fn
        if k > self.derivative_order_available or self.derivative_factory is None:
            raise ValueError(f"{self.name!r} has no order-{k} derivative available")
        return self.derivative_factory(k)


@dataclass(frozen=True)
class CoefficientReport:
    """Coefficients theta_0..theta_kmax with the detected index and scale."""

    theta: tuple[float, ...]
    k_star: int | None
    sigma: float
    method: str
    tolerance_used: float


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _poly_derivative_factory(coeffs: tuple[float, ...]):
    base = np.polynomial.Polynomial(coeffs)

    def factory(k: int) -> Callable:
        return base.deriv(k)

    return factory


def polynomial_nonlinearity(coeffs) -> NonlinearitySpec:
    """f(x) = c0 + c1 x + c2 x^2 + ... with coefficients in ascending order."""
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        raise ValueError("polynomial needs at least one coefficient")
    if not all(math.isfinite(c) for c in coeffs):
        raise ValueError("polynomial coefficients must be finite")
    p = np.polynomial.Polynomial(coeffs)
    return NonlinearitySpec(
        name="poly:" + ",".join(repr(c) for c in coeffs),
        fn=p,
        derivative_order_available=SMOOTH,
        derivative_factory=_poly_derivative_factory(coeffs),
    )


def hermite_nonlinearity(k: int) -> NonlinearitySpec:
    """f = He_k, the degree-k probabilists' Hermite polynomial."""
    if not 0 <= k <= HERMITE_ORDER_CAP:
        raise ValueError(f"hermite order must be in [0, {HERMITE_ORDER_CAP}]")

    def factory(j: int) -> Callable:
        # He_k^(j) = k!/(k-j)! He_{k-j}
        if j > k:
            return lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
        c = math.factorial(k) / math.factorial(k - j)
        return lambda x: c * _hermite_value(k - j, x)

    return NonlinearitySpec(
        name=f"hermite({k})",
        fn=lambda x: _hermite_value(k, x),
        derivative_order_available=SMOOTH,
        derivative_factory=factory,
    )


@lru_cache(maxsize=64)
def _tanh_derivative_coeffs(k: int) -> tuple[float, ...]:
    # d^k/dx^k tanh(x) is a polynomial p_k(t) in t = tanh(x), via
    # p_0(t) = t and p_{k+1}(t) = p_k'(t) (1 - t^2).
    p = np.polynomial.Polynomial([0.0, 1.0])
    one_minus_t2 = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    for _ in range(k):
        p = p.deriv() * one_minus_t2
    return tuple(p.coef)


def _tanh_derivative_factory(k: int) -> Callable:
    coef = _tanh_derivative_coeffs(k)

    def d(x):
        return np.polynomial.polynomial.polyval(np.tanh(x), coef)

    return d


def shifted_nonlinearity(base: NonlinearitySpec, shift: float) -> NonlinearitySpec:
    """f(x) = base(x + shift): a composite that breaks even symmetry, which
    moves the information index (e.g. a shifted abs has index 1)."""
    shift = float(shift)

    def factory(k: int) -> Callable:
        d = base.derivative(k)
        return lambda x: d(np.asarray(x, dtype=np.float64) + shift)

    return NonlinearitySpec(
        name=f"shifted:{base.name}:{shift!r}",
        fn=lambda x: base.fn(np.asarray(x, dtype=np.float64) + shift),
        derivative_order_available=base.derivative_order_available,
        kinks=tuple(t - shift for t in base.kinks),
        derivative_factory=factory if base.derivative_factory is not None else None,
    )


def _identity_derivative_factory(k: int) -> Callable:
    if k == 1:
        return lambda x: np.ones_like(np.asarray(x, dtype=np.float64))
    return lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))


_BASE_REGISTRY: dict[str, Callable[[], NonlinearitySpec]] = {
    "identity": lambda: NonlinearitySpec(
        name="identity",
        fn=lambda x: np.asarray(x, dtype=np.float64),
        derivative_order_available=SMOOTH,
        derivative_factory=_identity_derivative_factory,
    ),
    "abs": lambda: NonlinearitySpec(
        name="abs", fn=np.abs, derivative_order_available=0, kinks=(0.0,)
    ),
    "sign": lambda: NonlinearitySpec(
        name="sign", fn=np.sign, derivative_order_available=0, kinks=(0.0,)
    ),
    "relu": lambda: NonlinearitySpec(
        name="relu",
        fn=lambda x: np.maximum(np.asarray(x, dtype=np.float64), 0.0),
        derivative_order_available=0,
        kinks=(0.0,),
    ),
    "tanh": lambda: NonlinearitySpec(
        name="tanh",
        fn=np.tanh,
        derivative_order_available=SMOOTH,
        derivative_factory=_tanh_derivative_factory,
    ),
}


@lru_cache(maxsize=None)
def nonlinearity(name: str) -> NonlinearitySpec:
    """Resolve a non-linearity by name.

    Accepts the fixed registry names (identity, abs, sign, relu, tanh),
    ``hermite(k)``, ``poly:c0,c1,...`` (ascending coefficients) and
    ``shifted:<base>:<shift>``.
    """
    name = name.strip()
    if name in _BASE_REGISTRY:
        return _BASE_REGISTRY[name]()
    if name.startswith("hermite(") and name.endswith(")"):
        return hermite_nonlinearity(int(name[len("hermite(") : -1]))
    if name.startswith("poly:"):
        coeffs = [float(c) for c in name[len("poly:") :].split(",")]
        return polynomial_nonlinearity(coeffs)
    if name.startswith("shifted:"):
        _, base, shift = name.split(":", 2)
        return shifted_nonlinearity(nonlinearity(base), float(shift))
    raise ValueError(f"unknown non-linearity {name!r}")


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

def _check_fourth_moment(f: NonlinearitySpec, noise: NoiseSpec) -> float:
    m4 = expectation(noise, lambda x: np.asarray(f.fn(x), dtype=np.float64) ** 4, kinks=f.kinks)
    if not math.isfinite(m4):
        raise ValueError(f"{f.name!r} is not in L^4 of the {noise.kind!r} law")
    return m4


def info_coefficient(f: NonlinearitySpec, noise: NoiseSpec, k: int, method: str = "auto") -> float:
    """k-th information coefficient theta_k(f) under the given noise law.

    ``method`` may force one of the two quadrature paths ("derivative" /
    "density"); by default the derivative path is used whenever f has k
    closed-form derivatives, falling back to the density form otherwise.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    can_derivative = k <= f.derivative_order_available
    can_density = noise.has_smooth_density
    if method == "auto":
        method = "derivative" if can_derivative else "density"
    if method == "derivative":
        if not can_derivative:
            raise NoApplicableMethodError(
                f"{f.name!r} has no order-{k} derivative; density path needed"
            )
        d = f.derivative(k)
        kinks = f.kinks if k == 0 else ()
        return expectation(noise, d, kinks=kinks)
    if method == "density":
        if not can_density:
            raise NoApplicableMethodError(
                f"no applicable method: {f.name!r} lacks derivatives of order {k} "
                f"and the {noise.kind!r} law has no smooth density"
            )
        if noise.kind == "gaussian":
            # (-1)^k Int f w^(k) = E[f(Z) He_k(Z)]
            g = lambda x: np.asarray(f.fn(x), dtype=np.float64) * _hermite_value(k, x)
            return expectation(noise, g, kinks=f.kinks)
        wk = lambda x: float(density_derivative(noise, k, x))
        L = _TRUNCATION[noise.kind]
        pts = sorted({-L, L, 0.0, *(t for t in f.kinks if -L < t < L)})
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(
                lambda x: float(f.fn(x)) * wk(x), a, b, epsabs=1e-12, epsrel=1e-10, limit=200
            )
            total += val
        return (-1.0) ** k * total
    raise ValueError(f"unknown method {method!r}")


def _variance(f: NonlinearitySpec, noise: NoiseSpec) -> tuple[float, float, float]:
    """(theta_0, theta_0(f^2), Var f(Z)) with the variance computed from the
    centered quadrature E[(f - theta_0)^2], which keeps it nonnegative and
    lets an a.s.-constant f come out as exactly zero."""
    ef = expectation(noise, f.fn, kinks=f.kinks)

    def centered_sq(x):
        d = np.asarray(f.fn(x), dtype=np.float64) - ef
        return d * d

    var = expectation(noise, centered_sq, kinks=f.kinks)
    ef2 = var + ef * ef
    if var < -1e-12:
        raise ValueError(f"negative variance {var} for {f.name!r}; quadrature inconsistency")
    # below the quadrature's own roundoff floor the variance is genuinely 0
    if var <= 1e-24 * max(1.0, ef2):
        var = 0.0
    return ef, ef2, max(var, 0.0)


def noise_scale(f: NonlinearitySpec, noise: NoiseSpec) -> float:
    """Standard deviation sigma of f(Z): sqrt(theta_0(f^2) - theta_0(f)^2).

    Clamped to 0 when the variance is within -1e-12 of zero; rejects f not
    in L^4 of the noise law.
    """
    _check_fourth_moment(f, noise)
    return math.sqrt(_variance(f, noise)[2])


def info_index(
    f: NonlinearitySpec,
    noise: NoiseSpec,
    k_max: int = DEFAULT_K_MAX,
    tol: float | None = None,
) -> CoefficientReport:
    """Coefficients theta_0..theta_{k_max} plus the information index.

    The index is the smallest 1 <= k <= k_max with |theta_k| > tol, or None
    when every coefficient stays below tolerance (the caller must not
    proceed to size scaling in that case).  The default tolerance is
    1e-8 * max(1, ||f||_{L2}), scale-invariant and far above quadrature
    error.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    _check_fourth_moment(f, noise)
    ef, ef2, var = _variance(f, noise)
    if tol is None:
        tol = 1e-8 * max(1.0, math.sqrt(max(ef2, 0.0)))
    elif tol <= 0:
        raise ValueError("tol must be positive")

    smooth = f.derivative_order_available >= k_max
    method = "derivative_quadrature" if smooth else "density_quadrature"
    theta = [ef]
    for k in range(1, k_max + 1):
        theta.append(info_coefficient(f, noise, k, method="derivative" if smooth else "density"))

    k_star = None
    for k in range(1, k_max + 1):
        if abs(theta[k]) > tol:
            k_star = k
            break

    return CoefficientReport(
        theta=tuple(theta), k_star=k_star, sigma=math.sqrt(var), method=method, tolerance_used=tol
    )
