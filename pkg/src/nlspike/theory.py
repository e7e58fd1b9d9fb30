"""Closed-form predictions for the leading eigenpair of spiked models.

The classical rank-one deformation of a Wigner matrix of scale sigma by a
spike of strength g has deterministic limits

    l(g, sigma) = 2 sigma sign(g)            if |g| <  sigma
                  g + sigma^2 / g            if |g| >= sigma

for the leading eigenvalue, and

    m(g, sigma) = (1 - sigma^2 / g^2) 1{|g| >= sigma}

for the squared overlap of the leading eigenvector with the spike
direction.  A non-linearity with information index k reduces to this
setting with the effective spike g = gamma0^k theta_k / k! * m_{2k} and
noise scale sigma = sqrt(theta_0(f^2) - theta_0(f)^2), provided the raw
spike strength grows like gamma(N) = gamma0 N^{(1 - 1/k)/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .coefficients import DEFAULT_K_MAX, CoefficientReport, NonlinearitySpec, info_index
from .distributions import NoiseSpec, SignalSpec, moment

__all__ = [
    "Prediction",
    "bbp_eigenvalue",
    "bbp_overlap",
    "relevant_gamma",
    "effective_spike",
    "critical_gamma0",
    "predict",
]


@dataclass(frozen=True)
class Prediction:
    """Deterministic limits for one (gamma0, f, noise, signal) combination."""

    gamma0: float
    k_star: int
    effective_spike: float
    sigma: float
    lambda_limit: float
    overlap_limit: float
    supercritical: bool


def bbp_eigenvalue(gamma_eff: float, sigma: float) -> float:
    """Limiting leading eigenvalue l(gamma_eff, sigma).

    sign(0) is taken as +1, so l(0, sigma) = 2 sigma (the sub-critical
    limit sticks to the edge regardless of sign).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if abs(gamma_eff) < sigma:
        sign = 1.0 if gamma_eff >= 0 else -1.0
        return 2.0 * sigma * sign
    return gamma_eff + sigma * sigma / gamma_eff


def bbp_overlap(gamma_eff: float, sigma: float) -> float:
    """Limiting squared overlap m(gamma_eff, sigma) in [0, 1]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if abs(gamma_eff) < sigma:
        return 0.0
    return 1.0 - (sigma * sigma) / (gamma_eff * gamma_eff)


def relevant_gamma(gamma0: float, n: int, k_star: int) -> float:
    """Realized spike strength gamma(n) = gamma0 * n^{(1 - 1/k_star)/2}.

    Size-independent exactly when k_star = 1.
    """
    if k_star < 1:
        raise ValueError("k_star must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    return gamma0 * float(n) ** (0.5 * (1.0 - 1.0 / k_star))


def effective_spike(gamma0: float, report: CoefficientReport, signal: SignalSpec) -> float:
    """Effective linear spike gamma0^k * theta_k / k! * m_{2k}."""
    k = report.k_star
    if k is None:
        raise ValueError("information index not detected; cannot form the effective spike")
    m2k = moment(signal, 2 * k)
    if not math.isfinite(m2k):
        raise ValueError(f"signal moment of order {2 * k} is not finite")
    return gamma0**k * report.theta[k] / math.factorial(k) * m2k


def critical_gamma0(report: CoefficientReport, signal: SignalSpec) -> float:
    """The gamma0 at which |effective_spike| crosses sigma (the transition)."""
    k = report.k_star
    if k is None:
        raise ValueError("information index not detected")
    slope = abs(report.theta[k]) / math.factorial(k) * moment(signal, 2 * k)
    if slope == 0:
        raise ValueError("degenerate coefficient; no finite transition point")
    return (report.sigma / slope) ** (1.0 / k)


def predict(
    gamma0: float,
    f: NonlinearitySpec,
    noise: NoiseSpec,
    signal: SignalSpec,
    k_max: int = DEFAULT_K_MAX,
    tol: float | None = None,
) -> Prediction:
    """Full prediction for one parameter point: index, scale, and limits."""
    report = info_index(f, noise, k_max=k_max, tol=tol)
    if report.k_star is None:
        raise ValueError(
            f"no information index detected for {f.name!r} under {noise.kind!r} "
            f"noise up to k_max={k_max}"
        )
    gamma_eff = effective_spike(gamma0, report, signal)
    sigma = report.sigma
    return Prediction(
        gamma0=gamma0,
        k_star=report.k_star,
        effective_spike=gamma_eff,
        sigma=sigma,
        lambda_limit=bbp_eigenvalue(gamma_eff, sigma),
        overlap_limit=bbp_overlap(gamma_eff, sigma),
        supercritical=abs(gamma_eff) >= sigma,
    )
