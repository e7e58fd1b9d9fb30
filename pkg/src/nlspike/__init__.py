"""Numerical laboratory for entrywise non-linear spiked Wigner models."""

from .coefficients import (
    CoefficientReport,
    NoApplicableMethodError,
    NonlinearitySpec,
    hermite_polynomial,
    info_coefficient,
    info_index,
    noise_scale,
    nonlinearity,
)
from .distributions import (
    NoiseSpec,
    SeededStream,
    SignalSpec,
    density_derivative,
    moment,
    noise_spec,
    sample_noise_symmetric,
    sample_signal,
    signal_spec,
)
from .models import (
    RankKConfig,
    RectangularConfig,
    SpikedModelConfig,
    VarianceProfile,
    apply_variance_profile,
    build_rank_k,
    build_rectangular,
    build_spiked,
    equivalent_perturbation,
    equivalent_perturbation_rank_k,
    symmetrize_rectangular,
)
from .spectral import (
    EigenResult,
    NotConvergedError,
    SpectrumHistogram,
    full_spectrum,
    ks_distance_semicircle,
    leading_eigenpair,
    operator_norm,
    overlap,
)
from .theory import (
    Prediction,
    bbp_eigenvalue,
    bbp_overlap,
    critical_gamma0,
    effective_spike,
    predict,
    relevant_gamma,
)

__version__ = "0.1.0"
