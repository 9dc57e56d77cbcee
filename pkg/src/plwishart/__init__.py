"""Power-law deformed Wishart-Laguerre ensembles: exact and asymptotic spectral laws."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AccuracyError,
    ConvergenceError,
    DegenerateDataError,
    DomainError,
    InternalConsistencyError,
    MomentDivergenceError,
    NumericalError,
    PLWishartError,
    UnsupportedCaseError,
)
from .finite_n import EnsembleParams, gen_finite_density, mean_eigenvalue  # noqa: E402
from .macrolaw import DensityCurve, ScalingParams, gen_density, mp_density  # noqa: E402
from .mcsampler import RngContract, SpectrumSample, sample_spectra  # noqa: E402
from .microlaw import MicroParams, first_eigenvalue_pdf, micro_density  # noqa: E402
from .specfit import FitReport, fit_alpha, ingest_timeseries  # noqa: E402
from .surmise import SpacingParams, gen_spacing_pdf, wl_spacing_pdf  # noqa: E402

__all__ = [
    "__version__",
    "PLWishartError",
    "DomainError",
    "ConvergenceError",
    "MomentDivergenceError",
    "AccuracyError",
    "NumericalError",
    "UnsupportedCaseError",
    "DegenerateDataError",
    "InternalConsistencyError",
    "EnsembleParams",
    "gen_finite_density",
    "mean_eigenvalue",
    "DensityCurve",
    "ScalingParams",
    "gen_density",
    "mp_density",
    "MicroParams",
    "micro_density",
    "first_eigenvalue_pdf",
    "SpacingParams",
    "wl_spacing_pdf",
    "gen_spacing_pdf",
    "RngContract",
    "SpectrumSample",
    "sample_spectra",
    "FitReport",
    "fit_alpha",
    "ingest_timeseries",
]
