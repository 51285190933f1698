"""Circular Matern Gaussian random fields and their CAR counterparts on the circle."""

__version__ = "0.1.0"

from .car import (
    CarSpec,
    build_precision,
    car_covariance_curve,
    car_covariance_spectral,
    phi1_closed,
    phi2_closed,
    phi_m_spectral,
)
from .errors import (
    CircMaternError,
    InvalidParameterError,
    NotPositiveSemidefiniteError,
    NumericalError,
    SingularMatrixError,
    TruncationLimitError,
)
from .fields import (
    ErgodicityReport,
    GridField,
    circle_average,
    conditional_predict,
    fit_kappa,
    log_likelihood,
    run_ergodicity_experiment,
    sample_field,
    sample_fields,
)
from .linkage import (
    alpha2_discrepancy_factor,
    besag_approx_a,
    compare_curves,
    match_car_to_matern_alpha1,
    match_car_to_matern_alpha2,
    match_matern_to_car,
    match_matern_to_car2,
)
from .matern import MaternParams, matern_curve, psi1_closed, psi2_closed, psi3_closed, psi_series
from .spectral_core import (
    CirculantMatrix,
    LagCovariance,
    SpectralCoefficients,
    angular_lag,
    circulant_solve,
    dft_eigenvalues,
    spectral_coefficients,
)
