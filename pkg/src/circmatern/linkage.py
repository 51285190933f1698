"""Parameter maps between circular Matern fields and CAR lattice models."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .car import CarSpec, car_covariance_curve
from .errors import InvalidParameterError
from .matern import MaternParams, matern_curve, psi2_closed

# Discrepancy factors above this trigger a warning in reports.
DISCREPANCY_WARN = 1.05


def _check(kappa: float, n: int, min_n: int) -> None:
    if not kappa > 0 or not math.isfinite(kappa):
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    if int(n) != n or n < min_n:
        raise InvalidParameterError(f"n must be an integer >= {min_n}, got {n}")


def match_car_to_matern_alpha1(kappa: float, n: int) -> CarSpec:
    """CAR(1) whose lattice covariance equals the alpha = 1 Matern covariance.

    a = 1 / (2 cosh(kappa / n)), sigma2 = tanh(kappa / n) / (2 kappa), so that
    n log(beta) = kappa.
    """
    _check(kappa, n, 3)
    x = kappa / n
    return CarSpec.from_log_beta(n, 1, x, math.tanh(x) / (2.0 * kappa))


def match_matern_to_car(spec: CarSpec) -> MaternParams:
    """Circular Matern (alpha = 1) field reproducing an order-1 CAR model.

    kappa = n log(beta); the amplitude 2 n sigma2 log(beta) / sqrt(1 - 4a^2)
    goes into ``variance_scale``.
    """
    if spec.order != 1:
        raise InvalidParameterError("exact reverse matching exists only for order-1 CAR models")
    L = spec.log_beta
    return MaternParams(
        kappa=spec.n * L,
        alpha=1,
        variance_scale=2.0 * spec.n * spec.sigma2 * L / spec.sqrt_one_minus_4a2,
    )


def match_car_to_matern_alpha2(kappa: float, n: int) -> CarSpec:
    """CAR(2) approximating the alpha = 2 Matern covariance.

    a = 1 / (2 cosh(kappa / n)),
    sigma2 = sinh^2(kappa / n) / (2 n kappa^2 (1 + 2 cosh^2(kappa / n))).
    """
    _check(kappa, n, 5)
    x = kappa / n
    sigma2 = math.sinh(x) ** 2 / (2.0 * n * kappa**2 * (1.0 + 2.0 * math.cosh(x) ** 2))
    return CarSpec.from_log_beta(n, 2, x, sigma2)


def match_matern_to_car2(spec: CarSpec) -> MaternParams:
    """Alpha = 2 Matern with kappa = n log(beta) and variance fitted at lag 0.

    The alpha = 2 match is approximate, so unlike the order-1 case there is
    no exact amplitude; the lag-0 variances are made equal.
    """
    if spec.order != 2:
        raise InvalidParameterError("match_matern_to_car2 needs an order-2 spec")
    kappa = spec.n * spec.log_beta
    car0 = car_covariance_curve(spec).values[0]
    return MaternParams(kappa=kappa, alpha=2, variance_scale=car0 / psi2_closed(0.0, kappa))


def alpha2_discrepancy_factor(kappa: float, n: int) -> float:
    """(kappa / n) coth(kappa / n): ~ 1 + kappa^2 / (3 n^2) for large n."""
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n}")
    x = kappa / n
    return x / math.tanh(x)


def besag_approx_a(kappa: float, n: int) -> float:
    """Taylor-matched neighbour weight n^2 / (kappa^2 + 2 n^2)."""
    _check(kappa, n, 3)
    return n**2 / (kappa**2 + 2.0 * n**2)


@dataclass(frozen=True)
class CurveComparison:
    kappa: float
    alpha: int
    n: int
    car: CarSpec
    lags: np.ndarray
    matern_cov: np.ndarray
    car_cov: np.ndarray
    matern_corr: np.ndarray
    car_corr: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.car_corr - self.matern_corr)

    @property
    def rel_diff(self) -> np.ndarray:
        return self.abs_diff / np.abs(self.matern_corr)

    @property
    def max_corr_diff(self) -> float:
        return float(np.max(self.abs_diff))

    @property
    def discrepancy_factor(self) -> float:
        return 1.0 if self.alpha == 1 else alpha2_discrepancy_factor(self.kappa, self.n)


def compare_curves(kappa: float, alpha: int, n: int) -> CurveComparison:
    """Matern correlation versus the matched CAR correlation at every lag."""
    if alpha == 1:
        spec = match_car_to_matern_alpha1(kappa, n)
    elif alpha == 2:
        spec = match_car_to_matern_alpha2(kappa, n)
    else:
        raise InvalidParameterError(f"matching is defined for alpha 1 or 2, got {alpha}")
    m = matern_curve(MaternParams(kappa, alpha), n).values
    c = car_covariance_curve(spec).values
    return CurveComparison(
        kappa=float(kappa),
        alpha=alpha,
        n=int(n),
        car=spec,
        lags=np.arange(n),
        matern_cov=m,
        car_cov=c,
        matern_corr=m / m[0],
        car_corr=c / c[0],
    )
