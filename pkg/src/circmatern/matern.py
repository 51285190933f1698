"""Circular Matern covariance on the unit-circumference circle.

The covariance at normalized lag theta is

    psi_alpha(theta) = sum_k cos(2 pi k theta) / (kappa^2 + (2 pi k)^2)^alpha,

available as a truncated series for any alpha > 1/2 and in closed
hyperbolic form for alpha = 1, 2, 3.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath
import numpy as np
from .errors import InvalidParameterError, NumericalError
from .errors import InvalidParameterError
from .spectral_core import (
    DEFAULT_TOL,
    LagCovariance,
    _check_lattice,
    _check_smoothness,
    binom_neg,
    spectral_coefficients,
)

# Leading terms of the large-k expansion of the coefficients that psi_series
# sums analytically; see spectral_core.remainder_bound.
SERIES_KUMMER_TERMS = 4
CLOSED_FORM_ALPHAS = (1, 2, 3)


@dataclass(frozen=True)
class MaternParams:
    kappa: float
    alpha: float
    variance_scale: float = 1.0

    def __post_init__(self):
        _check_smoothness(self.kappa, self.alpha)
        if not self.variance_scale > 0 or not math.isfinite(self.variance_scale):
            raise InvalidParameterError(f"variance_scale must be positive, got {self.variance_scale}")

    @property
    def variance_floor(self) -> float:
        """Zero-frequency coefficient kappa^(-2 alpha), scaled."""
        return self.variance_scale * self.kappa ** (-2.0 * self.alpha)


def canonical_lag(theta):
    """Reduce theta modulo 1 into [0, 1)."""
    return np.mod(np.asarray(theta, dtype=float), 1.0)


def _check_kappa(kappa: float) -> float:
    if not kappa > 0 or not math.isfinite(kappa):
        raise InvalidParameterError(f"kappa must be positive and finite, got {kappa}")
    return float(kappa)


def _ratios(theta, kappa):
    """Return (u, cosh(k u)/sinh(k/2), sinh(k u)/sinh(k/2), coth(k/2)) with u = theta - 1/2.

    Written with exponentials of non-positive arguments so large kappa does
    not overflow.
    """
    u = canonical_lag(theta) - 0.5
    au = np.abs(u)
    denom = -np.expm1(-kappa)
    lead = np.exp(kappa * (au - 0.5))
    rc = lead * (1.0 + np.exp(-2.0 * kappa * au)) / denom
    rs = np.sign(u) * lead * (-np.expm1(-2.0 * kappa * au)) / denom
    coth_half = 1.0 / math.tanh(kappa / 2.0)
    return u, rc, rs, coth_half


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


def _guarded(func):
    """Turn overflow in a closed form (kappa far too small) into NumericalError.

    Underflow is harmless here: it only sends far-lag values of large-kappa
    curves to zero.
    """

    @functools.wraps(func)
    def wrapper(theta, kappa):
        try:
            with np.errstate(over="raise", divide="raise", invalid="raise"):
                out = func(theta, kappa)
        except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
            raise NumericalError(f"closed form overflows at kappa={kappa}") from exc
        if not np.all(np.isfinite(out)):
            raise NumericalError(f"closed form is not finite at kappa={kappa}")
        return out

    return wrapper


@_guarded
def psi1_closed(theta, kappa: float):
    """cosh(kappa (theta - 1/2)) / (2 kappa sinh(kappa / 2))."""
    kappa = _check_kappa(kappa)
    _, rc, _, _ = _ratios(theta, kappa)
    return _scalar_or_array(rc / (2.0 * kappa), theta)


@_guarded
def psi2_closed(theta, kappa: float):
    """Closed form for alpha = 2.

    (sinh h + h cosh h) / (4 kappa^3 sinh^2 h) cosh(kappa u)
        - u sinh(kappa u) / (4 kappa^2 sinh h),     h = kappa/2, u = theta - 1/2.
    """
    kappa = _check_kappa(kappa)
    u, rc, rs, coth_h = _ratios(theta, kappa)
    h = kappa / 2.0
    out = (1.0 + h * coth_h) / (4.0 * kappa**3) * rc - u * rs / (4.0 * kappa**2)
    return _scalar_or_array(out, theta)


@_guarded
def psi3_closed(theta, kappa: float):
    """Closed form for alpha = 3, obtained as -(1 / (4 kappa)) d psi2 / d kappa.

    Write psi2 = A cosh(kappa u) - B u sinh(kappa u) with
    A = (s + h c) / (4 kappa^3 s^2), B = 1 / (4 kappa^2 s), s = sinh h,
    c = cosh h, h = kappa/2. Differentiating in kappa (ds/dkappa = c/2):

        d psi2/dkappa = (A' - B u^2) cosh(kappa u) + (A - B') u sinh(kappa u)

        A' s / 1  = (coth h + h/2) / (4 kappa^3)
                    - (1 + h coth h)(3 + kappa coth h) / (4 kappa^4)     [times 1/s]
        -B' s     = 1 / (2 kappa^3) + coth h / (8 kappa^2)              [times 1/s]

    and every cosh/sinh(kappa u) is paired with the 1/s to form a stable ratio.
    """
    kappa = _check_kappa(kappa)
    u, rc, rs, coth_h = _ratios(theta, kappa)
    h = kappa / 2.0
    k2, k3, k4 = kappa**2, kappa**3, kappa**4
    a_term = 1.0 + h * coth_h
    cosh_coef = (coth_h + h / 2.0) / (4.0 * k3) - a_term * (3.0 + kappa * coth_h) / (4.0 * k4) - u * u / (4.0 * k2)
    sinh_coef = a_term / (4.0 * k3) + 1.0 / (2.0 * k3) + coth_h / (8.0 * k2)
    out = -(cosh_coef * rc + sinh_coef * u * rs) / (4.0 * kappa)
    return _scalar_or_array(out, theta)


_CLOSED = {1: psi1_closed, 2: psi2_closed, 3: psi3_closed}


def _periodic_zeta_tail(theta: float, s: float, K: int) -> mpmath.mpf:
    """sum_{k > K} cos(2 pi k theta) / k^s, at extended precision."""
    if theta == 0.0:
        full = mpmath.zeta(s)
    else:
        full = mpmath.re(mpmath.polylog(s, mpmath.expjpi(2 * mpmath.mpf(theta))))
    head = mpmath.fsum(mpmath.cospi(2 * k * mpmath.mpf(theta)) / mpmath.mpf(k) ** s for k in range(1, K + 1))
    return full - head


def psi_series(theta, params: MaternParams, tol: float = DEFAULT_TOL):
    """Spectral series for the circular Matern covariance, error <= variance_scale * tol.

    The coefficients are summed exactly for |k| <= K; beyond K the leading
    terms of c_k = (2 pi k)^(-2 alpha) (1 + kappa^2 / (2 pi k)^2)^(-alpha)
    are summed through periodic zeta functions, and K is the smallest
    truncation whose remainder bound meets ``tol``.
    """
    coeffs = spectral_coefficients(params.kappa, params.alpha, tol, kummer_terms=SERIES_KUMMER_TERMS)
    theta_arr = np.atleast_1d(canonical_lag(theta))
    K, alpha, kappa = coeffs.K, params.alpha, params.kappa
    k = np.arange(1, K + 1)
    head = coeffs.coefficients[0] + 2.0 * np.cos(2.0 * np.pi * np.outer(theta_arr, k)) @ coeffs.coefficients[1:]

    tails = np.empty_like(theta_arr)
    with mpmath.workdps(30):
        for i, th in enumerate(theta_arr):
            total = mpmath.mpf(0)
            for j in range(SERIES_KUMMER_TERMS):
                s = 2 * alpha + 2 * j
                b = binom_neg(alpha, j) * kappa ** (2 * j) * (2.0 * math.pi) ** (-s)
                total += b * _periodic_zeta_tail(float(th), s, K)
            tails[i] = float(total)
    out = params.variance_scale * (head + 2.0 * tails)
    return float(out[0]) if np.ndim(theta) == 0 else out


def psi(theta, params: MaternParams, tol: float = DEFAULT_TOL):
    """Covariance at lag theta: closed form when available, series otherwise."""
    if params.alpha in CLOSED_FORM_ALPHAS:
        return params.variance_scale * _CLOSED[int(params.alpha)](theta, params.kappa)
    return psi_series(theta, params, tol)


def matern_curve(params: MaternParams, n: int, method: str = "auto", tol: float = DEFAULT_TOL) -> LagCovariance:
    """Tabulate the covariance at the lattice lags k/n, k = 0..n-1.

    ``method`` is "auto" (closed form when alpha is 1, 2 or 3), "closed" or
    "series".
    """
    n = _check_lattice(n)
    half = np.arange(n // 2 + 1)
    thetas = half / n
    if method == "series" or (method == "auto" and params.alpha not in CLOSED_FORM_ALPHAS):
        vals = np.asarray(psi_series(thetas, params, tol))
    elif method in ("closed", "auto"):
        if params.alpha not in CLOSED_FORM_ALPHAS:
            raise InvalidParameterError(f"no closed form for alpha={params.alpha}; use the series")
        vals = params.variance_scale * np.asarray(_CLOSED[int(params.alpha)](thetas, params.kappa))
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    full = np.empty(n)
    full[: half.size] = vals
    full[half.size :] = vals[1 : n - half.size + 1][::-1]
    return LagCovariance(full)
