"""CAR(1) and CAR(2) models on the n-point circular lattice.

CAR(1): Z_k | rest ~ N(a Z_{k-1} + a Z_{k+1}, sigma2), precision (I - M1) / sigma2.
CAR(2) is the convolution of CAR(1) with itself, rescaled to unit diagonal:
neighbour weights a1 = 2a / (2a^2 + 1) at distance 1 and
a2 = -a^2 / (2a^2 + 1) at distance 2, so that I - M2 = (I - M1)^2 / (2a^2 + 1).

All closed forms are written in terms of L = log(beta), where
beta = (1 + sqrt(1 - 4a^2)) / (2a) and a = 1 / (2 cosh L).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameterError
from .spectral_core import CirculantMatrix, LagCovariance


def log_beta_from_a(a: float) -> float:
    """log((1 + sqrt(1 - 4a^2)) / (2a)), accurate as a -> 1/2."""
    root = math.sqrt((1.0 - 2.0 * a) * (1.0 + 2.0 * a))
    return math.log1p((1.0 - 2.0 * a + root) / (2.0 * a))


def a_from_log_beta(log_beta: float) -> float:
    return 1.0 / (2.0 * math.cosh(log_beta))


@dataclass(frozen=True)
class CarSpec:
    """CAR lattice model.

    ``log_beta`` may be passed when it is known more precisely than ``a``
    (e.g. from parameter matching, where log_beta = kappa / n exactly); it
    must agree with ``a``. Otherwise it is derived from ``a``.
    """

    n: int
    order: int
    a: float
    sigma2: float
    log_beta: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise InvalidParameterError(f"order must be 1 or 2, got {self.order}")
        min_n = 3 if self.order == 1 else 5
        if int(self.n) != self.n or self.n < min_n:
            raise InvalidParameterError(f"order-{self.order} CAR needs an integer n >= {min_n}, got {self.n}")
        if not 0.0 < self.a < 0.5:
            raise InvalidParameterError(f"a must lie in the open interval (0, 1/2), got {self.a}")
        if not self.sigma2 > 0 or not math.isfinite(self.sigma2):
            raise InvalidParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if self.log_beta is None:
            object.__setattr__(self, "log_beta", log_beta_from_a(self.a))
        else:
            if not self.log_beta > 0:
                raise InvalidParameterError("log_beta must be positive")
            if not math.isclose(a_from_log_beta(self.log_beta), self.a, rel_tol=1e-9):
                raise InvalidParameterError("log_beta is inconsistent with a")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_log_beta(cls, n: int, order: int, log_beta: float, sigma2: float) -> "CarSpec":
        return cls(n=n, order=order, a=a_from_log_beta(log_beta), sigma2=sigma2, log_beta=log_beta)

    @property
    def beta(self) -> float:
        return math.exp(self.log_beta)

    @property
    def a1(self) -> float:
        return 2.0 * self.a / (2.0 * self.a**2 + 1.0)

    @property
    def a2(self) -> float:
        return -self.a**2 / (2.0 * self.a**2 + 1.0)

    @property
    def sqrt_one_minus_4a2(self) -> float:
        """sqrt(1 - 4a^2) = tanh(log beta)."""
        return math.tanh(self.log_beta)


def neighbour_row(spec: CarSpec) -> np.ndarray:
    """First row of M (M1 for order 1, M2 for order 2)."""
    row = np.zeros(spec.n)
    if spec.order == 1:
        row[1] = row[-1] = spec.a
    else:
        row[1] = row[-1] = spec.a1
        row[2] = row[-2] = spec.a2
    return row


def build_precision(spec: CarSpec) -> CirculantMatrix:
    """Precision matrix (I - M) / sigma2 as a symmetric circulant."""
    row = -neighbour_row(spec)
    row[0] = 1.0
    return CirculantMatrix(row / spec.sigma2)


def _check_lag(spec: CarSpec, lag) -> np.ndarray:
    lag_arr = np.asarray(lag)
    if not np.issubdtype(lag_arr.dtype, np.integer) or np.any(lag_arr < 0) or np.any(lag_arr >= spec.n):
        raise InvalidParameterError(f"lag must be an integer in [0, {spec.n}), got {lag}")
    return lag_arr


def phi_m_spectral(m: int, n: int, a: float, lag):
    """(1/n) sum_k cos(2 pi lag k / n) / (1 - 2a cos(2 pi k / n))^m, exact finite sum."""
    if int(m) != m or m < 1:
        raise InvalidParameterError(f"m must be a positive integer, got {m}")
    if not 0.0 < a < 0.5:
        raise InvalidParameterError(f"a must lie in (0, 1/2), got {a}")
    if int(n) != n or n < 3:
        raise InvalidParameterError(f"n must be an integer >= 3, got {n}")
    lag_arr = np.asarray(lag)
    if not np.issubdtype(lag_arr.dtype, np.integer) or np.any(lag_arr < 0) or np.any(lag_arr >= n):
        raise InvalidParameterError(f"lag must be an integer in [0, {n}), got {lag}")
    k = np.arange(n)
    denom = (1.0 - 2.0 * a * np.cos(2.0 * np.pi * k / n)) ** m
    vals = np.cos(2.0 * np.pi * np.multiply.outer(lag_arr, k) / n) @ (1.0 / denom) / n
    return float(vals) if lag_arr.ndim == 0 else vals


def car_covariance_spectral(spec: CarSpec, lag):
    """Covariance at integer lag(s) by the exact n-term spectral sum."""
    lag_arr = _check_lag(spec, lag)
    if spec.order == 1:
        return spec.sigma2 * phi_m_spectral(1, spec.n, spec.a, lag_arr)
    return spec.sigma2 * (2.0 * spec.a**2 + 1.0) * phi_m_spectral(2, spec.n, spec.a, lag_arr)


def _lattice_ratios(theta, n: int, log_beta: float):
    """(u, cosh(nL u)/sinh(nL/2), sinh(nL u)/sinh(nL/2)) with u = theta - 1/2."""
    big = n * log_beta
    u = np.mod(np.asarray(theta, dtype=float), 1.0) - 0.5
    au = np.abs(u)
    denom = -np.expm1(-big)
    lead = np.exp(big * (au - 0.5))
    rc = lead * (1.0 + np.exp(-2.0 * big * au)) / denom
    rs = np.sign(u) * lead * (-np.expm1(-2.0 * big * au)) / denom
    return u, rc, rs


def _unit_phi1(theta, n: int, log_beta: float):
    _, rc, _ = _lattice_ratios(theta, n, log_beta)
    return rc / math.tanh(log_beta)


def _unit_phi2(theta, n: int, log_beta: float):
    u, rc, rs = _lattice_ratios(theta, n, log_beta)
    t = math.tanh(log_beta)
    coth_half = 1.0 / math.tanh(n * log_beta / 2.0)
    return n / t**2 * ((0.5 * coth_half + 1.0 / (n * t)) * rc - u * rs)


def _as_output(x, theta):
    return float(x) if np.ndim(theta) == 0 else x


def phi1_closed(theta, spec: CarSpec):
    """Order-1 covariance: sigma2 cosh(nL (theta - 1/2)) / (tanh L sinh(nL / 2))."""
    if spec.order != 1:
        raise InvalidParameterError("phi1_closed needs an order-1 spec")
    return _as_output(spec.sigma2 * _unit_phi1(theta, spec.n, spec.log_beta), theta)


def phi2_closed(theta, spec: CarSpec):
    """Order-2 covariance, sigma2 (2a^2 + 1) times

        n [ (cosh(nL/2)/2 + coth(L) sinh(nL/2)/n) / (tanh^2 L sinh^2(nL/2)) cosh(nL u)
            - u sinh(nL u) / (tanh^2 L sinh(nL/2)) ],   u = theta - 1/2.
    """
    if spec.order != 2:
        raise InvalidParameterError("phi2_closed needs an order-2 spec")
    scale = spec.sigma2 * (2.0 * spec.a**2 + 1.0)
    return _as_output(scale * _unit_phi2(theta, spec.n, spec.log_beta), theta)


def car_covariance_curve(spec: CarSpec) -> LagCovariance:
    """Covariance at every lag 0..n-1 from the closed forms."""
    thetas = np.arange(spec.n) / spec.n
    vals = phi1_closed(thetas, spec) if spec.order == 1 else phi2_closed(thetas, spec)
    # enforce exact evenness; the two halves agree to rounding
    vals = 0.5 * (vals + np.roll(vals[::-1], 1))
    return LagCovariance(vals)
