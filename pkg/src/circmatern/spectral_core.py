"""Circulant algebra and spectral building blocks on the n-point circular lattice.

The lattice has n equally spaced points on a circle of circumference 1, so
lattice lag k corresponds to the normalized angle theta = k / n.

Eigenvalues of a symmetric circulant are returned in natural DFT frequency
order k = 0, ..., n - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from .errors import (
    InvalidParameterError,
    SingularMatrixError,
    TruncationLimitError,
)

MIN_LATTICE = 3
MAX_TERMS = 10_000_000
DEFAULT_TOL = 1e-12


def binom_neg(alpha: float, j: int) -> float:
    """Generalized binomial coefficient binom(-alpha, j)."""
    out = 1.0
    for i in range(j):
        out *= (-alpha - i) / (i + 1)
    return out


def _check_lattice(n: int) -> int:
    if int(n) != n or n < MIN_LATTICE:
        raise InvalidParameterError(f"invalid lattice: n must be an integer >= {MIN_LATTICE}, got {n}")
    return int(n)


def angular_lag(k1: int, k2: int, n: int) -> float:
    """Return the normalized lag ((k1 - k2) mod n) / n in [0, 1).

    theta and 1 - theta give the same covariance for every even model.
    """
    n = _check_lattice(n)
    if not (0 <= k1 < n and 0 <= k2 < n):
        raise InvalidParameterError(f"lattice indices must lie in [0, {n}), got ({k1}, {k2})")
    return ((k1 - k2) % n) / n


def dft_real_even(values) -> np.ndarray:
    """DFT of a real sequence that is even under k -> n - k.

    Returns sum_j values[j] * cos(2 pi j k / n); the imaginary part vanishes
    by symmetry and is dropped.
    """
    return np.fft.fft(np.asarray(values, dtype=float)).real


def _is_even_sequence(values: np.ndarray, atol: float) -> bool:
    return bool(np.allclose(values[1:], values[1:][::-1], rtol=0.0, atol=atol))


@dataclass(frozen=True)
class CirculantMatrix:
    """Symmetric circulant operator stored by its first row."""

    first_row: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        row = np.array(self.first_row, dtype=float)
        row.setflags(write=False)
        n = _check_lattice(row.size)
        scale = float(np.max(np.abs(row))) if row.size else 0.0
        if not _is_even_sequence(row, atol=1e-14 * max(scale, 1.0)):
            raise InvalidParameterError("circulant first row is not symmetric: row[k] != row[n-k]")
        object.__setattr__(self, "first_row", row)
        object.__setattr__(self, "n", n)

    @classmethod
    def identity(cls, n: int) -> "CirculantMatrix":
        row = np.zeros(_check_lattice(n))
        row[0] = 1.0
        return cls(row)

    def to_dense(self) -> np.ndarray:
        idx = (np.arange(self.n)[None, :] - np.arange(self.n)[:, None]) % self.n
        return self.first_row[idx]

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.fft.ifft(np.fft.fft(self.first_row) * np.fft.fft(x)).real

    def eigenvalues(self) -> np.ndarray:
        return dft_eigenvalues(self)


def dft_eigenvalues(m: CirculantMatrix) -> np.ndarray:
    """Eigenvalues lambda_k = sum_j row[j] cos(2 pi j k / n), k = 0..n-1."""
    return dft_real_even(m.first_row)


def circulant_from_eigenvalues(eigenvalues) -> CirculantMatrix:
    """Inverse of :func:`dft_eigenvalues`."""
    return CirculantMatrix(np.fft.ifft(np.asarray(eigenvalues, dtype=float)).real)


def circulant_solve(m: CirculantMatrix, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` in the DFT domain.

    Raises SingularMatrixError when an eigenvalue is below
    1e-14 * max|eigenvalue| in magnitude.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != m.n:
        raise InvalidParameterError(f"rhs has length {rhs.shape[0]}, expected {m.n}")
    lam = dft_eigenvalues(m)
    scale = np.max(np.abs(lam))
    if scale == 0.0 or np.min(np.abs(lam)) < 1e-14 * scale:
        raise SingularMatrixError("circulant matrix is singular")
    shape = (-1,) + (1,) * (rhs.ndim - 1)
    return np.fft.ifft(np.fft.fft(rhs, axis=0) / lam.reshape(shape), axis=0).real


@dataclass(frozen=True)
class LagCovariance:
    """Stationary covariance on the lattice, indexed by lag 0..n-1."""

    values: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        n = _check_lattice(vals.size)
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("covariance values must be finite")
        if not _is_even_sequence(vals, atol=1e-12 * max(abs(vals[0]), 1e-300)):
            raise InvalidParameterError("covariance is not even under lag reflection")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n", n)

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def eigenvalues(self) -> np.ndarray:
        return dft_real_even(self.values)

    def is_psd(self, rtol: float = 1e-9) -> bool:
        return bool(np.min(self.eigenvalues()) >= -rtol * self.values[0])

    def as_circulant(self) -> CirculantMatrix:
        return CirculantMatrix(self.values)

    def to_dense(self) -> np.ndarray:
        return self.as_circulant().to_dense()

    def correlation(self) -> np.ndarray:
        return self.values / self.values[0]


@dataclass(frozen=True)
class SpectralCoefficients:
    """c_k = (kappa^2 + (2 pi k)^2)^(-alpha) for k = 0..K.

    ``kummer_terms`` records how many leading terms of the large-k expansion
    of c_k the caller intends to sum analytically; ``tail_bound`` bounds the
    discarded two-sided remainder after that correction (zero terms means
    the plain tail sum_{|k|>K} c_k).
    """

    kappa: float
    alpha: float
    K: int
    coefficients: np.ndarray
    tol: float
    kummer_terms: int
    tail_bound: float


def _check_smoothness(kappa: float, alpha: float) -> None:
    if not kappa > 0 or not math.isfinite(kappa):
        raise InvalidParameterError(f"kappa must be positive and finite, got {kappa}")
    if not alpha > 0.5 or not math.isfinite(alpha):
        raise InvalidParameterError(f"invalid smoothness: alpha must exceed 1/2, got {alpha}")


def remainder_bound(kappa: float, alpha: float, K: int, kummer_terms: int = 0) -> float:
    """Bound on the two-sided tail after summing |k| <= K exactly.

    With J = kummer_terms, c_k differs from its J-term expansion
    sum_j binom(-alpha, j) kappa^(2j) (2 pi k)^(-2 alpha - 2j) by at most
    |binom(-alpha, J)| kappa^(2J) (2 pi k)^(-2 alpha - 2J) (Lagrange remainder,
    valid for every k >= 1). Summing over k > K against an integral gives

        2 |binom(-alpha, J)| kappa^(2J) (2 pi)^(-s) K^(1 - s) / (s - 1),  s = 2 alpha + 2J.

    J = 0 is the plain bound 2 (2 pi)^(-2 alpha) K^(1 - 2 alpha) / (2 alpha - 1).
    """
    s = 2.0 * alpha + 2.0 * kummer_terms
    lead = abs(binom_neg(alpha, kummer_terms)) * kappa ** (2 * kummer_terms)
    return 2.0 * lead * (2.0 * math.pi) ** (-s) * K ** (1.0 - s) / (s - 1.0)


def _smallest_K(kappa: float, alpha: float, tol: float, kummer_terms: int) -> int:
    s = 2.0 * alpha + 2.0 * kummer_terms
    lead = 2.0 * abs(binom_neg(alpha, kummer_terms)) * kappa ** (2 * kummer_terms) * (2.0 * math.pi) ** (-s) / (s - 1.0)
    if lead == 0.0:
        return 1
    # solve lead * K^(1-s) <= tol in log space, then fix up rounding
    log_k = (math.log(lead) - math.log(tol)) / (s - 1.0)
    if log_k > math.log(MAX_TERMS) + 1e-9:
        raise TruncationLimitError(
            f"series needs more than {MAX_TERMS} terms for tol={tol:g} (alpha={alpha}, kappa={kappa})"
        )
    K = max(1, math.ceil(math.exp(log_k)))
    while K > 1 and remainder_bound(kappa, alpha, K - 1, kummer_terms) <= tol:
        K -= 1
    while remainder_bound(kappa, alpha, K, kummer_terms) > tol:
        K += 1
    if K > MAX_TERMS:
        raise TruncationLimitError(f"series needs more than {MAX_TERMS} terms for tol={tol:g}")
    return K


def spectral_coefficients(
    kappa: float, alpha: float, tol: float = DEFAULT_TOL, kummer_terms: int = 0
) -> SpectralCoefficients:
    """Spectral coefficients of the circular Matern operator, truncated so the
    remainder bound is at most ``tol``."""
    _check_smoothness(kappa, alpha)
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    if kummer_terms < 0:
        raise InvalidParameterError("kummer_terms must be >= 0")
    K = _smallest_K(kappa, alpha, tol, kummer_terms)
    k = np.arange(K + 1, dtype=float)
    coeffs = (kappa**2 + (2.0 * np.pi * k) ** 2) ** (-alpha)
    coeffs.setflags(write=False)
    return SpectralCoefficients(
        kappa=float(kappa),
        alpha=float(alpha),
        K=K,
        coefficients=coeffs,
        tol=float(tol),
        kummer_terms=kummer_terms,
        tail_bound=remainder_bound(kappa, alpha, K, kummer_terms),
    )
