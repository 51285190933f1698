"""Sampling, likelihood, kriging and the circle-average experiment on the lattice.

Random streams: replicate r of a run seeded with ``seed`` draws from
``SeedSequence(seed, spawn_key=(r,))``, so any replicate can be regenerated
on its own and replicates may be produced in any order or in parallel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import InvalidParameterError, NotPositiveSemidefiniteError, SingularMatrixError
from .matern import CLOSED_FORM_ALPHAS, MaternParams, matern_curve
from .spectral_core import LagCovariance

PSD_RTOL = 1e-9


@dataclass(frozen=True)
class GridField:
    values: np.ndarray
    provenance: Dict[str, object] = field(default_factory=dict, compare=False)
    n: int = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 3:
            raise InvalidParameterError("a field needs a 1-d array of at least 3 values")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n", vals.size)


def replicate_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    if int(seed) != seed or seed < 0:
        raise InvalidParameterError(f"seed must be a non-negative integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replicate),)))


def sqrt_eigenvalues(curve: LagCovariance) -> np.ndarray:
    lam = curve.eigenvalues()
    if np.min(lam) < -PSD_RTOL * curve.values[0]:
        raise NotPositiveSemidefiniteError(
            f"covariance has a negative eigenvalue {np.min(lam):.3g} (lag-0 value {curve.values[0]:.3g})"
        )
    return np.sqrt(np.clip(lam, 0.0, None))


def _synthesize(root_lam: np.ndarray, white: np.ndarray) -> np.ndarray:
    # C^(1/2) z: the symmetric square root is the circulant with eigenvalues sqrt(lambda)
    return np.fft.ifft(np.fft.fft(white, axis=-1) * root_lam, axis=-1).real


def sample_fields(curve: LagCovariance, seed: int, replicates: int, first: int = 0) -> np.ndarray:
    """Array of shape (replicates, n); row i is replicate ``first + i``."""
    if int(replicates) != replicates or replicates < 1:
        raise InvalidParameterError(f"replicates must be a positive integer, got {replicates}")
    root_lam = sqrt_eigenvalues(curve)
    white = np.stack([replicate_rng(seed, first + r).standard_normal(curve.n) for r in range(replicates)])
    return _synthesize(root_lam, white)


def sample_field(curve: LagCovariance, seed: int, replicate: int = 0) -> GridField:
    """One zero-mean Gaussian draw with covariance circulant(curve)."""
    values = sample_fields(curve, seed, 1, first=replicate)[0]
    return GridField(values, {"seed": seed, "replicate": replicate, "n": curve.n})


def circle_average(field_) -> float:
    """Lattice average (1/n) sum values, the discrete circle average."""
    values = field_.values if isinstance(field_, GridField) else np.asarray(field_, dtype=float)
    return float(np.mean(values))


def empirical_lag_covariance(samples: np.ndarray, lags: Sequence[int]):
    """Zero-mean lag covariance estimates and standard errors.

    Each replicate contributes the lattice average of x_i x_{i+lag}; the
    standard error is the spread of those per-replicate averages over
    sqrt(replicates).
    """
    samples = np.atleast_2d(samples)
    est, se = [], []
    for lag in lags:
        per_rep = np.mean(samples * np.roll(samples, -lag, axis=1), axis=1)
        est.append(per_rep.mean())
        se.append(per_rep.std(ddof=1) / math.sqrt(per_rep.size))
    return np.array(est), np.array(se)


def variance_with_se(x: np.ndarray):
    """Sample variance and its standard error (via the fourth central moment)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    var = x.var(ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    se = math.sqrt(max(m4 - var**2 * (m - 3) / (m - 1), 0.0) / m)
    return float(var), float(se)


@dataclass(frozen=True)
class ErgodicityReport:
    model: MaternParams
    grid_sizes: tuple
    replicates: int
    variances: tuple
    standard_errors: tuple
    lattice_variances: tuple
    extra_variance: float = 0.0

    @property
    def floor(self) -> float:
        """kappa^(-2 alpha), the variance of the continuous circle average."""
        return self.model.variance_floor

    @property
    def expected(self) -> float:
        return self.floor + self.extra_variance

    def z_scores(self) -> np.ndarray:
        return (np.array(self.variances) - self.expected) / np.array(self.standard_errors)


def _shifts(seed: int, replicates: int) -> np.ndarray:
    # replicate r's constant shift comes from its own substream (r, 1)
    return np.array(
        [np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(r, 1))).standard_normal() for r in range(replicates)]
    )


def run_ergodicity_experiment(
    params: MaternParams,
    grid_sizes: Iterable[int] = (16, 64, 256),
    replicates: int = 20000,
    seed: int = 0,
    extra_variance: float = 0.0,
) -> ErgodicityReport:
    """Variance of the circle average under grid refinement.

    With ``extra_variance`` > 0 every replicate is shifted by an independent
    N(0, extra_variance) constant; the circle average cannot tell that shift
    apart from the field's own zero-frequency component.
    """
    if int(replicates) != replicates or replicates < 2:
        raise InvalidParameterError(f"replicates must be an integer >= 2, got {replicates}")
    if extra_variance < 0:
        raise InvalidParameterError("extra_variance must be non-negative")
    sizes = tuple(int(n) for n in grid_sizes)
    if not sizes:
        raise InvalidParameterError("at least one grid size is required")
    variances, ses, lattice = [], [], []
    for n in sizes:
        curve = matern_curve(params, n)
        fields = sample_fields(curve, seed, replicates)
        means = fields.mean(axis=1)
        if extra_variance > 0:
            means = means + math.sqrt(extra_variance) * _shifts(seed, replicates)
        v, se = variance_with_se(means)
        variances.append(v)
        ses.append(se)
        lattice.append(float(np.mean(curve.values)) + extra_variance)
    return ErgodicityReport(
        model=params,
        grid_sizes=sizes,
        replicates=int(replicates),
        variances=tuple(variances),
        standard_errors=tuple(ses),
        lattice_variances=tuple(lattice),
        extra_variance=float(extra_variance),
    )


def _fields_matrix(fields) -> np.ndarray:
    if isinstance(fields, GridField):
        fields = [fields]
    if isinstance(fields, np.ndarray):
        return np.atleast_2d(np.asarray(fields, dtype=float))
    return np.stack([f.values if isinstance(f, GridField) else np.asarray(f, dtype=float) for f in fields])


def log_likelihood(curve: LagCovariance, fields) -> float:
    """Zero-mean Gaussian log-density of one or more fields, summed.

    log det is the sum of log eigenvalues of the circulant covariance and the
    quadratic form is evaluated in the DFT domain.
    """
    x = _fields_matrix(fields)
    if x.shape[1] != curve.n:
        raise InvalidParameterError(f"field has {x.shape[1]} points, covariance has {curve.n}")
    lam = curve.eigenvalues()
    if np.min(lam) <= 1e-14 * np.max(np.abs(lam)):
        raise SingularMatrixError("covariance matrix is singular or not positive definite")
    n = curve.n
    quad = np.sum(np.abs(np.fft.fft(x, axis=1)) ** 2 / lam, axis=1) / n
    per_field = -0.5 * (n * math.log(2.0 * math.pi) + np.sum(np.log(lam)) + quad)
    return float(np.sum(per_field))


@dataclass(frozen=True)
class KappaFit:
    kappa: float
    log_likelihood: float
    alpha: int
    boundary: Optional[str]
    bracket: tuple

    @property
    def boundary_hit(self) -> bool:
        return self.boundary is not None


def fit_kappa(fields, alpha: int, bracket=(1e-3, 1e3), grid_points: int = 61, xtol: float = 1e-7) -> KappaFit:
    """Maximum-likelihood kappa on a log scale.

    A coarse grid over the bracket locates the best cell; a bounded scalar
    search then refines it until the log-kappa interval is below ``xtol``.
    A maximum at either end of the bracket is reported through ``boundary``
    ("lower" / "upper") instead of raising.
    """
    if alpha not in CLOSED_FORM_ALPHAS:
        raise InvalidParameterError(f"alpha must be 1, 2 or 3, got {alpha}")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise InvalidParameterError(f"invalid kappa bracket {bracket}")
    x = _fields_matrix(fields)
    n = x.shape[1]

    def nll(log_kappa: float) -> float:
        curve = matern_curve(MaternParams(math.exp(log_kappa), alpha), n)
        try:
            return -log_likelihood(curve, x)
        except SingularMatrixError:
            return math.inf

    grid = np.linspace(math.log(lo), math.log(hi), grid_points)
    vals = np.array([nll(g) for g in grid])
    best = int(np.argmin(vals))
    boundary = None
    if best == 0 or best == grid_points - 1:
        boundary = "lower" if best == 0 else "upper"
        g = grid[best]
        return KappaFit(math.exp(g), -float(vals[best]), alpha, boundary, (lo, hi))
    res = optimize.minimize_scalar(
        nll, bounds=(grid[best - 1], grid[best + 1]), method="bounded", options={"xatol": xtol}
    )
    g, v = (res.x, res.fun) if res.fun <= vals[best] else (grid[best], vals[best])
    return KappaFit(math.exp(g), -float(v), alpha, boundary, (lo, hi))


@dataclass(frozen=True)
class Prediction:
    index: int
    mean: float
    variance: float


def conditional_predict(
    curve: LagCovariance, observed: Mapping[int, float], targets: Iterable[int]
) -> Dict[int, Prediction]:
    """Simple-kriging mean and variance at lattice targets given observed values."""
    n = curve.n
    idx = np.array(sorted(observed), dtype=int)
    targets = [int(t) for t in targets]
    for i in list(idx) + targets:
        if not 0 <= i < n:
            raise InvalidParameterError(f"lattice index {i} outside [0, {n})")
    c = curve.values
    out = {}
    if idx.size == 0:
        return {t: Prediction(t, 0.0, float(c[0])) for t in targets}
    y = np.array([observed[i] for i in idx], dtype=float)
    K = c[(idx[:, None] - idx[None, :]) % n]
    try:
        factor = linalg.cho_factor(K)
    except linalg.LinAlgError as exc:
        raise SingularMatrixError("observation covariance is singular") from exc
    if np.min(np.diag(factor[0])) ** 2 < 1e-13 * c[0]:
        raise SingularMatrixError("observation covariance is numerically singular")
    weights_y = linalg.cho_solve(factor, y)
    obs_pos = {int(i): p for p, i in enumerate(idx)}
    for t in targets:
        if t in obs_pos:
            out[t] = Prediction(t, float(y[obs_pos[t]]), 0.0)
            continue
        k = c[(t - idx) % n]
        mean = float(k @ weights_y)
        var = float(c[0] - k @ linalg.cho_solve(factor, k))
        out[t] = Prediction(t, mean, max(var, 0.0))
    return out
