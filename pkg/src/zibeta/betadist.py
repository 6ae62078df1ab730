"""Beta distribution in the mean / sample-size parametrization.

``mu`` is the mean and ``psi = alpha + beta`` the "sample size".  The
extended Beta is ``W = 2V - 1`` for ``V ~ Beta``, supported on (-1, 1);
left-censoring ``W`` at zero produces the chance zeros.

All functions broadcast over array arguments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import DegenerateTruncationError, ParameterDomainError

LINK_EPS = 1e-12
LOG_LINK_MIN = 1e-12
LOG_LINK_MAX = 1e12
LOG2 = np.log(2.0)


@dataclass(frozen=True)
class BetaMS:
    """Beta law with mean ``mu`` in (0, 1) and sample size ``psi`` > 0."""

    mu: np.ndarray | float
    psi: np.ndarray | float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        if not np.all((mu > 0) & (mu < 1)):
            raise ParameterDomainError("mean parameter mu must lie in (0, 1)")
        if not np.all(psi > 0):
            raise ParameterDomainError("sample size parameter psi must be positive")
        object.__setattr__(self, "mu", mu if mu.ndim else float(mu))
        object.__setattr__(self, "psi", psi if psi.ndim else float(psi))

    @property
    def alpha(self):
        return np.multiply(self.mu, self.psi)

    @property
    def beta(self):
        return np.multiply(np.subtract(1.0, self.mu), self.psi)

    @classmethod
    def from_shapes(cls, alpha, beta) -> "BetaMS":
        return cls(*inverse_reparam(alpha, beta))


def reparam(mu, psi):
    """Map ``(mu, psi)`` to the shape pair ``(alpha, beta)``."""
    p = BetaMS(mu, psi)
    return p.alpha, p.beta


def inverse_reparam(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if not np.all((alpha > 0) & (beta > 0)):
        raise ParameterDomainError("Beta shapes must be positive")
    psi = alpha + beta
    mu = alpha / psi
    if mu.ndim == 0:
        return float(mu), float(psi)
    return mu, psi


def _scalarize(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _logpdf_shapes(v, a, b):
    return gammaln(a + b) - gammaln(a) - gammaln(b) + (a - 1.0) * np.log(v) + (b - 1.0) * np.log1p(-v)


def beta_log_density(v, p: BetaMS):
    """Log density of ``Beta(mu*psi, (1-mu)*psi)`` at ``v`` in (0, 1)."""
    v = np.asarray(v, dtype=float)
    if not np.all((v > 0) & (v < 1)):
        raise ParameterDomainError("Beta density argument must lie in the open interval (0, 1)")
    return _scalarize(_logpdf_shapes(v, p.alpha, p.beta))


def beta_cdf(v, p: BetaMS):
    v = np.asarray(v, dtype=float)
    if not np.all((v >= 0) & (v <= 1)):
        raise ParameterDomainError("Beta CDF argument must lie in [0, 1]")
    out = _kernels.betainc(p.alpha, p.beta, v)
    if np.any(np.isnan(out)):
        raise ParameterDomainError("incomplete beta evaluation did not converge")
    return _scalarize(out)


def extended_beta_log_density(w, p: BetaMS):
    """Log density of ``W = 2V - 1`` on (-1, 1)."""
    w = np.asarray(w, dtype=float)
    if not np.all((w > -1) & (w < 1)):
        raise ParameterDomainError("extended Beta argument must lie in (-1, 1)")
    return _scalarize(_logpdf_shapes((w + 1.0) / 2.0, p.alpha, p.beta) - LOG2)


def extended_beta_cdf(w, p: BetaMS):
    w = np.asarray(w, dtype=float)
    if not np.all((w >= -1) & (w <= 1)):
        raise ParameterDomainError("extended Beta CDF argument must lie in [-1, 1]")
    return beta_cdf((w + 1.0) / 2.0, p)


def sample_beta(rng: np.random.Generator, p: BetaMS, size=None):
    """Draw ``X / (X + Y)`` with ``X ~ Gamma(alpha)``, ``Y ~ Gamma(beta)``.

    Draws are clipped into the open unit interval so they can be fed back
    into log densities.
    """
    a, b = p.alpha, p.beta
    if size is None:
        size = np.broadcast(a, b).shape
    x = rng.standard_gamma(a, size=size)
    y = rng.standard_gamma(b, size=size)
    with np.errstate(invalid="ignore"):
        v = x / (x + y)
    # both gammas underflowing to zero: fall back on the larger shape
    v = np.where(np.isnan(v), np.where(np.broadcast_to(a, v.shape) >= b, 1.0, 0.0), v)
    tiny = np.finfo(float).tiny
    return _scalarize(np.clip(v, tiny, 1.0 - np.finfo(float).epsneg))


def sample_beta_truncated(rng: np.random.Generator, p: BetaMS, lo, hi, size=None):
    """Inverse-CDF draw from the Beta law restricted to ``(lo, hi)``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not np.all((lo >= 0) & (lo < hi) & (hi <= 1)):
        raise ParameterDomainError("truncation bounds must satisfy 0 <= lo < hi <= 1")
    a, b = p.alpha, p.beta
    if size is None:
        size = np.broadcast(a, b, lo, hi).shape
    u = rng.uniform(size=size)
    return _scalarize(truncated_ppf(a, b, lo, hi, u))


def truncated_ppf(a, b, lo, hi, u):
    """Quantile ``u`` of Beta(a, b) renormalized on ``(lo, hi)``, by shapes."""
    v = _kernels.beta_trunc_ppf(a, b, lo, hi, u)
    if np.any(np.isnan(v)):
        raise DegenerateTruncationError(
            "truncation window carries no probability mass under the Beta law"
        )
    # the root sits on the bracket edge only through rounding; keep draws inside
    lo_b, hi_b = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    lo_b = np.broadcast_to(lo_b, v.shape)
    hi_b = np.broadcast_to(hi_b, v.shape)
    v = np.where(v <= lo_b, np.nextafter(lo_b, hi_b), v)
    v = np.where(v >= hi_b, np.nextafter(hi_b, lo_b), v)
    return v


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterDomainError("link argument must be finite")
    return x


def link_logit_inv(x):
    """Inverse logit, clipped to ``[1e-12, 1 - 1e-12]``."""
    x = _check_finite(x)
    out = np.clip(0.5 * (1.0 + np.tanh(0.5 * x)), LINK_EPS, 1.0 - LINK_EPS)
    return _scalarize(out)


def link_log_inv(x):
    """Exponential, clipped to ``[1e-12, 1e12]``."""
    x = _check_finite(x)
    return _scalarize(np.clip(np.exp(np.clip(x, -700, 700)), LOG_LINK_MIN, LOG_LINK_MAX))
