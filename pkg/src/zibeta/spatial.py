"""Exponential-covariance Gaussian processes with unit marginal variance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NonPDError, ParameterDomainError

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)
# exp(-phi d) below this is set to zero: avoids subnormal arithmetic in the
# factorization (20x slowdowns) at an entrywise perturbation of 1e-20
COV_FLUSH = 1e-20


@dataclass(frozen=True)
class GPFactor:
    """Lower Cholesky factor of ``C + jitter * I``."""

    L: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def solve_lower(self, x):
        return linalg.solve_triangular(self.L, x, lower=True, check_finite=False)

    def log_density(self, x) -> float:
        """Log density of ``N(0, L L^T)`` at ``x``."""
        r = self.solve_lower(x)
        return -0.5 * (float(r @ r) + self.logdet() + self.n * np.log(2.0 * np.pi))


def _coords(coords) -> np.ndarray:
    s = np.asarray(coords, dtype=float)
    s = s.reshape(-1, 2)
    if not np.all(np.isfinite(s)):
        raise ParameterDomainError("coordinates must be finite")
    return s


def distance_matrix(coords, other=None) -> np.ndarray:
    """Euclidean distances between planar sites (cross distances with ``other``)."""
    a = _coords(coords)
    b = a if other is None else _coords(other)
    diff = a[:, None, :] - b[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if other is None:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


def exp_covariance(D, phi: float) -> np.ndarray:
    if not phi > 0:
        raise ParameterDomainError("decay phi must be positive")
    C = np.exp(-phi * np.asarray(D, dtype=float))
    C[C < COV_FLUSH] = 0.0
    return C


def chol_jitter(C) -> GPFactor:
    """Cholesky with the smallest working jitter from :data:`JITTER_LADDER`."""
    C = np.asarray(C, dtype=float)
    eye = np.eye(C.shape[0])
    for j in JITTER_LADDER:
        L, info = linalg.lapack.dpotrf(C + j * eye if j else C, lower=1, clean=1)
        if info == 0:
            return GPFactor(L, j)
    raise NonPDError("covariance matrix is not positive definite even with jitter 1e-4")


def gp_prior_draw(rng: np.random.Generator, F: GPFactor, size=None) -> np.ndarray:
    if size is None:
        return F.L @ rng.standard_normal(F.n)
    return (F.L @ rng.standard_normal((F.n, size))).T


def gp_conditional(train_coords, train_effects, test_coords, phi, factor: GPFactor | None = None):
    """Mean and covariance of test effects given training effects.

    ``factor`` may carry a precomputed factor of the training covariance.
    """
    train = _coords(train_coords)
    test = _coords(test_coords)
    eff = np.asarray(train_effects, dtype=float).ravel()
    if factor is None:
        factor = chol_jitter(exp_covariance(distance_matrix(train), phi))
    Cs = exp_covariance(distance_matrix(train, test), phi)
    Css = exp_covariance(distance_matrix(test), phi)
    A = factor.solve_lower(Cs)
    mean = A.T @ factor.solve_lower(eff)
    cov = Css - A.T @ A
    return mean, cov


def gp_conditional_marginals(train_coords, train_effects, test_coords, phi, factor=None):
    """Conditional means and variances only (no test-test covariance)."""
    train = _coords(train_coords)
    test = _coords(test_coords)
    eff = np.asarray(train_effects, dtype=float).ravel()
    if factor is None:
        factor = chol_jitter(exp_covariance(distance_matrix(train), phi))
    Cs = exp_covariance(distance_matrix(train, test), phi)
    A = factor.solve_lower(Cs)
    mean = A.T @ factor.solve_lower(eff)
    var = np.clip(1.0 - np.einsum("ij,ij->j", A, A), 0.0, None)
    return mean, var


def effective_range(phi: float) -> float:
    """Distance at which the correlation ``exp(-phi d)`` falls to about 0.05."""
    if not phi > 0:
        raise ParameterDomainError("decay phi must be positive")
    return 3.0 / phi


def default_phi_bounds(coords) -> tuple[float, float]:
    """Uniform-prior support ``(3 / d_max, 3 / d_min)`` over distinct site pairs.

    Effective ranges between the closest pair distance and the domain
    diameter.
    """
    D = distance_matrix(coords)
    d = D[np.triu_indices_from(D, k=1)]
    d = d[d > 0]
    if d.size == 0:
        raise ParameterDomainError("need at least two distinct sites for phi bounds")
    return 3.0 / float(d.max()), 3.0 / float(d.min())
