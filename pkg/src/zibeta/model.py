"""Model variants, likelihood contributions, latent conditionals and priors.

Five variants share one parametrization:

* ``m0``   left-censored extended Beta only (chance zeros, no point mass)
* ``m1``   zero-inflated Beta: point mass ``pi`` plus censoring
* ``m2``   ``m1`` with a Gaussian-process effect in ``logit mu``
* ``m3``   ``m1`` with a Gaussian-process effect in ``logit pi``
* ``bezi`` hurdle: ``P(Y=0) = pi`` and ``Beta(mu, psi)`` for positives
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .betadist import (
    LOG2,
    BetaMS,
    beta_cdf,
    beta_log_density,
    extended_beta_log_density,
    link_logit_inv,
)
from .errors import (
    DegenerateConditionalError,
    InvariantViolationError,
    SpecificationError,
)

LOG_2PI = np.log(2.0 * np.pi)
V_PLACEHOLDER = 0.25


class ModelKind(str, enum.Enum):
    M0 = "m0"
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    BEZI = "bezi"

    @property
    def has_gamma(self) -> bool:
        return self is not ModelKind.M0

    @property
    def censored(self) -> bool:
        """Zeros can arise by left-censoring of the extended Beta."""
        return self is not ModelKind.BEZI

    @property
    def inflated(self) -> bool:
        return self in (ModelKind.M1, ModelKind.M2, ModelKind.M3)

    @property
    def spatial(self) -> bool:
        return self in (ModelKind.M2, ModelKind.M3)

    @property
    def effect_name(self) -> str | None:
        return {ModelKind.M2: "eta", ModelKind.M3: "tau"}.get(self)


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))

    @classmethod
    def of(cls, kind) -> "ModelSpec":
        try:
            return cls(ModelKind(str(kind).lower()))
        except ValueError:
            raise SpecificationError(
                f"unknown model {kind!r}; expected one of {[k.value for k in ModelKind]}"
            ) from None

    def check_data(self, data: "Dataset") -> None:
        if self.kind.spatial and data.coords is None:
            raise SpecificationError(f"model {self.kind.value} needs site coordinates")


@dataclass
class Dataset:
    """Responses in [0, 1) with the two design matrices.

    ``X`` drives the zero-inflation probability and ``G`` the Beta mean;
    both carry an all-ones intercept in column 0.
    """

    y: np.ndarray
    X: np.ndarray
    G: np.ndarray
    coords: np.ndarray | None = None
    x_names: tuple = ()
    g_names: tuple = ()

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        n = self.y.size
        if self.X.shape[0] != n or self.G.shape[0] != n:
            raise SpecificationError("y, X and G must have the same number of rows")
        if not np.all((self.y >= 0) & (self.y < 1)):
            raise SpecificationError("responses must lie in [0, 1)")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.G))):
            raise SpecificationError("design matrices contain non-finite entries")
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float).reshape(n, 2)
            if not np.all(np.isfinite(self.coords)):
                raise SpecificationError("coordinates contain non-finite entries")
        if not self.x_names:
            self.x_names = tuple(f"x{k}" for k in range(self.X.shape[1]))
        if not self.g_names:
            self.g_names = tuple(f"g{k}" for k in range(self.G.shape[1]))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def zero(self) -> np.ndarray:
        return self.y == 0

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.y[idx], self.X[idx], self.G[idx],
            None if self.coords is None else self.coords[idx],
            self.x_names, self.g_names,
        )


@dataclass
class ParamState:
    gamma: np.ndarray
    delta: np.ndarray
    psi: float
    effects: np.ndarray | None = None
    phi: float | None = None

    def __post_init__(self):
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        self.psi = float(self.psi)
        if not self.psi > 0:
            raise SpecificationError("psi must be positive")
        if self.phi is not None:
            self.phi = float(self.phi)
            if not self.phi > 0:
                raise SpecificationError("phi must be positive")
        if self.effects is not None:
            self.effects = np.asarray(self.effects, dtype=float).ravel()


@dataclass
class LatentState:
    """Zero-source indicators ``z`` and latent Beta draws ``v``."""

    z: np.ndarray
    v: np.ndarray

    @classmethod
    def initial(cls, data: Dataset) -> "LatentState":
        z = np.zeros(data.n, dtype=np.int8)
        v = np.where(data.zero, V_PLACEHOLDER, (data.y + 1.0) / 2.0)
        return cls(z, v)

    def copy(self) -> "LatentState":
        return LatentState(self.z.copy(), self.v.copy())

    def check(self, data: Dataset, spec: ModelSpec) -> None:
        pos = ~data.zero
        if np.any(self.z[pos] != 0):
            raise InvariantViolationError("positive observation flagged as unsuitable zero")
        if not np.allclose(self.v[pos], (data.y[pos] + 1.0) / 2.0, rtol=0, atol=1e-15):
            raise InvariantViolationError("latent v of a positive observation is not (y + 1) / 2")
        if not spec.kind.inflated and np.any(self.z != 0):
            raise InvariantViolationError(f"model {spec.kind.value} has no unsuitability zeros")
        cens = data.zero & (self.z == 0)
        if spec.kind.censored and np.any((self.v[cens] <= 0) | (self.v[cens] > 0.5)):
            raise InvariantViolationError("latent v of a censored zero outside (0, 0.5]")


@dataclass
class PriorSpec:
    """Independent normal priors on coefficients and on ``log psi``.

    ``informative`` maps a coefficient name (``"gamma_0"``, ``"delta_0"``)
    to its ``(mean, sd)``.  ``phi_bounds`` is the support of the uniform
    prior on the spatial decay.
    """

    coef_mean: float = 0.0
    coef_sd: float = 100.0
    informative: dict = field(default_factory=dict)
    log_psi_mean: float = 0.0
    log_psi_sd: float = 10.0
    phi_bounds: tuple | None = None

    def __post_init__(self):
        sds = [self.coef_sd, self.log_psi_sd] + [sd for _, sd in self.informative.values()]
        if not all(sd > 0 for sd in sds):
            raise SpecificationError("prior standard deviations must be positive")
        if self.phi_bounds is not None:
            lo, hi = map(float, self.phi_bounds)
            if not 0 < lo < hi:
                raise SpecificationError("phi bounds must satisfy 0 < lo < hi")
            self.phi_bounds = (lo, hi)

    def coef_moments(self, names) -> tuple[np.ndarray, np.ndarray]:
        mean = np.array([self.informative.get(k, (self.coef_mean, self.coef_sd))[0] for k in names])
        sd = np.array([self.informative.get(k, (self.coef_mean, self.coef_sd))[1] for k in names])
        return mean, sd


def normal_logpdf(x, mean, sd):
    z = (np.asarray(x, float) - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * LOG_2PI


def coef_names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}_{j}" for j in range(k)]


def linear_predictors(data: Dataset, theta: ParamState, spec: ModelSpec):
    """Per-site ``(pi, mu)`` from the three link regressions."""
    spec.check_data(data)
    kind = spec.kind
    if kind.spatial:
        if theta.effects is None or theta.effects.size != data.n:
            raise SpecificationError(f"model {kind.value} needs one spatial effect per site")
    if theta.delta.size != data.G.shape[1]:
        raise SpecificationError("delta length does not match the Beta design")
    eta = data.G @ theta.delta
    if kind is ModelKind.M2:
        eta = eta + theta.effects
    mu = link_logit_inv(eta)
    if kind is ModelKind.M0:
        return np.zeros(data.n), np.asarray(mu)
    if theta.gamma.size != data.X.shape[1]:
        raise SpecificationError("gamma length does not match the zero-inflation design")
    lin = data.X @ theta.gamma
    if kind is ModelKind.M3:
        lin = lin + theta.effects
    return np.asarray(link_logit_inv(lin)), np.asarray(mu)


def prob_zero(pi, p: BetaMS, spec: ModelSpec):
    """Total point mass at zero."""
    kind = spec.kind
    if kind is ModelKind.BEZI:
        return pi
    cens = beta_cdf(0.5, p)
    if kind is ModelKind.M0:
        return cens
    return pi + (1.0 - pi) * cens


def cond_z_one_prob(pi, p: BetaMS):
    """``P(Z = 1 | Y = 0)``: posterior probability that a zero is an unsuitability zero."""
    pi = np.asarray(pi, dtype=float)
    num = pi
    den = pi + (1.0 - pi) * np.asarray(beta_cdf(0.5, p))
    if np.any(~(den > 1e-300)):
        raise DegenerateConditionalError("zero observation has vanishing probability under both sources")
    out = num / den
    return float(out) if out.ndim == 0 else out


def _log1m(pi):
    return np.log1p(-pi)


def complete_loglik(data: Dataset, lat: LatentState, theta: ParamState, spec: ModelSpec) -> float:
    """Log likelihood of the augmented data ``(y, z, v)``."""
    lat.check(data, spec)
    pi, mu = linear_predictors(data, theta, spec)
    a = mu * theta.psi
    b = (1.0 - mu) * theta.psi
    zero = data.zero
    pos = ~zero
    kind = spec.kind
    total = 0.0
    if kind is ModelKind.BEZI:
        total += np.sum(np.log(pi[zero])) + np.sum(_log1m(pi[pos]))
        v = data.y[pos]
        total += np.sum(gammaln(a[pos] + b[pos]) - gammaln(a[pos]) - gammaln(b[pos])
                        + (a[pos] - 1) * np.log(v) + (b[pos] - 1) * np.log1p(-v))
        return float(total)
    z1 = lat.z == 1
    live = ~z1
    if kind.inflated:
        total += np.sum(np.log(pi[z1])) + np.sum(_log1m(pi[live]))
    v = lat.v[live]
    total += np.sum(gammaln(a[live] + b[live]) - gammaln(a[live]) - gammaln(b[live])
                    + (a[live] - 1) * np.log(v) + (b[live] - 1) * np.log1p(-v))
    # positives are densities of Y = 2V - 1, not of V
    total -= LOG2 * np.count_nonzero(pos)
    return float(total)


def marginal_loglik_obs(y, pi, p: BetaMS, spec: ModelSpec):
    """Observed-data log likelihood of each ``y`` (zeros use the total mass)."""
    y = np.asarray(y, dtype=float)
    pi = np.broadcast_to(np.asarray(pi, dtype=float), y.shape)
    mu = np.broadcast_to(np.asarray(p.mu, dtype=float), y.shape)
    psi = np.broadcast_to(np.asarray(p.psi, dtype=float), y.shape)
    kind = spec.kind
    out = np.empty(y.shape)
    zero = y == 0
    pos = ~zero
    if np.any(zero):
        pz = prob_zero(pi[zero], BetaMS(mu[zero], psi[zero]), spec)
        with np.errstate(divide="ignore"):
            out[zero] = np.log(pz)
    if np.any(pos):
        pp = BetaMS(mu[pos], psi[pos])
        if kind is ModelKind.BEZI:
            dens = beta_log_density(y[pos], pp)
        else:
            dens = extended_beta_log_density(y[pos], pp)
        pi_pos = np.zeros(np.count_nonzero(pos)) if kind is ModelKind.M0 else pi[pos]
        out[pos] = np.log1p(-pi_pos) + dens
    return float(out) if out.ndim == 0 else out


def log_prior(theta: ParamState, priors: PriorSpec, spec: ModelSpec | None = None) -> float:
    """Normal log priors on coefficients and ``log psi``; uniform on ``phi``."""
    total = 0.0
    if spec is None or spec.kind.has_gamma:
        names = coef_names("gamma", theta.gamma.size)
        m, s = priors.coef_moments(names)
        total += float(np.sum(normal_logpdf(theta.gamma, m, s)))
    names = coef_names("delta", theta.delta.size)
    m, s = priors.coef_moments(names)
    total += float(np.sum(normal_logpdf(theta.delta, m, s)))
    total += float(normal_logpdf(np.log(theta.psi), priors.log_psi_mean, priors.log_psi_sd))
    if theta.phi is not None and priors.phi_bounds is not None:
        lo, hi = priors.phi_bounds
        if not lo < theta.phi < hi:
            return -np.inf
        total -= np.log(hi - lo)
    return total


def censor_mass(a, b):
    """``P(V <= 1/2)`` for shape arrays, via the fast kernel."""
    return _kernels.betainc(a, b, np.full(np.shape(a), 0.5))
