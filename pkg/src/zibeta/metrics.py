"""Predictive distributions at new sites and the scores used to compare models.

The predictive law at a site mixes the conditional laws of the retained
posterior draws (a Rao-Blackwellized CDF).  It has a point mass ``p0`` at
zero and a continuous part on (0, 1).

Two readings of the full-distribution CRPS are available:

``"standard"``
    ``int_0^1 (F(x) - 1(y <= x))^2 dx`` for the mixed CDF ``F`` of ``Y``.
``"paper"``
    ``p0^2 + int_0^1 (F(x) - 1(y < x))^2 dx`` for ``y > 0`` and
    ``(1 - p0)^2 + int_{-1}^0 (1 - F_lat(x))^2 dx`` for ``y = 0``, where
    ``F_lat`` is the CDF of the latent ``W`` with unsuitability mass placed
    at -1.  The lower branch diverges for the CDF of ``Y`` itself, hence the
    latent-scale reading.

Integrals are estimated by Monte Carlo with uniform abscissae, as in
``mc_integrate``, and reported with their standard errors.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import IntegrationError, MetricUndefinedError, ScoringError, SpecificationError
from .model import ModelKind, ModelSpec, ParamState
from .spatial import gp_conditional_marginals

CRPS_MODES = ("standard", "paper")
DEFAULT_MC = 10_000


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


@dataclass
class PredictiveDist:
    """Posterior predictive laws at ``m`` sites from ``D`` posterior draws.

    Parameters
    ----------
    pi, mu : array, shape (D, m)
        Unsuitability probabilities and Beta means per draw and site.
    psi : array, shape (D,) or (D, m)
        Beta sample sizes.
    kind : ModelKind
        Decides whether zeros come from censoring (``m0``-``m3``) or only
        from the hurdle (``bezi``).
    """

    pi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    kind: ModelKind = ModelKind.M1
    _cens: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        self.pi = np.broadcast_to(np.asarray(self.pi, dtype=float), self.mu.shape).copy()
        psi = np.asarray(self.psi, dtype=float)
        if psi.ndim <= 1:
            psi = np.broadcast_to(psi.reshape(-1, 1), self.mu.shape)
        self.psi = np.broadcast_to(psi, self.mu.shape).copy()
        if self.mu.shape[0] == 0 or self.mu.shape[1] == 0:
            raise ScoringError("predictive distribution needs at least one draw and one site")
        if not (np.all((self.mu > 0) & (self.mu < 1)) and np.all((self.pi >= 0) & (self.pi < 1))
                and np.all(self.psi > 0)):
            raise ScoringError("predictive draws have parameters outside their domains")
        if self.kind is ModelKind.M0:
            self.pi[:] = 0.0

    @property
    def n_draws(self) -> int:
        return self.mu.shape[0]

    @property
    def n_sites(self) -> int:
        return self.mu.shape[1]

    @property
    def a(self):
        return self.mu * self.psi

    @property
    def b(self):
        return (1.0 - self.mu) * self.psi

    def site(self, i: int) -> "PredictiveDist":
        return PredictiveDist(self.pi[:, [i]], self.mu[:, [i]], self.psi[:, [i]], self.kind)

    def _censor(self):
        """``P(V <= 1/2)`` per draw and site (zero for the hurdle)."""
        if self._cens is None:
            if self.kind is ModelKind.BEZI:
                self._cens = np.zeros(self.mu.shape)
            else:
                self._cens = _kernels.betainc(self.a, self.b, np.full(self.mu.shape, 0.5))
        return self._cens

    def p0(self) -> np.ndarray:
        """Point mass at zero per site."""
        return np.mean(self.pi + (1.0 - self.pi) * self._censor(), axis=0)

    def positive_mass(self) -> np.ndarray:
        return np.mean((1.0 - self.pi) * (1.0 - self._censor()), axis=0)

    def source_score(self) -> np.ndarray:
        """``P(unsuitable | Y = 0)`` per site, mixed over draws."""
        p0 = self.p0()
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(p0 > 0, np.mean(self.pi, axis=0) / p0, 0.0)

    def _site_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return np.full((self.n_sites, 1), float(x))
        if x.ndim == 1:
            return np.broadcast_to(x, (self.n_sites, x.size))
        if x.shape[0] != self.n_sites:
            raise ScoringError("abscissae must have one row per site")
        return x

    def sub_cdf(self, x) -> np.ndarray:
        """``P(0 < Y <= x)`` per site for ``x`` in [0, 1].

        ``x`` may be a scalar, a vector shared by all sites, or one row per
        site (shape ``(m, k)``).  Returns shape ``(m, k)``.
        """
        x = np.clip(self._site_x(x), 0.0, 1.0)
        out = np.empty(x.shape)
        a, b, D = self.a, self.b, self.n_draws
        w = (1.0 - self.pi) / D
        base = np.sum(w * self._censor(), axis=0)
        for i in range(self.n_sites):
            t = x[i] if self.kind is ModelKind.BEZI else (x[i] + 1.0) / 2.0
            out[i] = _kernels.mixture_cdf(t, a[:, i], b[:, i], w[:, i]) - base[i]
        return np.clip(out, 0.0, None)

    def cdf(self, x) -> np.ndarray:
        """Mixed CDF of ``Y``: 0 below zero, ``p0 + sub_cdf`` on [0, 1]."""
        xs = self._site_x(x)
        val = self.p0()[:, None] + self.sub_cdf(xs)
        return np.where(xs < 0, 0.0, np.where(xs >= 1, 1.0, np.minimum(val, 1.0)))

    def positive_cdf(self, x) -> np.ndarray:
        """CDF of ``Y`` given ``Y > 0``."""
        pm = self.positive_mass()
        if np.any(~(pm > 0)):
            raise ScoringError("predictive has no positive mass")
        return np.minimum(self.sub_cdf(x) / pm[:, None], 1.0)

    def latent_cdf(self, x) -> np.ndarray:
        """CDF of the latent ``W`` on [-1, 0] with unsuitability mass at -1.

        The hurdle has no latent scale; its ``F_lat`` is taken as ``p0``.
        """
        x = np.clip(self._site_x(x), -1.0, 0.0)
        if self.kind is ModelKind.BEZI:
            return np.broadcast_to(self.p0()[:, None], x.shape).copy()
        out = np.empty(x.shape)
        D = self.n_draws
        w = (1.0 - self.pi) / D
        unsuit = np.mean(self.pi, axis=0)
        for i in range(self.n_sites):
            out[i] = unsuit[i] + _kernels.mixture_cdf((x[i] + 1.0) / 2.0, self.a[:, i], self.b[:, i], w[:, i])
        return out

    def mean(self) -> np.ndarray:
        """Predictive mean of ``Y`` per site."""
        a, b = self.a, self.b
        if self.kind is ModelKind.BEZI:
            return np.mean((1.0 - self.pi) * self.mu, axis=0)
        half = np.full(a.shape, 0.5)
        # E[max(0, 2V - 1)] = 2 mu P(V' > 1/2) - P(V > 1/2), V' ~ Beta(a + 1, b)
        upper1 = 1.0 - _kernels.betainc(a + 1.0, b, half)
        upper0 = 1.0 - self._censor()
        return np.mean((1.0 - self.pi) * (2.0 * self.mu * upper1 - upper0), axis=0)

    def quantile(self, q, tol=1e-10) -> np.ndarray:
        """Quantiles by bisection on the mixed CDF; ``q <= p0`` maps to 0."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any((q < 0) | (q > 1)):
            raise ScoringError("quantile levels must lie in [0, 1]")
        p0 = self.p0()
        out = np.zeros((self.n_sites, q.size))
        for i in range(self.n_sites):
            s = self.site(i)
            for k, qk in enumerate(q):
                if qk <= p0[i]:
                    continue
                lo, hi = 0.0, 1.0
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if s.cdf(mid)[0, 0] < qk:
                        lo = mid
                    else:
                        hi = mid
                out[i, k] = hi
        return out

    def ensemble(self, rng=None, per_draw: int = 1) -> np.ndarray:
        """Posterior predictive draws, shape ``(D * per_draw, m)``, with exact zeros."""
        rng = _rng(rng)
        a = np.repeat(self.a, per_draw, axis=0)
        b = np.repeat(self.b, per_draw, axis=0)
        pi = np.repeat(self.pi, per_draw, axis=0)
        x = rng.standard_gamma(a)
        v = x / (x + rng.standard_gamma(b))
        v = np.nan_to_num(v, nan=0.0)
        z = rng.uniform(size=a.shape) < pi
        y = v if self.kind is ModelKind.BEZI else np.maximum(0.0, 2.0 * v - 1.0)
        return np.where(z, 0.0, y)


def plugin_predictive(theta: ParamState, X, G, kind, effects=None) -> PredictiveDist:
    """Single-draw predictive at fixed parameters."""
    kind = ModelKind(kind)
    X = np.atleast_2d(X)
    G = np.atleast_2d(G)
    lin_mu = G @ theta.delta
    lin_pi = X @ theta.gamma if kind.has_gamma else np.zeros(G.shape[0])
    if effects is not None:
        if kind is ModelKind.M2:
            lin_mu = lin_mu + effects
        elif kind is ModelKind.M3:
            lin_pi = lin_pi + effects
    pi = np.zeros_like(lin_mu) if kind is ModelKind.M0 else _expit(lin_pi)
    return PredictiveDist(pi[None, :], _expit(lin_mu)[None, :], np.array([theta.psi]), kind)


def _expit(x):
    return np.clip(0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, float))), 1e-12, 1 - 1e-12)


def predictive_at_sites(chain, new_X, new_G, new_coords=None, spec: ModelSpec | None = None,
                        draws=None, rng=None) -> PredictiveDist:
    """Mix the per-draw conditional laws at new sites.

    Parameters
    ----------
    chain : ChainOutput
    new_X, new_G : array
        Designs at the new sites, with the same columns as the fitted chain.
    new_coords : array, optional
        Required for spatial chains; GP effects at new sites are drawn from
        their conditional marginals given each draw's training effects.
    draws : int or array of int, optional
        Subset of retained draws to use (an int selects evenly spaced rows).
    """
    kind = ModelKind(chain.kind if spec is None else spec.kind)
    rng = _rng(rng)
    new_X = np.atleast_2d(np.asarray(new_X, dtype=float))
    new_G = np.atleast_2d(np.asarray(new_G, dtype=float))
    n_gamma = sum(c.startswith("gamma_") for c in chain.columns)
    n_delta = sum(c.startswith("delta_") for c in chain.columns)
    if new_G.shape[1] != n_delta or (kind.has_gamma and new_X.shape[1] != n_gamma):
        raise SpecificationError("new-site design columns do not match the fitted chain")
    if kind.spatial and new_coords is None:
        raise SpecificationError(f"model {kind.value} needs coordinates for prediction")
    if not kind.spatial and new_coords is not None:
        warnings.warn("coordinates ignored for a non-spatial model", stacklevel=2)
    S = chain.n_samples
    if draws is None:
        idx = np.arange(S)
    elif np.isscalar(draws):
        idx = np.unique(np.linspace(0, S - 1, min(int(draws), S)).round().astype(int))
    else:
        idx = np.asarray(draws, dtype=int)
    m = new_G.shape[0]
    pi = np.zeros((idx.size, m))
    mu = np.empty((idx.size, m))
    psi = np.empty(idx.size)
    for r, j in enumerate(idx):
        theta = chain.param_state(j)
        eff = None
        if kind.spatial:
            mean, var = gp_conditional_marginals(chain.train_coords, theta.effects, new_coords, theta.phi)
            eff = mean + np.sqrt(var) * rng.standard_normal(m)
        p = plugin_predictive(theta, new_X, new_G, kind, eff)
        pi[r], mu[r], psi[r] = p.pi[0], p.mu[0], theta.psi
    return PredictiveDist(pi, mu, psi, kind)


# --------------------------------------------------------------------------
# integration and scores
# --------------------------------------------------------------------------


def mc_integrate(f, a: float, b: float, n_samples: int = DEFAULT_MC, rng=None):
    """Plain Monte Carlo: ``(b - a) * mean f(U)``, ``U ~ Uniform(a, b)``.

    Returns ``(estimate, standard_error)``.  ``f`` receives the whole vector
    of abscissae.
    """
    if not a < b:
        raise IntegrationError("integration bounds must satisfy a < b")
    if n_samples < 1:
        raise IntegrationError("need at least one Monte Carlo sample")
    x = _rng(rng).uniform(a, b, size=n_samples)
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("integrand returned non-finite values")
    width = b - a
    se = width * vals.std(ddof=1) / np.sqrt(n_samples) if n_samples > 1 else 0.0
    return width * float(vals.mean()), float(se)


def crps_branch(pred: PredictiveDist, y: float, mode: str = "standard"):
    """Pieces of the full CRPS at one site: ``(offset, integrand, lo, hi)``.

    The score is ``offset + int_lo^hi integrand(x) dx``.  Exposed so the
    Monte Carlo estimate can be checked against deterministic quadrature.
    """
    if mode not in CRPS_MODES:
        raise ScoringError(f"unknown CRPS mode {mode!r}; expected one of {CRPS_MODES}")
    if pred.n_sites != 1:
        raise ScoringError("crps_branch works on a single-site predictive")
    if not 0 <= y < 1:
        raise ScoringError("observation must lie in [0, 1)")
    p0 = float(pred.p0()[0])
    if mode == "standard":
        return 0.0, (lambda x: (pred.cdf(x)[0] - (y <= x)) ** 2), 0.0, 1.0
    if y > 0:
        return p0 ** 2, (lambda x: (pred.cdf(x)[0] - (y < x)) ** 2), 0.0, 1.0
    return (1.0 - p0) ** 2, (lambda x: (1.0 - pred.latent_cdf(x)[0]) ** 2), -1.0, 0.0


def _vector(y):
    y = np.asarray(y, dtype=float)
    return y.ndim == 0, np.atleast_1d(y)


def crps_full(pred: PredictiveDist, y, n_samples: int = DEFAULT_MC, rng=None, mode: str = "standard",
              return_se: bool = False):
    """CRPS of the full mixed predictive, one value per site.

    ``mode`` selects the reading documented in the module docstring.
    """
    scalar, ys = _vector(y)
    if ys.size != pred.n_sites:
        raise ScoringError("need one observation per predictive site")
    rng = _rng(rng)
    vals = np.empty(ys.size)
    ses = np.empty(ys.size)
    for i, yi in enumerate(ys):
        off, f, lo, hi = crps_branch(pred.site(i), float(yi), mode)
        v, se = mc_integrate(f, lo, hi, n_samples, rng)
        vals[i], ses[i] = off + v, se
    if scalar:
        vals, ses = float(vals[0]), float(ses[0])
    return (vals, ses) if return_se else vals


def crps_hurdle(pred: PredictiveDist, y, n_samples: int = DEFAULT_MC, rng=None, return_se: bool = False):
    """CRPS of the positive-part predictive ``F(x | Y > 0)`` at positive ``y``."""
    scalar, ys = _vector(y)
    if ys.size != pred.n_sites:
        raise ScoringError("need one observation per predictive site")
    if np.any(~((ys > 0) & (ys < 1))):
        raise ScoringError("hurdle CRPS is defined for positive observations only")
    rng = _rng(rng)
    vals = np.empty(ys.size)
    ses = np.empty(ys.size)
    for i, yi in enumerate(ys):
        s = pred.site(i)
        vals[i], ses[i] = mc_integrate(lambda x: (s.positive_cdf(x)[0] - (yi <= x)) ** 2, 0.0, 1.0, n_samples, rng)
    if scalar:
        vals, ses = float(vals[0]), float(ses[0])
    return (vals, ses) if return_se else vals


def crps_sample_oracle(ensemble, y: float, return_se: bool = False):
    """Ensemble CRPS ``mean|X - y| - mean|X - X'| / 2`` (all pairs, ties included).

    The standard error uses the first-order (Hajek) projection of the pair
    term.
    """
    x = np.sort(np.asarray(ensemble, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise ScoringError("ensemble CRPS needs at least two draws")
    k = np.arange(n)
    csum = np.cumsum(x)
    total = csum[-1]
    # mean_j |x_i - x_j| for each i, from order statistics
    below = k * x - (csum - x)
    above = (total - csum) - (n - 1 - k) * x
    pair_mean = (below + above) / n
    term1 = np.abs(x - y)
    val = float(term1.mean() - 0.5 * pair_mean.mean())
    if not return_se:
        return val
    h = term1 - pair_mean
    return val, float(h.std(ddof=1) / np.sqrt(n))


def _two_class(labels):
    labels = np.asarray(labels).astype(bool).ravel()
    if labels.all() or not labels.any():
        raise MetricUndefinedError("metric needs both classes present")
    return labels


def tjur_r2(fitted_probs, labels) -> float:
    """Coefficient of discrimination: mean fitted probability of successes minus failures."""
    p = np.asarray(fitted_probs, dtype=float).ravel()
    lab = _two_class(labels)
    if p.size != lab.size:
        raise ScoringError("probabilities and labels differ in length")
    return float(p[lab].mean() - p[~lab].mean())


def roc_auc(scores, labels):
    """ROC curve over unique score thresholds and its trapezoidal area.

    Tied scores move along a diagonal segment, so the area equals the
    Mann-Whitney statistic with ties counted one half.

    Returns
    -------
    curve : array, shape (k, 2)
        ``(fpr, tpr)`` pairs from (0, 0) to (1, 1).
    auc : float
    """
    s = np.asarray(scores, dtype=float).ravel()
    lab = _two_class(labels)
    if s.size != lab.size:
        raise ScoringError("scores and labels differ in length")
    order = np.argsort(-s, kind="mergesort")
    s, lab = s[order], lab[order]
    tp = np.cumsum(lab)
    fp = np.cumsum(~lab)
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tpr = np.r_[0.0, tp[last] / tp[-1]]
    fpr = np.r_[0.0, fp[last] / fp[-1]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return np.column_stack([fpr, tpr]), auc


@dataclass
class ScoreReport:
    y: np.ndarray
    p0: np.ndarray
    crps_f_obs: np.ndarray
    crps_f_paper_obs: np.ndarray
    crps_h_obs: np.ndarray
    r2: float
    auc: float
    source_auc: float | None = None
    kind: str = ""

    @property
    def n_zero(self) -> int:
        return int(np.sum(self.y == 0))

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.y > 0))

    @property
    def crps_f(self) -> float:
        return float(np.mean(self.crps_f_obs))

    @property
    def crps_f_paper(self) -> float:
        return float(np.mean(self.crps_f_paper_obs))

    @property
    def crps_h(self) -> float:
        return float(np.nanmean(self.crps_h_obs))

    def summary(self) -> dict:
        return dict(model=self.kind, crps_f=self.crps_f, crps_f_paper=self.crps_f_paper, crps_h=self.crps_h,
                    r2=self.r2, auc=self.auc, source_auc=self.source_auc,
                    n_zero=self.n_zero, n_pos=self.n_pos)


def score_report(pred: PredictiveDist, y, source_unsuitable=None, n_samples: int = DEFAULT_MC,
                 rng=None) -> ScoreReport:
    """All comparison metrics on a test set.

    ``source_unsuitable`` (true labels of the zero sources, any length-``m``
    boolean array) enables the source-of-zero AUC over the test zeros.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != pred.n_sites:
        raise ScoringError("need one observation per predictive site")
    rng = _rng(rng)
    zero = y == 0
    pos = ~zero
    if not pos.any():
        raise MetricUndefinedError("no positive test observations for CRPS_h")
    p0 = pred.p0()
    crps_std = np.empty(y.size)
    crps_pap = np.empty(y.size)
    crps_h = np.full(y.size, np.nan)
    for i in range(y.size):
        s = pred.site(i)
        yi = float(y[i])
        # common abscissae for both readings; on (0, 1) they differ only by p0^2
        x = rng.uniform(0.0, 1.0, size=n_samples)
        F = s.cdf(x)[0]
        crps_std[i] = np.mean((F - (yi <= x)) ** 2)
        if yi > 0:
            crps_pap[i] = p0[i] ** 2 + crps_std[i]
            crps_h[i] = np.mean((np.minimum((F - p0[i]) / s.positive_mass()[0], 1.0) - (yi <= x)) ** 2)
        else:
            crps_pap[i] = (1.0 - p0[i]) ** 2 + np.mean((1.0 - s.latent_cdf(x - 1.0)[0]) ** 2)
    _, auc = roc_auc(p0, zero)
    src = None
    if source_unsuitable is not None:
        lab = np.asarray(source_unsuitable, dtype=bool).ravel()[zero]
        if lab.any() and not lab.all():
            _, src = roc_auc(pred.source_score()[zero], lab)
    return ScoreReport(y, p0, crps_std, crps_pap, crps_h, tjur_r2(p0, zero), auc, src, pred.kind.value)
