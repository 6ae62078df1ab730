"""Posterior simulation by a Gibbs sweep over latents and parameter blocks.

One sweep, in order:

1. latent sources ``Z`` and censored draws ``V`` for the zero observations;
2. random-walk Metropolis on ``gamma``, ``delta`` and ``log psi`` (one
   block each, diagonal Gaussian proposals);
3. spatial variants only: an elliptical slice update of the GP effects and
   a log-scale random-walk Metropolis step on the decay ``phi``.

Proposal scales adapt during burn-in (Robbins-Monro on acceptance, with
the block shape taken from the burn-in draws) and are frozen afterwards.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .betadist import truncated_ppf
from .errors import (
    DegenerateConditionalError,
    SamplerStateError,
    SpecificationError,
    SummaryError,
)
from .model import (
    V_PLACEHOLDER,
    Dataset,
    LatentState,
    ModelKind,
    ModelSpec,
    ParamState,
    PriorSpec,
    coef_names,
    normal_logpdf,
)
from .spatial import GPFactor, chol_jitter, default_phi_bounds, distance_matrix, exp_covariance

log = logging.getLogger(__name__)

_LINK_EPS = 1e-12


def _expit(x):
    return np.clip(0.5 * (1.0 + np.tanh(0.5 * x)), _LINK_EPS, 1.0 - _LINK_EPS)


@dataclass
class SamplerConfig:
    iterations: int = 7500
    burn_in: int = 2500
    thin: int = 5
    seed: int = 0
    init_scale: float = 0.1
    phi_scale: float = 0.3
    adapt_window: int = 100
    target_accept: float = 0.3
    adapt: bool = True
    proposal_scales: dict = field(default_factory=dict)
    phi_update: str = "whitened"
    init_phi: float | None = None

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise SpecificationError("burn-in must be non-negative and smaller than iterations")
        if self.thin < 1:
            raise SpecificationError("thin must be at least 1")
        if self.init_scale <= 0 or self.phi_scale <= 0:
            raise SpecificationError("proposal scales must be positive")
        if self.adapt_window < 1:
            raise SpecificationError("adaptation window must be at least 1 sweep")
        if self.phi_update not in ("whitened", "centered"):
            raise SpecificationError("phi_update must be 'whitened' or 'centered'")
        if self.init_phi is not None and not self.init_phi > 0:
            raise SpecificationError("init_phi must be positive")

    @property
    def n_keep(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainOutput:
    kind: ModelKind
    columns: list
    samples: np.ndarray
    z_draws: np.ndarray
    zero_index: np.ndarray
    acceptance: dict
    seed: int
    config: SamplerConfig
    x_names: tuple = ()
    g_names: tuple = ()
    train_coords: np.ndarray | None = None
    scales: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise SpecificationError("chain column names must be unique")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.columns.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        idx = [i for i, c in enumerate(self.columns) if c.rsplit("_", 1)[0] == prefix]
        return self.samples[:, idx]

    def param_state(self, j: int) -> ParamState:
        kind = ModelKind(self.kind)
        row = self.samples[j]
        col = {c: i for i, c in enumerate(self.columns)}
        gamma = self.block("gamma")[j] if kind.has_gamma else np.zeros(0)
        effects = self.block(kind.effect_name)[j] if kind.spatial else None
        phi = row[col["phi"]] if "phi" in col else None
        return ParamState(gamma, self.block("delta")[j], np.exp(row[col["log_psi"]]), effects, phi)


@dataclass
class PosteriorSummary:
    names: list
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def rows(self):
        for k, name in enumerate(self.names):
            yield name, self.mean[k], self.lower[k], self.upper[k]

    def __getitem__(self, name):
        k = self.names.index(name)
        return self.mean[k], self.lower[k], self.upper[k]

    def covers(self, name, value) -> bool:
        _, lo, hi = self[name]
        return lo <= value <= hi


# --------------------------------------------------------------------------
# transition kernels
# --------------------------------------------------------------------------


def metropolis_block(rng, current, logpost, scale, lp_current=None):
    """One Gaussian random-walk Metropolis step on a parameter block.

    Returns ``(new_block, accepted)``.
    """
    current = np.asarray(current, dtype=float)
    if lp_current is None:
        lp_current = logpost(current)
    if not np.isfinite(lp_current):
        raise SamplerStateError("log posterior is not finite at the current state")
    prop = current + np.asarray(scale) * rng.standard_normal(current.shape)
    lp_prop = logpost(prop)
    if np.isnan(lp_prop):
        lp_prop = -np.inf
    if math.log(rng.uniform()) < lp_prop - lp_current:
        return prop, True
    return current, False


def elliptical_slice(rng, effects, F: GPFactor, loglik, cur_loglik=None, max_shrink=10_000):
    """One elliptical slice update for effects with prior ``N(0, L L^T)``."""
    f = np.asarray(effects, dtype=float)
    nu = F.L @ rng.standard_normal(f.size)
    ll0 = loglik(f) if cur_loglik is None else cur_loglik
    if np.isnan(ll0):
        raise SamplerStateError("effect log likelihood is NaN")
    threshold = ll0 + math.log(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = theta - 2.0 * math.pi, theta
    for _ in range(max_shrink):
        prop = f * math.cos(theta) + nu * math.sin(theta)
        ll = loglik(prop)
        if np.isnan(ll):
            raise SamplerStateError("effect log likelihood is NaN")
        if ll > threshold:
            return prop
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = rng.uniform(lo, hi)
    return f


def update_phi(rng, phi, bounds, logpost_phi, scale, lp_current=None):
    """Log-scale random-walk Metropolis for ``phi`` under a uniform prior."""
    lo, hi = bounds
    if lp_current is None:
        lp_current = logpost_phi(phi)
    prop = phi * math.exp(scale * rng.standard_normal())
    if not lo < prop < hi:
        return phi, False
    lp_prop = logpost_phi(prop)
    # walking on log phi: Jacobian phi'/phi
    log_ratio = lp_prop - lp_current + math.log(prop) - math.log(phi)
    if math.log(rng.uniform()) < log_ratio:
        return prop, True
    return phi, False


def update_latents(rng, data: Dataset, theta: ParamState, spec: ModelSpec, lat: LatentState,
                   pi=None, mu=None) -> LatentState:
    """Redraw ``Z`` (inflated models) and censored ``V`` for every zero observation."""
    kind = spec.kind
    if not kind.censored:
        return lat
    if pi is None or mu is None:
        from .model import linear_predictors

        pi, mu = linear_predictors(data, theta, spec)
    zi = np.flatnonzero(data.zero)
    out = lat.copy()
    if zi.size == 0:
        return out
    a = mu[zi] * theta.psi
    b = (1.0 - mu[zi]) * theta.psi
    cens = _kernels.betainc(a, b, np.full(zi.size, 0.5))
    if kind.inflated:
        p = pi[zi]
        den = p + (1.0 - p) * cens
        if np.any(~(den > 1e-300)):
            raise DegenerateConditionalError("zero observation has vanishing probability under both sources")
        z = (rng.uniform(size=zi.size) < p / den).astype(np.int8)
    else:
        z = np.zeros(zi.size, dtype=np.int8)
    u = rng.uniform(size=zi.size)
    c = z == 0
    v = np.full(zi.size, V_PLACEHOLDER)
    if c.any():
        v[c] = truncated_ppf(a[c], b[c], 0.0, 0.5, u[c])
    out.z[zi] = z
    out.v[zi] = v
    return out


# --------------------------------------------------------------------------
# the chain
# --------------------------------------------------------------------------


def _column_names(data: Dataset, kind: ModelKind) -> list:
    cols = []
    if kind.has_gamma:
        cols += coef_names("gamma", data.X.shape[1])
    cols += coef_names("delta", data.G.shape[1])
    cols += ["log_psi", "psi"]
    if kind.spatial:
        cols += ["phi"] + [f"{kind.effect_name}_{i}" for i in range(data.n)]
    return cols


class _Adapter:
    """Burn-in scale tuning for one block."""

    def __init__(self, scale, window, target):
        self.shape = np.asarray(scale, dtype=float).copy()
        self.log_mult = 0.0
        self.window = window
        self.target = target
        self.k = 0
        self.acc = 0
        self.tries = 0
        self.history = []

    @property
    def scale(self):
        return math.exp(self.log_mult) * self.shape

    def record(self, accepted, value=None):
        self.acc += int(accepted)
        self.tries += 1
        if value is not None:
            self.history.append(np.array(value, dtype=float, copy=True))

    def end_window(self):
        self.k += 1
        rate = self.acc / max(self.tries, 1)
        self.log_mult += (rate - self.target) * 2.0 / math.sqrt(self.k)
        if len(self.history) >= 2 * self.window and self.shape.size > 1:
            h = np.asarray(self.history[len(self.history) // 2:])
            sd = h.std(axis=0)
            if np.all(sd > 0):
                # keep the overall magnitude, borrow the relative shape
                ref = math.exp(np.mean(np.log(self.shape)))
                self.shape = sd / math.exp(np.mean(np.log(sd))) * ref
        self.acc = 0
        self.tries = 0


def run_chain(data: Dataset, spec: ModelSpec, priors: PriorSpec | None = None,
              config: SamplerConfig | None = None, rng: np.random.Generator | None = None) -> ChainOutput:
    """Run one chain; burn-in is discarded before thinning."""
    priors = priors or PriorSpec()
    config = config or SamplerConfig()
    spec.check_data(data)
    kind = spec.kind
    if rng is None:
        rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()

    X, G, y = data.X, data.G, data.y
    n = data.n
    zero = data.zero
    zi = np.flatnonzero(zero)
    pos = ~zero

    g_names = coef_names("gamma", X.shape[1])
    d_names = coef_names("delta", G.shape[1])
    for name in priors.informative:
        if name not in g_names + d_names:
            raise SpecificationError(f"informative prior on unknown coefficient {name!r}")
    g_mean, g_sd = priors.coef_moments(g_names)
    d_mean, d_sd = priors.coef_moments(d_names)

    gamma = g_mean.copy() if kind.has_gamma else np.zeros(0)
    delta = d_mean.copy()
    log_psi = 0.0
    lat = LatentState.initial(data)
    if kind is ModelKind.BEZI:
        v_base = y.copy()
        z = zero.astype(np.int8)
        live = pos
    else:
        v_base = lat.v
        z = lat.z
        live = z == 0

    effects = np.zeros(n) if kind.spatial else None
    phi = None
    factor = None
    if kind.spatial:
        D = distance_matrix(data.coords)
        bounds = priors.phi_bounds or default_phi_bounds(data.coords)
        phi = config.init_phi or math.sqrt(bounds[0] * bounds[1])
        if not bounds[0] < phi < bounds[1]:
            raise SpecificationError("initial phi lies outside its prior bounds")
        factor = chol_jitter(exp_covariance(D, phi))
        gp_cache = {phi: factor}

    w = config.adapt_window
    ps = config.proposal_scales
    adapters = {}
    if kind.has_gamma:
        adapters["gamma"] = _Adapter(ps.get("gamma", np.full(gamma.size, config.init_scale)), w, config.target_accept)
    adapters["delta"] = _Adapter(ps.get("delta", np.full(delta.size, config.init_scale)), w, config.target_accept)
    adapters["log_psi"] = _Adapter(ps.get("log_psi", [config.init_scale]), w, config.target_accept)
    if kind.spatial:
        adapters["phi"] = _Adapter(ps.get("phi", [config.phi_scale]), w, config.target_accept)

    # -- conditional log densities --------------------------------------
    def pi_of(g, tau=None):
        lin = X @ g
        if tau is not None:
            lin = lin + tau
        return _expit(lin)

    def mu_of(d, eta=None):
        lin = G @ d
        if eta is not None:
            lin = lin + eta
        return _expit(lin)

    def bern_ll(pi):
        return float(np.sum(np.where(z == 1, np.log(pi), np.log1p(-pi))))

    def beta_ll(mu, lpsi):
        return _kernels.beta_logpdf_sum(v_base[live], mu[live], math.exp(lpsi))

    tau_eff = lambda: effects if kind is ModelKind.M3 else None  # noqa: E731
    eta_eff = lambda: effects if kind is ModelKind.M2 else None  # noqa: E731

    def lp_gamma(g):
        return bern_ll(pi_of(g, tau_eff())) + float(np.sum(normal_logpdf(g, g_mean, g_sd)))

    def lp_delta(d):
        return beta_ll(mu_of(d, eta_eff()), log_psi) + float(np.sum(normal_logpdf(d, d_mean, d_sd)))

    def lp_log_psi(lp):
        return beta_ll(mu_cur, lp[0]) + float(normal_logpdf(lp[0], priors.log_psi_mean, priors.log_psi_sd))

    def effect_ll(e):
        if kind is ModelKind.M2:
            return _kernels.beta_logpdf_sum(v_base[live], _expit(G @ delta + e)[live], math.exp(log_psi))
        return bern_ll(_expit(X @ gamma + e))

    def factor_at(ph):
        f = gp_cache.get(ph)
        if f is None:
            f = chol_jitter(exp_covariance(D, ph))
            gp_cache[ph] = f
        return f

    def lp_phi(ph):
        # centered: effects fixed, only their GP density depends on phi
        return factor_at(ph).log_density(effects)

    def lp_phi_white(ph):
        # whitened: white noise fixed, effects move with the factor
        return effect_ll(factor_at(ph).L @ white)

    columns = _column_names(data, kind)
    n_keep = config.n_keep
    samples = np.empty((n_keep, len(columns)))
    z_draws = np.empty((n_keep, zi.size), dtype=np.int8)
    post_acc = {k: 0 for k in adapters}
    post_tries = 0
    keep = 0

    for it in range(config.iterations):
        burning = it < config.burn_in
        # 1. latents
        if kind.censored and zi.size:
            theta = ParamState(gamma, delta, math.exp(log_psi), effects, phi)
            pi_cur = pi_of(gamma, tau_eff()) if kind.inflated else np.zeros(n)
            mu_cur = mu_of(delta, eta_eff())
            lat = update_latents(rng, data, theta, spec, lat, pi_cur, mu_cur)
            v_base = lat.v
            z = lat.z
            live = z == 0
        # 2. coefficient blocks
        accepted = {}
        if kind.has_gamma:
            gamma, accepted["gamma"] = metropolis_block(rng, gamma, lp_gamma, adapters["gamma"].scale)
        delta, accepted["delta"] = metropolis_block(rng, delta, lp_delta, adapters["delta"].scale)
        mu_cur = mu_of(delta, eta_eff())
        new_lpsi, accepted["log_psi"] = metropolis_block(rng, np.array([log_psi]), lp_log_psi,
                                                         adapters["log_psi"].scale)
        log_psi = float(new_lpsi[0])
        # 3. spatial effects and decay
        if kind.spatial:
            effects = elliptical_slice(rng, effects, factor, effect_ll)
            gp_cache = {phi: factor}
            scale = float(adapters["phi"].scale[0])
            if config.phi_update == "whitened":
                white = factor.solve_lower(effects)
                phi_new, accepted["phi"] = update_phi(rng, phi, bounds, lp_phi_white, scale)
                if accepted["phi"]:
                    effects = gp_cache[phi_new].L @ white
            else:
                phi_new, accepted["phi"] = update_phi(rng, phi, bounds, lp_phi, scale)
            factor = gp_cache[phi_new]
            phi = phi_new

        values = {"gamma": gamma, "delta": delta, "log_psi": [log_psi], "phi": [phi]}
        if burning and config.adapt:
            for k, ad in adapters.items():
                ad.record(accepted[k], values[k])
            if (it + 1) % w == 0:
                for ad in adapters.values():
                    ad.end_window()
        elif not burning:
            post_tries += 1
            for k in adapters:
                post_acc[k] += int(accepted[k])
            if (it - config.burn_in + 1) % config.thin == 0 and keep < n_keep:
                row = []
                if kind.has_gamma:
                    row.extend(gamma)
                row.extend(delta)
                row.extend([log_psi, math.exp(log_psi)])
                if kind.spatial:
                    row.append(phi)
                    row.extend(effects)
                samples[keep] = row
                z_draws[keep] = z[zi] if kind.inflated else 0
                keep += 1

    acceptance = {k: post_acc[k] / max(post_tries, 1) for k in adapters}
    return ChainOutput(
        kind=kind, columns=columns, samples=samples, z_draws=z_draws, zero_index=zi,
        acceptance=acceptance, seed=config.seed, config=config,
        x_names=data.x_names, g_names=data.g_names,
        train_coords=None if data.coords is None else data.coords.copy(),
        scales={k: ad.scale.tolist() for k, ad in adapters.items()},
        elapsed=time.perf_counter() - t0,
    )


def _run_one(args):
    data, spec, priors, config = args
    return run_chain(data, spec, priors, config)


def run_chains(data, spec, priors=None, config=None, chains=1, jobs=1) -> list:
    """Independent chains seeded from one master seed, optionally in parallel."""
    config = config or SamplerConfig()
    seeds = np.random.SeedSequence(config.seed).generate_state(chains)
    configs = [replace(config, seed=int(s)) for s in seeds] if chains > 1 else [config]
    tasks = [(data, spec, priors, c) for c in configs]
    if jobs > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def concat_chains(chains: list) -> ChainOutput:
    if len(chains) == 1:
        return chains[0]
    first = chains[0]
    acc = {k: float(np.mean([c.acceptance[k] for c in chains])) for k in first.acceptance}
    return replace(
        first,
        samples=np.vstack([c.samples for c in chains]),
        z_draws=np.vstack([c.z_draws for c in chains]),
        acceptance=acc,
        elapsed=sum(c.elapsed for c in chains),
    )


def summarize(chain: ChainOutput, columns=None) -> PosteriorSummary:
    """Posterior means and 2.5 / 97.5 percentiles (linear interpolation)."""
    if chain.samples.shape[0] < 2:
        raise SummaryError("need at least two retained samples to summarize")
    names = list(chain.columns if columns is None else columns)
    idx = [chain.columns.index(c) for c in names]
    s = chain.samples[:, idx]
    lo, hi = np.percentile(s, [2.5, 97.5], axis=0)
    return PosteriorSummary(names, s.mean(axis=0), lo, hi)


def config_dict(config: SamplerConfig) -> dict:
    return asdict(config)
