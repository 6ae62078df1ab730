"""Synthetic data with known zero sources.

Each site draws ``Z ~ Bernoulli(pi)``; ``Z = 1`` gives an unsuitability
zero, otherwise ``V ~ Beta(mu, psi)``, ``W = 2V - 1`` and ``Y = max(0, W)``
(a censored zero when ``W <= 0``).  Spatial scenarios draw the effects from
the unit-variance exponential GP jointly over training and test sites.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import optimize

from . import _kernels
from .betadist import BetaMS, sample_beta
from .errors import SpecificationError
from .model import Dataset, LatentState, ModelKind, ModelSpec, ParamState, linear_predictors
from .spatial import chol_jitter, distance_matrix, exp_covariance, gp_prior_draw

POSITIVE, UNSUITABLE, CENSORED = 0, 1, 2
SOURCE_NAMES = ("positive", "zero-unsuitable", "zero-censored")


@dataclass
class ScenarioSpec:
    name: str
    truth: ParamState
    kind: ModelKind = ModelKind.M1
    n_train: int = 400
    n_test: int = 200
    region: tuple = (0.0, 50.0)
    seed: int = 0
    target_mix: tuple | None = None

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        if self.n_train < 1 or self.n_test < 1:
            raise SpecificationError("n_train and n_test must be at least 1")
        lo, hi = self.region
        if not hi > lo:
            raise SpecificationError("region side must be positive")
        if self.kind.spatial and self.truth.phi is None:
            raise SpecificationError(f"spatial scenario {self.name!r} needs a true phi")

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return replace(self, seed=int(seed))


@dataclass
class LabeledDataset:
    data: Dataset
    source: np.ndarray
    w: np.ndarray
    effects: np.ndarray | None = None
    pi: np.ndarray = field(default=None)
    mu: np.ndarray = field(default=None)

    def __post_init__(self):
        y = self.data.y
        s = self.source
        ok = np.where(s == UNSUITABLE, y == 0, True)
        ok &= np.where(s == CENSORED, (y == 0) & (self.w <= 0), True)
        # hurdle positives are Beta draws on (0, 1) and carry w = y
        ok &= np.where(s == POSITIVE, (y > 0) & (y == self.w), True)
        if not ok.all():
            raise SpecificationError("generated labels are inconsistent with responses")

    def zero_mix(self) -> tuple[float, float]:
        """Fractions of unsuitability and censored zeros."""
        return float(np.mean(self.source == UNSUITABLE)), float(np.mean(self.source == CENSORED))

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(
            self.data.subset(idx), self.source[idx], self.w[idx],
            None if self.effects is None else self.effects[idx],
            None if self.pi is None else self.pi[idx],
            None if self.mu is None else self.mu[idx],
        )


def _design(rng, n, k, prefix):
    cov = rng.standard_normal((n, k - 1))
    return np.column_stack([np.ones(n), cov]), ("intercept",) + tuple(f"{prefix}{j}" for j in range(1, k))


def generate(scenario: ScenarioSpec, model=None, rng=None):
    """Draw ``(train, test)`` labeled datasets for one scenario."""
    kind = ModelKind(model.kind if isinstance(model, ModelSpec) else (model or scenario.kind))
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    truth = scenario.truth
    if kind.spatial and truth.phi is None:
        raise SpecificationError("spatial model needs a true decay phi")
    n = scenario.n_train + scenario.n_test
    px = max(truth.gamma.size, 1)
    X, xn = _design(rng, n, px, "x_")
    G, gn = _design(rng, n, truth.delta.size, "g_")
    lo, hi = scenario.region
    coords = rng.uniform(lo, hi, size=(n, 2))
    effects = None
    if kind.spatial:
        F = chol_jitter(exp_covariance(distance_matrix(coords), truth.phi))
        effects = gp_prior_draw(rng, F)
    gamma = truth.gamma if truth.gamma.size else np.zeros(1)
    theta = ParamState(gamma, truth.delta, truth.psi, effects, truth.phi)
    # response placeholder; the real y is filled in below
    shell = Dataset(np.zeros(n), X, G, coords, xn, gn)
    pi, mu = linear_predictors(shell, theta, ModelSpec(kind))
    z = rng.uniform(size=n) < pi
    v = np.asarray(sample_beta(rng, BetaMS(mu, truth.psi)))
    source = np.empty(n, dtype=np.int8)
    if kind is ModelKind.BEZI:
        y = np.where(z, 0.0, v)
        w = y.copy()
        source[:] = np.where(z, UNSUITABLE, POSITIVE)
    else:
        w = 2.0 * v - 1.0
        y = np.where(z, 0.0, np.maximum(0.0, w))
        source[:] = np.where(z, UNSUITABLE, np.where(w > 0, POSITIVE, CENSORED))
    # Beta draws with w == 0 exactly are censored zeros as well
    full = LabeledDataset(Dataset(y, X, G, coords, xn, gn), source, w, effects, pi, mu)
    ntr = scenario.n_train
    return full.subset(np.arange(ntr)), full.subset(np.arange(ntr, n))


# --------------------------------------------------------------------------
# named scenarios
# --------------------------------------------------------------------------

_SIM_TRUTHS = {
    # gamma0, gamma1, delta0, delta1, psi, phi, kind
    "sim1.1": (-1.25, 0.75, 0.50, -0.50, 1.5, None, ModelKind.M1),
    "sim1.2": (-2.50, 0.75, 0.50, -0.50, 1.5, None, ModelKind.M1),
    "sim1.3": (-0.50, 0.75, 1.25, -0.50, 1.5, None, ModelKind.M1),
    "sim2.1": (-2.50, 0.75, 1.25, -1.00, 2.0, 20.0, ModelKind.M2),
    "sim2.2": (-1.50, 0.75, 0.75, -1.00, 2.0, 20.0, ModelKind.M2),
    "sim2.3": (-1.00, 0.75, 1.75, -1.00, 2.0, 20.0, ModelKind.M2),
    "sim3.1": (-2.50, 0.75, 1.00, -1.00, 2.0, 20.0, ModelKind.M3),
    "sim3.2": (-1.50, 0.75, 1.00, -1.00, 2.0, 20.0, ModelKind.M3),
    "sim3.3": (-1.00, 0.75, 1.50, -1.00, 2.0, 20.0, ModelKind.M3),
}

# slopes / precision / decay shared by the cells of each comparison grid
GRID_FAMILIES = {
    "table2": dict(kind=ModelKind.M1, gamma1=0.75, delta1=-0.5, psi=1.5, phi=None),
    "m2grid": dict(kind=ModelKind.M2, gamma1=0.75, delta1=-1.0, psi=2.0, phi=20.0),
    "m3grid": dict(kind=ModelKind.M3, gamma1=0.75, delta1=-1.0, psi=2.0, phi=20.0),
}

# (% unsuitable, % censored) per cell, small / medium / large total zeros
GRID_TARGETS = {
    "table2": [(14, 10), (11, 12), (6, 17), (34, 14), (24, 26), (9, 32), (61, 11), (37, 37), (23, 47)],
    "m2grid": [(14, 8), (12, 13), (6, 21), (38, 15), (23, 25), (9, 45), (64, 12), (38, 42), (12, 60)],
    "m3grid": [(18, 7), (12, 16), (8, 17), (33, 13), (24, 23), (12, 37), (66, 8), (41, 38), (11, 63)],
}

ZERO_LEVELS = ("small",) * 3 + ("medium",) * 3 + ("large",) * 3


def named_scenario(name: str, seed: int = 0) -> ScenarioSpec:
    try:
        g0, g1, d0, d1, psi, phi, kind = _SIM_TRUTHS[name.lower()]
    except KeyError:
        raise SpecificationError(f"unknown scenario {name!r}; known: {sorted(_SIM_TRUTHS)}") from None
    truth = ParamState([g0, g1], [d0, d1], psi, None, phi)
    return ScenarioSpec(name.lower(), truth, kind, seed=seed)


def scenario_names():
    return sorted(_SIM_TRUTHS)


# --------------------------------------------------------------------------
# intercept calibration for the grids
# --------------------------------------------------------------------------

_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(80)
_GH_W = _GH_W / _GH_W.sum()


def expected_unsuitable(gamma0, slope_sd):
    """``E[pi]`` for ``logit pi ~ N(gamma0, slope_sd^2)``."""
    return float(_GH_W @ (1.0 / (1.0 + np.exp(-(gamma0 + slope_sd * _GH_X)))))


def expected_censor_mass(delta0, slope_sd, psi):
    """``E[P(V <= 1/2)]`` for ``logit mu ~ N(delta0, slope_sd^2)``."""
    mu = np.clip(1.0 / (1.0 + np.exp(-(delta0 + slope_sd * _GH_X))), 1e-12, 1 - 1e-12)
    return float(_GH_W @ _kernels.betainc(mu * psi, (1 - mu) * psi, np.full(mu.size, 0.5)))


def expected_mix(gamma, delta, psi, kind=ModelKind.M1):
    """Analytic expected fractions of unsuitability and censored zeros.

    Covariates are independent standard normals; a GP effect adds unit
    variance to the linear predictor it enters.
    """
    kind = ModelKind(kind)
    gamma = np.atleast_1d(gamma)
    delta = np.atleast_1d(delta)
    s_g = float(np.sqrt(np.sum(gamma[1:] ** 2) + (1.0 if kind is ModelKind.M3 else 0.0)))
    s_d = float(np.sqrt(np.sum(delta[1:] ** 2) + (1.0 if kind is ModelKind.M2 else 0.0)))
    pu = expected_unsuitable(gamma[0], s_g) if kind is not ModelKind.M0 else 0.0
    if kind is ModelKind.BEZI:
        return pu, 0.0
    return pu, (1.0 - pu) * expected_censor_mass(delta[0], s_d, psi)


def calibrate_intercepts(target_unsuitable, target_censored, gamma1, delta1, psi, kind=ModelKind.M1):
    """Intercepts ``(gamma0, delta0)`` whose expected zero mix hits the targets."""
    kind = ModelKind(kind)
    s_g = float(np.hypot(gamma1, 1.0)) if kind is ModelKind.M3 else abs(gamma1)
    s_d = float(np.hypot(delta1, 1.0)) if kind is ModelKind.M2 else abs(delta1)
    g0 = optimize.brentq(lambda g: expected_unsuitable(g, s_g) - target_unsuitable, -20, 20, xtol=1e-12)
    need = target_censored / (1.0 - target_unsuitable)
    if not 0 < need < 1:
        raise SpecificationError("censored target not reachable given the unsuitable target")
    d0 = optimize.brentq(lambda d: expected_censor_mass(d, s_d, psi) - need, -20, 20, xtol=1e-12)
    return g0, d0


def calibrate_grid(family: str) -> list[dict]:
    fam = GRID_FAMILIES[family]
    cells = []
    for (pu, pc), level in zip(GRID_TARGETS[family], ZERO_LEVELS):
        g0, d0 = calibrate_intercepts(pu / 100, pc / 100, fam["gamma1"], fam["delta1"], fam["psi"], fam["kind"])
        cells.append(dict(unsuitable=pu, censored=pc, level=level,
                          gamma0=round(g0, 6), delta0=round(d0, 6)))
    return cells


def _load_calibration() -> dict:
    text = resources.files("zibeta").joinpath("data/grid_intercepts.json").read_text()
    return json.loads(text)


def scenario_grid(family: str = "table2", seed: int = 0) -> list[ScenarioSpec]:
    """The nine cells of a comparison grid with their calibrated intercepts."""
    if family not in GRID_FAMILIES:
        raise SpecificationError(f"unknown grid {family!r}; known: {sorted(GRID_FAMILIES)}")
    fam = GRID_FAMILIES[family]
    cal = _load_calibration()[family]
    out = []
    for k, cell in enumerate(cal):
        truth = ParamState([cell["gamma0"], fam["gamma1"]], [cell["delta0"], fam["delta1"]],
                           fam["psi"], None, fam["phi"])
        name = f"{family}:{cell['unsuitable']}-{cell['censored']}"
        out.append(ScenarioSpec(name, truth, fam["kind"], seed=seed + k,
                                target_mix=(cell["unsuitable"] / 100, cell["censored"] / 100)))
    return out


def truth_latents(lab: LabeledDataset) -> LatentState:
    """Latent state implied by the generating draws."""
    z = (lab.source == UNSUITABLE).astype(np.int8)
    v = np.where(z == 1, 0.25, (lab.w + 1.0) / 2.0)
    return LatentState(z, v)
