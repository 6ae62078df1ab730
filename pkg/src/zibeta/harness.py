"""Replicated simulation studies: parameter recovery and model comparison.

Each replicate is a pure function of its scenario and seed, so replicates
can be spread over worker processes.  Scoring uses common random numbers:
every fitted model of one replicate is scored with the same Monte Carlo
abscissae.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .mcmc import SamplerConfig, run_chain, summarize
from .metrics import predictive_at_sites, score_report
from .model import ModelKind, ModelSpec, PriorSpec
from .simgen import UNSUITABLE, ScenarioSpec, generate

log = logging.getLogger(__name__)

INFORMATIVE_SD = 0.25
METRICS = ("r2", "auc", "crps_h", "crps_f", "crps_f_paper", "source_auc")


@dataclass
class ScoringConfig:
    draws: int = 100
    n_mc: int = 1000


def informative_prior(data_kind, fit_kind, truth, sd: float = INFORMATIVE_SD) -> dict:
    """Intercept prior centered at the truth.

    Data with a GP effect in the Beta mean get the prior on ``delta_0``;
    otherwise ``gamma_0`` carries it (for models that have ``gamma``).
    """
    data_kind, fit_kind = ModelKind(data_kind), ModelKind(fit_kind)
    if data_kind is ModelKind.M2:
        return {"delta_0": (float(truth.delta[0]), sd)}
    if fit_kind.has_gamma:
        return {"gamma_0": (float(truth.gamma[0]), sd)}
    return {}


def _seeds(master: int, k: int):
    ss = np.random.SeedSequence(master).spawn(k)
    return [int(s.generate_state(1)[0]) for s in ss]


def recovery_replicate(args) -> dict:
    """Fit the generating model to one replicate and check interval coverage."""
    scenario, seed, config = args
    sc = scenario.with_seed(seed)
    train, _ = generate(sc)
    kind = sc.kind
    priors = PriorSpec(informative=informative_prior(kind, kind, sc.truth))
    chain = run_chain(train.data, ModelSpec(kind), priors, replace(config, seed=seed + 1))
    truth = {"gamma_0": sc.truth.gamma[0], "gamma_1": sc.truth.gamma[1],
             "delta_0": sc.truth.delta[0], "delta_1": sc.truth.delta[1], "psi": sc.truth.psi}
    if kind.spatial:
        truth["phi"] = sc.truth.phi
    s = summarize(chain, list(truth))
    out = dict(seed=seed, mix=train.zero_mix(), acceptance=chain.acceptance, elapsed=chain.elapsed)
    out["mean"] = {k: float(s[k][0]) for k in truth}
    out["lower"] = {k: float(s[k][1]) for k in truth}
    out["upper"] = {k: float(s[k][2]) for k in truth}
    out["covered"] = {k: bool(s.covers(k, v)) for k, v in truth.items()}
    out["truth"] = {k: float(v) for k, v in truth.items()}
    if kind.spatial:
        eff = chain.block(kind.effect_name).mean(axis=0)
        out["effect_corr"] = float(np.corrcoef(eff, train.effects)[0, 1])
    return out


def compare_replicate(args) -> dict:
    """Generate one train/test pair, fit several models, score each on the test set."""
    scenario, seed, models, config, scoring = args
    sc = scenario.with_seed(seed)
    train, test = generate(sc)
    out = dict(seed=seed, mix=train.zero_mix(), scores={})
    for m in models:
        kind = ModelKind(m)
        priors = PriorSpec(informative=informative_prior(sc.kind, kind, sc.truth))
        chain = run_chain(train.data, ModelSpec(kind), priors, replace(config, seed=seed + 1))
        coords = test.data.coords if kind.spatial else None
        pred = predictive_at_sites(chain, test.data.X, test.data.G, coords, draws=scoring.draws,
                                   rng=np.random.default_rng([seed, 1]))
        # same MC abscissae for every model of this replicate
        rep = score_report(pred, test.data.y, test.source == UNSUITABLE, n_samples=scoring.n_mc,
                           rng=np.random.default_rng([seed, 2]))
        out["scores"][kind.value] = rep.summary()
        out["scores"][kind.value]["elapsed"] = chain.elapsed
    return out


def run_many(fn, tasks, jobs: int = 1) -> list:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def recovery_study(scenario: ScenarioSpec, reps: int, config: SamplerConfig | None = None,
                   master_seed: int = 0, jobs: int = 1) -> list:
    config = config or SamplerConfig()
    tasks = [(scenario, s, config) for s in _seeds(master_seed, reps)]
    return run_many(recovery_replicate, tasks, jobs)


def comparison_study(scenario: ScenarioSpec, models, reps: int, config: SamplerConfig | None = None,
                     scoring: ScoringConfig | None = None, master_seed: int = 0, jobs: int = 1) -> list:
    config = config or SamplerConfig()
    scoring = scoring or ScoringConfig()
    tasks = [(scenario, s, tuple(models), config, scoring) for s in _seeds(master_seed, reps)]
    return run_many(compare_replicate, tasks, jobs)


def average_scores(results: list) -> dict:
    """Mean of every metric per model over replicates (``None`` entries skipped)."""
    models = results[0]["scores"].keys()
    out = {}
    for m in models:
        out[m] = {}
        for key in METRICS:
            vals = [r["scores"][m][key] for r in results if r["scores"][m].get(key) is not None]
            out[m][key] = float(np.mean(vals)) if vals else None
    return out


def mean_mix(results: list) -> tuple:
    mix = np.array([r["mix"] for r in results])
    return tuple(float(v) for v in mix.mean(axis=0))
