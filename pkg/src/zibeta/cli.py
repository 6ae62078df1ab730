"""Command line front end: ``zibeta <command> [options]``.

Exit codes: 0 success, 2 usage, 3 ingestion, 4 specification, 5 sampler.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, harness
from . import io as zio
from .errors import IngestionError, SpecificationError, ZibetaError
from .mcmc import SamplerConfig, concat_chains, run_chain, run_chains, summarize
from .metrics import PredictiveDist, predictive_at_sites, score_report
from .model import ModelKind, ModelSpec, PriorSpec
from .simgen import (
    GRID_FAMILIES,
    SOURCE_NAMES,
    UNSUITABLE,
    generate,
    named_scenario,
    scenario_grid,
    scenario_names,
)

log = logging.getLogger("zibeta")

EXIT_USAGE = 2
CRPS_F_WARNING = (
    "warning: CRPS_f depends on how many zero sources a model has; "
    "comparing it across model kinds ({}) is not a fair comparison"
)


class UsageError(Exception):
    pass


def _pair(text, name):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{name} expects two comma-separated numbers, got {text!r}") from None
    return a, b


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} expects comma-separated numbers, got {text!r}") from None


def _models(text):
    out = []
    for m in text.split(","):
        try:
            out.append(ModelKind(m.strip().lower()))
        except ValueError:
            raise UsageError(f"unknown model {m!r}; expected one of {[k.value for k in ModelKind]}") from None
    return out


def _default_jobs():
    try:
        return max(1, int(os.environ.get("ZIBETA_JOBS", "1")))
    except ValueError:
        return 1


def _sampler_args(p):
    p.add_argument("--iters", type=int, default=7500, help="total sweeps (default 7500)")
    p.add_argument("--burnin", type=int, default=2500, help="discarded sweeps (default 2500)")
    p.add_argument("--thin", type=int, default=5, help="keep every k-th sweep (default 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default $ZIBETA_JOBS or 1)")
    p.add_argument("--phi-update", choices=("whitened", "centered"), default="whitened",
                   help="parametrization of the decay update for spatial models")


def _config(args) -> SamplerConfig:
    return SamplerConfig(iterations=args.iters, burn_in=args.burnin, thin=args.thin, seed=args.seed,
                         phi_update=args.phi_update)


def _jobs(args):
    return args.jobs if args.jobs is not None else _default_jobs()


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(args):
    t0 = time.time()
    if bool(args.scenario) == bool(args.grid):
        raise UsageError("give exactly one of --scenario or --grid")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    out = _out(args)
    if args.scenario:
        if args.scenario.lower() not in scenario_names():
            raise UsageError(f"unknown scenario {args.scenario!r}; known: {scenario_names()}")
        cells = [named_scenario(args.scenario, args.seed)]
    else:
        cells = scenario_grid(_grid_family(args.grid), args.seed)
    spatial = cells[0].kind.spatial
    if spatial and args.region is None:
        raise UsageError("spatial scenarios need --region LO,HI (the paper uses 0,50)")
    written = []
    for cell in cells:
        sc = replace(cell, n_train=args.n_train, n_test=args.n_test)
        if args.region is not None:
            sc = replace(sc, region=_pair(args.region, "--region"))
        for r in range(args.reps):
            seed = args.seed + r if args.grid is None else cell.seed * 100_003 + r
            d = out
            if args.grid:
                d = d / cell.name.split(":")[1]
            if args.reps > 1:
                d = d / f"rep{r:03d}"
            train, test = generate(sc.with_seed(seed))
            written += [zio.write_dataset(d / "train.csv", train.data), zio.write_dataset(d / "test.csv", test.data)]
            written.append(zio.write_truth(d / "truth.csv", train, test))
    zio.write_manifest(out, "simulate", vars(args), args.seed, outputs=written, started=t0)
    print(f"wrote {len(written)} files under {out}")
    return 0


def _grid_family(name):
    alias = {"table2": "table2", "s3": "m2grid", "s4": "m3grid"}
    fam = alias.get(name, name)
    if fam not in GRID_FAMILIES:
        raise UsageError(f"unknown grid {name!r}; known: table2, s3 (m2grid), s4 (m3grid)")
    return fam


# --------------------------------------------------------------------------
# fit / predict / evaluate
# --------------------------------------------------------------------------


def _priors(args) -> PriorSpec:
    inf = {}
    if args.gamma0_prior:
        inf["gamma_0"] = _pair(args.gamma0_prior, "--gamma0-prior")
    if args.delta0_prior:
        inf["delta_0"] = _pair(args.delta0_prior, "--delta0-prior")
    bounds = _pair(args.phi_bounds, "--phi-bounds") if args.phi_bounds else None
    return PriorSpec(informative=inf, phi_bounds=bounds)


def cmd_fit(args):
    t0 = time.time()
    if args.chains < 1:
        raise UsageError("--chains must be at least 1")
    spec = ModelSpec.of(args.model)
    data = zio.read_dataset(args.data, standardize=args.standardize)
    spec.check_data(data)
    priors = _priors(args)
    config = _config(args)
    chains = run_chains(data, spec, priors, config, chains=args.chains, jobs=_jobs(args))
    chain = concat_chains(chains)
    out = _out(args)
    written = zio.write_chain(out, chain)
    keep = [c for c in chain.columns if c.split("_")[0] in ("gamma", "delta") or c in ("psi", "phi")]
    written.append(zio.write_summary(out / "summary.csv", summarize(chain, keep), chain))
    written.append(zio.write_acceptance(out / "acceptance.csv", chain))
    zio.write_manifest(out, "fit", dict(vars(args), sampler=zio._jsonable(config.__dict__)), args.seed,
                       inputs=[args.data], outputs=written, started=t0)
    print(f"{spec.kind.value}: {chain.n_samples} retained draws in {chain.elapsed:.1f}s; "
          f"acceptance {json.dumps({k: round(v, 3) for k, v in chain.acceptance.items()})}")
    return 0


PRED_FILE = "predictive.npz"


def cmd_predict(args):
    t0 = time.time()
    chain = zio.read_chain(args.chain)
    kind = ModelKind(chain.kind)
    data = zio.read_dataset(args.data, standardize=args.standardize, require_y=False)
    coords = data.coords if kind.spatial else None
    if not kind.spatial and data.coords is not None:
        print("warning: coordinates ignored for a non-spatial model", file=sys.stderr)
    if kind.spatial and coords is None:
        raise SpecificationError(f"model {kind.value} needs s1, s2 coordinates at the new sites")
    rng = np.random.default_rng(args.seed)
    pred = predictive_at_sites(chain, data.X, data.G, coords, draws=args.draws, rng=rng)
    out = _out(args)
    qs = _floats(args.quantiles, "--quantiles")
    quant = pred.quantile(qs)
    header = ["site", "p0", "mean", "source_score"] + [f"q{q:g}" for q in qs]
    rows = [(i, pred.p0()[i], pred.mean()[i], pred.source_score()[i], *quant[i]) for i in range(pred.n_sites)]
    written = [zio.write_csv(out / "predictions.csv", header, rows)]
    ens = pred.ensemble(rng)
    written.append(zio.write_csv(out / "ensemble.csv", [f"site{i}" for i in range(pred.n_sites)], ens.tolist()))
    tmp = out / (".tmp_" + PRED_FILE)
    with open(tmp, "wb") as fh:
        np.savez(fh, pi=pred.pi, mu=pred.mu, psi=pred.psi, kind=kind.value)
    os.replace(tmp, out / PRED_FILE)
    written.append(out / PRED_FILE)
    zio.write_manifest(out, "predict", vars(args), args.seed, inputs=[args.data, Path(args.chain) / "chain.csv"],
                       outputs=written, started=t0)
    print(f"predicted {pred.n_sites} sites from {pred.n_draws} draws")
    return 0


def _load_pred(path) -> PredictiveDist:
    p = Path(path)
    f = p / PRED_FILE if p.is_dir() else p
    try:
        z = np.load(f, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read predictive file {f}: {exc}") from exc
    return PredictiveDist(z["pi"], z["mu"], z["psi"], str(z["kind"]))


def cmd_evaluate(args):
    t0 = time.time()
    data = zio.read_dataset(args.data)
    source = None
    if args.truth:
        src = zio.read_truth_sources(args.truth)
        if src.size != data.n:
            raise IngestionError("truth file rows do not match the test data")
        source = src == SOURCE_NAMES[UNSUITABLE]
    preds = [(p, _load_pred(p)) for p in args.pred]
    kinds = sorted({pr.kind.value for _, pr in preds})
    if len(kinds) > 1:
        print(CRPS_F_WARNING.format(", ".join(kinds)), file=sys.stderr)
    out = _out(args)
    summaries, written = [], []
    for k, (path, pr) in enumerate(preds):
        if pr.n_sites != data.n:
            raise SpecificationError(f"{path}: predictive has {pr.n_sites} sites, test data {data.n}")
        rep = score_report(pr, data.y, source, n_samples=args.n_mc, rng=np.random.default_rng(args.seed))
        name = f"{pr.kind.value}_{k}" if len(preds) > 1 else pr.kind.value
        rows = [(i, rep.y[i], rep.p0[i], rep.crps_f_obs[i], rep.crps_f_paper_obs[i], rep.crps_h_obs[i])
                for i in range(data.n)]
        written.append(zio.write_csv(out / f"scores_{name}.csv",
                                     ["site", "y", "p0", "crps_f", "crps_f_paper", "crps_h"], rows))
        summaries.append(dict(rep.summary(), source=str(path)))
    keys = ["source", "model", "r2", "auc", "crps_h", "crps_f", "crps_f_paper", "source_auc", "n_zero", "n_pos"]
    written.append(zio.write_csv(out / "summary.csv", keys, [[s[k] for k in keys] for s in summaries]))
    zio.write_manifest(out, "evaluate", vars(args), args.seed, inputs=[args.data], outputs=written, started=t0)
    for s in summaries:
        print(_fmt_row(s))
    return 0


def _fmt_row(s):
    parts = [f"{s['model']:>5}"]
    for k in ("r2", "auc", "crps_h", "crps_f", "source_auc"):
        v = s.get(k)
        parts.append(f"{k}={'NA' if v is None else f'{v:.3f}'}")
    return "  ".join(parts)


# --------------------------------------------------------------------------
# compare / replicate
# --------------------------------------------------------------------------


def _split_task(args):
    data, rep_seed, n_train, n_test, fits, config, scoring = args
    rng = np.random.default_rng(rep_seed)
    idx = rng.permutation(data.n)
    train, test = data.subset(idx[:n_train]), data.subset(idx[n_train:n_train + n_test])
    row = {}
    for label, kind, priors in fits:
        chain = run_chain(train, ModelSpec(kind), priors, replace(config, seed=int(rep_seed % 2**31) + 1))
        coords = test.coords if kind.spatial else None
        pred = predictive_at_sites(chain, test.X, test.G, coords, draws=scoring.draws,
                                   rng=np.random.default_rng([rep_seed, 1]))
        try:
            rep = score_report(pred, test.y, n_samples=scoring.n_mc, rng=np.random.default_rng([rep_seed, 2]))
            row[label] = rep.summary()
        except ZibetaError as exc:
            row[label] = {"error": str(exc)}
    return row


def cmd_compare(args):
    t0 = time.time()
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    data = zio.read_dataset(args.data, standardize=args.standardize)
    n_train = args.train
    n_test = args.test if args.test is not None else data.n - n_train
    if n_train < 2 or n_test < 1 or n_train + n_test > data.n:
        raise UsageError(f"--train/--test sizes do not fit {data.n} rows")
    base = _priors(args)
    fits = []
    grid = _floats(args.gamma0_grid, "--gamma0-grid") if args.gamma0_grid else None
    for kind in _models(args.models):
        if grid and kind.has_gamma:
            for g in grid:
                pri = replace(base, informative=dict(base.informative, gamma_0=(g, args.prior_sd)))
                fits.append((f"{kind.value}[gamma0={g:g}]", kind, pri))
        else:
            fits.append((kind.value, kind, base))
    config = _config(args)
    scoring = harness.ScoringConfig(draws=args.draws, n_mc=args.n_mc)
    seeds = np.random.SeedSequence(args.seed).generate_state(args.reps)
    tasks = [(data, int(s), n_train, n_test, fits, config, scoring) for s in seeds]
    rows = harness.run_many(_split_task, tasks, _jobs(args))
    out = _out(args)
    metrics = ("r2", "crps_h", "crps_f", "crps_f_paper", "auc")
    per_rep = []
    for r, row in enumerate(rows):
        for label, s in row.items():
            per_rep.append([r, label] + [s.get(m) for m in metrics] + [s.get("error", "")])
    written = [zio.write_csv(out / "compare_reps.csv", ["rep", "model", *metrics, "error"], per_rep)]
    table = []
    for label, _, _ in fits:
        vals = {m: [row[label].get(m) for row in rows if row[label].get(m) is not None] for m in metrics}
        table.append([label] + [float(np.mean(v)) if v else None for v in vals.values()]
                     + [sum(1 for row in rows if "error" not in row[label])])
    written.append(zio.write_csv(out / "compare.csv", ["model", *metrics, "n_ok"], table))
    kinds = {k.value for _, k, _ in fits}
    if len(kinds) > 1:
        print(CRPS_F_WARNING.format(", ".join(sorted(kinds))), file=sys.stderr)
    zio.write_manifest(out, "compare", vars(args), args.seed, inputs=[args.data], outputs=written, started=t0)
    for t in table:
        print("  ".join([f"{t[0]:>16}"] + ["NA" if v is None else f"{v:.3f}" for v in t[1:-1]]))
    return 0


TABLES = {
    "table1": ("compare", ["sim1.1", "sim1.2", "sim1.3"], ("bezi", "m0", "m1")),
    "table2": ("compare", "table2", ("bezi", "m0", "m1")),
    "s1": ("recovery", ["sim1.1", "sim1.2", "sim1.3"], None),
    "s2": ("recovery", ["sim2.1", "sim2.2", "sim2.3", "sim3.1", "sim3.2", "sim3.3"], None),
    "s3": ("compare", "m2grid", ("m1", "m2")),
    "s4": ("compare", "m3grid", ("m1", "m3")),
}


def cmd_replicate(args):
    t0 = time.time()
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    mode, cells, models = TABLES[args.table]
    scen = [named_scenario(c) for c in cells] if isinstance(cells, list) else scenario_grid(cells)
    if args.models:
        models = tuple(k.value for k in _models(args.models))
    config = _config(args)
    scoring = harness.ScoringConfig(draws=args.draws, n_mc=args.n_mc)
    out = _out(args)
    rows = []
    for k, sc in enumerate(scen):
        if mode == "recovery":
            res = harness.recovery_study(sc, args.reps, config, args.seed + k, _jobs(args))
            for name in res[0]["truth"]:
                cov = np.mean([r["covered"][name] for r in res])
                rows.append([sc.name, name, res[0]["truth"][name], np.mean([r["mean"][name] for r in res]),
                             np.mean([r["lower"][name] for r in res]), np.mean([r["upper"][name] for r in res]), cov])
        else:
            res = harness.comparison_study(sc, models, args.reps, config, scoring, args.seed + k, _jobs(args))
            avg = harness.average_scores(res)
            mix = harness.mean_mix(res)
            for m in models:
                rows.append([sc.name, f"{100 * mix[0]:.0f}/{100 * mix[1]:.0f}", m]
                            + [avg[m][key] for key in harness.METRICS])
        print(f"{sc.name}: {len(res)} replicates done", flush=True)
    if mode == "recovery":
        header = ["scenario", "parameter", "true", "mean", "lower95", "upper95", "coverage"]
    else:
        header = ["scenario", "realized_mix", "model", *harness.METRICS]
    written = [zio.write_csv(out / f"{args.table}.csv", header, rows)]
    zio.write_manifest(out, "replicate", vars(args), args.seed, outputs=written, started=t0)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zibeta", description="Zero-inflated Beta regression with two zero sources.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate labeled train/test data")
    s.add_argument("--scenario", help=f"named scenario ({', '.join(scenario_names())})")
    s.add_argument("--grid", help="comparison grid: table2, s3 or s4")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--region", help="square side LO,HI (required for spatial scenarios)")
    s.add_argument("--n-train", type=int, default=400)
    s.add_argument("--n-test", type=int, default=200)
    s.add_argument("--out", default="sim")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the posterior sampler")
    f.add_argument("--model", required=True, help="m0, m1, m2, m3 or bezi")
    f.add_argument("--data", required=True)
    f.add_argument("--gamma0-prior", help="informative prior MEAN,SD on the zero-inflation intercept")
    f.add_argument("--delta0-prior", help="informative prior MEAN,SD on the Beta-mean intercept")
    f.add_argument("--phi-bounds", help="uniform prior support LO,HI for the spatial decay")
    f.add_argument("--chains", type=int, default=1)
    f.add_argument("--standardize", action="store_true", help="center and scale covariates")
    f.add_argument("--out", default="fit")
    _sampler_args(f)
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("predict", help="posterior predictive at new sites")
    r.add_argument("--chain", required=True, help="directory written by fit")
    r.add_argument("--data", required=True, help="new-site CSV (y optional)")
    r.add_argument("--draws", type=int, default=None, help="posterior draws to mix (default all)")
    r.add_argument("--quantiles", default="0.05,0.5,0.95")
    r.add_argument("--standardize", action="store_true")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="pred")
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="score predictions on test data")
    e.add_argument("--pred", required=True, nargs="+", help="one or more predict output directories")
    e.add_argument("--data", required=True, help="test CSV")
    e.add_argument("--truth", help="truth CSV from simulate (enables source-of-zero AUC)")
    e.add_argument("--n-mc", type=int, default=10_000, help="Monte Carlo points per observation")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="eval")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="repeated random splits of one dataset")
    c.add_argument("--data", required=True)
    c.add_argument("--models", default="bezi,m1")
    c.add_argument("--reps", type=int, default=30)
    c.add_argument("--train", type=int, default=99)
    c.add_argument("--test", type=int, default=None)
    c.add_argument("--gamma0-grid", help="comma-separated centers for the gamma_0 prior")
    c.add_argument("--prior-sd", type=float, default=0.25)
    c.add_argument("--gamma0-prior")
    c.add_argument("--delta0-prior")
    c.add_argument("--phi-bounds")
    c.add_argument("--standardize", action="store_true")
    c.add_argument("--draws", type=int, default=100)
    c.add_argument("--n-mc", type=int, default=1000)
    c.add_argument("--out", default="compare")
    _sampler_args(c)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("replicate", help="rerun a simulation table")
    t.add_argument("--table", required=True, choices=sorted(TABLES))
    t.add_argument("--reps", type=int, default=50)
    t.add_argument("--models", help="override the compared models")
    t.add_argument("--draws", type=int, default=100)
    t.add_argument("--n-mc", type=int, default=1000)
    t.add_argument("--out", default="replicate")
    _sampler_args(t)
    t.set_defaults(func=cmd_replicate)
    return p


# flags whose values may start with a minus sign ("-1.25,0.25")
_NUMERIC_FLAGS = ("--gamma0-prior", "--delta0-prior", "--gamma0-grid", "--phi-bounds", "--region")


def _glue_numeric(argv):
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _NUMERIC_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_numeric(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zibeta {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZibetaError as exc:
        print(f"zibeta {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
