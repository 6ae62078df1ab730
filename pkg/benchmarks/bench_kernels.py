"""Time the numba kernels against their pure-numpy fallbacks.

Both variants are imported directly, so one process compares them
regardless of ``ZIBETA_DISABLE_NUMBA``.  ``--sampler`` additionally times
a short M1 chain in two subprocesses, one per backend.

    python3 benchmarks/bench_kernels.py [--n N] [--repeat R] [--sampler]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from zibeta import _kernels as K
from zibeta._accel import HAVE_NUMBA


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    a = rng.uniform(0.3, 20, n)
    b = rng.uniform(0.3, 20, n)
    x = rng.uniform(0, 1, n)
    mu, psi = rng.uniform(0.05, 0.95, n), 3.0
    lo = np.zeros(n)
    hi = np.full(n, 0.5)
    u = rng.uniform(size=n)
    m = max(n // 100, 10)
    t = np.linspace(0, 1, 200)
    return {
        "betainc": (K.betainc_nb, K.betainc_np, (a, b, x)),
        "logpdf_sum": (K.beta_logpdf_sum_nb, K.beta_logpdf_sum_np, (x, mu, psi)),
        "trunc_ppf": (K.beta_trunc_ppf_nb, K.beta_trunc_ppf_np, (a, b, lo, hi, u)),
        "mixture_cdf": (K.mixture_cdf_nb, K.mixture_cdf_np, (t, a[:m], b[:m], np.full(m, 1 / m))),
    }


SAMPLER = """
import time, numpy as np
from zibeta.mcmc import SamplerConfig, run_chain
from zibeta.model import ModelSpec, PriorSpec
from zibeta.simgen import generate, named_scenario
train, _ = generate(named_scenario("sim1.1", seed=1))
cfg = SamplerConfig(200, 100, 1, seed=1)
run_chain(train.data, ModelSpec("m1"), PriorSpec(), cfg, np.random.default_rng(1))  # warm-up
cfg = SamplerConfig({iters}, {burn}, 5, seed=2)
t0 = time.perf_counter()
run_chain(train.data, ModelSpec("m1"), PriorSpec(), cfg, np.random.default_rng(2))
print(time.perf_counter() - t0)
"""


def time_sampler(disable, iters):
    env = dict(os.environ, ZIBETA_DISABLE_NUMBA="1" if disable else "0")
    code = SAMPLER.format(iters=iters, burn=iters // 3)
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(r.stdout.split()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20_000, help="vector length per kernel call")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampler", action="store_true", help="also time a full M1 chain per backend")
    p.add_argument("--iters", type=int, default=1500)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<12} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, (nb, npf, fargs) in cases(args.n, rng).items():
        nb(*fargs)  # compile outside the timed region
        t_nb, r_nb = best_of(nb, fargs, args.repeat)
        t_np, r_np = best_of(npf, fargs, args.repeat)
        diff = float(np.nanmax(np.abs(np.asarray(r_nb) - np.asarray(r_np))))
        print(f"{name:<12} {1e3 * t_nb:>10.2f} {1e3 * t_np:>10.2f} {t_np / t_nb:>7.1f}x {diff:>11.2e}")
    if args.sampler:
        t_nb = time_sampler(False, args.iters)
        t_np = time_sampler(True, args.iters)
        print(f"{'m1 chain':<12} {1e3 * t_nb:>10.0f} {1e3 * t_np:>10.0f} {t_np / t_nb:>7.1f}x "
              f"({args.iters} sweeps, n=400)")


if __name__ == "__main__":
    main()
