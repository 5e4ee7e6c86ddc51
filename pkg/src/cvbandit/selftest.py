"""Quick Monte-Carlo invariant checks, runnable from the command line."""
import math
import time

import numpy as np

from . import estimators as est
from .environments import Environment, JointGaussianArm, shannon_rate, SinrArm
from .harness import BoundParams, theoretical_regret_bound
from .stats_core import (BivariateGaussianSpec, RandomSource, percentile_v, sample_bivariate_gaussian,
                         t_cdf, t_quantile)


def _quantile_roundtrip(rng):
    g = rng.generator
    worst = 0.0
    for _ in range(1000):
        p = g.uniform(1e-6, 1 - 1e-6)
        dof = int(np.exp(g.uniform(0, math.log(1e6))))
        worst = max(worst, abs(t_cdf(t_quantile(p, dof), dof) - p))
    return worst <= 1e-8, f"max |cdf(q(p)) - p| = {worst:.2e}"


def _v_bound(rng):
    ok = all(percentile_v(T, 2, T - 2) <= 3.726 * math.log(T) for T in (100, 1000, 5000))
    return ok, "V(T,2,T-2) <= 3.726 ln T for T in 100, 1000, 5000"


def _sampler_corr(rng):
    spec = BivariateGaussianSpec(5.0, 2.0, 2.0, 1.0, 0.8)
    x, w = sample_bivariate_gaussian(spec, rng, 10**6)
    r = np.corrcoef(x, w)[0, 1]
    return abs(r - 0.8) <= 0.005, f"corr = {r:.4f} (target 0.8)"


def _known_beta_variance(rng):
    s, rho, reps = 20, 0.9, 10**5
    x, w = sample_bivariate_gaussian(BivariateGaussianSpec(0.0, 0.0, 1.0, 1.0, rho), rng, (reps, s))
    m = est.transform_sample(x, w, 0.0, est.optimal_beta(rho, 1.0)).mean(axis=1)
    ratio = m.var(ddof=1) / ((1 - rho * rho) / s)
    return abs(ratio - 1) <= 0.03, f"Var / ((1-rho^2) sigma^2 / s) = {ratio:.4f}"


def _unbiased_variance(rng):
    s, rho, reps = 10, 0.8, 10**5
    z1 = rng.standard_normal((reps, s))
    z2 = rng.standard_normal((reps, s))
    x, w = z1, rho * z1 + math.sqrt(1 - rho * rho) * z2
    mean, var, _ = est.cv_estimate_batch(x, w, 0.0, centering="sample")
    target = mean.var(ddof=1)
    se = math.sqrt(var.var(ddof=1) / reps + 2 * target ** 2 / (reps - 1))
    return abs(var.mean() - target) <= 3 * se, f"E[nu] = {var.mean():.5f}, Var = {target:.5f}"


def _rate_sign(rng):
    tx = SinrArm(1.0, {"dist": "lognormal_db", "mean_db": 5, "std_db": 1}, 1.0,
                 {"dist": "constant", "value": 0.1}, {"dist": "lognormal_db", "mean_db": 0, "std_db": 2})
    ch = SinrArm(1.0, {"dist": "lognormal_db", "mean_db": 5, "std_db": 2}, 1.0,
                 {"dist": "constant", "value": 0.1}, si_kind="channel_gain")
    env = Environment([tx, ch], rng)
    xs, ws = env.draw_streams(10**5)
    r0 = np.corrcoef(xs[:, 0], ws[:, 0])[0, 1]
    r1 = np.corrcoef(xs[:, 1], ws[:, 1])[0, 1]
    ok = r0 < 0 < r1 and abs(shannon_rate(10.0) - math.log2(11.0)) < 1e-15
    return ok, f"corr(interference SI) = {r0:.3f}, corr(gain SI) = {r1:.3f}"


def _bound_monotone(rng):
    b0 = theoretical_regret_bound(BoundParams((1.0,), (0.0,), (1.0,)), 5000)
    b9 = theoretical_regret_bound(BoundParams((1.0,), (0.9,), (1.0,)), 5000)
    return b9 < b0, f"bound rho=0.9 {b9:.1f} < rho=0 {b0:.1f}"


CHECKS = [
    ("t quantile round trip", _quantile_roundtrip),
    ("percentile growth bound", _v_bound),
    ("bivariate sampler correlation", _sampler_corr),
    ("known-coefficient variance law", _known_beta_variance),
    ("variance estimator unbiased", _unbiased_variance),
    ("rate vs side-information sign", _rate_sign),
    ("bound decreases with correlation", _bound_monotone),
]


def run(seed=20240611, out=print):
    """Run every check; returns True when all pass."""
    root = RandomSource(seed)
    all_ok = True
    for (name, fn), rng in zip(CHECKS, root.spawn(len(CHECKS))):
        t0 = time.perf_counter()
        ok, detail = fn(rng)
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({time.perf_counter() - t0:.2f}s)")
    return all_ok
