import math

import numpy as np
import pytest
from scipy import stats

from cvbandit.environments import (Environment, GeneralArm, JointGaussianArm, PowerDist, SinrArm, arm_from_dict,
                                   copula_rho_from_rank, gaussian_suite, shannon_rate, sinr_suite)
from cvbandit.harness import parse_config, run_batch
from cvbandit.stats_core import RandomSource

LOG2_11 = math.log2(11.0)


def deterministic_sinr(power=10.0):
    return SinrArm(power, {"dist": "constant", "value": 1.0}, 1.0, 0.0, 0.0)


def test_shannon_rate():
    assert shannon_rate(0.0) == 0.0
    assert shannon_rate(1.0) == 1.0
    assert shannon_rate(10.0) == pytest.approx(LOG2_11, rel=1e-15)
    assert round(shannon_rate(10.0), 4) == 3.4594
    assert np.all(np.diff(shannon_rate(np.linspace(0, 100, 50))) > 0)
    with pytest.raises(ValueError):
        shannon_rate(-0.1)


def test_power_distributions():
    assert PowerDist(2.5).mean == 2.5
    m, s = 3.0, 2.0
    k = math.log(10) / 10
    assert PowerDist({"dist": "lognormal_db", "mean_db": m, "std_db": s}).mean == pytest.approx(math.exp(m * k + (s * k) ** 2 / 2))
    x = PowerDist({"dist": "lognormal_db", "mean_db": m, "std_db": s}).sample(RandomSource(1), 10**6)
    assert x.mean() == pytest.approx(math.exp(m * k + (s * k) ** 2 / 2), rel=3e-3)
    assert PowerDist({"dist": "uniform", "low": 1, "high": 3}).mean == 2.0
    assert PowerDist({"dist": "exponential", "mean": 0.5}).mean == 0.5
    with pytest.raises(ValueError):
        PowerDist({"dist": "gamma"})
    with pytest.raises(ValueError):
        PowerDist({"dist": "uniform", "low": -1, "high": 3})


def test_deterministic_sinr_pull():
    env = Environment([deterministic_sinr(), deterministic_sinr()], RandomSource(0))
    for _ in range(5):
        obs = env.pull(0)
        assert obs.reward == pytest.approx(LOG2_11, rel=1e-15) and obs.side_info == 0.0


def test_zero_power_gives_zero_rate():
    env = Environment([deterministic_sinr(0.0), deterministic_sinr()], RandomSource(0))
    assert all(env.pull(0).reward == 0.0 for _ in range(5))


def test_sinr_formulas_by_hand():
    rng = RandomSource(2)
    tx = SinrArm(2.0, 3.0, 0.5, 0.25, 0.75)
    x, w = tx.sample(rng, 3)
    assert np.allclose(x, math.log2(1 + 3 * 2 / (3 * 0.75 + 0.25 + 0.5)), rtol=1e-15) and np.all(w == 0.75)
    flat = SinrArm(2.0, 3.0, 0.5, 0.25, 0.75, scale_interference_by_gain=False)
    x, _ = flat.sample(rng, 1)
    assert x[0] == pytest.approx(math.log2(1 + 6 / (0.75 + 0.25 + 0.5)), rel=1e-15)
    ch = SinrArm(2.0, 3.0, 0.5, 0.25, si_kind="channel_gain")
    x, w = ch.sample(rng, 1)
    assert x[0] == pytest.approx(math.log2(1 + 6 / 0.75), rel=1e-15) and w[0] == 3.0
    assert ch.si_mean == 3.0 and tx.si_mean == 0.75


def test_gaussian_arm_correlation():
    arm = JointGaussianArm(1.0, 2.0, 0.5, 1.0, 0.8)
    x, w = Environment([arm, arm], RandomSource(3)).draw_streams(10**6)
    assert abs(np.corrcoef(x[:, 0], w[:, 0])[0, 1] - 0.8) <= 0.01


def test_pull_matches_batched_stream():
    arm = JointGaussianArm(1.0, 2.0, 0.5, 1.0, 0.8)
    env = Environment([arm, arm], RandomSource(4))
    pulls = [env.pull(0) for _ in range(10)]
    x, w = arm.sample(RandomSource(4), 10)
    assert [p.reward for p in pulls] == list(x) and [p.side_info for p in pulls] == list(w)


def test_true_means_gaussian_and_ties():
    env = Environment([JointGaussianArm(m, 1, 0, 1, 0.5) for m in (5.0, -1.0, 3.0)])
    tm = env.true_means()
    assert list(tm.means) == [5.0, -1.0, 3.0] and tm.optimal == 0 and tm.mu_star == 5.0
    assert np.all(tm.stderr == 0)
    tie = Environment([JointGaussianArm(1.0, 1, 0, 1, 0), JointGaussianArm(1.0, 1, 0, 1, 0)])
    assert tie.true_means().optimal == 0


def test_true_means_deterministic_sinr():
    tm = Environment([deterministic_sinr(), deterministic_sinr(1.0)]).true_means(10**5)
    assert tm.means[0] == pytest.approx(LOG2_11, rel=1e-15) and tm.stderr[0] == 0.0
    assert tm.means[1] == 1.0 and tm.optimal == 0


def test_true_means_monte_carlo_stderr():
    arms = [arm_from_dict(a) for a in sinr_suite()]
    tm = Environment(arms).true_means(10**5)
    assert np.all(tm.stderr > 0) and np.all(tm.stderr < 0.01)
    again = Environment(arms).true_means(10**5, RandomSource(77))
    assert np.all(np.abs(again.means - tm.means) <= 5 * np.hypot(tm.stderr, again.stderr))


def test_calibration():
    const = SinrArm(1.0, 1.0, 1.0, 0.0, {"dist": "constant", "value": 0.1})
    gauss = JointGaussianArm(0.0, 1.0, 2.0, 1.0, 0.3)
    est = Environment([const, gauss]).calibrate_si_means(10**4, RandomSource(5))
    assert est[0] == 0.1
    assert abs(est[1] - 2.0) <= 0.03
    with pytest.raises(ValueError):
        Environment([const, gauss]).calibrate_si_means(0)


def test_calibrated_omega_changes_regret_little():
    base = {"horizon": 5000, "runs": 50, "base_seed": 31, "policies": ["UCBwSI"], "suite": {"name": "gaussian"},
            "write_traces": False}
    exact = run_batch(parse_config(base), write=False)
    cal = run_batch(parse_config(dict(base, omega_mode={"mode": "calibrated", "n": 10**6})), write=False)
    a, b = exact.pseudo_regret["UCBwSI"].mean(), cal.pseudo_regret["UCBwSI"].mean()
    assert abs(a - b) <= 0.05 * a


def test_rate_correlation_signs():
    tx = arm_from_dict(sinr_suite()[0])
    ch = SinrArm(1.0, {"dist": "lognormal_db", "mean_db": 5, "std_db": 2}, 1.0,
                 {"dist": "lognormal_db", "mean_db": -10, "std_db": 2}, si_kind="channel_gain")
    x, w = Environment([tx, ch], RandomSource(6)).draw_streams(10**5)
    assert np.corrcoef(x[:, 0], w[:, 0])[0, 1] < 0
    assert np.corrcoef(x[:, 1], w[:, 1])[0, 1] > 0


def test_rewards_independent_across_rounds():
    arm = arm_from_dict(sinr_suite()[2])
    x, _ = arm.sample(RandomSource(7), 10**6)
    lag1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(lag1) <= 0.01


def test_seed_determinism():
    arms = [arm_from_dict(a) for a in sinr_suite()]
    a = Environment(arms, RandomSource(8)).draw_streams(100)
    b = Environment(arms, RandomSource(8)).draw_streams(100)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_general_arm():
    arm = GeneralArm({"dist": "beta", "a": 2, "b": 5, "low": 1, "scale": 2},
                     {"dist": "lognormal", "mu": 0, "sigma": 0.5}, rank_corr=0.8)
    assert arm.copula_rho == pytest.approx(2 * math.sin(math.pi * 0.8 / 6))
    x, w = arm.sample(RandomSource(9), 2 * 10**5)
    assert x.min() >= 1 and x.max() <= 3
    assert x.mean() == pytest.approx(1 + 2 * 2 / 7, rel=5e-3)
    assert w.mean() == pytest.approx(math.exp(0.125), rel=5e-3)
    assert stats.spearmanr(x, w).statistic == pytest.approx(0.8, abs=0.01)
    assert copula_rho_from_rank(1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        GeneralArm({"dist": "normal", "mean": 0, "std": 1}, {"dist": "normal", "mean": 0, "std": 1})
    with pytest.raises(ValueError):
        GeneralArm({"dist": "normal", "mean": 0, "std": 1}, {"dist": "normal", "mean": 0, "std": 1}, copula_rho=1.5)


def test_environment_needs_two_arms():
    with pytest.raises(ValueError, match="K >= 2"):
        Environment([deterministic_sinr()])


def test_default_suites():
    g = gaussian_suite(rho=0.9)
    assert len(g) == 8 and all(a["rho"] == 0.9 for a in g)
    assert [a["mu"] for a in g] == pytest.approx([0.5, -0.1, 0.3, -0.9, 0.7, -0.2, 1.8, -0.7])
    assert [a["mu"] for a in gaussian_suite(scale=1.0)] == [5, -1, 3, -9, 7, -2, 18, -7]
    s = sinr_suite()
    assert len(s) == 8 and all(a["si_kind"] == "tx_interference" for a in s)
    with pytest.raises(ValueError):
        gaussian_suite(variance="XY")
    for spec in g + s:
        assert arm_from_dict(spec).to_dict()["type"] == spec["type"]
