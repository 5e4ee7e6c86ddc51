"""Arm models that emit (reward, side-information) pairs, and default suites."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .stats_core import BivariateGaussianSpec, RandomSource, bivariate_from_normals

_DB = math.log(10.0) / 10.0

# operating points of the cognitive-radio study: per-channel mean SNR (dB),
# measured-interference mean (dB) and their low/high spread sets
SNR_MEAN_DB = (5.0, -1.0, 3.0, -9.0, 7.0, -2.0, 18.0, -7.0)
SNR_STD_LOW = (0.5, 0.5, 1.0, 0.8, 0.1, 0.3, 0.2, 0.4)
SNR_STD_HIGH = (2.0,) * 8
SI_MEAN_DB = (1.7, 0.2, -3.0, -0.9, -0.4, 1.0, -0.6, 1.0)
SI_STD_LOW = (0.2, 0.4, 0.3, 0.2, 0.3, 0.1, 0.4, 0.7)
SI_STD_HIGH = (2.0,) * 8


@dataclass(frozen=True)
class ObservationPair:
    reward: float
    side_info: float


def shannon_rate(sinr):
    """Spectral efficiency log2(1 + sinr) in bits/s/Hz."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be nonnegative")
    out = np.log1p(sinr) / math.log(2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# nonnegative power distributions (SINR factors)
# ---------------------------------------------------------------------------

class PowerDist:
    """Distribution of a power quantity, parsed from ``{"dist": ..., ...}``."""

    KINDS = ("constant", "lognormal_db", "exponential", "uniform")

    def __init__(self, spec):
        if isinstance(spec, (int, float)):
            spec = {"dist": "constant", "value": float(spec)}
        spec = dict(spec)
        kind = spec.get("dist")
        if kind not in self.KINDS:
            raise ValueError(f"unknown power distribution {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.spec = spec
        if kind == "constant":
            self._mean = float(spec["value"])
        elif kind == "lognormal_db":
            m, s = float(spec["mean_db"]), float(spec.get("std_db", 0.0))
            self._mean = math.exp(m * _DB + 0.5 * (s * _DB) ** 2)
        elif kind == "exponential":
            self._mean = float(spec["mean"])
        else:
            lo, hi = float(spec["low"]), float(spec["high"])
            if hi < lo:
                raise ValueError("uniform needs low <= high")
            self._mean = 0.5 * (lo + hi)
        if self._mean < 0 or (kind == "uniform" and float(spec["low"]) < 0):
            raise ValueError(f"power distribution must be nonnegative: {spec}")

    @property
    def mean(self):
        return self._mean

    def sample(self, rng, n):
        g = rng.generator
        if self.kind == "constant":
            return np.full(n, self._mean)
        if self.kind == "lognormal_db":
            z = g.standard_normal(n)
            return np.power(10.0, (self.spec["mean_db"] + self.spec.get("std_db", 0.0) * z) / 10.0)
        if self.kind == "exponential":
            return g.exponential(self._mean, n)
        return g.uniform(self.spec["low"], self.spec["high"], n)

    def to_dict(self):
        return dict(self.spec)


# ---------------------------------------------------------------------------
# arm models
# ---------------------------------------------------------------------------

class JointGaussianArm:
    """Reward and side information jointly Gaussian."""

    type = "gaussian"

    def __init__(self, mu, sigma, omega, sigma_w, rho):
        self.spec = BivariateGaussianSpec(mu, omega, sigma, sigma_w, rho)

    @property
    def si_mean(self):
        return self.spec.mean_w

    @property
    def analytic_mean(self):
        return self.spec.mean_x

    def sample(self, rng, n):
        return bivariate_from_normals(self.spec, rng.standard_normal((n, 2)))

    def to_dict(self):
        s = self.spec
        return {"type": "gaussian", "mu": s.mean_x, "sigma": s.std_x, "omega": s.mean_w,
                "sigma_w": s.std_w, "rho": s.rho}


class SinrArm:
    """Channel whose rate is log2(1 + SINR) with one measurable factor.

    ``si_kind="tx_interference"``: the side information is the interference
    measured at the transmitter and the SINR is
    ``g P / (g W + I + noise)`` (drop the ``g`` on ``W`` with
    ``scale_interference_by_gain=False``).
    ``si_kind="channel_gain"``: the side information is the gain itself and
    the SINR is ``W P / (I + noise)``.
    """

    type = "sinr"
    SI_KINDS = ("tx_interference", "channel_gain")

    def __init__(self, power, gain, noise, hidden_interference, measured_interference=0.0,
                 si_kind="tx_interference", si_mean=None, scale_interference_by_gain=True):
        if si_kind not in self.SI_KINDS:
            raise ValueError(f"si_kind must be one of {self.SI_KINDS}, got {si_kind!r}")
        if power < 0 or noise < 0:
            raise ValueError("power and noise must be nonnegative")
        self.power = float(power)
        self.noise = float(noise)
        self.gain = PowerDist(gain)
        self.hidden_interference = PowerDist(hidden_interference)
        self.measured_interference = PowerDist(measured_interference)
        self.si_kind = si_kind
        self.scale_interference_by_gain = bool(scale_interference_by_gain)
        if si_mean is None:
            si_mean = self.gain.mean if si_kind == "channel_gain" else self.measured_interference.mean
        self.si_mean = float(si_mean)

    analytic_mean = None

    def sample(self, rng, n):
        g = self.gain.sample(rng, n)
        i = self.hidden_interference.sample(rng, n)
        if self.si_kind == "channel_gain":
            with np.errstate(divide="ignore", invalid="ignore"):
                sinr = np.where(self.power > 0, g * self.power / (i + self.noise), 0.0)
            return shannon_rate(sinr), g
        w = self.measured_interference.sample(rng, n)
        denom = (g * w if self.scale_interference_by_gain else w) + i + self.noise
        with np.errstate(divide="ignore", invalid="ignore"):
            sinr = np.where(self.power > 0, g * self.power / denom, 0.0)
        return shannon_rate(sinr), w

    def to_dict(self):
        return {"type": "sinr", "si_kind": self.si_kind, "power": self.power, "gain": self.gain.to_dict(),
                "noise": self.noise, "hidden_interference": self.hidden_interference.to_dict(),
                "measured_interference": self.measured_interference.to_dict(),
                "scale_interference_by_gain": self.scale_interference_by_gain, "si_mean": self.si_mean}


class Marginal:
    """Continuous marginal for the copula arm: normal, lognormal or scaled beta."""

    KINDS = ("normal", "lognormal", "beta")

    def __init__(self, spec):
        spec = dict(spec)
        kind = spec.get("dist")
        if kind not in self.KINDS:
            raise ValueError(f"unknown marginal {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.spec = spec
        if kind == "normal":
            self.mean = float(spec["mean"])
        elif kind == "lognormal":
            self.mean = math.exp(float(spec["mu"]) + 0.5 * float(spec["sigma"]) ** 2)
        else:
            a, b = float(spec["a"]), float(spec["b"])
            if a <= 0 or b <= 0:
                raise ValueError("beta marginal needs a, b > 0")
            self.mean = float(spec.get("low", 0.0)) + float(spec.get("scale", 1.0)) * a / (a + b)

    def from_normal(self, z):
        s = self.spec
        if self.kind == "normal":
            return s["mean"] + s["std"] * z
        if self.kind == "lognormal":
            return np.exp(s["mu"] + s["sigma"] * z)
        u = special.ndtr(z)
        return s.get("low", 0.0) + s.get("scale", 1.0) * stats.beta.ppf(u, s["a"], s["b"])

    def to_dict(self):
        return dict(self.spec)


def _shifted_mean(v):
    # exact for constant samples, and less cancellation for large offsets
    return float(v[0] + np.mean(v - v[0]))


def copula_rho_from_rank(rank_corr):
    """Gaussian-copula correlation giving Spearman rank correlation ``rank_corr``."""
    return 2.0 * math.sin(math.pi * rank_corr / 6.0)


class GeneralArm:
    """Non-Gaussian (reward, SI) pair joined by a Gaussian copula."""

    type = "general"

    def __init__(self, x, w, copula_rho=None, rank_corr=None):
        if (copula_rho is None) == (rank_corr is None):
            raise ValueError("give exactly one of copula_rho and rank_corr")
        if copula_rho is None:
            copula_rho = copula_rho_from_rank(rank_corr)
        if not -1.0 <= copula_rho <= 1.0:
            raise ValueError("copula correlation must lie in [-1, 1]")
        self.x = Marginal(x)
        self.w = Marginal(w)
        self.copula_rho = float(copula_rho)

    @property
    def si_mean(self):
        return self.w.mean

    @property
    def analytic_mean(self):
        return self.x.mean

    def sample(self, rng, n):
        z = rng.standard_normal((n, 2))
        r = self.copula_rho
        zw = r * z[:, 0] + math.sqrt(max(0.0, 1.0 - r * r)) * z[:, 1]
        return self.x.from_normal(z[:, 0]), self.w.from_normal(zw)

    def to_dict(self):
        return {"type": "general", "x": self.x.to_dict(), "w": self.w.to_dict(), "copula_rho": self.copula_rho}


def arm_from_dict(spec):
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind == "gaussian":
        return JointGaussianArm(spec["mu"], spec["sigma"], spec["omega"], spec["sigma_w"], spec["rho"])
    if kind == "sinr":
        return SinrArm(**spec)
    if kind == "general":
        return GeneralArm(**spec)
    raise ValueError(f"unknown arm type {kind!r}")


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrueMeans:
    means: np.ndarray
    stderr: np.ndarray
    optimal: int
    mu_star: float


class Environment:
    """K arms sharing one random stream; pulls are i.i.d. across rounds."""

    def __init__(self, arms, rng=None):
        arms = list(arms)
        if len(arms) < 2:
            raise ValueError("K >= 2 required")
        self.arms = arms
        self.rng = rng if rng is not None else RandomSource(0)

    @property
    def n_arms(self):
        return len(self.arms)

    @property
    def si_means(self):
        return np.array([a.si_mean for a in self.arms])

    def pull(self, i):
        x, w = self.arms[i].sample(self.rng, 1)
        return ObservationPair(float(x[0]), float(w[0]))

    def draw_streams(self, n, rng=None):
        """(n, K) tables; row k holds what each arm yields on its k-th pull."""
        rng = rng if rng is not None else self.rng
        xs = np.empty((n, self.n_arms))
        ws = np.empty((n, self.n_arms))
        for i, arm in enumerate(self.arms):
            xs[:, i], ws[:, i] = arm.sample(rng, n)
        return xs, ws

    def true_means(self, n_mc=10**5, rng=None):
        """Per-arm mean rewards: exact where known, Monte-Carlo otherwise."""
        rng = rng if rng is not None else RandomSource(0x5EED)
        means = np.empty(self.n_arms)
        se = np.zeros(self.n_arms)
        for i, arm in enumerate(self.arms):
            if arm.analytic_mean is not None:
                means[i] = arm.analytic_mean
                continue
            x, _ = arm.sample(rng, n_mc)
            means[i] = _shifted_mean(x)
            se[i] = (x - x[0]).std(ddof=1) / math.sqrt(n_mc)
        best = int(np.argmax(means))
        return TrueMeans(means, se, best, float(means[best]))

    def calibrate_si_means(self, n, rng=None):
        """Per-arm sample mean of ``n`` side-information draws."""
        if n < 1:
            raise ValueError("calibration needs n >= 1")
        rng = rng if rng is not None else RandomSource(0xCA1B)
        return np.array([_shifted_mean(arm.sample(rng, n)[1]) for arm in self.arms])


# ---------------------------------------------------------------------------
# default suites
# ---------------------------------------------------------------------------

def _spreads(variance):
    if variance not in ("LL", "HL", "LH", "HH"):
        raise ValueError("variance must be one of LL, HL, LH, HH (reward spread, SI spread)")
    sx = SNR_STD_LOW if variance[0] == "L" else SNR_STD_HIGH
    sw = SI_STD_LOW if variance[1] == "L" else SI_STD_HIGH
    return sx, sw


def gaussian_suite(rho=0.8, variance="HH", scale=0.1):
    """Jointly Gaussian arms on the cognitive-radio operating points.

    Mean rewards are the SNR means times ``scale`` (0.1 reads them in bels),
    so the gaps are comparable to the reward spread and exploration matters.
    """
    sx, sw = _spreads(variance)
    return [{"type": "gaussian", "mu": scale * m, "sigma": s, "omega": om, "sigma_w": s_w, "rho": rho}
            for m, s, om, s_w in zip(SNR_MEAN_DB, sx, SI_MEAN_DB, sw)]


def sinr_suite(variance="LH", hidden_mean_db=-10.0, hidden_std_db=2.0, scale_interference_by_gain=True):
    """Interference-as-SI channels: lognormal gain and measured interference.

    Unit power and unit noise, so the gain draw is the SNR; the measured
    interference is a lognormal power around the SI means (dB re noise).
    """
    sx, sw = _spreads(variance)
    arms = []
    for m, s, om, s_w in zip(SNR_MEAN_DB, sx, SI_MEAN_DB, sw):
        arms.append({
            "type": "sinr", "si_kind": "tx_interference", "power": 1.0, "noise": 1.0,
            "gain": {"dist": "lognormal_db", "mean_db": m, "std_db": s},
            "measured_interference": {"dist": "lognormal_db", "mean_db": om, "std_db": s_w},
            "hidden_interference": {"dist": "lognormal_db", "mean_db": hidden_mean_db, "std_db": hidden_std_db},
            "scale_interference_by_gain": scale_interference_by_gain,
        })
    return arms
