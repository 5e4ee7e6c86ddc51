"""Config-driven batch runner: seeded replications, regret traces, CSV output."""
import copy
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import environments as envs
from .policies import KINDS, MIN_INIT_PULLS, run_policy
from .estimators import CENTERINGS, VARIANCE_FORMS
from .stats_core import RandomSource, percentile_v

TRACE_HEADER = "t,policy,run,arm,reward,cum_reward,cum_regret"
SUMMARY_HEADER = "policy,checkpoint,mean_regret,stderr,runs"
DEFAULT_C = 1.5
CALIBRATION_TAG = 0xCA11B4A7E


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the field path."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


def fmt(v):
    """Float with 17 significant digits (round-trips exactly)."""
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicySpec:
    kind: str
    alpha: float = 2.0
    zeta: float = 1.2
    c: float = 1.0
    init_pulls: int = 4
    centering: str = "known"
    variance_form: str = "regression"
    label: str = ""

    @property
    def name(self):
        return self.label or self.kind

    def run_kwargs(self):
        return dict(alpha=self.alpha, zeta=self.zeta, c=self.c, init_pulls=self.init_pulls,
                    centering=self.centering, variance_form=self.variance_form)


@dataclass
class ExperimentConfig:
    horizon: int
    runs: int
    base_seed: int
    policies: list
    arms: list
    omega_mode: str = "exact"
    calibration_n: int = 0
    C: float = DEFAULT_C
    n_mc: int = 10**6
    output_dir: str = "results"
    write_traces: bool = True

    @property
    def n_arms(self):
        return len(self.arms)

    def to_dict(self):
        d = {"horizon": self.horizon, "runs": self.runs, "base_seed": self.base_seed,
             "policies": [vars(p).copy() for p in self.policies], "arms": copy.deepcopy(self.arms),
             "omega_mode": self.omega_mode if self.omega_mode == "exact"
             else {"mode": "calibrated", "n": self.calibration_n},
             "C": self.C, "n_mc": self.n_mc, "output_dir": self.output_dir, "write_traces": self.write_traces}
        return d


def _number(d, key, path, kind=float, default=None, lo=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
    where = f"{path}.{key}" if path else key
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(where, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(where, "must be finite")
    if lo is not None and v < lo:
        raise ConfigError(where, f"must be >= {lo}, got {v}")
    return v


def _parse_policy(p, path):
    if isinstance(p, str):
        p = {"kind": p}
    if not isinstance(p, dict):
        raise ConfigError(path, "policy must be an object or a kind name")
    unknown = set(p) - {"kind", "alpha", "zeta", "c", "init_pulls", "centering", "variance_form", "label"}
    if unknown:
        raise ConfigError(path, f"unknown keys {sorted(unknown)}")
    kind = p.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {list(KINDS)}, got {kind!r}")
    alpha = _number(p, "alpha", path, default=2.0)
    if not alpha > 1:
        raise ConfigError(f"{path}.alpha", "alpha must exceed 1")
    init = _number(p, "init_pulls", path, int, default=4)
    if init < MIN_INIT_PULLS[kind]:
        raise ConfigError(f"{path}.init_pulls", f"{kind} needs init_pulls >= {MIN_INIT_PULLS[kind]}")
    zeta = _number(p, "zeta", path, default=1.2)
    c = _number(p, "c", path, default=1.0)
    if zeta <= 0 or c <= 0:
        raise ConfigError(path, "zeta and c must be positive")
    centering = p.get("centering", "known")
    if centering not in CENTERINGS:
        raise ConfigError(f"{path}.centering", f"must be one of {list(CENTERINGS)}")
    vform = p.get("variance_form", "regression")
    if vform not in VARIANCE_FORMS:
        raise ConfigError(f"{path}.variance_form", f"must be one of {list(VARIANCE_FORMS)}")
    return PolicySpec(kind, alpha, zeta, c, init, centering, vform, str(p.get("label", "")))


def _expand_suite(s):
    if not isinstance(s, dict) or "name" not in s:
        raise ConfigError("suite", "expected an object with a 'name'")
    s = dict(s)
    name = s.pop("name")
    builders = {"gaussian": envs.gaussian_suite, "sinr": envs.sinr_suite}
    if name not in builders:
        raise ConfigError("suite.name", f"must be one of {sorted(builders)}, got {name!r}")
    try:
        return builders[name](**s)
    except (TypeError, ValueError) as e:
        raise ConfigError("suite", str(e)) from None


def parse_config(text):
    """Validate a JSON config (text or already-decoded dict) and fill defaults."""
    if isinstance(text, (str, bytes)):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"invalid JSON: {e}") from None
    else:
        d = copy.deepcopy(text)
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {"horizon", "runs", "base_seed", "policies", "arms", "suite", "omega_mode", "C",
             "n_mc", "output_dir", "write_traces"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError("<root>", f"unknown keys {sorted(unknown)}")

    if "arms" in d and "suite" in d:
        raise ConfigError("arms", "give either 'arms' or 'suite', not both")
    arms = _expand_suite(d["suite"]) if "suite" in d else d.get("arms")
    if not isinstance(arms, list):
        raise ConfigError("arms", "required list of arm specs is missing")
    if len(arms) < 2:
        raise ConfigError("arms", "K ≥ 2 required")
    for i, a in enumerate(arms):
        try:
            envs.arm_from_dict(a)
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ConfigError(f"arms[{i}]", f"invalid arm spec ({type(e).__name__}: {e})") from None

    pols = d.get("policies", list(KINDS))
    if not isinstance(pols, list) or not pols:
        raise ConfigError("policies", "expected a non-empty list")
    policies = [_parse_policy(p, f"policies[{i}]") for i, p in enumerate(pols)]
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise ConfigError("policies", "policy names must be unique; set 'label' to disambiguate")

    horizon = _number(d, "horizon", "", int, default=5000)
    need = max(p.init_pulls for p in policies) * len(arms) + 1
    if horizon < need:
        raise ConfigError("horizon", f"must be at least init_pulls*K + 1 = {need}, got {horizon}")
    runs = _number(d, "runs", "", int, default=50, lo=1)
    seed = _number(d, "base_seed", "", int, default=0, lo=0)
    if seed >= 2**64:
        raise ConfigError("base_seed", "must fit in 64 unsigned bits")

    mode = d.get("omega_mode", "exact")
    cal_n = 0
    if isinstance(mode, dict):
        if mode.get("mode") != "calibrated":
            raise ConfigError("omega_mode.mode", "must be 'calibrated' when omega_mode is an object")
        cal_n = _number(mode, "n", "omega_mode", int, default=10**6, lo=1)
        mode = "calibrated"
    elif isinstance(mode, str) and mode.startswith("calibrated"):
        _, _, n = mode.partition(":")
        try:
            cal_n = int(n) if n else 10**6
        except ValueError:
            raise ConfigError("omega_mode", f"bad calibration size in {mode!r}") from None
        if cal_n < 1:
            raise ConfigError("omega_mode", "calibration size must be >= 1")
        mode = "calibrated"
    elif mode != "exact":
        raise ConfigError("omega_mode", f"must be 'exact' or calibrated, got {mode!r}")

    C = _number(d, "C", "", default=DEFAULT_C)
    if C <= 0:
        raise ConfigError("C", "must be positive")
    n_mc = _number(d, "n_mc", "", int, default=10**6, lo=10**5)
    out = d.get("output_dir", "results")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "must be a string path")
    wt = d.get("write_traces", True)
    if not isinstance(wt, bool):
        raise ConfigError("write_traces", "must be true or false")
    return ExperimentConfig(horizon, runs, seed, policies, arms, mode, cal_n, C, n_mc, out, wt)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(path), f"cannot read config ({e.strerror})") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# seeds and setup
# ---------------------------------------------------------------------------

def run_seed(base_seed, kind, r):
    """base_seed XOR the first 8 bytes (little endian) of blake2b("<kind>/<r>")."""
    h = hashlib.blake2b(f"{kind}/{r}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(h, "little")) & (2**64 - 1)


@dataclass
class Prepared:
    """Per-batch constants shared by all replications."""

    arms: list
    omegas: np.ndarray
    means: np.ndarray
    mu_star: float
    optimal: int


def build_environment(config, seed):
    return envs.Environment([envs.arm_from_dict(a) for a in config.arms], RandomSource(seed))


def prepare(config):
    env = build_environment(config, 0)
    tm = env.true_means(config.n_mc, RandomSource(config.base_seed ^ 0x7EE))
    if config.omega_mode == "calibrated":
        omegas = env.calibrate_si_means(config.calibration_n, RandomSource(config.base_seed ^ CALIBRATION_TAG))
    else:
        omegas = env.si_means
    return Prepared(env.arms, omegas, tm.means, tm.mu_star, tm.optimal)


# ---------------------------------------------------------------------------
# traces and regret
# ---------------------------------------------------------------------------

@dataclass
class RegretTrace:
    policy: str
    run: int
    seed: int
    arms: np.ndarray
    rewards: np.ndarray

    def __len__(self):
        return len(self.arms)

    @property
    def t(self):
        return np.arange(1, len(self.arms) + 1)

    @property
    def cum_reward(self):
        return np.cumsum(self.rewards)

    def pulls(self, n_arms):
        return np.bincount(self.arms, minlength=n_arms)


def empirical_regret(trace, mu_star):
    """R_t = t * mu_star - sum of the first t rewards."""
    rewards = trace.rewards if isinstance(trace, RegretTrace) else np.asarray(trace, dtype=float)
    return np.arange(1, len(rewards) + 1) * mu_star - np.cumsum(rewards)


def pseudo_regret(trace, means):
    """Sum of gaps of the chosen arms; same expectation, less noise."""
    means = np.asarray(means, dtype=float)
    return np.cumsum(means.max() - means[trace.arms])


def _play(config, prep, policy, seed, horizon):
    env = envs.Environment(prep.arms, RandomSource(seed))
    xt, wt = env.draw_streams(horizon)
    arms, rewards = run_policy(policy.kind, xt, wt, prep.omegas, horizon, **policy.run_kwargs())
    return arms, rewards


def run_single(config, policy, seed, run=0, horizon=None, prepared=None):
    """One deterministic replication. ``horizon`` overrides the config's T."""
    if isinstance(policy, (str, dict)):
        policy = _parse_policy(policy, "policy")
    prep = prepared if prepared is not None else prepare(config)
    T = config.horizon if horizon is None else int(horizon)
    if T < 1:
        raise ValueError("horizon must be >= 1")
    arms, rewards = _play(config, prep, policy, seed, T)
    return RegretTrace(policy.name, run, seed, arms, rewards)


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------

def checkpoints(T):
    return sorted({max(1, T // 10), max(1, T // 2), T})


def trace_csv(trace, mu_star):
    cum = trace.cum_reward
    reg = empirical_regret(trace, mu_star)
    lines = [TRACE_HEADER]
    name, run = trace.policy, trace.run
    for k in range(len(trace)):
        lines.append(f"{k + 1},{name},{run},{trace.arms[k]},{fmt(trace.rewards[k])},{fmt(cum[k])},{fmt(reg[k])}")
    return "\n".join(lines) + "\n"


def trace_path(out_dir, name, run):
    return Path(out_dir) / "traces" / f"{name}__run{run:04d}.csv"


def _task(args):
    config, prep, pi, r, out_dir = args
    policy = config.policies[pi]
    seed = run_seed(config.base_seed, policy.kind, r)
    trace = run_single(config, policy, seed, run=r, prepared=prep)
    if out_dir is not None:
        p = trace_path(out_dir, policy.name, r)
        try:
            p.write_text(trace_csv(trace, prep.mu_star))
        except OSError as e:
            raise OSError(f"cannot write trace {p}: {e.strerror}") from None
    reg = empirical_regret(trace, prep.mu_star)
    pseudo = pseudo_regret(trace, prep.means)
    cps = checkpoints(config.horizon)
    return (pi, r, np.array([reg[c - 1] for c in cps]), float(pseudo[-1]),
            trace.pulls(config.n_arms), reg)


@dataclass
class BatchResult:
    config: ExperimentConfig
    checkpoints: list
    regret: dict            # name -> (runs, n_checkpoints) realized regret
    pseudo_regret: dict     # name -> (runs,) final pseudo-regret
    pulls: dict             # name -> (runs, K) pull counts at T
    curve_mean: dict        # name -> (T,) mean realized regret curve
    curve_stderr: dict      # name -> (T,) standard error of that mean
    mu_star: float
    means: np.ndarray
    summary_rows: list = field(default_factory=list)
    out_dir: Path = None

    def final(self, name):
        return self.regret[name][:, -1]

    def mean_final(self, name):
        return float(self.final(name).mean())

    def summary_csv(self):
        lines = [SUMMARY_HEADER]
        for name, cp, m, se, n in self.summary_rows:
            lines.append(f"{name},{cp},{fmt(m)},{fmt(se)},{n}")
        return "\n".join(lines) + "\n"


def run_batch(config, out_dir=None, workers=1, write=True):
    """Run every (policy, replication) pair and write summary.csv (+ traces).

    Results do not depend on ``workers``: each task owns its seeds and results
    are aggregated in task order.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir) if write else None
    if out is not None:
        try:
            (out / "traces").mkdir(parents=True, exist_ok=True) if config.write_traces else out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OSError(f"cannot create output directory {out}: {e.strerror}") from None
    prep = prepare(config)
    trace_dir = out if (out is not None and config.write_traces) else None
    tasks = [(config, prep, pi, r, trace_dir) for pi in range(len(config.policies)) for r in range(config.runs)]
    if workers <= 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

    cps = checkpoints(config.horizon)
    regret, pseudo, pulls, cmean, cse = {}, {}, {}, {}, {}
    for pi, p in enumerate(config.policies):
        rows = [res for res in results if res[0] == pi]
        regret[p.name] = np.array([res[2] for res in rows])
        pseudo[p.name] = np.array([res[3] for res in rows])
        pulls[p.name] = np.array([res[4] for res in rows])
        curves = np.array([res[5] for res in rows])
        cmean[p.name] = curves.mean(axis=0)
        cse[p.name] = curves.std(axis=0, ddof=1) / math.sqrt(len(rows)) if len(rows) > 1 else np.full(config.horizon, np.nan)
    res = BatchResult(config, cps, regret, pseudo, pulls, cmean, cse, prep.mu_star, prep.means, out_dir=out)
    for p in config.policies:
        r = regret[p.name]
        n = r.shape[0]
        for j, cp in enumerate(cps):
            se = r[:, j].std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
            res.summary_rows.append((p.name, cp, r[:, j].mean(), se, n))
    if out is not None:
        try:
            (out / "summary.csv").write_text(res.summary_csv())
            (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise OSError(f"cannot write results in {out}: {e.strerror}") from None
    return res


# ---------------------------------------------------------------------------
# regret bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundParams:
    """Gaps, correlations and reward variances of the suboptimal arms."""

    deltas: tuple
    rhos: tuple
    sigmas: tuple           # variances sigma_i^2
    C: float = DEFAULT_C
    alpha: float = 2.0

    def __post_init__(self):
        if not len(self.deltas) == len(self.rhos) == len(self.sigmas):
            raise ValueError("deltas, rhos and sigmas must have equal length")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("gaps of suboptimal arms must be positive")
        if any(abs(r) > 1 for r in self.rhos):
            raise ValueError("|rho| must not exceed 1")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("variances must be nonnegative")

    @classmethod
    def from_gaussian_arms(cls, arms, C=DEFAULT_C, alpha=2.0):
        """Parameters from jointly Gaussian arm specs; the best arm is dropped."""
        if any(a.get("type") != "gaussian" for a in arms):
            raise ValueError("the regret bound needs jointly Gaussian arms")
        mu = np.array([a["mu"] for a in arms], dtype=float)
        best = int(np.argmax(mu))
        keep = [i for i in range(len(arms)) if i != best]
        if any(mu[i] == mu[best] for i in keep):
            raise ValueError("the best arm must be unique for the bound to be finite")
        return cls(tuple(float(mu[best] - mu[i]) for i in keep),
                   tuple(float(arms[i]["rho"]) for i in keep),
                   tuple(float(arms[i]["sigma"]) ** 2 for i in keep), C, alpha)


def theoretical_regret_bound(params, T, V=None):
    """8 * sum_i (V^2 C (1 - rho_i^2) sigma_i^2 / Delta_i + Delta_i pi^2 / 3 + Delta_i)."""
    if V is None:
        V = percentile_v(T, params.alpha, T - 2)
    total = 0.0
    for d, r, s2 in zip(params.deltas, params.rhos, params.sigmas):
        total += V * V * params.C * (1.0 - r * r) * s2 / d + d * math.pi ** 2 / 3.0 + d
    return 8.0 * total


def empirical_c(pulls, T, alpha=2.0):
    """Mean of (V_{T,N_i} / V_{T,T})^2 over runs, per arm (needs N_i >= 3)."""
    pulls = np.atleast_2d(pulls)
    vt = percentile_v(T, alpha, T - 2)
    out = np.empty(pulls.shape[1])
    for i in range(pulls.shape[1]):
        vals = [(percentile_v(T, alpha, int(n) - 2) / vt) ** 2 for n in pulls[:, i]]
        out[i] = float(np.mean(vals))
    return out
