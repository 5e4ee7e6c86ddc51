"""Index policies: UCBwSI, UCBwSI-Split, UCB1-Normal and UCB-V.

Every policy is a select/update state machine over per-arm running moments.
The hot path (``run_policy``) executes a whole horizon inside one compiled
kernel; ``PolicyState`` drives the very same kernels one step at a time.
The ``*_index`` functions at the bottom recompute an index from a raw
``SampleBuffer`` and serve as the reference for the incremental path.
"""
import math

import numpy as np

from ._jit import njit
from .estimators import (
    CENTERINGS,
    VARIANCE_FORMS,
    InsufficientSamples,
    SampleBuffer,
    cv_estimate,
    split_estimate,
    DegenerateSideInfo,
)
from .stats_core import _percentile_v, percentile_v

UCBWSI = "UCBwSI"
UCBWSI_SPLIT = "UCBwSI-Split"
UCB1_NORMAL = "UCB1-Normal"
UCBV = "UCB-V"
KINDS = (UCBWSI, UCBWSI_SPLIT, UCB1_NORMAL, UCBV)
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
# fewest pulls for which each index is defined
MIN_INIT_PULLS = {UCBWSI: 4, UCBWSI_SPLIT: 4, UCB1_NORMAL: 2, UCBV: 1}

# columns of the per-arm state matrix
_N, _MX, _MW, _CXX, _CWW, _CXW, _EST_MEAN, _EST_VAR, _EST_DOF, _V_LAST, _OMEGA = range(11)
_NCOL = 11


@njit
def _threshold(s, omega):
    return 1e-12 * max(1.0, s * omega * omega)


@njit
def _push(st, xs, ws, i, x, w):
    n = st[i, _N] + 1.0
    k = int(n) - 1
    xs[i, k] = x
    ws[i, k] = w
    dx = x - st[i, _MX]
    dw = w - st[i, _MW]
    mx = st[i, _MX] + dx / n
    mw = st[i, _MW] + dw / n
    st[i, _CXX] += dx * (x - mx)
    st[i, _CWW] += dw * (w - mw)
    st[i, _CXW] += dx * (w - mw)
    st[i, _MX] = mx
    st[i, _MW] = mw
    st[i, _N] = n


@njit
def _plain_estimate(st, i):
    s = st[i, _N]
    st[i, _EST_MEAN] = st[i, _MX]
    st[i, _EST_VAR] = st[i, _CXX] / (s - 1.0) / s
    st[i, _EST_DOF] = s - 1.0


@njit
def _cv_refresh(st, i, centering, vform):
    s = st[i, _N]
    if s < 4.0:
        return
    omega = st[i, _OMEGA]
    thr = _threshold(s, omega)
    d = st[i, _MW] - omega
    cww = st[i, _CWW]
    den = cww + s * d * d if centering == 0 else cww
    if den <= thr or cww <= thr:
        _plain_estimate(st, i)
        return
    cxx = st[i, _CXX]
    cxw = st[i, _CXW]
    beta = cxw / den
    ss = cxx - 2.0 * beta * cxw + beta * beta * cww
    # below the rounding floor of the moment arithmetic the residual is zero
    if ss <= 64.0 * 2.220446049250313e-16 * cxx:
        ss = 0.0
    s2 = ss / (s - 2.0)
    if vform == 0:
        factor = 1.0 / s + d * d / cww
    else:
        factor = 1.0 / (1.0 / s - d * d / cww)
    st[i, _EST_MEAN] = st[i, _MX] - beta * d
    st[i, _EST_VAR] = s2 * factor
    st[i, _EST_DOF] = s - 2.0


@njit
def _split_refresh(st, xs, ws, i, centering):
    n = int(st[i, _N])
    if n < 3:
        return
    omega = st[i, _OMEGA]
    m = n - 1.0
    mx = st[i, _MX]
    mw = st[i, _MW]
    sx = 0.0
    su = 0.0
    sv = 0.0
    sxu = 0.0
    suu = 0.0
    svv = 0.0
    for j in range(n):
        xc = xs[i, j] - mx
        u = ws[i, j] - omega
        v = ws[i, j] - mw
        sx += xc
        su += u
        sv += v
        sxu += xc * u
        suu += u * u
        svv += v * v
    thr = _threshold(m, omega)
    total = 0.0
    for j in range(n):
        xc = xs[i, j] - mx
        u = ws[i, j] - omega
        if centering == 0:
            den = suu - u * u
        else:
            v = ws[i, j] - mw
            den = (svv - v * v) - (sv - v) * (sv - v) / m
        if den <= thr:
            _plain_estimate(st, i)
            return
        num = (sxu - xc * u) - (sx - xc) / m * (su - u)
        total += xs[i, j] + num / den * (omega - ws[i, j])
    mean = total / n
    ss = 0.0
    for j in range(n):
        xc = xs[i, j] - mx
        u = ws[i, j] - omega
        if centering == 0:
            den = suu - u * u
        else:
            v = ws[i, j] - mw
            den = (svv - v * v) - (sv - v) * (sv - v) / m
        num = (sxu - xc * u) - (sx - xc) / m * (su - u)
        r = xs[i, j] + num / den * (omega - ws[i, j]) - mean
        ss += r * r
    st[i, _EST_MEAN] = mean
    st[i, _EST_VAR] = ss / (n * m)
    st[i, _EST_DOF] = m


@njit
def _refresh(kind, st, xs, ws, i, centering, vform):
    if kind == 0:
        _cv_refresh(st, i, centering, vform)
    elif kind == 1:
        _split_refresh(st, xs, ws, i, centering)


@njit
def _index(kind, st, i, t, alpha, zeta, c):
    n = st[i, _N]
    if kind <= 1:
        var = st[i, _EST_VAR]
        if var <= 0.0:
            return st[i, _EST_MEAN]
        v = _percentile_v(t, alpha, st[i, _EST_DOF], st[i, _V_LAST])
        st[i, _V_LAST] = v
        return st[i, _EST_MEAN] + v * math.sqrt(var)
    if kind == 2:
        rad = 16.0 * (st[i, _CXX] / (n - 1.0)) * math.log(t - 1.0) / n
        return st[i, _MX] + math.sqrt(max(rad, 0.0))
    lt = math.log(t)
    vhat = max(st[i, _CXX] / n, 0.0)
    return st[i, _MX] + math.sqrt(2.0 * vhat * zeta * lt / n) + 3.0 * c * zeta * lt / n


@njit
def _select(kind, st, rounds, init_pulls, alpha, zeta, c):
    k = st.shape[0]
    if rounds < k * init_pulls:
        return rounds % k
    best = 0
    best_val = -math.inf
    for i in range(k):
        val = _index(kind, st, i, float(rounds), alpha, zeta, c)
        # strict comparison keeps the lowest index on ties
        if val > best_val:
            best_val = val
            best = i
    return best


@njit
def _run(kind, xtab, wtab, st, xs, ws, horizon, init_pulls, alpha, zeta, c, centering, vform, arms, rewards):
    for r in range(horizon):
        i = _select(kind, st, r, init_pulls, alpha, zeta, c)
        k = int(st[i, _N])
        x = xtab[k, i]
        _push(st, xs, ws, i, x, wtab[k, i])
        _refresh(kind, st, xs, ws, i, centering, vform)
        arms[r] = i
        rewards[r] = x


def _new_state(omegas, capacity):
    k = len(omegas)
    st = np.zeros((k, _NCOL))
    st[:, _OMEGA] = omegas
    st[:, _V_LAST] = -1.0
    return st, np.zeros((k, capacity)), np.zeros((k, capacity))


def _codes(kind, centering, variance_form):
    if kind not in _KIND_CODE:
        raise ValueError(f"unknown policy kind {kind!r}; expected one of {KINDS}")
    if centering not in CENTERINGS:
        raise ValueError(f"centering must be one of {CENTERINGS}")
    if variance_form not in VARIANCE_FORMS:
        raise ValueError(f"variance_form must be one of {VARIANCE_FORMS}")
    return _KIND_CODE[kind], CENTERINGS.index(centering), VARIANCE_FORMS.index(variance_form)


def _check_params(kind, n_arms, alpha, init_pulls):
    if n_arms < 2:
        raise ValueError("K >= 2 required")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if init_pulls < MIN_INIT_PULLS[kind]:
        raise ValueError(f"{kind} needs init_pulls >= {MIN_INIT_PULLS[kind]}")


class PolicyState:
    """Step-wise policy: call ``select_arm`` then ``update`` each round."""

    def __init__(self, kind, omegas, alpha=2.0, zeta=1.2, c=1.0, init_pulls=4,
                 centering="known", variance_form="regression", capacity=64):
        self.kind = kind
        self._code, self._centering, self._vform = _codes(kind, centering, variance_form)
        omegas = np.asarray(omegas, dtype=float)
        _check_params(kind, len(omegas), alpha, init_pulls)
        self.alpha = float(alpha)
        self.zeta = float(zeta)
        self.c = float(c)
        self.init_pulls = int(init_pulls)
        self.centering = centering
        self.variance_form = variance_form
        self.round = 0
        self._st, self._xs, self._ws = _new_state(omegas, max(int(capacity), 1))

    @property
    def n_arms(self):
        return self._st.shape[0]

    @property
    def pulls(self):
        return self._st[:, _N].astype(np.int64)

    @property
    def omegas(self):
        return self._st[:, _OMEGA].copy()

    def buffer(self, i):
        n = int(self._st[i, _N])
        return SampleBuffer(self._st[i, _OMEGA], list(self._xs[i, :n]), list(self._ws[i, :n]))

    def select_arm(self):
        return int(_select(self._code, self._st, self.round, self.init_pulls, self.alpha, self.zeta, self.c))

    def index(self, i):
        """Index of arm ``i`` as evaluated when choosing the next round."""
        return float(_index(self._code, self._st, i, float(self.round), self.alpha, self.zeta, self.c))

    def update(self, arm, reward, side_info):
        n = int(self._st[arm, _N])
        if n == self._xs.shape[1]:
            self._xs = np.concatenate([self._xs, np.zeros_like(self._xs)], axis=1)
            self._ws = np.concatenate([self._ws, np.zeros_like(self._ws)], axis=1)
        _push(self._st, self._xs, self._ws, arm, float(reward), float(side_info))
        _refresh(self._code, self._st, self._xs, self._ws, arm, self._centering, self._vform)
        self.round += 1
        return self


def run_policy(kind, x_table, w_table, omegas, horizon=None, alpha=2.0, zeta=1.2, c=1.0,
               init_pulls=4, centering="known", variance_form="regression"):
    """Play ``horizon`` rounds against pre-drawn per-arm observation streams.

    ``x_table[k, i]`` / ``w_table[k, i]`` is what arm ``i`` returns on its
    ``k``-th pull. Returns the chosen arms and the collected rewards.
    """
    code, cen, vf = _codes(kind, centering, variance_form)
    x_table = np.ascontiguousarray(x_table, dtype=float)
    w_table = np.ascontiguousarray(w_table, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if horizon is None:
        horizon = x_table.shape[0]
    if x_table.shape != w_table.shape or x_table.shape[1] != len(omegas) or x_table.shape[0] < horizon:
        raise ValueError("observation tables must be (>= horizon, K) with K matching omegas")
    _check_params(kind, len(omegas), alpha, init_pulls)
    st, xs, ws = _new_state(omegas, horizon)
    arms = np.zeros(horizon, dtype=np.int64)
    rewards = np.zeros(horizon)
    _run(code, x_table, w_table, st, xs, ws, int(horizon), int(init_pulls), float(alpha),
         float(zeta), float(c), cen, vf, arms, rewards)
    return arms, rewards


# ---------------------------------------------------------------------------
# reference indices computed from a raw buffer
# ---------------------------------------------------------------------------

def ucbwsi_index(buf, t, alpha=2.0, centering="known", variance_form="regression"):
    est = cv_estimate(buf, centering, variance_form)
    if est.variance <= 0.0:
        return est.mean
    return est.mean + percentile_v(t, alpha, est.dof) * math.sqrt(est.variance)


def ucbwsi_split_index(buf, t, alpha=2.0, centering="known"):
    s = len(buf)
    try:
        mean, var = split_estimate(buf, centering)
    except DegenerateSideInfo:
        x = buf.x
        mean, var = float(x.mean()), float(x.var(ddof=1)) / s
    if var <= 0.0:
        return mean
    return mean + percentile_v(t, alpha, s - 1) * math.sqrt(var)


def ucb1_normal_index(buf, t):
    n = len(buf)
    if n < 2:
        raise InsufficientSamples(f"UCB1-Normal needs at least 2 samples, got {n}")
    x = buf.x
    mu = float(x.mean())
    rad = 16.0 * float(np.sum(x * x) - n * mu * mu) / (n - 1) * math.log(t - 1) / n
    return mu + math.sqrt(max(rad, 0.0))


def ucbv_index(buf, t, zeta=1.2, c=1.0):
    n = len(buf)
    if n < 1:
        raise InsufficientSamples("UCB-V needs at least 1 sample")
    x = buf.x
    mu = float(x.mean())
    vhat = float(np.mean((x - mu) ** 2))
    lt = math.log(t)
    return mu + math.sqrt(2.0 * vhat * zeta * lt / n) + 3.0 * c * zeta * lt / n
