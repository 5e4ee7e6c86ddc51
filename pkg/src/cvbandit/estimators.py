"""Control-variate estimators of an arm's mean reward.

Buffer-level functions use straightforward two-pass sums over the stored
samples. They are the reference path; the policy kernels keep running moments
instead and are checked against these.

Two knobs select estimator variants:

``centering``
    ``"known"`` centres the side information at its known mean in the
    coefficient estimate (numerator and denominator), exactly as the
    coefficient formula is usually written for this algorithm.
    ``"sample"`` centres it at the sample mean, which is the ordinary
    least-squares slope.
``variance_form``
    ``"regression"`` is the prediction-variance estimator
    ``S^2 (1/s + (omega_hat - omega)^2 / sum (W - omega_hat)^2)``.
    ``"closed_form"`` is ``S^2 (1/s - (sum (W - omega))^2 / (s^2 sum (W - omega_hat)^2))^-1``,
    kept for comparison only; it is biased and can be negative.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .stats_core import percentile_v

CENTERINGS = ("known", "sample")
VARIANCE_FORMS = ("regression", "closed_form")
COND_LIMIT = 1e10


class DegenerateSideInfo(ValueError):
    """Side information has (numerically) zero spread around its centre."""


class InsufficientSamples(ValueError):
    pass


class SingularSideInfo(ValueError):
    """The side-information covariance system cannot be solved reliably."""


def degenerate_threshold(s, omega):
    return 1e-12 * max(1.0, s * omega * omega)


@dataclass
class SampleBuffer:
    """Reward / side-information history of one arm plus the known SI mean."""

    omega: float
    xs: list = field(default_factory=list)
    ws: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.xs) != len(self.ws):
            raise ValueError("xs and ws must have equal length")
        self.xs = [float(v) for v in self.xs]
        self.ws = [float(v) for v in self.ws]

    def append(self, x, w):
        self.xs.append(float(x))
        self.ws.append(float(w))

    def __len__(self):
        return len(self.xs)

    @property
    def x(self):
        return np.asarray(self.xs, dtype=float)

    @property
    def w(self):
        return np.asarray(self.ws, dtype=float)


@dataclass(frozen=True)
class CvEstimate:
    mean: float
    variance: float
    beta: float
    n: int
    dof: int
    degenerate: bool = False


@dataclass
class MultiSampleBuffer:
    """History with q side-information columns per draw."""

    omegas: np.ndarray
    xs: np.ndarray
    ws: np.ndarray

    def __post_init__(self):
        self.omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        self.xs = np.asarray(self.xs, dtype=float)
        self.ws = np.asarray(self.ws, dtype=float).reshape(len(self.xs), -1)
        if self.ws.shape[1] != len(self.omegas):
            raise ValueError(f"ws has {self.ws.shape[1]} columns but {len(self.omegas)} SI means were given")

    def __len__(self):
        return len(self.xs)

    @property
    def q(self):
        return len(self.omegas)


def _check_variant(centering, variance_form="regression"):
    if centering not in CENTERINGS:
        raise ValueError(f"centering must be one of {CENTERINGS}, got {centering!r}")
    if variance_form not in VARIANCE_FORMS:
        raise ValueError(f"variance_form must be one of {VARIANCE_FORMS}, got {variance_form!r}")


# ---------------------------------------------------------------------------
# single side information
# ---------------------------------------------------------------------------

def optimal_beta(cov_xw, var_w):
    """Variance-minimising coefficient Cov(X, W) / Var(W)."""
    if not var_w > 0:
        raise DegenerateSideInfo(f"side-information variance must be positive, got {var_w}")
    return cov_xw / var_w


def transform_sample(x, w, omega, beta):
    return x + beta * (omega - w)


def beta_hat(buf, centering="known"):
    _check_variant(centering)
    s = len(buf)
    if s < 2:
        raise InsufficientSamples(f"coefficient estimate needs at least 2 samples, got {s}")
    x, w = buf.x, buf.w
    xc = x - x.mean()
    wc = w - (buf.omega if centering == "known" else w.mean())
    den = float(np.dot(wc, wc))
    if den <= degenerate_threshold(s, buf.omega):
        raise DegenerateSideInfo(f"sum of squared side-information deviations is {den:.3g}")
    # sum (x - mean x) * const vanishes, so the numerator is centering-independent
    return float(np.dot(xc, w - buf.omega)) / den


def cv_point_estimate(buf, centering="known", beta=None):
    """mu_hat + beta * (omega - omega_hat); ``beta`` defaults to the estimate."""
    if beta is None:
        beta = beta_hat(buf, centering)
    x, w = buf.x, buf.w
    return float(x.mean() + beta * (buf.omega - w.mean()))


def _variance_factor(w, omega, variance_form):
    s = len(w)
    wbar = w.mean()
    sww = float(np.dot(w - wbar, w - wbar))
    if sww <= degenerate_threshold(s, omega):
        raise DegenerateSideInfo(f"side-information sample variance is {sww:.3g}")
    d = wbar - omega
    if variance_form == "regression":
        return 1.0 / s + d * d / sww
    return 1.0 / (1.0 / s - (s * d) ** 2 / (s * s * sww))


def cv_variance_estimate(buf, centering="known", variance_form="regression"):
    """Estimated variance of the control-variate point estimate."""
    _check_variant(centering, variance_form)
    s = len(buf)
    if s < 4:
        raise InsufficientSamples(f"variance estimate needs at least 4 samples, got {s}")
    beta = beta_hat(buf, centering)
    factor = _variance_factor(buf.w, buf.omega, variance_form)
    xbar = buf.x + beta * (buf.omega - buf.w)
    resid = xbar - xbar.mean()
    s2 = float(np.dot(resid, resid)) / (s - 2)
    return s2 * factor


def cv_estimate(buf, centering="known", variance_form="regression", use_side_info=True):
    """Point estimate, its variance and the coefficient, with a no-SI fallback.

    Degenerate side information (or ``use_side_info=False``) yields the plain
    sample mean with the classical ``var/s`` estimate on ``s - 1`` degrees of
    freedom instead of raising.
    """
    s = len(buf)
    if s < 4:
        raise InsufficientSamples(f"estimator needs at least 4 samples, got {s}")
    if use_side_info:
        try:
            beta = beta_hat(buf, centering)
            var = cv_variance_estimate(buf, centering, variance_form)
        except DegenerateSideInfo:
            pass
        else:
            mean = cv_point_estimate(buf, centering, beta=beta)
            return CvEstimate(mean, var, beta, s, s - 2)
    x = buf.x
    return CvEstimate(float(x.mean()), float(x.var(ddof=1)) / s, 0.0, s, s - 1, degenerate=use_side_info)


def confidence_radius(buf, t, alpha, centering="known", variance_form="regression"):
    """V * sqrt(nu_hat) with V the t-percentile for ``s - 2`` degrees of freedom."""
    var = cv_variance_estimate(buf, centering, variance_form)
    if var == 0.0:
        return 0.0
    return percentile_v(t, alpha, len(buf) - 2) * math.sqrt(var)


def _loo_betas(x, w, omega, centering):
    s = len(x)
    m = s - 1
    xc = x - x.mean()
    u = w - omega
    sx = xc.sum()
    su = u.sum()
    mx = (sx - xc) / m
    num = (np.dot(xc, u) - xc * u) - mx * (su - u)
    if centering == "known":
        den = np.dot(u, u) - u * u
    else:
        v = w - w.mean()
        sv = v.sum()
        den = (np.dot(v, v) - v * v) - (sv - v) ** 2 / m
    if np.any(den <= degenerate_threshold(m, omega)):
        j = int(np.argmin(den))
        raise DegenerateSideInfo(f"leave-one-out group {j} has degenerate side information")
    return num / den


def split_transformed_samples(buf, centering="known"):
    """Splitting samples X_j + beta^(-j) (omega - W_j), beta^(-j) fitted without pair j."""
    _check_variant(centering)
    s = len(buf)
    if s < 3:
        raise InsufficientSamples(f"splitting needs at least 3 samples, got {s}")
    x, w = buf.x, buf.w
    return x + _loo_betas(x, w, buf.omega, centering) * (buf.omega - w)


def split_estimate(buf, centering="known"):
    """Mean of the splitting samples and the variance of that mean."""
    xs = split_transformed_samples(buf, centering)
    s = len(xs)
    mean = float(xs.mean())
    d = xs - mean
    return mean, float(np.dot(d, d)) / (s * (s - 1))


# ---------------------------------------------------------------------------
# multiple side informations
# ---------------------------------------------------------------------------

def multi_beta_hat(buf):
    """Coefficient vector (W'W - s w w')^-1 (W'X - s w mu) via a pivoted solve."""
    s, q = len(buf), buf.q
    if s < q + 2:
        raise InsufficientSamples(f"need at least q + 2 = {q + 2} samples, got {s}")
    wc = buf.ws - buf.ws.mean(axis=0)
    a = wc.T @ wc
    b = wc.T @ (buf.xs - buf.xs.mean())
    if not np.all(np.isfinite(a)) or np.linalg.cond(a) > COND_LIMIT:
        raise SingularSideInfo("side-information covariance matrix is numerically singular")
    return np.linalg.solve(a, b)


def multi_cv_point_estimate(buf):
    beta = multi_beta_hat(buf)
    return float(buf.xs.mean() + beta @ (buf.omegas - buf.ws.mean(axis=0)))


# ---------------------------------------------------------------------------
# batched forms for Monte-Carlo studies: rows are independent replications
# ---------------------------------------------------------------------------

def cv_estimate_batch(x, w, omega, centering="known", variance_form="regression"):
    """Vectorised (mean, variance, beta) over the rows of ``x`` and ``w``.

    Degenerate rows come back as NaN rather than raising.
    """
    _check_variant(centering, variance_form)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    s = x.shape[1]
    xm = x.mean(axis=1, keepdims=True)
    wm = w.mean(axis=1, keepdims=True)
    xc = x - xm
    u = w - omega
    num = np.einsum("ij,ij->i", xc, u)
    wc = u if centering == "known" else w - wm
    den = np.einsum("ij,ij->i", wc, wc)
    sww = np.einsum("ij,ij->i", w - wm, w - wm)
    bad = (den <= degenerate_threshold(s, omega)) | (sww <= degenerate_threshold(s, omega))
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(bad, np.nan, num / den)
        d = wm[:, 0] - omega
        mean = xm[:, 0] - beta * d
        resid = xc - beta[:, None] * (w - wm)
        s2 = np.einsum("ij,ij->i", resid, resid) / (s - 2)
        if variance_form == "regression":
            factor = 1.0 / s + d * d / sww
        else:
            factor = 1.0 / (1.0 / s - d * d / sww)
        var = s2 * factor
    return mean, var, beta


def split_estimate_batch(x, w, omega, centering="known"):
    """Vectorised splitting (mean, variance) over rows."""
    _check_variant(centering)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    s = x.shape[1]
    m = s - 1
    xc = x - x.mean(axis=1, keepdims=True)
    u = w - omega
    sx = xc.sum(axis=1, keepdims=True)
    su = u.sum(axis=1, keepdims=True)
    sxu = np.einsum("ij,ij->i", xc, u)[:, None]
    num = (sxu - xc * u) - (sx - xc) / m * (su - u)
    if centering == "known":
        den = np.einsum("ij,ij->i", u, u)[:, None] - u * u
    else:
        v = w - w.mean(axis=1, keepdims=True)
        sv = v.sum(axis=1, keepdims=True)
        den = (np.einsum("ij,ij->i", v, v)[:, None] - v * v) - (sv - v) ** 2 / m
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(den <= degenerate_threshold(m, omega), np.nan, num / den)
        xs = x + beta * (omega - w)
    mean = xs.mean(axis=1)
    d = xs - mean[:, None]
    return mean, np.einsum("ij,ij->i", d, d) / (s * m)
