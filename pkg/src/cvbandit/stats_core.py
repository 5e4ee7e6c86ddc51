"""Numerical primitives: incomplete beta, Student-t, seeded Gaussian sampling."""
import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_FPMIN = 1e-300
_CF_EPS = 1e-16
_CF_MAXIT = 100000


class DomainError(ValueError):
    """Argument outside the domain of a numerical routine."""


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit
def _stirlerr(z):
    # lgamma(z) minus its Stirling approximation
    if z < 10.0:
        return math.lgamma(z) - ((z - 0.5) * math.log(z) - z + _HALF_LOG_2PI)
    iz = 1.0 / z
    iz2 = iz * iz
    return iz * (1.0 / 12.0 - iz2 * (1.0 / 360.0 - iz2 * (1.0 / 1260.0 - iz2 * (1.0 / 1680.0 - iz2 / 1188.0))))


@njit
def _lbeta(a, b):
    """log B(a, b) without the large-argument cancellation of plain lgamma sums."""
    if a < b:
        a, b = b, a
    if b < 10.0:
        # lgamma(a + b) - lgamma(a), stable for a >> b
        if a < 10.0:
            return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        dl = (a - 0.5) * math.log1p(b / a) + b * math.log(a + b) - b + _stirlerr(a + b) - _stirlerr(a)
        return math.lgamma(b) - dl
    s = a + b
    return (_HALF_LOG_2PI - 0.5 * math.log(s)
            - (a - 0.5) * math.log1p(b / a) - (b - 0.5) * math.log1p(a / b)
            + _stirlerr(a) + _stirlerr(b) - _stirlerr(s))


@njit
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _CF_EPS:
            break
    return h


@njit
def _betainc_xy(a, b, x, y):
    """I_x(a, b) given x and y = 1 - x, each supplied at full precision."""
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    lx = math.log1p(-y) if y < 0.5 else math.log(x)
    ly = math.log1p(-x) if x < 0.5 else math.log(y)
    front = math.exp(a * lx + b * ly - _lbeta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


@njit
def _t_tail(x, dof):
    # P(T > x) for x >= 0
    nu = float(dof)
    t2 = x * x
    s = nu + t2
    return 0.5 * _betainc_xy(0.5 * nu, 0.5, nu / s, t2 / s)


@njit
def _t_pdf(x, dof):
    nu = float(dof)
    return math.exp(-_lbeta(0.5 * nu, 0.5) - 0.5 * math.log(nu) - 0.5 * (nu + 1.0) * math.log1p(x * x / nu))


@njit
def _t_cdf(x, dof):
    if x == 0.0:
        return 0.5
    if x > 0.0:
        return 1.0 - _t_tail(x, dof)
    return _t_tail(-x, dof)


@njit
def _norm_isf(q):
    # Acklam's rational approximation, used only as a starting point
    if q > 0.5:
        return -_norm_isf(1.0 - q)
    if q < 0.02425:
        r = math.sqrt(-2.0 * math.log(q))
        num = ((((-7.784894002430293e-03 * r - 3.223964580411365e-01) * r - 2.400758277161838e+00) * r
                - 2.549732539343734e+00) * r + 4.374664141464968e+00) * r + 2.938163982698783e+00
        den = (((7.784695709041462e-03 * r + 3.224671290700398e-01) * r + 2.445134137142996e+00) * r
               + 3.754408661907416e+00) * r + 1.0
        return -num / den
    r = 0.5 - q
    r2 = r * r
    num = (((((-3.969683028665376e+01 * r2 + 2.209460984245205e+02) * r2 - 2.759285104469687e+02) * r2
             + 1.383577518672690e+02) * r2 - 3.066479806614716e+01) * r2 + 2.506628277459239e+00) * r
    den = ((((-5.447609879822406e+01 * r2 + 1.615858368580409e+02) * r2 - 1.556989798598866e+02) * r2
            + 6.680131188771972e+01) * r2 - 1.328068155288572e+01) * r2 + 1.0
    return num / den


@njit
def _t_isf_guess(q, dof):
    nu = float(dof)
    z = _norm_isf(q)
    z2 = z * z
    cf = z + z * (z2 + 1.0) / (4.0 * nu) + z * ((5.0 * z2 + 16.0) * z2 + 3.0) / (96.0 * nu * nu)
    # power-law tail P(T > x) ~ nu^((nu-1)/2) x^-nu / B(nu/2, 1/2)
    lg = ((0.5 * (nu - 1.0)) * math.log(nu) - _lbeta(0.5 * nu, 0.5) - math.log(q)) / nu
    if lg < 700.0:
        pw = math.exp(lg)
        if pw > cf and pw * pw > 4.0 * nu:
            return pw
    return cf


@njit
def _t_isf(q, dof, x0):
    """x >= 0 with P(T > x) = q, q in (0, 0.5]; x0 > 0 warm-starts Newton."""
    if q >= 0.5:
        return 0.0
    x = x0 if x0 > 0.0 else _t_isf_guess(q, dof)
    if not x > 0.0:
        x = 1.0
    lo = 0.0
    hi = math.inf
    logq = math.log(q)
    for _ in range(500):
        tail = _t_tail(x, dof)
        if tail > q:
            lo = x
        elif tail < q:
            hi = x
        else:
            return x
        pdf = _t_pdf(x, dof)
        if tail > 0.0 and pdf > 0.0:
            # Newton on log P(T > x)
            xn = x + (math.log(tail) - logq) * tail / pdf
        else:
            xn = -1.0
        if not (lo < xn < hi):
            if hi == math.inf:
                xn = 2.0 * x if x > 0.0 else 1.0
            else:
                xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 4e-16 * xn or (hi < math.inf and hi - lo <= 4e-16 * hi):
            return xn
        x = xn
    return x


@njit
def _t_quantile(p, dof):
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return _t_isf(1.0 - p, dof, -1.0)
    return -_t_isf(p, dof, -1.0)


@njit
def _percentile_v(t, alpha, dof, x0):
    # upper-tail mass t^-alpha is formed directly, never as 1 - (1 - t^-alpha)
    return _t_isf(math.exp(-alpha * math.log(t)), dof, x0)


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------

def regularized_incomplete_beta(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError(f"a and b must be positive, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    return float(_betainc_xy(float(a), float(b), float(x), 1.0 - float(x)))


def _check_dof(dof):
    if dof < 1 or int(dof) != dof:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof}")
    return int(dof)


def t_cdf(x, dof):
    return float(_t_cdf(float(x), _check_dof(dof)))


def t_sf(x, dof):
    x = float(x)
    dof = _check_dof(dof)
    if x >= 0.0:
        return float(_t_tail(x, dof))
    return float(1.0 - _t_tail(-x, dof))


def t_pdf(x, dof):
    return float(_t_pdf(float(x), _check_dof(dof)))


def t_quantile(p, dof):
    """Inverse Student-t cdf.

    Uses bracketed Newton iteration on the log tail probability; the tail is
    evaluated through the regularized incomplete beta function.
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return float(_t_quantile(float(p), _check_dof(dof)))


def t_isf(q, dof):
    """Upper-tail inverse: x with P(T > x) = q. Accurate for tiny q."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie in (0, 1), got {q}")
    dof = _check_dof(dof)
    if q > 0.5:
        return -float(_t_isf(1.0 - q, dof, -1.0))
    return float(_t_isf(float(q), dof, -1.0))


def percentile_v(t, alpha, dof):
    """The 100(1 - 1/t**alpha)-th percentile of a Student-t with ``dof`` degrees of freedom."""
    if t < 2:
        raise DomainError(f"round index must be >= 2, got {t}")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return float(_percentile_v(float(t), float(alpha), _check_dof(dof), -1.0))


@dataclass(frozen=True)
class StudentT:
    dof: int

    def __post_init__(self):
        _check_dof(self.dof)

    def cdf(self, x):
        return t_cdf(x, self.dof)

    def sf(self, x):
        return t_sf(x, self.dof)

    def pdf(self, x):
        return t_pdf(x, self.dof)

    def quantile(self, p):
        return t_quantile(p, self.dof)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

class RandomSource:
    """Seeded PCG64 stream that can be split into independent child streams."""

    def __init__(self, seed=0, *, _seed_seq=None):
        if _seed_seq is None:
            seed = int(seed)
            if not 0 <= seed < 2**64:
                raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
            _seed_seq = np.random.SeedSequence(seed)
        self.seed_seq = _seed_seq
        self.generator = np.random.Generator(np.random.PCG64(_seed_seq))

    @property
    def seed(self):
        return self.seed_seq.entropy

    def spawn(self, n):
        return [RandomSource(_seed_seq=s) for s in self.seed_seq.spawn(n)]

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


@dataclass(frozen=True)
class BivariateGaussianSpec:
    mean_x: float
    mean_w: float
    std_x: float
    std_w: float
    rho: float

    def __post_init__(self):
        if self.std_x < 0 or self.std_w < 0:
            raise ValueError("standard deviations must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")

    def covariance(self):
        c = self.rho * self.std_x * self.std_w
        return np.array([[self.std_x ** 2, c], [c, self.std_w ** 2]])


def bivariate_from_normals(spec, z):
    """Map standard normal pairs ``z[..., 0:2]`` to draws with the spec's moments."""
    z1 = z[..., 0]
    z2 = z[..., 1]
    x = spec.mean_x + spec.std_x * z1
    w = spec.mean_w + spec.std_w * (spec.rho * z1 + math.sqrt(max(0.0, 1.0 - spec.rho ** 2)) * z2)
    return x, w


def sample_bivariate_gaussian(spec, rng, size=None):
    """Draw (x, w) from the bivariate normal described by ``spec``.

    With ``size=None`` a single pair of floats is returned, otherwise two
    arrays of shape ``size``. Batched and one-at-a-time draws consume the
    stream identically.
    """
    if size is None:
        x, w = bivariate_from_normals(spec, rng.standard_normal(2))
        return float(x), float(w)
    shape = (tuple(size) if isinstance(size, tuple) else (int(size),)) + (2,)
    return bivariate_from_normals(spec, rng.standard_normal(shape))
