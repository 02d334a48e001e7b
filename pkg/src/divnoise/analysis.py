"""PMFs, special functions, privacy accountants and variance formulas.

Everything here is double precision with stated tolerances; exactness is a
property of the samplers only. Distributions are described by the parameter
dataclasses from :mod:`divnoise.samplers` plus :class:`StaircaseParams` and
:class:`ContinuousSpec` defined here.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from divnoise.samplers import (
    DirMParams, DLapParams, GDLParams, MSDLapParams, NBParams, continuous_grid,
)

__all__ = [
    "SeriesNonConvergence", "PrivacyBound", "StaircaseParams", "ShuffleParams", "ContinuousSpec",
    "pochhammer", "ln_gamma", "hyp2f1_regularized_series", "pmf", "pmf_table",
    "gdl_epsilon_exact", "calibrate_gdl", "msdlap_epsilon", "variance",
    "staircase_variance", "staircase_variance_lower", "optimal_staircase_variance",
    "choose_r", "check_logconvexity", "msdlap_ratio_bound",
]

HYP_MAX_TERMS = 10**6


class SeriesNonConvergence(ArithmeticError):
    """The hypergeometric series did not converge within the term budget."""


@dataclass(frozen=True)
class PrivacyBound:
    eps_exact: float | None
    eps_simplified: float
    eps_wendel: float
    method: str  # exact_hypergeometric | postprocessing_dlap | simplified | wendel

    @property
    def eps(self):
        """Tightest certified value."""
        if self.eps_exact is not None:
            return self.eps_exact
        return min(self.eps_simplified, self.eps_wendel)


@dataclass(frozen=True)
class StaircaseParams:
    """Discrete staircase with central width 2r - 1."""

    r: int
    eps: float
    delta: int

    def __post_init__(self):
        if self.delta < 1 or not 1 <= self.r <= self.delta:
            raise ValueError("staircase needs 1 <= r <= delta")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class ShuffleParams:
    """Split-and-mix protocol parameters (see ``shuffle.derive_params``)."""

    eps: float
    delta_dp: float
    n: int
    Delta: int
    q: int
    sigma: float
    m: int
    message_bits: int
    noise: MSDLapParams


@dataclass(frozen=True)
class ContinuousSpec:
    """Discrete-to-continuous mechanism at budget eps, sensitivity delta."""

    eps: float
    delta: float


def _cosh_m1(x):
    # cosh(x) - 1 without cancellation at small x
    return 2.0 * math.sinh(0.5 * x) ** 2


# special functions

def ln_gamma(x):
    """log|Gamma(x)|; poles at non-positive integers are rejected."""
    if x <= 0 and float(x) == math.floor(x):
        raise ValueError(f"Gamma has a pole at {x}")
    return math.lgamma(x)


def pochhammer(x, n):
    """Rising factorial (x)_n = x (x+1) ... (x+n-1)."""
    if n < 0 or int(n) != n:
        raise ValueError("n must be a non-negative integer")
    if n <= 64 or x <= 0:
        out = 1.0
        for i in range(int(n)):
            out *= x + i
        return out
    return math.exp(math.lgamma(x + n) - math.lgamma(x))


def hyp2f1_regularized_series(a, b, c, z, max_terms=HYP_MAX_TERMS, info=False):
    """Gauss series sum_s (a)_s (b)_s / ((c)_s s!) z^s for 0 <= z < 1.

    Summation stops once the remaining tail, bounded geometrically by the
    larger of the current term ratio and z, drops below 1e-15 of the partial
    sum. With ``info=True`` returns (value, terms_used, converged) instead of
    raising on non-convergence.
    """
    if c <= 0 and float(c) == math.floor(c):
        raise ValueError("c must not be a non-positive integer")
    if not 0 <= z < 1:
        raise ValueError("z must lie in [0, 1)")
    total = 1.0
    t = 1.0
    converged = False
    s = 0
    for s in range(max_terms):
        ratio = (a + s) * (b + s) * z / ((c + s) * (s + 1))
        t *= ratio
        total += t
        rho = max(abs(ratio), z)
        if t == 0.0 or (rho < 1 and abs(t) * rho / (1 - rho) < 1e-15 * abs(total)):
            converged = True
            break
    if info:
        return total, s + 1, converged
    if not converged:
        raise SeriesNonConvergence(f"2F1({a}, {b}; {c}; {z}) needs > {max_terms} terms")
    return total


def _log_hyp(a, b, c, z):
    return math.log(hyp2f1_regularized_series(a, b, c, z))


# PMFs

def _nb_logpmf(k, r, gamma):
    return (math.lgamma(k + r) - math.lgamma(r) - math.lgamma(k + 1)
            + r * math.log(-math.expm1(-gamma)) - k * gamma)


def _gdl_logpmf(k, beta, a):
    x = abs(int(k))
    return (-a * x + 2 * beta * math.log(-math.expm1(-a))
            + _log_hyp(beta, beta + x, 1 + x, math.exp(-2 * a))
            + math.lgamma(beta + x) - math.lgamma(1 + x) - math.lgamma(beta))


def _dirm_logpmf(x, k, alpha):
    x = tuple(int(v) for v in x)
    if len(x) != k or min(x) < 0:
        return -math.inf
    n = sum(x)
    a0 = k * alpha
    out = math.lgamma(n + 1) + math.lgamma(a0) - math.lgamma(n + a0)
    for v in x:
        out += math.lgamma(v + alpha) - math.lgamma(alpha) - math.lgamma(v + 1)
    return out


def _dlap_radius(a, tail):
    # smallest R with P(|X| > R) = 2 e^{-a(R+1)} / (1 + e^{-a}) below tail
    return max(1, math.ceil((math.log(2.0 / ((1 + math.exp(-a)) * tail))) / a - 1))


def _dlap_vector(a, radius):
    k = np.arange(-radius, radius + 1)
    return math.tanh(a / 2) * np.exp(-a * np.abs(k))


def _scaled(vec, s):
    if s == 1:
        return vec
    out = np.zeros((len(vec) - 1) * s + 1)
    out[::s] = vec
    return out


@lru_cache(maxsize=64)
def _msdlap_table(eps, scales, r, delta, tail):
    """PMF of MSDLap on a truncated support, as (offset, probs, tail_bound)."""
    if r == 0:
        parts = [(eps, s) for s in scales]
        extra = None
    else:
        parts = [(eps - 1, r * i) for i in range(1, delta // r + 1)]
        extra = 1.0 / r
    n_parts = len(parts) + (extra is not None)
    per_tail = tail / n_parts
    vec = np.array([1.0])
    for a, s in parts:
        vec = np.convolve(vec, _scaled(_dlap_vector(a, _dlap_radius(a, per_tail)), s))
    if extra is not None:
        vec = np.convolve(vec, _dlap_vector(extra, _dlap_radius(extra, per_tail)))
    return (len(vec) - 1) // 2, vec, tail


def msdlap_pmf_table(params, tail=1e-14):
    """(support, probs, tail_bound) for an MSDLap distribution.

    Each component DLap is truncated so the neglected mass is at most
    ``tail`` in total; every returned probability is then within ``tail`` of
    the true value (absolutely) and never above it.
    """
    scales = tuple(params.scales) if params.r == 0 else ()
    off, vec, tb = _msdlap_table(float(params.eps), scales, params.r, params.delta, tail)
    return np.arange(-off, off + 1), vec, tb


def _staircase_pmf(k, p):
    b = math.exp(-p.eps)
    a = (1 - b) / (2 * p.r + 2 * b * (p.delta - p.r) - (1 - b))
    i = abs(int(k))
    blk, j = divmod(i, p.delta)
    return a * (1.0 if j < p.r else b) * math.exp(-p.eps * blk)


def pmf(dist, k):
    """Probability of ``k`` under ``dist`` (a DirM outcome is a count tuple)."""
    if isinstance(dist, NBParams):
        if k < 0:
            return 0.0
        return math.exp(_nb_logpmf(k, float(dist.r), float(dist.gamma)))
    if isinstance(dist, DLapParams):
        a = float(dist.a)
        return math.tanh(a / 2) * math.exp(-a * abs(k))
    if isinstance(dist, GDLParams):
        return math.exp(_gdl_logpmf(k, float(dist.beta), float(dist.a)))
    if isinstance(dist, MSDLapParams):
        ks, probs, _ = msdlap_pmf_table(dist)
        i = int(k) - ks[0]
        return float(probs[i]) if 0 <= i < len(probs) else 0.0
    if isinstance(dist, DirMParams):
        if sum(k) != dist.n:
            return 0.0
        return math.exp(_dirm_logpmf(k, dist.k, float(dist.alpha)))
    if isinstance(dist, StaircaseParams):
        return _staircase_pmf(k, dist)
    raise TypeError(f"no PMF for {type(dist).__name__}")


def pmf_table(dist, ks):
    """Vector of pmf(dist, k) over integer ``ks``."""
    if isinstance(dist, MSDLapParams):
        sup, probs, _ = msdlap_pmf_table(dist)
        ks = np.asarray(ks)
        idx = ks - sup[0]
        ok = (idx >= 0) & (idx < len(probs))
        out = np.zeros(len(ks))
        out[ok] = probs[idx[ok]]
        return out
    return np.array([pmf(dist, int(k)) for k in ks])


# privacy

def gdl_epsilon_exact(params, delta):
    """Privacy of GDL(beta, a) noise at sensitivity ``delta``.

    For beta < 1 the divergence is attained at ln(f(0)/f(delta)) and is
    evaluated through the hypergeometric form; for beta >= 1 the value
    a * delta holds by post-processing of DLap(a).
    """
    beta, a = float(params.beta), float(params.a)
    if delta < 1 or int(delta) != delta:
        raise ValueError("delta must be a positive integer")
    simplified = a * delta + math.log(delta / beta)
    wendel = a * delta + (1 - beta) * math.log(beta + delta) + math.lgamma(beta)
    if beta >= 1:
        return PrivacyBound(a * delta, simplified, wendel, "postprocessing_dlap")
    z = math.exp(-2 * a)
    ratio = _log_hyp(beta, beta, 1, z) - _log_hyp(beta, beta + delta, 1 + delta, z)
    exact = (a * delta + ratio + math.lgamma(delta + 1) + math.lgamma(beta)
             - math.lgamma(beta + delta))
    return PrivacyBound(exact, simplified, wendel, "exact_hypergeometric")


def calibrate_gdl(eps, delta):
    """GDL(delta e^{2-eps}, 2/delta), valid for eps > 2 + ln(delta)."""
    if delta < 1 or int(delta) != delta:
        raise ValueError("delta must be a positive integer")
    if not eps > 2 + math.log(delta):
        raise ValueError("GDL calibration requires eps > 2 + ln(delta)")
    return GDLParams(delta * math.exp(2 - eps), Fraction(2, int(delta)))


def msdlap_epsilon(params):
    """Certified budget: eps itself, as 1 + (eps - 1) when r >= 1."""
    if params.r == 0:
        return float(params.eps)
    return 1.0 + (float(params.eps) - 1.0)


# variance

def _msdlap_var(eps, scales):
    return sum(s * s for s in scales) / _cosh_m1(eps)


def variance(dist):
    """Closed-form variance of a noise distribution."""
    if isinstance(dist, NBParams):
        g = float(dist.gamma)
        p = -math.expm1(-g)
        return float(dist.r) * math.exp(-g) / (p * p)
    if isinstance(dist, DLapParams):
        return 1.0 / _cosh_m1(float(dist.a))
    if isinstance(dist, GDLParams):
        return float(dist.beta) / _cosh_m1(float(dist.a))
    if isinstance(dist, MSDLapParams):
        eps = float(dist.eps)
        if dist.r == 0:
            return _msdlap_var(eps, dist.scales)
        r = dist.r
        return (r * r * _msdlap_var(eps - 1, range(1, dist.delta // r + 1))
                + 1.0 / _cosh_m1(1.0 / r))
    if isinstance(dist, StaircaseParams):
        return staircase_variance(dist)
    if isinstance(dist, ContinuousSpec):
        dd = continuous_grid(dist.eps)
        var_x = _msdlap_var(dist.eps - 1, range(1, dd + 1))
        return dist.delta**2 * (var_x + 0.5) / dd**2
    raise TypeError(f"no variance for {type(dist).__name__}")


def staircase_variance(params):
    """Closed-form staircase variance.

    The expression cancels its leading e^{3 eps} terms, so it is evaluated in
    exact rational arithmetic from the double e^eps and rounded once.
    """
    if not 1 <= params.r <= params.delta:
        raise ValueError("staircase needs 1 <= r <= delta")
    e = Fraction(math.exp(params.eps))
    r, d = Fraction(params.r), Fraction(params.delta)
    z = e - 1
    ch = (e + 1 / e) / 2
    sh = (e - 1 / e) / 2
    x1 = 2 * r**3 * z**3 - 3 * r**2 * z**2 * (z - 2 * d)
    x2 = r * z * (1 + e * e + 6 * d * (1 + d) + e * (6 * d * (d - 1) - 2))
    x3 = 2 * e * d * (-1 + 4 * d * d + ch + 2 * d * d * ch - 3 * d * sh)
    den = 3 * z * z * (1 - 2 * r + e * (2 * r - 1) + 2 * d)
    return float((x1 + x2 + x3) / den)


def staircase_variance_lower(eps, delta):
    """Lower bound on any staircase variance, for eps >= ln(D(D+1)(2D+1)/2)."""
    if eps < math.log(delta * (delta + 1) * (2 * delta + 1) / 2):
        raise ValueError("lower bound requires eps >= ln(D(D+1)(2D+1)/2)")
    return delta * (delta + 1) * (2 * delta + 1) / (3 * (math.exp(eps) + 2 * delta - 1))


def optimal_staircase_variance(eps, delta):
    """(best r, variance) over r in 1..delta."""
    best = min(range(1, delta + 1),
               key=lambda r: (staircase_variance(StaircaseParams(r, eps, delta)), r))
    return best, staircase_variance(StaircaseParams(best, eps, delta))


def msdlap_ratio_bound(eps, delta):
    """Upper bound on Var(MSDLap) / Var(staircase, r=1) for large eps."""
    b = math.exp(-eps)
    return (1 + (2 * delta - 1) * b) / (1 - 2 * b + b * b)


def choose_r(eps, delta):
    """Smaller-variance choice between r = 0 and r = ceil(e^{-eps/3} delta)."""
    if eps < 2:
        raise ValueError("choose_r requires eps >= 2")
    r1 = min(delta, math.ceil(math.exp(-eps / 3) * delta))
    v0 = variance(MSDLapParams(eps, delta, 0))
    v1 = variance(MSDLapParams(eps, delta, r1))
    return 0 if v0 <= v1 else r1


# log-convexity

def check_logconvexity(params, radius, delta=None):
    """Scan GDL PMF shape on [0, radius].

    Reports the worst margins of monotonicity f(k) - f(k+1) and of log
    convexity f(k) f(k+2) - f(k+1)^2 (both relative), and, if ``delta`` is
    given, the largest ratio f(k - xi)/f(k) for |xi| <= delta over the window
    next to f(0)/f(delta).
    """
    beta = float(params.beta)
    if not 0 < beta:
        raise ValueError("beta must be positive")
    ks = np.arange(0, radius + 3)
    logf = np.array([_gdl_logpmf(int(k), beta, float(params.a)) for k in ks])
    f = np.exp(logf - logf[0])
    mono = np.min((f[:-1] - f[1:]) / f[:-1])
    conv = np.min((f[:-2] * f[2:] - f[1:-1] ** 2) / (f[1:-1] ** 2))
    report = {"monotone_margin": float(mono), "logconvex_margin": float(conv),
              "radius": int(radius)}
    if delta is not None:
        worst = -math.inf
        for k in range(-radius, radius + 1):
            for xi in range(-delta, delta + 1):
                lk = logf[abs(k)] if abs(k) <= radius + 2 else None
                j = abs(k - xi)
                if lk is None or j > radius + 2:
                    continue
                worst = max(worst, logf[j] - lk)
        report["max_log_ratio"] = float(worst)
        report["endpoint_log_ratio"] = float(logf[0] - logf[delta])
    return report
