"""Samplers for NB, DLap, GDL, MSDLap, Dirichlet-multinomial and friends.

Discrete samplers are exact given rational parameters and run on the
randomness kernel in :mod:`divnoise.exact_rand`. Float parameters are
rounded to rationals first (see ``as_rational``). The continuous mechanism
and the Arete distribution use double precision and are not exact.

Most samplers take an optional ``size``; with ``size=None`` a Python int is
returned, otherwise an int64 array.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import stats

from divnoise.exact_rand import (
    KernelAbort, as_rational, bernoulli_exp, bernoulli_frac,
    complement_rate, float_generator,
)

SamplerAbort = KernelAbort
SparseCounts = dict

LN2 = math.log(2.0)

__all__ = [
    "SamplerAbort", "SparseCounts", "NBParams", "DLapParams", "GDLParams",
    "MSDLapParams", "DirMParams", "sample_integer_nb_geo", "sample_nb",
    "sample_nb_waiting", "sample_nb_inverse", "sample_dlap", "sample_gdl",
    "sample_dirm", "sample_multi_nb", "sample_msdlap", "sample_continuous",
    "continuous_grid", "sample_arete", "demo_arete_convergence",
]


@dataclass(frozen=True)
class NBParams:
    """NB(r, p) with p = 1 - exp(-gamma).

    Parameters are kept as given; samplers round them to rationals (gamma
    upward) at draw time.

    ``p_exact`` optionally carries a rational p for the inverse-transform
    oracle, which cannot work with p = 1 - exp(-gamma) directly.
    """

    r: Fraction
    gamma: Fraction
    p_exact: Fraction | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.r > 0 and self.gamma > 0):
            raise ValueError("NB needs r > 0 and gamma > 0")

    @classmethod
    def from_p(cls, r, p):
        """Build from a success probability; gamma = -ln(1 - p), rounded up."""
        p = Fraction(p) if isinstance(p, (int, Fraction)) else p
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        gamma = -math.log1p(-float(p))
        p_exact = p if isinstance(p, Fraction) else None
        return cls(r, gamma, p_exact)

    @property
    def p(self):
        return -math.expm1(-float(self.gamma))


@dataclass(frozen=True)
class DLapParams:
    """DLap(a): P(k) = tanh(a/2) exp(-a|k|)."""

    a: Fraction

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("DLap needs a > 0")


@dataclass(frozen=True)
class GDLParams:
    """GDL(beta, a): difference of two i.i.d. NB(beta, 1 - exp(-a))."""

    beta: Fraction
    a: Fraction

    def __post_init__(self):
        if not (self.beta > 0 and self.a > 0):
            raise ValueError("GDL needs beta > 0 and a > 0")


@dataclass(frozen=True)
class MSDLapParams:
    """Multi-scale discrete Laplace.

    ``r = 0`` gives sum_i i * X_i over the scale set (default 1..delta) with
    X_i ~ DLap(eps). ``r >= 1`` gives r * MSDLap(eps - 1, delta // r) plus a
    DLap(1/r) hole-smoothing term.
    """

    eps: float
    delta: int
    r: int = 0
    scale_set: tuple | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if int(self.delta) != self.delta or self.delta < 1:
            raise ValueError("delta must be a positive integer")
        if int(self.r) != self.r or not 0 <= self.r <= self.delta:
            raise ValueError("r must be an integer in [0, delta]")
        if self.r >= 1 and self.eps < 2:
            raise ValueError("r >= 1 requires eps >= 2")
        if self.scale_set is not None:
            s = tuple(sorted(int(v) for v in self.scale_set))
            if not s or s[0] < 1 or len(set(s)) != len(s):
                raise ValueError("scale_set must hold distinct positive integers")
            if self.r != 0:
                raise ValueError("scale_set is only defined for r = 0")
            object.__setattr__(self, "scale_set", s)
        object.__setattr__(self, "delta", int(self.delta))
        object.__setattr__(self, "r", int(self.r))

    @property
    def scales(self):
        if self.scale_set is not None:
            return self.scale_set
        return tuple(range(1, self.delta + 1))


@dataclass(frozen=True)
class DirMParams:
    """DirM(n, (alpha, ..., alpha)) over k variates."""

    n: int
    k: int
    alpha: Fraction

    def __post_init__(self):
        if self.n < 0 or self.k < 1 or not self.alpha > 0:
            raise ValueError("DirM needs n >= 0, k >= 1, alpha > 0")


@lru_cache(maxsize=1024)
def _nb_args(r, gamma, batched=None):
    """Kernel arguments for NB(r, 1 - exp(-gamma)).

    The batched proposal is used for p > 1/2 (gamma >= ln 2); below that the
    proposal is a plain sum of geometric draws.
    """
    if batched is None:
        batched = gamma >= LN2
    if batched:
        rate = complement_rate(gamma)
        rn, rd = rate.numerator, rate.denominator
    else:
        rn, rd = 0, 1
    p = -math.expm1(-float(gamma))
    cap = 64 * math.ceil(1.0 / p)
    return (r.numerator, r.denominator, gamma.numerator, gamma.denominator,
            rn, rd, cap)


def _scalar(x):
    if x < 0:
        raise SamplerAbort("rejection cap exceeded")
    return int(x)


def sample_integer_nb_geo(rng, r, gamma, size=None):
    """NB(r, 1 - exp(-gamma)) for integer r by batched geometric runs."""
    if int(r) != r or r < 1:
        raise ValueError("r must be a positive integer")
    args = _nb_args(Fraction(int(r)), as_rational(gamma), True)
    if size is None:
        return _scalar(rng.nb_sample(*args))
    return np.asarray(rng.nb_many(*args, size), dtype=np.int64)


def sample_nb(rng, params, size=None):
    """NB(r, p) for rational r by rejection from NB(ceil(r), p)."""
    args = _nb_args(as_rational(params.r), as_rational(params.gamma))
    if size is None:
        return _scalar(rng.nb_sample(*args))
    return np.asarray(rng.nb_many(*args, size), dtype=np.int64)


def _pochhammer_ratio(r, big_r, w):
    num, den = 1, 1
    for i in range(w):
        num *= r.numerator + i * r.denominator
        den *= r.denominator * (big_r + i)
    return num, den


def _nb_cap(params):
    return 64 * math.ceil(1.0 / params.p)


def sample_nb_waiting(rng, params):
    """Oracle: trial-by-trial waiting time with Bernoulli(1 - exp(-gamma))."""
    r = as_rational(params.r)
    gamma = as_rational(params.gamma)
    big_r = math.ceil(r)
    for _ in range(_nb_cap(params)):
        failures = successes = 0
        while successes < big_r:
            if bernoulli_exp(rng, gamma):
                failures += 1
            else:
                successes += 1
        num, den = _pochhammer_ratio(r, big_r, failures)
        if bernoulli_frac(rng, num, den):
            return failures
    raise SamplerAbort("rejection cap exceeded")


_HAZARDS = {}


def _hazard(big_r, p, k):
    # P(K = k | K >= k) for K ~ NB(big_r, p), extended lazily per (big_r, p)
    st = _HAZARDS.setdefault((big_r, p), {"h": [], "coeff": Fraction(1), "prev": Fraction(0)})
    h = st["h"]
    while len(h) <= k:
        j = len(h)
        f = st["coeff"] * p**big_r * (1 - p) ** j
        h.append(f / (1 - st["prev"]))
        st["prev"] += f
        st["coeff"] *= Fraction(big_r + j, 1 + j)
    return h[k]


def sample_nb_inverse(rng, params):
    """Oracle: sequential inverse transform with rational p.

    Uses ``params.p_exact`` when set; otherwise p is rounded down to a
    rational (a smaller p means more noise).
    """
    p = params.p_exact
    if p is None:
        p = as_rational(params.p, round_up=False)
    r = as_rational(params.r)
    big_r = math.ceil(r)
    for _ in range(_nb_cap(params)):
        k = 0
        while True:
            h = _hazard(big_r, p, k)
            if bernoulli_frac(rng, h.numerator, h.denominator):
                break
            k += 1
        num, den = _pochhammer_ratio(r, big_r, k)
        if bernoulli_frac(rng, num, den):
            return k
    raise SamplerAbort("rejection cap exceeded")


def sample_dlap(rng, params, size=None):
    """DLap(a) as a difference of two Geo(1 - exp(-a)) draws."""
    a = as_rational(params.a)
    if size is None:
        return (rng.geometric_exp(a.numerator, a.denominator)
                - rng.geometric_exp(a.numerator, a.denominator))
    return np.asarray(rng.dlap_many(a.numerator, a.denominator, size), dtype=np.int64)


def sample_gdl(rng, params, size=None):
    """GDL(beta, a) as a difference of two NB(beta, 1 - exp(-a)) draws."""
    args = _nb_args(as_rational(params.beta), as_rational(params.a))
    if size is None:
        x = _scalar(rng.nb_sample(*args))
        return x - _scalar(rng.nb_sample(*args))
    return np.asarray(rng.nb_diff_many(*args, size), dtype=np.int64)


def sample_dirm(rng, params):
    """Sparse DirM(n, alpha) via the Polya urn; returns {index: count}."""
    a = as_rational(params.alpha)
    return rng.dirm_counts(params.n, params.k, a.numerator, a.denominator)


def sample_multi_nb(rng, k, r, gamma):
    """Nonzero entries of k i.i.d. NB(r, 1 - exp(-gamma)) as {index: count}."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    r = as_rational(r)
    total = sample_nb(rng, NBParams(k * r, gamma))
    return sample_dirm(rng, DirMParams(total, int(k), r))


def _msdlap_vanilla(rng, scales, eps, size):
    args = _nb_args(Fraction(1), as_rational(eps))
    if size is None:
        z = rng.multiscale_sum(list(scales), *args)
        if z is None:
            raise SamplerAbort("rejection cap exceeded")
        return int(z)
    return np.asarray(rng.multiscale_many(list(scales), *args, size), dtype=np.int64)


def sample_msdlap(rng, params, size=None):
    """MSDLap draw; all 2m NB(1, p) variates come from one NB total plus the urn."""
    if params.r == 0:
        return _msdlap_vanilla(rng, params.scales, params.eps, size)
    r = params.r
    inner = as_rational(params.eps) - 1
    x = _msdlap_vanilla(rng, range(1, params.delta // r + 1), inner, size)
    y = sample_dlap(rng, DLapParams(Fraction(1, r)), size)
    return r * x + y


def continuous_grid(eps):
    """Discretization Delta_d = ceil(e^(eps/3)) used by the continuous mechanism."""
    return math.ceil(math.exp(eps / 3.0))


def sample_continuous(rng, eps, delta, size=None):
    """Real-valued noise for sensitivity ``delta``: delta * (X/Delta_d + Lap(1/(2 Delta_d))).

    X ~ MSDLap(eps - 1, Delta_d) is exact; the Laplace term is double precision.
    """
    if eps < 2:
        raise ValueError("continuous mechanism requires eps >= 2")
    if delta <= 0:
        raise ValueError("delta must be positive")
    dd = continuous_grid(eps)
    x = _msdlap_vanilla(rng, range(1, dd + 1), as_rational(eps) - 1, size)
    gen = float_generator(rng)
    y = gen.laplace(0.0, 0.5 / dd, size)
    return delta * (np.asarray(x, dtype=float) / dd + y)


def sample_arete(rng, k, theta, lam, size=None):
    """Arete(k, theta, lam) = Gamma(k, theta) - Gamma(k, theta) + Lap(lam).

    numpy's gamma sampler (Marsaglia-Tsang) is used; not exact.
    """
    if k <= 0 or theta <= 0 or lam <= 0:
        raise ValueError("Arete needs k, theta, lam > 0")
    gen = float_generator(rng)
    return (gen.gamma(k, theta, size) - gen.gamma(k, theta, size)
            + gen.laplace(0.0, lam, size))


def demo_arete_convergence(rng, k, theta, lam, delta_ds=(4, 16, 64, 256), n=10**5):
    """KS distance between Lap(lam) + GDL(k, 1/(theta Dd))/Dd and Arete samples.

    Returns one dict per Dd with the two-sample KS statistic, its p-value and
    the Monte Carlo scale sqrt(2/n) of the statistic.
    """
    rows = []
    for i, dd in enumerate(delta_ds):
        sub = rng.spawn(i)
        g = sample_gdl(sub, GDLParams(k, 1.0 / (theta * dd)), n)
        gen = float_generator(sub)
        z = gen.laplace(0.0, lam, n) + g / dd
        ref = sample_arete(sub, k, theta, lam, n)
        res = stats.ks_2samp(z, ref)
        rows.append({"delta_d": dd, "ks": float(res.statistic),
                     "p_value": float(res.pvalue), "mc_noise": math.sqrt(2.0 / n)})
    return rows
