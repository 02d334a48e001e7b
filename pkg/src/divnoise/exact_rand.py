"""Exact randomness primitives over rationals.

Every discrete sampler in the package draws its randomness through the
functions here. Probabilities are exact rationals or of the form exp(-g)
with rational g; no floating point enters a discrete draw.

The kernel is the compiled ``_core`` extension when it is importable and the
pure-Python ``_fallback`` module otherwise. Set ``DIVNOISE_BACKEND=python`` to
force the fallback. Both produce identical draws for identical seeds.
"""

import math
import os
from decimal import Decimal, localcontext
from fractions import Fraction
from numbers import Rational

import numpy as np

from divnoise import _fallback
from divnoise._fallback import KernelAbort

if os.environ.get("DIVNOISE_BACKEND", "").lower() == "python":
    _kernel = _fallback
else:
    try:
        from divnoise import _core as _kernel
    except ImportError:  # extension not built
        _kernel = _fallback

BACKEND = "cython" if _kernel is not _fallback else "python"
RngStream = _kernel.RngStream

# largest denominator chosen when rounding a float parameter to a rational
ROUND_DEN = 10**6
# complement rates are stored with at least this many bits of denominator
_RATE_BITS = 55

__all__ = [
    "BACKEND", "RngStream", "KernelAbort", "make_rng", "as_rational",
    "complement_rate", "uniform_int", "bernoulli_frac", "bernoulli_exp",
    "geometric_exp", "float_generator",
]


def make_rng(seed=0, backend=None):
    """New stream from ``seed``; ``backend`` may be "python" or "cython"."""
    if backend is None:
        return RngStream(seed)
    if backend == "python":
        return _fallback.RngStream(seed)
    if backend == "cython":
        from divnoise import _core
        return _core.RngStream(seed)
    raise ValueError(f"unknown backend {backend!r}")


def as_rational(x, round_up=True):
    """Exact non-negative rational for ``x``.

    Integers and Fractions pass through. A float becomes the simplest
    fraction with denominator at most 10^6 when that fraction is the same
    double; otherwise it is rounded to a multiple of 10^-6, upward by default
    so that a noise rate is never made smaller.
    """
    if isinstance(x, Rational):
        q = Fraction(x)
    else:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"parameter must be finite, got {x}")
        exact = Fraction(x)
        q = exact.limit_denominator(ROUND_DEN)
        if float(q) != x:
            scaled = exact * ROUND_DEN
            n = math.ceil(scaled) if round_up else math.floor(scaled)
            q = Fraction(n, ROUND_DEN)
    if q < 0:
        raise ValueError(f"parameter must be non-negative, got {x}")
    return q


def complement_rate(gamma):
    """Rational g' >= -ln(1 - exp(-gamma)), within 2^-32 relative.

    exp(-g') is then a success probability no larger than 1 - exp(-gamma),
    which is what the batched negative binomial proposal consumes.
    """
    gamma = Fraction(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    with localcontext() as ctx:
        ctx.prec = 60
        g = Decimal(gamma.numerator) / Decimal(gamma.denominator)
        q = (-g).exp()
        if q < Decimal("1e-20"):
            # -ln(1 - q) = q + q^2/2 + ..., two terms suffice at this size
            rate = q + q * q / 2
        else:
            rate = -(1 - q).ln()
        rate = rate * (1 + Decimal("1e-50"))
        lg = math.floor(math.log2(float(rate))) if rate > 0 else -1100
        den = 1 << max(_RATE_BITS, 32 - lg)
        num = int((rate * den).to_integral_value(rounding="ROUND_CEILING"))
    return Fraction(max(num, 1), den)


def _check_int(name, v, low):
    if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
        raise TypeError(f"{name} must be an integer")
    if v < low:
        raise ValueError(f"{name} must be >= {low}, got {v}")
    return int(v)


def uniform_int(rng, d):
    """Uniform draw from {1, ..., d}."""
    return rng.uniform_int(_check_int("d", d, 1))


def bernoulli_frac(rng, num, den):
    """Bernoulli(num/den) with num <= den."""
    num = _check_int("num", num, 0)
    den = _check_int("den", den, 1)
    if num > den:
        raise ValueError(f"probability {num}/{den} exceeds 1")
    return rng.bernoulli_frac(num, den)


def bernoulli_exp(rng, gamma):
    """Bernoulli(exp(-gamma)) for rational gamma >= 0."""
    g = as_rational(gamma)
    return rng.bernoulli_exp(g.numerator, g.denominator)


def geometric_exp(rng, gamma):
    """Geometric count k with P(k) = (1 - exp(-gamma)) exp(-gamma k)."""
    g = as_rational(gamma)
    if g == 0:
        raise ValueError("gamma must be positive")
    return rng.geometric_exp(g.numerator, g.denominator)


def float_generator(rng):
    """numpy Generator seeded from one word of ``rng``.

    Used only for the double-precision continuous components.
    """
    return np.random.Generator(np.random.PCG64(rng.next_u64()))
