import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from divnoise import exact_rand as er
from divnoise.exact_rand import make_rng

try:
    from divnoise import _core  # noqa: F401
    HAVE_CORE = True
except ImportError:
    HAVE_CORE = False


def test_backend_flag():
    assert er.BACKEND in ("cython", "python")


def test_streams_are_deterministic():
    a, b = make_rng(7), make_rng(7)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert make_rng(7).next_u64() != make_rng(8).next_u64()


def test_spawn_independent_of_parent_position():
    a = make_rng(3)
    s1 = a.spawn(5).next_u64()
    a.next_u64()
    assert a.spawn(5).next_u64() == s1
    assert a.spawn(6).next_u64() != s1


@pytest.mark.skipif(not HAVE_CORE, reason="compiled kernel not built")
@pytest.mark.parametrize("draw", [
    lambda r: [r.uniform_int(1000003) for _ in range(200)],
    lambda r: [r.bernoulli_frac(3, 7) for _ in range(200)],
    lambda r: [r.bernoulli_exp(7, 3) for _ in range(200)],
    lambda r: list(r.geometric_many(1, 3, 500)),
    lambda r: list(r.dlap_many(5, 2, 500)),
    lambda r: list(r.nb_many(5, 2, 1, 2, 0, 1, 1000, 300)),
    lambda r: list(r.nb_many(1, 100, 3, 1, *_rate(3), 64, 300)),
    lambda r: sorted(r.dirm_counts(50, 1000, 1, 10).items()),
    lambda r: list(r.multiscale_many([1, 2, 5], 1, 1, 2, 1, *_rate(2), 64, 300)),
])
def test_backends_agree(draw):
    a = make_rng(11, backend="cython")
    b = make_rng(11, backend="python")
    assert [int(v) if not isinstance(v, tuple) else v for v in draw(a)] == \
        [int(v) if not isinstance(v, tuple) else v for v in draw(b)]
    assert a.counter == b.counter


def _rate(g):
    q = er.complement_rate(Fraction(g))
    return q.numerator, q.denominator


def test_uniform_int_validation(rng):
    with pytest.raises(ValueError):
        er.uniform_int(rng, 0)
    with pytest.raises(TypeError):
        er.uniform_int(rng, 2.5)


@given(st.integers(min_value=1, max_value=2**62), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_uniform_int_range(d, seed):
    rng = make_rng(seed)
    for _ in range(5):
        assert 1 <= er.uniform_int(rng, d) <= d


def test_uniform_int_chi_square(rng):
    x = np.array([er.uniform_int(rng, 6) for _ in range(60000)])
    counts = np.bincount(x, minlength=7)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_bernoulli_frac(rng):
    with pytest.raises(ValueError):
        er.bernoulli_frac(rng, 5, 4)
    assert er.bernoulli_frac(rng, 0, 9) == 0
    assert er.bernoulli_frac(rng, 9, 9) == 1
    n = 40000
    k = sum(er.bernoulli_frac(rng, 2, 7) for _ in range(n))
    assert stats.binomtest(k, n, 2 / 7).pvalue > 1e-3


@pytest.mark.parametrize("gamma", [Fraction(1, 3), Fraction(7, 3), Fraction(0)])
def test_bernoulli_exp_rate(rng, gamma):
    n = 40000
    k = sum(er.bernoulli_exp(rng, gamma) for _ in range(n))
    p = math.exp(-float(gamma))
    if p == 1:
        assert k == n
    else:
        assert stats.binomtest(k, n, p).pvalue > 1e-3


def test_geometric_exp_mean(rng):
    with pytest.raises(ValueError):
        er.geometric_exp(rng, 0)
    g = Fraction(3, 2)
    x = np.array([er.geometric_exp(rng, g) for _ in range(40000)])
    mean = math.exp(-1.5) / -math.expm1(-1.5)
    se = math.sqrt(math.exp(-1.5)) / -math.expm1(-1.5) / math.sqrt(len(x))
    assert abs(x.mean() - mean) < 4 * se


def test_as_rational():
    assert er.as_rational(0.25) == Fraction(1, 4)
    assert er.as_rational(Fraction(2, 7)) == Fraction(2, 7)
    assert er.as_rational(3) == 3
    x = math.exp(-4.0)
    up, down = er.as_rational(x), er.as_rational(x, round_up=False)
    assert down <= x <= up and up - down == Fraction(1, 10**6)
    with pytest.raises(ValueError):
        er.as_rational(-0.5)
    with pytest.raises(ValueError):
        er.as_rational(float("nan"))


@given(st.fractions(min_value=Fraction(1, 1000), max_value=60, max_denominator=1000))
@settings(max_examples=80, deadline=None)
def test_complement_rate_bounds(gamma):
    import mpmath
    mpmath.mp.dps = 50
    q = er.complement_rate(gamma)
    g = mpmath.mpf(gamma.numerator) / gamma.denominator
    exact = -mpmath.log1p(-mpmath.exp(-g))
    val = mpmath.mpf(q.numerator) / q.denominator
    assert val >= exact
    assert (val - exact) / exact <= mpmath.mpf(2) ** -32


def test_float_generator_reproducible():
    a = er.float_generator(make_rng(1)).random(3)
    b = er.float_generator(make_rng(1)).random(3)
    assert np.array_equal(a, b)
