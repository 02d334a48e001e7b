"""Pure-Python sampling kernel.

This module is the reference twin of the compiled ``_core`` extension. Every
function consumes 64-bit words from the stream in exactly the same order as
its compiled counterpart, so both backends produce identical outputs for
identical seeds. The compiled kernel also calls into these functions whenever
a parameter does not fit its fixed-width fast path.

All arithmetic is on Python integers; no floating point is involved.
"""

from math import gcd

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SPAWN_MULT = 0xD1B54A32D192ED03


class KernelAbort(RuntimeError):
    """A rejection loop hit its iteration cap."""


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def spawn_seed(seed, key):
    return mix64(seed ^ mix64((key * SPAWN_MULT + 1) & MASK64))


class RngStream:
    """Counter-based SplitMix64 stream.

    Word ``i`` (1-based) is ``mix64(seed + i * GOLDEN)``; the stream state is
    just ``(seed, counter)``.
    """

    backend = "python"

    def __init__(self, seed=0, counter=0):
        self.seed = int(seed) & MASK64
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def next_u64(self):
        self.counter += 1
        return mix64((self.seed + self.counter * GOLDEN) & MASK64)

    def spawn(self, key):
        return type(self)(spawn_seed(self.seed, int(key)))

    def uniform01(self):
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform_int(self, d):
        return uniform_int(self, d)

    def bernoulli_frac(self, num, den):
        return bernoulli_frac(self, num, den)

    def bernoulli_exp(self, num, den):
        return bernoulli_exp(self, num, den)

    def geometric_exp(self, num, den):
        return geometric_exp(self, num, den)

    def nb_sample(self, an, ad, gn, gd, rn, rd, cap):
        return nb_sample(self, an, ad, gn, gd, rn, rd, cap)

    def dirm_counts(self, n, k, a, b):
        return dirm_counts(self, n, k, a, b)

    def multiscale_sum(self, scales, an, ad, gn, gd, rn, rd, cap):
        return multiscale_sum(self, scales, an, ad, gn, gd, rn, rd, cap)

    def geometric_many(self, num, den, size):
        return [geometric_exp(self, num, den) for _ in range(size)]

    def dlap_many(self, num, den, size):
        return [geometric_exp(self, num, den) - geometric_exp(self, num, den)
                for _ in range(size)]

    def nb_many(self, an, ad, gn, gd, rn, rd, cap, size):
        out = []
        for _ in range(size):
            x = nb_sample(self, an, ad, gn, gd, rn, rd, cap)
            if x < 0:
                raise KernelAbort(cap)
            out.append(x)
        return out

    def nb_diff_many(self, an, ad, gn, gd, rn, rd, cap, size):
        out = []
        for _ in range(size):
            x = nb_sample(self, an, ad, gn, gd, rn, rd, cap)
            y = nb_sample(self, an, ad, gn, gd, rn, rd, cap) if x >= 0 else -1
            if y < 0:
                raise KernelAbort(cap)
            out.append(x - y)
        return out

    def multiscale_many(self, scales, an, ad, gn, gd, rn, rd, cap, size):
        out = []
        for _ in range(size):
            z = multiscale_sum(self, scales, an, ad, gn, gd, rn, rd, cap)
            if z is None:
                raise KernelAbort(cap)
            out.append(z)
        return out


def uniform_int(rng, d):
    """Uniform on {1, ..., d} by masked rejection over whole words."""
    if d == 1:
        return 1
    nbits = (d - 1).bit_length()
    nwords = (nbits + 63) >> 6
    mask = (1 << nbits) - 1
    while True:
        x = 0
        for j in range(nwords):
            x |= rng.next_u64() << (64 * j)
        x &= mask
        if x < d:
            return x + 1


def bernoulli_frac(rng, num, den):
    if num <= 0:
        return 0
    if num >= den:
        return 1
    return 1 if uniform_int(rng, den) <= num else 0


def bernoulli_exp(rng, num, den):
    """Bernoulli(exp(-num/den)) by the alternating-series loop."""
    if num == 0:
        return 1
    if num <= den:
        k = 1
        while bernoulli_frac(rng, num, den * k):
            k += 1
        return k & 1
    whole = num // den
    for _ in range(whole):
        if not bernoulli_exp(rng, 1, 1):
            return 0
    return bernoulli_exp(rng, num - whole * den, den)


def geometric_exp(rng, num, den):
    """P(k) = (1 - exp(-g)) exp(-g k) for g = num/den > 0."""
    while True:
        u = uniform_int(rng, den) - 1
        if bernoulli_exp(rng, u, den):
            break
    v = 0
    while bernoulli_exp(rng, 1, 1):
        v += 1
    return (u + den * v) // num


def nb_sum_geometric(rng, r_int, gn, gd):
    total = 0
    for _ in range(r_int):
        total += geometric_exp(rng, gn, gd)
    return total


def nb_batched(rng, r_int, rn, rd):
    """Failures before ``r_int`` successes, success probability exp(-rn/rd).

    Runs of successes are drawn in one geometric step each, so the loop
    executes once per failure plus once.
    """
    failures = 0
    successes = 0
    while True:
        successes += geometric_exp(rng, rn, rd)
        if successes >= r_int:
            return failures
        failures += 1


def pochhammer_accept(rng, an, ad, r_int, w):
    # Bernoulli((r)_w / (R)_w) as a product of independent per-factor draws
    for i in range(w):
        if not bernoulli_frac(rng, an + i * ad, ad * (r_int + i)):
            return 0
    return 1


def nb_sample(rng, an, ad, gn, gd, rn, rd, cap):
    """NB(an/ad, 1 - exp(-gn/gd)); returns -1 after ``cap`` rejections.

    The proposal NB(R, .) with R = ceil(an/ad) is an exact sum of R geometric
    draws when ``rn == 0`` or R == 1; otherwise the batched proposal runs at
    success rate ``rn/rd``.
    """
    r_int = (an + ad - 1) // ad
    for _ in range(cap):
        if rn == 0 or r_int == 1:
            w = nb_sum_geometric(rng, r_int, gn, gd)
        else:
            w = nb_batched(rng, r_int, rn, rd)
        if ad == 1 or pochhammer_accept(rng, an, ad, r_int, w):
            return w
    return -1


def polya_picks(rng, n, k, a, b):
    """Colour sequence of an n-step Polya urn: a balls per colour, b added."""
    picked = []
    initial = k * a
    for i in range(n):
        u = uniform_int(rng, initial + i * b)
        if u <= initial:
            picked.append((u + a - 1) // a)
        else:
            picked.append(picked[(u - initial + b - 1) // b - 1])
    return picked


def dirm_counts(rng, n, k, a, b):
    counts = {}
    for idx in polya_picks(rng, n, k, a, b):
        counts[idx] = counts.get(idx, 0) + 1
    return counts


def multiscale_sum(rng, scales, an, ad, gn, gd, rn, rd, cap):
    """sum_i s_i (U_i - V_i) with all U_i, V_i i.i.d. NB(an/ad, 1 - exp(-gn/gd)).

    The 2m variates are drawn jointly: their total from one NB(2m an/ad, .)
    draw, then its allocation from the Polya urn. Returns None on abort.
    """
    m = len(scales)
    tn = 2 * m * an
    g = gcd(tn, ad)
    total = nb_sample(rng, tn // g, ad // g, gn, gd, rn, rd, cap)
    if total < 0:
        return None
    acc = 0
    for idx in polya_picks(rng, total, 2 * m, an, ad):
        j = idx - 1
        if j < m:
            acc += scales[j]
        else:
            acc -= scales[j - m]
    return acc
