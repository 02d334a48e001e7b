# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel.

Fixed-width twin of :mod:`divnoise._fallback`. Each routine consumes stream
words in the same order as the pure-Python version; any parameter too wide
for the 64-bit fast path is handed to the fallback routine with this stream,
so results never depend on which backend is loaded.
"""

from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

import numpy as np

from divnoise import _fallback as _fb
from divnoise._fallback import KernelAbort

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
# bound on denominators handled in C; products stay below PROD_LIMIT
cdef uint64_t WIDE = 1ULL << 56
cdef uint64_t PROD_LIMIT = 1ULL << 62

cdef extern from *:
    int __builtin_clzll(unsigned long long x) nogil


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline bint _fits(object x):
    return 0 <= x < WIDE


cdef class RngStream:
    """Counter-based SplitMix64 stream (compiled)."""

    cdef public uint64_t seed
    cdef uint64_t _ctr

    def __init__(self, seed=0, counter=0):
        self.seed = int(seed) & _fb.MASK64
        self._ctr = int(counter)

    @property
    def backend(self):
        return "cython"

    @property
    def counter(self):
        return self._ctr

    @counter.setter
    def counter(self, value):
        self._ctr = int(value)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self._ctr})"

    cdef inline uint64_t _next(self) nogil:
        self._ctr += 1
        return _mix(self.seed + self._ctr * GOLDEN)

    cpdef object next_u64(self):
        return self._next()

    def spawn(self, key):
        return RngStream(_fb.spawn_seed(self.seed, int(key)))

    def uniform01(self):
        return (self._next() >> 11) * (1.0 / 9007199254740992.0)

    # fast-path primitives; callers guarantee 1 <= d <= PROD_LIMIT

    cdef uint64_t _uniform(self, uint64_t d):
        cdef uint64_t mask, x
        cdef int nbits
        if d == 1:
            return 1
        nbits = 64 - __builtin_clzll(d - 1)
        mask = 0xFFFFFFFFFFFFFFFFULL if nbits == 64 else ((1ULL << nbits) - 1)
        while True:
            x = self._next() & mask
            if x < d:
                return x + 1

    cdef int _bfrac(self, uint64_t n, uint64_t d):
        if n == 0:
            return 0
        if n >= d:
            return 1
        return 1 if self._uniform(d) <= n else 0

    cdef int _bexp(self, uint64_t n, uint64_t d):
        cdef uint64_t k, whole, i
        cdef int a
        if n == 0:
            return 1
        if n <= d:
            k = 1
            while True:
                if d <= PROD_LIMIT // k:
                    a = self._bfrac(n, d * k)
                else:
                    a = _fb.bernoulli_frac(self, n, <object>d * k)
                if not a:
                    break
                k += 1
            return <int>(k & 1)
        whole = n // d
        for i in range(whole):
            if not self._bexp(1, 1):
                return 0
        return self._bexp(n - whole * d, d)

    cdef object _geo_obj(self, uint64_t n, uint64_t d):
        cdef uint64_t u, v
        while True:
            u = self._uniform(d) - 1
            if self._bexp(u, d):
                break
        v = 0
        while self._bexp(1, 1):
            v += 1
        if v < 64:
            return <int64_t>((u + d * v) // n)
        return (<object>u + <object>d * v) // n

    cdef int64_t _geo(self, uint64_t n, uint64_t d) except? -2:
        return self._geo_obj(n, d)

    cdef int64_t _nb_sum(self, int64_t r_int, uint64_t gn, uint64_t gd) except? -2:
        cdef int64_t total = 0, i
        for i in range(r_int):
            total += self._geo(gn, gd)
        return total

    cdef int64_t _nb_batched(self, int64_t r_int, uint64_t rn, uint64_t rd) except? -2:
        cdef int64_t failures = 0, successes = 0
        while True:
            successes += self._geo(rn, rd)
            if successes >= r_int:
                return failures
            failures += 1

    cdef int _poch_accept(self, uint64_t an, uint64_t ad, int64_t r_int, int64_t w) except -1:
        cdef int64_t i
        cdef uint64_t num, den
        for i in range(w):
            if ad <= PROD_LIMIT // <uint64_t>(r_int + i) and <uint64_t>i <= (PROD_LIMIT - an) // ad:
                num = an + <uint64_t>i * ad
                den = ad * <uint64_t>(r_int + i)
                if not self._bfrac(num, den):
                    return 0
            elif not _fb.bernoulli_frac(self, <object>an + <object>i * ad, <object>ad * (r_int + i)):
                return 0
        return 1

    cdef int64_t _nb(self, uint64_t an, uint64_t ad, uint64_t gn, uint64_t gd,
                     uint64_t rn, uint64_t rd, int64_t cap) except? -2:
        cdef int64_t r_int = <int64_t>((an + ad - 1) // ad)
        cdef int64_t t, w
        for t in range(cap):
            if rn == 0 or r_int == 1:
                w = self._nb_sum(r_int, gn, gd)
            else:
                w = self._nb_batched(r_int, rn, rd)
            if ad == 1 or self._poch_accept(an, ad, r_int, w):
                return w
        return -1

    cdef bint _nb_fast(self, an, ad, gn, gd, rn, rd):
        return (_fits(an) and _fits(ad) and _fits(gn) and _fits(gd)
                and _fits(rn) and _fits(rd) and 0 < ad and 0 < gd and 0 < rd)

    # public scalar API

    def uniform_int(self, d):
        if 1 <= d <= PROD_LIMIT:
            return self._uniform(d)
        return _fb.uniform_int(self, d)

    def bernoulli_frac(self, num, den):
        if 0 <= num and 0 < den <= PROD_LIMIT:
            return self._bfrac(min(num, den), den)
        return _fb.bernoulli_frac(self, num, den)

    def bernoulli_exp(self, num, den):
        if _fits(num) and 0 < den < WIDE:
            return self._bexp(num, den)
        return _fb.bernoulli_exp(self, num, den)

    def geometric_exp(self, num, den):
        if 0 < num < WIDE and 0 < den < WIDE:
            return self._geo_obj(num, den)
        return _fb.geometric_exp(self, num, den)

    def nb_sample(self, an, ad, gn, gd, rn, rd, cap):
        if self._nb_fast(an, ad, gn, gd, rn, rd or 1):
            return self._nb(an, ad, gn, gd, rn, rd or 1, cap)
        return _fb.nb_sample(self, an, ad, gn, gd, rn, rd, cap)

    def dirm_counts(self, n, k, a, b):
        counts = {}
        for idx in self._picks(n, k, a, b):
            counts[idx] = counts.get(idx, 0) + 1
        return counts

    def multiscale_sum(self, scales, an, ad, gn, gd, rn, rd, cap):
        if self._nb_fast(2 * len(scales) * an, ad, gn, gd, rn, rd or 1):
            return self._multiscale(np.asarray(scales, dtype=np.int64),
                                    an, ad, gn, gd, rn, rd or 1, cap)
        return _fb.multiscale_sum(self, scales, an, ad, gn, gd, rn, rd, cap)

    # Polya urn

    cdef list _picks(self, n, k, a, b):
        cdef int64_t nn, i
        cdef uint64_t initial, bb, aa, u
        cdef int64_t *buf
        if not (_fits(k * a) and _fits(b) and _fits(a) and _fits(k * a + n * b)):
            return _fb.polya_picks(self, n, k, a, b)
        nn = n
        aa = a
        bb = b
        initial = k * a
        buf = <int64_t *>malloc(max(nn, 1) * sizeof(int64_t))
        if buf == NULL:
            raise MemoryError()
        try:
            for i in range(nn):
                u = self._uniform(initial + <uint64_t>i * bb)
                if u <= initial:
                    buf[i] = <int64_t>((u + aa - 1) // aa)
                else:
                    buf[i] = buf[(u - initial + bb - 1) // bb - 1]
            return [buf[i] for i in range(nn)]
        finally:
            free(buf)

    cdef object _multiscale(self, int64_t[:] scales, uint64_t an, uint64_t ad,
                            uint64_t gn, uint64_t gd, uint64_t rn, uint64_t rd,
                            int64_t cap):
        cdef int64_t m = scales.shape[0]
        cdef uint64_t tn = 2 * <uint64_t>m * an
        cdef uint64_t g = _gcd(tn, ad)
        cdef int64_t total = self._nb(tn // g, ad // g, gn, gd, rn, rd, cap)
        cdef int64_t i, j, acc = 0
        cdef uint64_t initial, u
        cdef int64_t *buf
        if total < 0:
            return None
        initial = 2 * <uint64_t>m * an
        if initial + <uint64_t>total * ad >= PROD_LIMIT:
            picks = _fb.polya_picks(self, total, 2 * m, an, ad)
            for idx in picks:
                j = idx - 1
                acc += scales[j] if j < m else -scales[j - m]
            return acc
        buf = <int64_t *>malloc(max(total, 1) * sizeof(int64_t))
        if buf == NULL:
            raise MemoryError()
        try:
            for i in range(total):
                u = self._uniform(initial + <uint64_t>i * ad)
                if u <= initial:
                    buf[i] = <int64_t>((u + an - 1) // an)
                else:
                    buf[i] = buf[(u - initial + ad - 1) // ad - 1]
                j = buf[i] - 1
                if j < m:
                    acc += scales[j]
                else:
                    acc -= scales[j - m]
            return acc
        finally:
            free(buf)

    # batch API

    def geometric_many(self, num, den, size):
        cdef int64_t i, n = size
        if not (0 < num < WIDE and 0 < den < WIDE):
            return [_fb.geometric_exp(self, num, den) for _ in range(size)]
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[:] o = out
        for i in range(n):
            o[i] = self._geo(num, den)
        return out

    def dlap_many(self, num, den, size):
        cdef int64_t i, n = size
        cdef int64_t x
        if not (0 < num < WIDE and 0 < den < WIDE):
            return _fb.RngStream.dlap_many(self, num, den, size)
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[:] o = out
        for i in range(n):
            x = self._geo(num, den)
            o[i] = x - self._geo(num, den)
        return out

    def nb_many(self, an, ad, gn, gd, rn, rd, cap, size):
        cdef int64_t i, n = size, x
        if not self._nb_fast(an, ad, gn, gd, rn, rd or 1):
            return _fb.RngStream.nb_many(self, an, ad, gn, gd, rn, rd, cap, size)
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[:] o = out
        for i in range(n):
            x = self._nb(an, ad, gn, gd, rn, rd or 1, cap)
            if x < 0:
                raise KernelAbort(cap)
            o[i] = x
        return out

    def nb_diff_many(self, an, ad, gn, gd, rn, rd, cap, size):
        cdef int64_t i, n = size, x, y
        if not self._nb_fast(an, ad, gn, gd, rn, rd or 1):
            return _fb.RngStream.nb_diff_many(self, an, ad, gn, gd, rn, rd, cap, size)
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[:] o = out
        for i in range(n):
            x = self._nb(an, ad, gn, gd, rn, rd or 1, cap)
            y = self._nb(an, ad, gn, gd, rn, rd or 1, cap) if x >= 0 else -1
            if y < 0:
                raise KernelAbort(cap)
            o[i] = x - y
        return out

    def multiscale_many(self, scales, an, ad, gn, gd, rn, rd, cap, size):
        cdef int64_t i, n = size
        if not self._nb_fast(2 * len(scales) * an, ad, gn, gd, rn, rd or 1):
            return _fb.RngStream.multiscale_many(self, scales, an, ad, gn, gd, rn, rd, cap, size)
        sc = np.asarray(scales, dtype=np.int64)
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[:] o = out
        for i in range(n):
            z = self._multiscale(sc, an, ad, gn, gd, rn, rd or 1, cap)
            if z is None:
                raise KernelAbort(cap)
            o[i] = z
        return out


cdef uint64_t _gcd(uint64_t a, uint64_t b):
    cdef uint64_t t
    while b:
        t = a % b
        a = b
        b = t
    return a
