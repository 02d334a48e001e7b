"""Compare the compiled kernel with the pure-Python fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each row times the same workload on both backends from the same seed and
checks that the draws are identical.
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from divnoise import samplers as sm
from divnoise.exact_rand import make_rng

try:
    from divnoise import _core  # noqa: F401
    HAVE_CORE = True
except ImportError:
    HAVE_CORE = False


def _workloads():
    nb = sm.NBParams(Fraction(5, 2), Fraction(1, 2))
    gdl = sm.GDLParams(Fraction(3, 10), Fraction(1, 2))
    msd = sm.MSDLapParams(4, 8)
    return [
        ("geometric_exp g=1/2", 20000, lambda rng, n: rng.geometric_many(1, 2, n)),
        ("sample_dlap a=1", 20000, lambda rng, n: sm.sample_dlap(rng, sm.DLapParams(1), n)),
        ("sample_nb r=5/2", 20000, lambda rng, n: sm.sample_nb(rng, nb, n)),
        ("sample_gdl b=3/10", 20000, lambda rng, n: sm.sample_gdl(rng, gdl, n)),
        ("sample_msdlap D=8", 5000, lambda rng, n: sm.sample_msdlap(rng, msd, n)),
        ("sample_multi_nb k=1e5", 1,
         lambda rng, n: sorted(sm.sample_multi_nb(rng, 10**5, 1, 4).items())),
    ]


def _time(fn, backend, n, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        rng = make_rng(12345, backend=backend)
        t0 = time.perf_counter()
        out = fn(rng, n)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_CORE:
        print("compiled kernel not built; only the fallback is available")
        return 1
    print(f"{'workload':24s} {'n':>7s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s} same")
    for name, n, fn in _workloads():
        tc, a = _time(fn, "cython", n, args.repeat)
        tp, b = _time(fn, "python", n, args.repeat)
        same = np.array_equal(np.asarray(a, dtype=object), np.asarray(b, dtype=object))
        print(f"{name:24s} {n:7d} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f} {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
