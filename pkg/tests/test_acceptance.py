"""Acceptance criteria 1-12, each at its stated tolerance.

Every criterion prints one ``criterion N: PASS|FAIL ...`` line; the lines are
also repeated in the pytest terminal summary. Run directly with
``python3 tests/test_acceptance.py`` or through pytest.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from divnoise import analysis as an
from divnoise import samplers as sm
from divnoise import shuffle as sh
from divnoise.distributed import plan_shares, sample_share
from divnoise.exact_rand import make_rng
from divnoise.verify import chi_square_fit, epsilon_scan, variance_test

RESULTS = []
SEEDS = (101, 202, 303, 404, 505)
P_MIN = 1e-3


def _record(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    RESULTS.append(line)
    return ok


def _nb_pmf(r, gamma):
    p = -math.expm1(-float(gamma))
    return lambda k: stats.nbinom.pmf(k, float(r), p)


def _gdl_oracle(beta, a, radius):
    # PMF of the difference of two NB(beta, 1 - e^-a) by direct convolution
    f = stats.nbinom.pmf(np.arange(radius), beta, -math.expm1(-a))
    return np.convolve(f, f[::-1]), radius - 1


# 1

def test_c01_gdl_dlap_identity():
    t0 = time.perf_counter()
    err = 0.0
    for a in (0.5, 1.0, 2.0):
        P = sm.GDLParams(1, a)
        err = max(err, max(abs(an.pmf(P, k) - math.tanh(a / 2) * math.exp(-a * abs(k)))
                           for k in range(-50, 51)))
    dt = time.perf_counter() - t0
    assert _record(1, err < 1e-10 and dt < 1, f"max err {err:.2e}, {dt:.3f}s")


# 2

def test_c02_exact_epsilon_consistency():
    t0 = time.perf_counter()
    grid = [(b, a, d) for b, a, d in zip(
        (0.1, 0.3, 0.5, 0.7, 0.9) * 4,
        (0.5,) * 5 + (1.0,) * 5 + (1.5,) * 5 + (2.0,) * 5,
        (1, 2, 3, 4, 5, 6) * 3 + (6, 1))]
    worst, ok = 0.0, True
    for beta, a, delta in grid:
        conv, off = _gdl_oracle(beta, a, int(800 / a))
        ref = math.log(conv[off] / conv[off + delta])
        b = an.gdl_epsilon_exact(sm.GDLParams(beta, a), delta)
        worst = max(worst, abs(b.eps_exact - ref))
        ok &= b.eps_exact <= b.eps_simplified and b.eps_exact <= b.eps_wendel
    dt = time.perf_counter() - t0
    ok &= worst < 1e-8 and dt < 30 and len(grid) == 20
    assert _record(2, ok, f"{len(grid)} points, max |exact - oracle| {worst:.2e}, {dt:.2f}s")


# 3

def test_c03_calibration_identity():
    diffs = []
    for delta, eps in ((1, 4), (4, 6), (16, 8)):
        P = an.calibrate_gdl(eps, delta)
        s = an.gdl_epsilon_exact(P, delta).eps_simplified
        diffs.append(abs(s - eps) / np.spacing(float(eps)))
    assert _record(3, max(diffs) <= 2, f"max deviation {max(diffs):.0f} ulp")


# 4

def test_c04_msdlap_privacy_scan():
    t0 = time.perf_counter()
    s0 = epsilon_scan(sm.MSDLapParams(2, 3, 0), 3).max_log_ratio
    s1 = epsilon_scan(sm.MSDLapParams(3, 3, 1), 3).max_log_ratio
    dt = time.perf_counter() - t0
    ok = s0 <= 2 + 1e-9 and s1 <= 3 + 1e-9 and dt < 60
    assert _record(4, ok, f"r=0 scan {s0:.12f}, r=1 scan {s1:.12f}, {dt:.2f}s")


# 5

N5 = 10**6


def _sampler_cases():
    nb = sm.NBParams(F(5, 2), F(1, 2))
    gdl = sm.GDLParams(F(3, 10), F(1, 2))
    g = F(1, 2)
    p = -math.expm1(-0.5)

    def dirm(rng):
        P = sm.DirMParams(3, 3, F(1, 2))
        xs = []
        for _ in range(N5):
            c = sm.sample_dirm(rng, P)
            xs.append((c.get(1, 0), c.get(2, 0), c.get(3, 0)))
        outs = {(i, j, 3 - i - j): stats.dirichlet_multinomial.pmf([i, j, 3 - i - j], [0.5] * 3, 3)
                for i in range(4) for j in range(4 - i)}
        return chi_square_fit(xs, outs).p_value

    def multi_nb(rng):
        c = sm.sample_multi_nb(rng, N5, F(1, 2), 1)
        x = np.zeros(N5, dtype=np.int64)
        for i, v in c.items():
            x[i - 1] = v
        return chi_square_fit(x, _nb_pmf(0.5, 1)).p_value

    return [
        ("geometric_exp", lambda rng: chi_square_fit(
            rng.geometric_many(g.numerator, g.denominator, N5),
            lambda k: p * math.exp(-0.5 * k) if k >= 0 else 0.0).p_value),
        ("sample_nb", lambda rng: chi_square_fit(sm.sample_nb(rng, nb, N5),
                                                 _nb_pmf(nb.r, nb.gamma)).p_value),
        ("sample_dlap", lambda rng: chi_square_fit(
            sm.sample_dlap(rng, sm.DLapParams(1), N5),
            lambda k: math.tanh(0.5) * math.exp(-abs(k))).p_value),
        ("sample_gdl", lambda rng: chi_square_fit(sm.sample_gdl(rng, gdl, N5),
                                                  _gdl_pmf_fn(0.3, 0.5)).p_value),
        ("sample_dirm", dirm),
        ("sample_multi_nb", multi_nb),
    ]


def _gdl_pmf_fn(beta, a):
    conv, off = _gdl_oracle(beta, a, 1500)
    return lambda k: conv[off + k] if abs(k) <= off else 0.0


def _contingency_p(x, y):
    hi = int(max(x.max(), y.max()))
    t = np.array([np.bincount(x, minlength=hi + 1), np.bincount(y, minlength=hi + 1)])
    keep = t.sum(0) >= 10
    if (~keep).any():
        t = np.column_stack([t[:, keep], t[:, ~keep].sum(1)])
    return float(stats.chi2_contingency(t).pvalue)


def _three_way(rng):
    P = sm.NBParams.from_p(F(3, 2), F(2, 3))
    a = sm.sample_nb(rng, P, N5)
    b = np.array([sm.sample_nb_waiting(rng, P) for _ in range(N5)])
    c = np.array([sm.sample_nb_inverse(rng, P) for _ in range(N5)])
    return min(_contingency_p(a, b), _contingency_p(a, c), _contingency_p(b, c))


def test_c05_sampler_exactness():
    t0 = time.perf_counter()
    worst = {}
    for name, fn in _sampler_cases():
        worst[name] = min(fn(make_rng(s)) for s in SEEDS)
    worst["nb_three_way"] = min(_three_way(make_rng(s)) for s in SEEDS)
    dt = time.perf_counter() - t0
    ok = all(p > P_MIN for p in worst.values()) and dt < 600
    detail = ", ".join(f"{k} {v:.3g}" for k, v in worst.items())
    assert _record(5, ok, f"min p over 5 seeds: {detail}; {dt:.0f}s")


# 6

def test_c06_divisibility_closure():
    targets = {"dlap": sm.DLapParams(1), "gdl": sm.GDLParams(F(3, 5), F(4, 5)),
               "msdlap": sm.MSDLapParams(3, 3)}
    worst = 1.0
    rng = make_rng(6)
    for n in (2, 5, 17):
        for name, target in targets.items():
            spec = plan_shares(target, n)
            tot = sum(sample_share(rng.spawn(1000 * n + i), spec, 200000) for i in range(n))
            worst = min(worst, chi_square_fit(tot, lambda k: an.pmf(target, k)).p_value)
            rng = rng.spawn(n)
    assert _record(6, worst > P_MIN, f"min p over 9 cases {worst:.3g}")


# 7

def test_c07_variance_identities():
    rng = make_rng(7)
    n = 10**6
    cases = {
        "nb": (lambda r: sm.sample_nb(r, sm.NBParams(F(5, 2), F(1, 2)), n)
               - 2.5 * math.exp(-0.5) / -math.expm1(-0.5),
               an.variance(sm.NBParams(F(5, 2), F(1, 2)))),
        "dlap": (lambda r: sm.sample_dlap(r, sm.DLapParams(F(1, 2)), n),
                 an.variance(sm.DLapParams(F(1, 2)))),
        "gdl": (lambda r: sm.sample_gdl(r, sm.GDLParams(F(3, 10), F(1, 2)), n),
                an.variance(sm.GDLParams(F(3, 10), F(1, 2)))),
        "msdlap_r0": (lambda r: sm.sample_msdlap(r, sm.MSDLapParams(3, 6), n),
                      an.variance(sm.MSDLapParams(3, 6))),
        "msdlap_r2": (lambda r: sm.sample_msdlap(r, sm.MSDLapParams(4, 6, 2), n),
                      an.variance(sm.MSDLapParams(4, 6, 2))),
        "continuous": (lambda r: sm.sample_continuous(r, 6, 2.0, n),
                       an.variance(an.ContinuousSpec(6, 2.0))),
        "arete": (lambda r: sm.sample_arete(r, 0.3, 1.0, 0.2, n), 2 * 0.3 + 2 * 0.04),
    }
    merchant = sm.MSDLapParams(10, 100, 0, (5, 10, 30, 100))
    mv = an.variance(merchant)
    cases["merchant"] = (lambda r: sm.sample_msdlap(r, merchant, n), mv)
    zs = {}
    for i, (name, (draw, v)) in enumerate(cases.items()):
        zs[name] = variance_test(draw(rng.spawn(i)), v).z
    ok = all(abs(z) < 4 for z in zs.values()) and float(f"{mv:.2g}") == 1.0
    detail = ", ".join(f"{k} z={v:+.2f}" for k, v in zs.items())
    assert _record(7, ok, f"{detail}; merchant closed form {mv:.5f}")


# 8

def test_c08_staircase_cross_check():
    ks = np.arange(-4000, 4001)
    worst = 0.0
    for r, eps, delta in ((1, 3, 4), (2, 3, 4), (4, 5, 4)):
        P = an.StaircaseParams(r, eps, delta)
        brute = float(np.sum(an.pmf_table(P, ks) * ks.astype(float) ** 2))
        worst = max(worst, abs(brute - an.staircase_variance(P)))
    eps, d = 20.0, 3
    ratio = an.variance(sm.MSDLapParams(eps, d)) / an.staircase_variance(an.StaircaseParams(1, eps, d))
    b = math.exp(-eps)
    target = (1 + (2 * d - 1) * b) / (1 - 2 * b + b * b)
    ok = worst < 1e-9 and abs(ratio - target) < 1e-6
    assert _record(8, ok, f"max brute-force diff {worst:.2e}, ratio diff {ratio - target:.2e}")


# 9

def _slope(xs, ys):
    return float(np.polyfit(xs, np.log(ys), 1)[0])


def test_c09_scaling_fits():
    rng = make_rng(9)
    # continuous mechanism, empirical MSE at unit sensitivity
    ce = list(range(3, 10))
    cm = [float(np.mean(sm.sample_continuous(rng.spawn(i), e, 1.0, 10**6) ** 2))
          for i, e in enumerate(ce)]
    s_cont = _slope(ce, cm)
    # shuffle protocol at n = 10^4
    n = 10**4
    inputs = rng.spawn(1 << 50)
    xs = [inputs.uniform01() for _ in range(n)]
    se = (3, 4.5, 6, 7.5)
    sm_ = [sh.run_experiment(rng.spawn(100 + i), xs, e, 1e-6, 300).empirical_mse
           for i, e in enumerate(se)]
    s_shuf = _slope(se, sm_)
    # MSDLap r = 0 at delta = 4, closed form
    me = list(range(4, 13))
    s_ms = _slope(me, [an.variance(sm.MSDLapParams(e, 4)) for e in me])
    ok_c = abs(s_cont / (-2 / 3) - 1) <= 0.15
    ok_s = abs(s_shuf / (-2 / 3) - 1) <= 0.20
    ok_m = abs(s_ms / -1 - 1) <= 0.10
    assert _record(9, ok_c and ok_s and ok_m,
                   f"continuous {s_cont:.4f}, shuffle {s_shuf:.4f}, msdlap {s_ms:.4f}")


# 10

def test_c10_shuffle_accuracy():
    rng = make_rng(10)
    n = 100
    inputs = rng.spawn(1 << 50)
    xs = [inputs.uniform01() for _ in range(n)]
    reps = [sh.run_experiment(rng.spawn(b), xs, 4, 1e-4, 100) for b in range(100)]
    trials = sum(r.trials for r in reps)
    all_ok = all(r.accuracy_ok for r in reps)
    under = sum(r.empirical_mse <= r.analytic_bound for r in reps)
    pooled = float(np.mean([e * e for r in reps for e in r.errors]))
    ok = all_ok and trials == 10**4 and under >= 95
    _record(10, ok, f"inequality on all {trials} trials: {all_ok}; batches under bound "
                    f"{under}/100; pooled MSE {pooled:.4f} vs bound {reps[0].analytic_bound:.4f}")
    assert all_ok
    assert under >= 95


# 11

def test_c11_sparse_sampler_cost():
    k, eps = 10**6, 10
    p = -math.expm1(-eps)
    mean_nb = math.exp(-eps) / p
    q0 = math.exp(-eps)  # P(NB(1, p) > 0)
    sd = math.sqrt(k * q0 * (1 - q0))
    worst_t, worst_z = 0.0, 0.0
    for s in SEEDS:
        rng = make_rng(s)
        t0 = time.perf_counter()
        c = sm.sample_multi_nb(rng, k, 1, eps)
        worst_t = max(worst_t, time.perf_counter() - t0)
        worst_z = max(worst_z, abs(len(c) - k * mean_nb) / sd)
    ok = worst_t < 1 and worst_z < 4
    assert _record(11, ok, f"max time {worst_t * 1e3:.1f} ms, max |nonzero - k E[NB]| "
                           f"{worst_z:.2f} sd (k E[NB] = {k * mean_nb:.1f})")


# 12

def test_c12_arete_convergence():
    rows = sm.demo_arete_convergence(make_rng(12), 0.3, 1.0, 0.2, (4, 16, 64, 256), n=10**5)
    ks = [r["ks"] for r in rows]
    tol = 2 * rows[0]["mc_noise"]
    ok = all(b <= a + tol for a, b in zip(ks, ks[1:]))
    assert _record(12, ok, "KS " + ", ".join(f"{v:.4f}" for v in ks) + f" (tolerance {tol:.4f})")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
