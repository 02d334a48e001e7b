"""Statistical and numerical checks: goodness of fit, variance z-tests,
brute-force privacy scans and a seeded suite that runs them all.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from divnoise import analysis as an
from divnoise import samplers as sm
from divnoise.distributed import plan_shares, sample_share
from divnoise.exact_rand import make_rng

__all__ = [
    "GofReport", "ScanReport", "VarianceReport", "chi_square_fit",
    "chi_square_continuous", "epsilon_scan", "variance_test", "run_suite",
    "write_suite_json", "P_THRESHOLD", "Z_THRESHOLD",
]

P_THRESHOLD = 1e-3
Z_THRESHOLD = 4.0


@dataclass
class GofReport:
    statistic: float
    dof: int
    p_value: float
    n_samples: int
    bins: list

    @property
    def passed(self):
        return self.p_value > P_THRESHOLD


@dataclass
class ScanReport:
    max_log_ratio: float
    argmax: tuple
    tail_bound: float
    window: tuple
    radius_ok: bool


@dataclass
class VarianceReport:
    empirical: float
    analytic: float
    se: float
    z: float
    passed: bool


def _merge(labels, expected, observed, min_expected):
    # greedy left-to-right merge, remainder folded into the last bin
    bins, exp_out, obs_out = [], [], []
    cur_l, cur_e, cur_o = [], 0.0, 0
    for lab, e, o in zip(labels, expected, observed):
        cur_l.append(lab)
        cur_e += e
        cur_o += o
        if cur_e >= min_expected:
            bins.append(cur_l)
            exp_out.append(cur_e)
            obs_out.append(cur_o)
            cur_l, cur_e, cur_o = [], 0.0, 0
    if cur_l:
        if bins:
            bins[-1].extend(cur_l)
            exp_out[-1] += cur_e
            obs_out[-1] += cur_o
        else:
            bins.append(cur_l)
            exp_out.append(cur_e)
            obs_out.append(cur_o)
    return bins, np.array(exp_out), np.array(obs_out)


def _describe(bins):
    out = []
    for b in bins:
        if isinstance(b[0], (int, np.integer)):
            out.append([int(b[0]), int(b[-1])])
        elif isinstance(b[0], float):
            out.append([b[0]])
        else:
            out.append([str(x) for x in b])
    return out


def _finish(bins, exp, obs, n):
    if len(bins) < 2:
        raise ValueError("degenerate support: fewer than two bins")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(bins) - 1
    return GofReport(stat, dof, float(stats.chi2.sf(stat, dof)), int(n), _describe(bins))


def chi_square_fit(samples, pmf, min_expected=5):
    """Chi-square goodness of fit of integer samples against a PMF.

    ``pmf`` is a callable k -> probability on the integers, or a dict from
    outcomes to probabilities for a finite categorical law (outcomes may then
    be any hashable values, e.g. count tuples). Bins are merged from the
    left tail inward until each expected count is at least ``min_expected``;
    mass outside the scanned range goes to the outermost bins.
    """
    if isinstance(pmf, dict):
        samples = list(samples)
        n = len(samples)
        if n < 1000:
            raise ValueError("need at least 1000 samples")
        counts = {}
        for s in samples:
            counts[s] = counts.get(s, 0) + 1
        extra = set(counts) - set(pmf)
        if extra:
            return GofReport(math.inf, 0, 0.0, n, [sorted(map(str, extra))])
        labels = list(pmf)
        expected = [n * pmf[k] for k in labels]
        observed = [counts.get(k, 0) for k in labels]
        return _finish(*_merge(labels, expected, observed, min_expected), n)

    x = np.asarray(samples, dtype=np.int64)
    n = len(x)
    if n < 1000:
        raise ValueError("need at least 1000 samples")
    lo, hi = int(x.min()), int(x.max())
    # widen the range until the PMF is negligible on both sides
    step = 0
    while pmf(lo - 1) * n > 1e-9 and step < 100000:
        lo -= 1
        step += 1
    step = 0
    while pmf(hi + 1) * n > 1e-9 and step < 100000:
        hi += 1
        step += 1
    labels = list(range(lo, hi + 1))
    probs = np.array([pmf(k) for k in labels])
    observed = np.bincount(x - lo, minlength=len(labels))
    probs[-1] += max(0.0, 1.0 - probs.sum())
    return _finish(*_merge(labels, n * probs, observed, min_expected), n)


def chi_square_continuous(samples, cdf, n_bins=50):
    """Chi-square with equal-count bins from empirical quantiles of ``samples``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    edges = np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1])
    edges = np.unique(edges)
    probs = np.diff(np.concatenate([[0.0], cdf(edges), [1.0]]))
    obs = np.diff(np.concatenate([[0], np.searchsorted(x, edges, side="right"), [n]]))
    lows = np.concatenate([[-np.inf], edges])
    b, e, o = _merge([[float(v)] for v in lows], n * probs, obs, 5)
    return _finish([[blk[0][0]] for blk in b], e, o, n)


def _pmf_window(dist, radius, tail):
    if isinstance(dist, sm.MSDLapParams):
        ks, probs, tb = an.msdlap_pmf_table(dist, tail)
        return ks, probs, tb
    if isinstance(dist, sm.DLapParams):
        ks = np.arange(-radius, radius + 1)
        a = float(dist.a)
        return ks, math.tanh(a / 2) * np.exp(-a * np.abs(ks)), 0.0
    if isinstance(dist, sm.GDLParams):
        ks = np.arange(-radius, radius + 1)
        half = np.array([an.pmf(dist, k) for k in range(radius + 1)])
        return ks, half[np.abs(ks)], 0.0
    raise TypeError(f"no scan for {type(dist).__name__}")


def epsilon_scan(dist, delta, radius=200, tail=1e-40):
    """max over |xi| <= delta and k of ln(f(k - xi) / f(k)).

    MSDLap PMFs come from a truncated convolution whose entries are each low
    by at most ``tail``; only points where both probabilities exceed
    1e10 * tail enter the maximum, so truncation moves the result by at most
    about 1e-10. Closed-form PMFs are scanned on [-radius, radius].
    """
    ks, probs, tb = _pmf_window(dist, radius, tail)
    floor = max(tb * 1e10, 1e-300)
    logp = np.where(probs > floor, np.log(np.maximum(probs, 1e-320)), -np.inf)
    best, arg = -math.inf, None
    for xi in range(-delta, delta + 1):
        if xi == 0:
            continue
        if xi > 0:
            a, b = logp[:-xi], logp[xi:]  # f(k - xi) at index of k
        else:
            a, b = logp[-xi:], logp[:xi]
        ok = np.isfinite(a) & np.isfinite(b)
        if not ok.any():
            continue
        d = np.full(len(a), -np.inf)
        d[ok] = a[ok] - b[ok]
        i = int(np.argmax(d))
        if d[i] > best:
            k = int(ks[i + xi]) if xi > 0 else int(ks[i])
            best, arg = float(d[i]), (xi, k)
    window_ok = np.isfinite(logp)
    win = (int(ks[window_ok][0]), int(ks[window_ok][-1])) if window_ok.any() else (0, 0)
    return ScanReport(best, arg, tb, win, bool(window_ok.sum() > 2 * delta + 1))


def variance_test(samples, analytic):
    """z-test of the sample variance (mean taken as 0) against ``analytic``."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 10**4:
        raise ValueError("need at least 10^4 samples")
    x2 = x * x
    emp = float(x2.mean())
    se = float(x2.std() / math.sqrt(n))
    if se == 0:
        ok = emp == analytic
        return VarianceReport(emp, analytic, 0.0, 0.0 if ok else math.inf, ok)
    z = (emp - analytic) / se
    return VarianceReport(emp, float(analytic), se, float(z), abs(z) < Z_THRESHOLD)


# suite

def _laplace_mix_cdf(t, ks, probs, scale, loc_scale):
    # P(loc_scale * K + Lap(scale) <= t) with K on ks
    out = np.zeros_like(t, dtype=float)
    for k, p in zip(ks, probs):
        if p < 1e-18:
            continue
        out += p * stats.laplace.cdf(t, loc=loc_scale * k, scale=scale)
    return out


def _checks(n):
    """(name, params, callable(rng) -> list of (kind, report))."""
    from fractions import Fraction as F

    def geo(rng):
        g = F(1, 2)
        x = rng.geometric_many(1, 2, n)
        p = -math.expm1(-0.5)
        return [("gof", chi_square_fit(x, lambda k: p * math.exp(-0.5 * k) if k >= 0 else 0.0)),
                ("var", variance_test(np.asarray(x) - math.exp(-g) / p, math.exp(-0.5) / p**2))]

    def nb(rng):
        P = sm.NBParams(F(5, 2), F(1, 2))
        x = sm.sample_nb(rng, P, n)
        mu = float(P.r) * math.exp(-0.5) / P.p
        return [("gof", chi_square_fit(x, lambda k: an.pmf(P, k))),
                ("var", variance_test(x - mu, an.variance(P)))]

    def dlap(rng):
        P = sm.DLapParams(1)
        x = sm.sample_dlap(rng, P, n)
        return [("gof", chi_square_fit(x, lambda k: an.pmf(P, k))),
                ("var", variance_test(x, an.variance(P)))]

    def gdl(rng):
        P = sm.GDLParams(F(3, 10), F(1, 2))
        x = sm.sample_gdl(rng, P, n)
        return [("gof", chi_square_fit(x, lambda k: an.pmf(P, k))),
                ("var", variance_test(x, an.variance(P)))]

    def dirm(rng):
        P = sm.DirMParams(3, 2, F(1, 2))
        outs = {(i, 3 - i): an.pmf(P, (i, 3 - i)) for i in range(4)}
        xs = []
        for _ in range(n // 10):
            c = sm.sample_dirm(rng, P)
            xs.append((c.get(1, 0), c.get(2, 0)))
        first = np.array([v[0] for v in xs], dtype=float)
        # Var(X_1) for DirM(n, (a, a)) is n (1/2)(1/2)(n + 2a)/(1 + 2a)
        vth = 3 * 0.25 * (3 + 1) / (1 + 1)
        return [("gof", chi_square_fit(xs, outs)),
                ("var", variance_test(first - 1.5, vth))]

    def multi_nb(rng):
        P = sm.NBParams(F(1, 100), 3)
        vals = []
        for i in range(n // 10):
            c = sm.sample_multi_nb(rng, 100, F(1, 100), 3)
            vals.append(c.get(1, 0))
        vals = np.array(vals)
        mu = 0.01 * math.exp(-3) / P.p
        return [("gof", chi_square_fit(vals, lambda k: an.pmf(P, k))),
                ("var", variance_test(vals - mu, an.variance(P)))]

    def msdlap(rng):
        P = sm.MSDLapParams(2, 3)
        x = sm.sample_msdlap(rng, P, n)
        return [("gof", chi_square_fit(x, lambda k: an.pmf(P, k))),
                ("var", variance_test(x, an.variance(P)))]

    def msdlap_r(rng):
        P = sm.MSDLapParams(3, 4, 2)
        x = sm.sample_msdlap(rng, P, n)
        return [("gof", chi_square_fit(x, lambda k: an.pmf(P, k))),
                ("var", variance_test(x, an.variance(P)))]

    def merchant(rng):
        P = sm.MSDLapParams(10, 100, 0, (5, 10, 30, 100))
        x = sm.sample_msdlap(rng, P, n)
        return [("var", variance_test(x, an.variance(P)))]

    def continuous(rng):
        eps, delta = 4.0, 1.0
        x = sm.sample_continuous(rng, eps, delta, n)
        dd = sm.continuous_grid(eps)
        ks, probs, _ = an.msdlap_pmf_table(sm.MSDLapParams(eps - 1, dd))
        cdf = lambda t: _laplace_mix_cdf(t, ks, probs, 0.5 / dd * delta, delta / dd)
        return [("gof", chi_square_continuous(x, cdf)),
                ("var", variance_test(x, an.variance(an.ContinuousSpec(eps, delta))))]

    def arete(rng):
        lam = 0.5
        x = sm.sample_arete(rng, 1.0, 1.0, lam, n)
        # Arete(1, 1, lam) = Lap(1) + Lap(lam); CDF by convolution on a grid
        grid = np.linspace(-60, 60, 240001)
        h = grid[1] - grid[0]
        dens = np.convolve(stats.laplace.pdf(grid), stats.laplace.pdf(grid, scale=lam), "same") * h
        cdfv = np.cumsum(dens) * h
        cdf = lambda t: np.interp(t, grid, cdfv)
        return [("gof", chi_square_continuous(x, cdf)),
                ("var", variance_test(x, 2 + 2 * lam**2))]

    def closure(target, parties):
        def run(rng):
            spec = plan_shares(target, parties)
            tot = sum(sample_share(rng.spawn(i), spec, n // 4) for i in range(parties))
            return [("gof", chi_square_fit(tot, lambda k: an.pmf(target, k))),
                    ("var", variance_test(tot, an.variance(target)))]
        return run

    def nb_three_way(rng):
        P = sm.NBParams.from_p(F(3, 2), F(2, 3))
        m = n // 10
        a = sm.sample_nb(rng, P, m)
        b = np.array([sm.sample_nb_waiting(rng, P) for _ in range(m)])
        c = np.array([sm.sample_nb_inverse(rng, P) for _ in range(m)])
        out = []
        for x, y in ((a, b), (a, c), (b, c)):
            hi = int(max(x.max(), y.max()))
            t = np.array([np.bincount(x, minlength=hi + 1), np.bincount(y, minlength=hi + 1)])
            keep = t.sum(0) >= 10
            t = np.column_stack([t[:, keep], t[:, ~keep].sum(1)]) if (~keep).any() else t[:, keep]
            res = stats.chi2_contingency(t)
            out.append(("gof", GofReport(float(res.statistic), int(res.dof), float(res.pvalue),
                                         2 * m, [])))
        return out

    checks = [
        ("geometric_exp", {"gamma": "1/2"}, geo),
        ("sample_nb", {"r": "5/2", "gamma": "1/2"}, nb),
        ("sample_dlap", {"a": 1}, dlap),
        ("sample_gdl", {"beta": "3/10", "a": "1/2"}, gdl),
        ("sample_dirm", {"n": 3, "k": 2, "alpha": "1/2"}, dirm),
        ("sample_multi_nb", {"k": 100, "r": "1/100", "gamma": 3}, multi_nb),
        ("sample_msdlap", {"eps": 2, "delta": 3, "r": 0}, msdlap),
        ("sample_msdlap_r", {"eps": 3, "delta": 4, "r": 2}, msdlap_r),
        ("msdlap_merchant", {"eps": 10, "scales": [5, 10, 30, 100]}, merchant),
        ("sample_continuous", {"eps": 4, "delta": 1}, continuous),
        ("sample_arete", {"k": 1, "theta": 1, "lambda": 0.5}, arete),
        ("nb_three_way", {"r": "3/2", "p": "2/3"}, nb_three_way),
    ]
    for parties in (2, 5, 17):
        checks.append((f"closure_dlap_n{parties}", {"a": 1}, closure(sm.DLapParams(1), parties)))
        checks.append((f"closure_gdl_n{parties}", {"beta": 0.6, "a": 0.8},
                       closure(sm.GDLParams(F(3, 5), F(4, 5)), parties)))
        checks.append((f"closure_msdlap_n{parties}", {"eps": 3, "delta": 3},
                       closure(sm.MSDLapParams(3, 3), parties)))
    return checks


def _numeric_checks():
    out = []
    for a in (0.5, 1.0, 2.0):
        err = max(abs(an.pmf(sm.GDLParams(1, a), k) - math.tanh(a / 2) * math.exp(-a * abs(k)))
                  for k in range(-50, 51))
        out.append(("gdl_dlap_identity", {"a": a}, err, err < 1e-10))
    for params, delta in ((sm.MSDLapParams(2, 3), 3), (sm.MSDLapParams(3, 3, 1), 3)):
        rep = epsilon_scan(params, delta)
        bound = an.msdlap_epsilon(params)
        out.append(("epsilon_scan_msdlap", {"eps": params.eps, "delta": delta, "r": params.r},
                    rep.max_log_ratio, rep.max_log_ratio <= bound + 1e-9))
    for beta, a, delta in ((0.3, 0.5, 2), (0.25, 0.5, 4), (0.6, 1.0, 3)):
        p = sm.GDLParams(beta, a)
        rep = epsilon_scan(p, delta, radius=120)
        acc = an.gdl_epsilon_exact(p, delta).eps_exact
        out.append(("epsilon_scan_gdl", {"beta": beta, "a": a, "delta": delta},
                    rep.max_log_ratio, abs(rep.max_log_ratio - acc) < 1e-8))
    for r, eps, delta in ((1, 3, 4), (2, 3, 4), (4, 5, 4)):
        P = an.StaircaseParams(r, eps, delta)
        ks = np.arange(-4000, 4001)
        brute = float(np.sum(an.pmf_table(P, ks) * ks.astype(float) ** 2))
        err = abs(brute - an.staircase_variance(P))
        out.append(("staircase_variance", {"r": r, "eps": eps, "delta": delta}, err, err < 1e-9))
    return out


def run_suite(suite="full", seed=0):
    """Run the seeded suite; returns a list of result dicts.

    ``quick`` uses 10^5 samples per sampler check, ``full`` uses 10^6.
    """
    if suite not in ("quick", "full"):
        raise ValueError("suite must be 'quick' or 'full'")
    n = 10**6 if suite == "full" else 10**5
    root = make_rng(seed)
    results = []
    for i, (name, params, fn) in enumerate(_checks(n)):
        for kind, rep in fn(root.spawn(i)):
            if kind == "gof":
                stat, ok, extra = rep.statistic, rep.passed, {"p_value": rep.p_value, "dof": rep.dof}
            else:
                stat, ok, extra = rep.z, rep.passed, {"empirical": rep.empirical,
                                                      "analytic": rep.analytic}
            results.append({"check": f"{name}:{kind}", "params": params,
                            "statistic": stat, "verdict": "pass" if ok else "fail", **extra})
    for name, params, stat, ok in _numeric_checks():
        results.append({"check": name, "params": params, "statistic": stat,
                        "verdict": "pass" if ok else "fail"})
    return results


def write_suite_json(results, fh):
    json.dump({"checks": results,
               "passed": all(r["verdict"] == "pass" for r in results)}, fh, indent=2,
              default=lambda o: asdict(o) if hasattr(o, "__dataclass_fields__") else str(o))
    fh.write("\n")
