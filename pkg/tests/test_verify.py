import io
import json
import math

import numpy as np
import pytest
from scipy import stats

from divnoise import analysis as an
from divnoise import samplers as sm
from divnoise import verify as vf
from divnoise.exact_rand import make_rng


def test_chi_square_accepts_and_rejects(rng):
    x = sm.sample_dlap(rng, sm.DLapParams(1), 50000)
    good = vf.chi_square_fit(x, lambda k: an.pmf(sm.DLapParams(1), k))
    bad = vf.chi_square_fit(x, lambda k: an.pmf(sm.DLapParams(1.1), k))
    assert good.passed and not bad.passed
    assert good.dof == len(good.bins) - 1


def test_chi_square_rejects_too_few():
    with pytest.raises(ValueError):
        vf.chi_square_fit([0, 1, 2], lambda k: 0.5)


def test_chi_square_categorical_unknown_outcome():
    rep = vf.chi_square_fit(["a"] * 999 + ["z"], {"a": 0.5, "b": 0.5})
    assert rep.p_value == 0.0 and not rep.passed


def test_chi_square_continuous():
    gen = np.random.default_rng(0)
    x = gen.laplace(0, 1, 40000)
    assert vf.chi_square_continuous(x, lambda t: stats.laplace.cdf(t)).passed
    assert not vf.chi_square_continuous(x, lambda t: stats.norm.cdf(t)).passed


def test_variance_test():
    gen = np.random.default_rng(1)
    x = gen.normal(0, 2, 40000)
    assert vf.variance_test(x, 4.0).passed
    assert not vf.variance_test(x, 5.0).passed
    assert vf.variance_test(np.zeros(10**4), 0.0).passed
    with pytest.raises(ValueError):
        vf.variance_test(np.zeros(10), 0.0)


@pytest.mark.parametrize("a,delta", [(0.5, 3), (2.0, 1)])
def test_epsilon_scan_dlap(a, delta):
    rep = vf.epsilon_scan(sm.DLapParams(a), delta)
    assert rep.max_log_ratio == pytest.approx(a * delta, abs=1e-10)
    assert rep.radius_ok


def test_epsilon_scan_gdl_matches_accountant():
    p = sm.GDLParams(0.3, 0.5)
    rep = vf.epsilon_scan(p, 2, radius=120)
    assert abs(rep.max_log_ratio - an.gdl_epsilon_exact(p, 2).eps_exact) < 1e-8


def test_epsilon_scan_msdlap():
    rep = vf.epsilon_scan(sm.MSDLapParams(2, 3), 3)
    assert rep.max_log_ratio <= 2 + 1e-9
    with pytest.raises(TypeError):
        vf.epsilon_scan(sm.NBParams(1, 1), 1)


def test_suite_json_roundtrip():
    buf = io.StringIO()
    vf.write_suite_json([{"check": "x", "verdict": "pass"}], buf)
    assert json.loads(buf.getvalue())["passed"] is True
    with pytest.raises(ValueError):
        vf.run_suite("medium")
