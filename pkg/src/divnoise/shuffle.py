"""Split-and-mix shuffle protocol for real summation, simulated end to end.

Each party rounds x in [0, 1] to y in {0..Delta} without bias, adds a share
of generalized MSDLap noise, and splits (y + z) mod q into m additive shares
over Z_q. The analyzer sees the shuffled messages only, sums them mod q and
decodes. Security of the shuffle itself is taken as given; only correctness
and accuracy are simulated.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from divnoise.analysis import ShuffleParams, choose_r, variance
from divnoise.distributed import plan_shares, sample_all_shares, sample_share
from divnoise.samplers import MSDLapParams

__all__ = [
    "Transcript", "ExperimentReport", "derive_params", "round_randomized",
    "randomize", "shuffle_messages", "analyze", "run_protocol", "run_experiment",
    "write_transcript_jsonl", "write_report_csv", "REPORT_FIELDS",
]

REPORT_FIELDS = ("eps", "n", "trials", "empirical_mse", "analytic_bound")
SHUFFLER_KEY = 1 << 40
NOISE_KEY = (1 << 40) + 1


@dataclass
class Transcript:
    messages: list
    q: int
    decoded: float
    true_sum: float
    noisy_total: int = 0


@dataclass
class ExperimentReport:
    eps: float
    n: int
    trials: int
    empirical_mse: float
    analytic_bound: float
    errors: list = field(default_factory=list, repr=False)
    accuracy_ok: bool = True

    def row(self):
        return {k: getattr(self, k) for k in REPORT_FIELDS}


def derive_params(eps, delta_dp, n):
    """Delta = ceil(e^{eps/3} sqrt n), q = 2 n Delta, m = ceil(sigma / log2 n) + 1."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if eps < 2:
        raise ValueError("shuffle protocol requires eps >= 2")
    if not 0 < delta_dp < 1.0 / n:
        raise ValueError("delta must lie in (0, 1/n)")
    n = int(n)
    big_delta = math.ceil(math.exp(eps / 3) * math.sqrt(n))
    q = 2 * n * big_delta
    if q >= 1 << 63:
        raise ValueError("modulus exceeds one machine word")
    sigma = math.log2((math.exp(eps) + 1) / delta_dp)
    m = max(1, math.ceil(sigma / math.log2(n)) + 1)
    noise = MSDLapParams(eps, big_delta, choose_r(eps, big_delta))
    return ShuffleParams(eps, delta_dp, n, big_delta, q, sigma, m,
                         (q - 1).bit_length(), noise)


def round_randomized(rng, x, big_delta):
    """floor(Delta x) + Bernoulli(frac(Delta x)), exact for the double x."""
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    t = Fraction(x) * big_delta
    base = math.floor(t)
    frac = t - base
    if frac == 0:
        return base
    return base + rng.bernoulli_frac(frac.numerator, frac.denominator)


def randomize(rng, x, params, share=None, z=None):
    """The m messages of one party, plus its rounded value and noise share.

    The share is drawn from ``share`` unless given directly as ``z``;
    with neither, noise is disabled.
    """
    y = round_randomized(rng, x, params.Delta)
    if z is None:
        z = 0 if share is None else int(sample_share(rng, share))
    q = params.q
    value = (y + int(z)) % q
    msgs = [rng.uniform_int(q) - 1 for _ in range(params.m - 1)]
    msgs.append((value - sum(msgs)) % q)
    return msgs, y, int(z)


def shuffle_messages(rng, messages):
    """Fisher-Yates shuffle in place."""
    for i in range(len(messages) - 1, 0, -1):
        j = rng.uniform_int(i + 1) - 1
        messages[i], messages[j] = messages[j], messages[i]
    return messages


def _decode(total, params):
    n, big_delta = params.n, params.Delta
    if total <= n * big_delta:
        return total / big_delta
    if total <= 2 * n * big_delta:
        return float(n)
    return 0.0


def analyze(messages, params):
    """Sum messages mod q and decode to an estimate in [0, n]."""
    if len(messages) != params.n * params.m:
        raise ValueError(f"expected {params.n * params.m} messages, got {len(messages)}")
    return _decode(sum(int(v) for v in messages) % params.q, params)


def run_protocol(rng, xs, params, noise=True, batch_noise=True):
    """One protocol run; party i rounds and splits with ``rng.spawn(i)``.

    With ``batch_noise`` all n noise shares are drawn jointly from a
    dedicated stream (see ``sample_all_shares``); the joint law is the same.
    """
    xs = list(xs)
    n = params.n
    if len(xs) != n:
        raise ValueError("need one input per party")
    share = plan_shares(params.noise, n) if noise else None
    zs = [None] * n
    if share is None:
        zs = [0] * n
    elif batch_noise:
        zs = sample_all_shares(rng.spawn(NOISE_KEY), share).tolist()
    messages = []
    ytot = ztot = 0
    for i, x in enumerate(xs):
        msgs, y, z = randomize(rng.spawn(i), x, params, share, zs[i])
        if sum(msgs) % params.q != (y + z) % params.q:
            raise AssertionError("message shares do not sum to the party value")
        messages.extend(msgs)
        ytot += y
        ztot += z
    shuffle_messages(rng.spawn(SHUFFLER_KEY), messages)
    decoded = analyze(messages, params)
    return Transcript(messages, params.q, decoded, float(math.fsum(xs)), ytot + ztot)


def analytic_bound(params):
    """Var(D)/Delta^2 + n/(4 Delta^2)."""
    d2 = params.Delta**2
    return variance(params.noise) / d2 + params.n / (4 * d2)


def run_experiment(rng, xs, eps, delta_dp, trials, noise=True):
    """Empirical MSE over ``trials`` runs next to the analytic bound.

    Also checks on every trial that the decoded error is no larger than the
    error of the undecoded noisy total.
    """
    params = derive_params(eps, delta_dp, len(xs))
    errors = []
    ok = True
    for t in range(trials):
        tr = run_protocol(rng.spawn(t), xs, params, noise)
        err = tr.decoded - tr.true_sum
        raw = tr.noisy_total / params.Delta - tr.true_sum
        if abs(err) > abs(raw) + 1e-9:
            ok = False
        errors.append(err)
    mse = float(np.mean(np.square(errors))) if errors else float("nan")
    return ExperimentReport(float(eps), params.n, int(trials), mse,
                            analytic_bound(params), errors, ok)


def write_transcript_jsonl(transcript, path):
    with open(path, "w") as fh:
        for v in transcript.messages:
            fh.write(json.dumps({"value": int(v), "q": transcript.q}) + "\n")


def _fmt(v):
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def write_report_csv(reports, fh):
    """CSV with header; ``fh`` is an open text stream."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for rep in reports:
        w.writerow([_fmt(rep.row()[k]) for k in REPORT_FIELDS])
