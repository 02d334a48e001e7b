"""Per-party noise shares for n-party distributed noise.

Every supported mechanism is a signed combination of negative binomials, so a
share is the same combination with the NB stopping parameter divided by n.
Per-party parameters are exact rationals; the n-fold sum of shares has the
target law exactly.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from divnoise.analysis import PrivacyBound, gdl_epsilon_exact
from divnoise.exact_rand import as_rational
from divnoise.samplers import (
    DLapParams, GDLParams, MSDLapParams, NBParams, SamplerAbort, _nb_args,
    sample_gdl, sample_multi_nb, sample_nb,
)

__all__ = ["ShareSpec", "DropoutReport", "plan_shares", "sample_share", "sample_all_shares",
           "dropout_epsilon"]


@dataclass(frozen=True)
class ShareSpec:
    """Target mechanism, party count and one party's share parameters.

    ``per_party`` is an NBParams (NB target), a GDLParams (DLap and GDL
    targets) or, for MSDLap, a dict with keys ``scales``, ``r_share``,
    ``eps`` and optionally ``smooth`` (the hole-smoothing share).
    """

    mechanism: object
    n_parties: int
    per_party: object


@dataclass(frozen=True)
class DropoutReport:
    honest: int
    realized_beta: Fraction
    realized_eps: PrivacyBound


def plan_shares(dist, n):
    """Share parameters so that n i.i.d. shares sum to ``dist``."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    if isinstance(dist, NBParams):
        return ShareSpec(dist, n, NBParams(as_rational(dist.r) / n, dist.gamma))
    if isinstance(dist, DLapParams):
        return ShareSpec(dist, n, GDLParams(Fraction(1, n), dist.a))
    if isinstance(dist, GDLParams):
        return ShareSpec(dist, n, GDLParams(as_rational(dist.beta) / n, dist.a))
    if isinstance(dist, MSDLapParams):
        if dist.r == 0:
            per = {"scales": dist.scales, "r_share": Fraction(1, n), "eps": dist.eps}
        else:
            r = dist.r
            per = {"scales": tuple(r * i for i in range(1, dist.delta // r + 1)),
                   "r_share": Fraction(1, n), "eps": as_rational(dist.eps) - 1,
                   "smooth": GDLParams(Fraction(1, n), Fraction(1, r))}
        return ShareSpec(dist, n, per)
    raise ValueError(f"{type(dist).__name__} is not supported for share planning")


def sample_share(rng, spec, size=None):
    """One party's share (or ``size`` i.i.d. shares)."""
    per = spec.per_party
    if isinstance(per, NBParams):
        return sample_nb(rng, per, size)
    if isinstance(per, GDLParams):
        return sample_gdl(rng, per, size)
    args = _nb_args(per["r_share"], as_rational(per["eps"]))
    scales = list(per["scales"])
    if size is None:
        z = rng.multiscale_sum(scales, *args)
        if z is None:
            raise SamplerAbort("rejection cap exceeded")
        z = int(z)
    else:
        z = np.asarray(rng.multiscale_many(scales, *args, size), dtype=np.int64)
    if "smooth" in per:
        z = z + sample_gdl(rng, per["smooth"], size)
    return z


def _joint_nb(rng, n, r, gamma):
    # n i.i.d. NB(r, .) values: NB(n r, .) total split by the Polya urn
    out = np.zeros(n, dtype=np.int64)
    for idx, c in sample_multi_nb(rng, n, r, gamma).items():
        out[idx - 1] = c
    return out


def sample_all_shares(rng, spec):
    """All n parties' shares at once, with the same joint law as n
    independent ``sample_share`` calls.

    NB-type components are drawn jointly as one total plus a Dirichlet-
    multinomial allocation, so the cost tracks the total rather than n times
    the per-share rejection cost.
    """
    n = spec.n_parties
    per = spec.per_party
    if isinstance(per, NBParams):
        return _joint_nb(rng, n, as_rational(per.r), per.gamma)
    if isinstance(per, GDLParams):
        beta = as_rational(per.beta)
        return _joint_nb(rng, n, beta, per.a) - _joint_nb(rng, n, beta, per.a)
    z = sample_share(rng, ShareSpec(spec.mechanism, n, {k: v for k, v in per.items()
                                                        if k != "smooth"}), n)
    if "smooth" in per:
        sm = per["smooth"]
        beta = as_rational(sm.beta)
        z = z + _joint_nb(rng, n, beta, sm.a) - _joint_nb(rng, n, beta, sm.a)
    return z


def dropout_epsilon(spec, honest, delta):
    """Privacy of the noise left when only ``honest`` parties contribute.

    Supported for DLap and GDL targets, where the surviving noise is
    GDL(beta * honest / n, a).
    """
    if not 1 <= honest <= spec.n_parties:
        raise ValueError("honest must be in 1..n_parties")
    target = spec.mechanism
    if isinstance(target, DLapParams):
        beta, a = Fraction(1), target.a
    elif isinstance(target, GDLParams):
        beta, a = as_rational(target.beta), target.a
    else:
        raise ValueError(f"dropout accounting unsupported for {type(target).__name__}")
    realized = beta * honest / spec.n_parties
    bound = gdl_epsilon_exact(GDLParams(realized, a), delta)
    return DropoutReport(int(honest), realized, bound)

