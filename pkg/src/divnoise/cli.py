"""Command-line front end.

Subcommands: calibrate, mse-table, sample, shuffle, verify. Exit codes are
0 on success, 2 for a parameter precondition failure, 3 when verification
fails and 4 when a sampler hits its rejection cap.
"""

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys

from divnoise import analysis as an
from divnoise import samplers as sm
from divnoise import shuffle as sh
from divnoise import verify as vf
from divnoise.exact_rand import make_rng

EXIT_OK, EXIT_PRECONDITION, EXIT_VERIFY, EXIT_ABORT = 0, 2, 3, 4
MECHANISMS = ("dlap", "gdl", "msdlap", "continuous")


class Precondition(ValueError):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _json_value(v):
    if v is None or isinstance(v, (int, str, bool)):
        return v
    return float(f"{float(v):.12g}")


def _emit(rows, fields, fmt, out):
    if fmt == "json":
        json.dump([{k: _json_value(r.get(k)) for k in fields} for r in rows], out, indent=2)
        out.write("\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in fields])


def _open_out(path):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _default_seed():
    return int(os.environ.get("DIVNOISE_SEED", "0"))


# calibrate

def calibrate(mech, eps, delta, r=None):
    """Parameters, certified eps and exact variance for one mechanism."""
    if eps <= 0:
        raise Precondition("eps must be positive")
    if mech == "dlap":
        if int(delta) != delta or delta < 1:
            raise Precondition("delta must be a positive integer")
        a = eps / delta
        return {"mechanism": mech, "a": a, "eps": a * delta,
                "variance": an.variance(sm.DLapParams(a))}
    if mech == "gdl":
        if int(delta) != delta or delta < 1:
            raise Precondition("delta must be a positive integer")
        if not eps > 2 + math.log(delta):
            raise Precondition("GDL calibration requires eps > 2 + ln(delta)")
        p = an.calibrate_gdl(eps, int(delta))
        bound = an.gdl_epsilon_exact(p, int(delta))
        return {"mechanism": mech, "beta": float(p.beta), "a": float(p.a),
                "eps": bound.eps, "variance": an.variance(p)}
    if mech == "msdlap":
        if int(delta) != delta or delta < 1:
            raise Precondition("delta must be a positive integer")
        delta = int(delta)
        if r is None:
            r = an.choose_r(eps, delta) if eps >= 2 else 0
        if r >= 1 and eps < 2:
            raise Precondition("MSDLap with r >= 1 requires eps >= 2")
        if not 0 <= r <= delta:
            raise Precondition("r must lie in 0..delta")
        p = sm.MSDLapParams(eps, delta, r)
        return {"mechanism": mech, "r": r, "eps": an.msdlap_epsilon(p),
                "variance": an.variance(p)}
    if mech == "continuous":
        if eps < 2:
            raise Precondition("continuous mechanism requires eps >= 2")
        if delta <= 0:
            raise Precondition("delta must be positive")
        return {"mechanism": mech, "delta_d": sm.continuous_grid(eps), "eps": eps,
                "variance": an.variance(an.ContinuousSpec(eps, delta))}
    raise Precondition(f"unknown mechanism {mech!r}")


CAL_FIELDS = ("mechanism", "beta", "a", "r", "delta_d", "eps", "variance")


# mse table

TABLE_FIELDS = ("eps", "delta", "dlap", "gdl", "msdlap_best_r", "dstair_best_r", "cont_msdlap")


def mse_row(eps, delta):
    row = {"eps": eps, "delta": delta,
           "dlap": an.variance(sm.DLapParams(eps / delta))}
    if eps > 2 + math.log(delta):
        row["gdl"] = an.variance(an.calibrate_gdl(eps, delta))
    rs = range(0, delta + 1) if eps >= 2 else [0]
    row["msdlap_best_r"] = min(an.variance(sm.MSDLapParams(eps, delta, r)) for r in rs)
    row["dstair_best_r"] = an.optimal_staircase_variance(eps, delta)[1]
    if eps >= 2:
        row["cont_msdlap"] = an.variance(an.ContinuousSpec(eps, delta))
    return row


def mse_table(eps_values, deltas):
    return [mse_row(e, d) for d in deltas for e in eps_values]


# sample

def sample(mech, eps, delta, n, seed, r=None, beta=None, a=None):
    rng = make_rng(seed)
    if mech == "dlap":
        return sm.sample_dlap(rng, sm.DLapParams(calibrate("dlap", eps, delta)["a"]), n)
    if mech == "gdl":
        if beta is not None or a is not None:
            if beta is None or a is None:
                raise Precondition("--beta and --a must be given together")
            p = sm.GDLParams(beta, a)
        else:
            calibrate("gdl", eps, delta)
            p = an.calibrate_gdl(eps, int(delta))
        return sm.sample_gdl(rng, p, n)
    if mech == "msdlap":
        r = calibrate("msdlap", eps, delta, r)["r"]
        return sm.sample_msdlap(rng, sm.MSDLapParams(eps, int(delta), r), n)
    if mech == "continuous":
        calibrate("continuous", eps, delta)
        return sm.sample_continuous(rng, eps, delta, n)
    raise Precondition(f"unknown mechanism {mech!r}")


# parser

def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _eps_grid(args):
    if args.eps_list:
        return _floats(args.eps_list)
    k = int(round((args.eps_max - args.eps_min) / args.eps_step))
    return [round(args.eps_min + i * args.eps_step, 10) for i in range(k + 1)]


def build_parser():
    ap = argparse.ArgumentParser(prog="divnoise", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="parameters and variance for a mechanism")
    c.add_argument("mechanism", choices=MECHANISMS)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--r", type=int)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--out")

    t = sub.add_parser("mse-table", help="closed-form MSE per mechanism")
    t.add_argument("--eps-min", type=float, default=1.0)
    t.add_argument("--eps-max", type=float, default=20.0)
    t.add_argument("--eps-step", type=float, default=1.0)
    t.add_argument("--eps-list", help="comma-separated eps values (overrides range)")
    t.add_argument("--deltas", default="1,3,10")
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.add_argument("--out")

    s = sub.add_parser("sample", help="print samples, one per line")
    s.add_argument("mechanism", choices=MECHANISMS)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--r", type=int)
    s.add_argument("--beta", type=float)
    s.add_argument("--a", type=float)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out")

    h = sub.add_parser("shuffle", help="split-and-mix summation experiment")
    h.add_argument("--eps", type=float, required=True)
    h.add_argument("--n", type=int, required=True)
    h.add_argument("--trials", type=int, default=50)
    h.add_argument("--batches", type=int, default=1)
    h.add_argument("--delta-dp", type=float)
    h.add_argument("--no-noise", action="store_true")
    h.add_argument("--seed", type=int, default=None)
    h.add_argument("--transcript", help="write the first run's messages as JSON lines")
    h.add_argument("--format", choices=("csv", "json"), default="csv")
    h.add_argument("--out")

    v = sub.add_parser("verify", help="run the verification suite")
    v.add_argument("--suite", choices=("quick", "full"), default="quick")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", help="JSON report path (default stdout)")
    return ap


def _run(args):
    seed = args.seed if getattr(args, "seed", None) is not None else _default_seed()
    if args.command == "calibrate":
        row = calibrate(args.mechanism, args.eps, args.delta, args.r)
        with _open_out(args.out) as out:
            _emit([row], CAL_FIELDS, args.format, out)
        return EXIT_OK
    if args.command == "mse-table":
        rows = mse_table(_eps_grid(args), _ints(args.deltas))
        with _open_out(args.out) as out:
            _emit(rows, TABLE_FIELDS, args.format, out)
        return EXIT_OK
    if args.command == "sample":
        if args.n < 0:
            raise Precondition("--n must be non-negative")
        xs = sample(args.mechanism, args.eps, args.delta, args.n, seed,
                    args.r, args.beta, args.a)
        buf = io.StringIO()
        for v in xs:
            buf.write(_fmt(float(v)) if args.mechanism == "continuous" else str(int(v)))
            buf.write("\n")
        with _open_out(args.out) as out:
            out.write(buf.getvalue())
        return EXIT_OK
    if args.command == "shuffle":
        n = args.n
        if n < 2:
            raise Precondition("--n must be at least 2")
        delta_dp = args.delta_dp if args.delta_dp is not None else min(1e-4, 0.1 / n)
        root = make_rng(seed)
        inputs = root.spawn(1 << 50)
        xs = [inputs.uniform01() for _ in range(n)]
        reports = []
        for b in range(args.batches):
            reports.append(sh.run_experiment(root.spawn(b), xs, args.eps, delta_dp,
                                             args.trials, noise=not args.no_noise))
        if args.transcript:
            params = sh.derive_params(args.eps, delta_dp, n)
            tr = sh.run_protocol(root.spawn(0).spawn(0), xs, params, not args.no_noise)
            sh.write_transcript_jsonl(tr, args.transcript)
        with _open_out(args.out) as out:
            _emit([r.row() for r in reports], sh.REPORT_FIELDS, args.format, out)
        return EXIT_OK
    if args.command == "verify":
        results = vf.run_suite(args.suite, seed)
        with _open_out(args.out) as out:
            vf.write_suite_json(results, out)
        return EXIT_OK if all(r["verdict"] == "pass" for r in results) else EXIT_VERIFY
    raise Precondition(f"unknown command {args.command!r}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except sm.SamplerAbort as exc:
        print(f"error: sampler aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
