"""Batch command-line front end.

Wires ingestion, estimation, calibration, simulation and report emission;
all numeric output is in ticks (or ticks squared) and every file says so.
There is no interactive mode: curves land in JSON/CSV for external
plotting.

Heavy numeric imports happen inside the subcommand handlers so that the
``--threads`` flag can pin the BLAS/OpenMP thread count before anything
numerical loads; the chosen count is recorded in the output metadata for
reproducibility.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bookimpact",
        description="Order-book event flow analytics",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--out", required=out_required,
                       help="output file or directory")
        p.add_argument("--max-lag", type=int, default=1000)
        p.add_argument("--kernel-lag", type=int, default=100)
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="ridge strength (default: scaled automatically)")
        p.add_argument("--alpha", type=float, default=0.0)
        p.add_argument("--d0", type=float, default=0.04,
                       help="lag-independent diffusion offset, ticks^2")
        p.add_argument("--trim", default=None,
                       help="minutes cut at open,close (e.g. 30,40)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("ingest", help="classify raw trades and quotes")
    p.add_argument("--bbo", required=True)
    p.add_argument("--trades", required=True)
    p.add_argument("--tick-size", type=float, required=True)
    p.add_argument("--symbol", default="UNKNOWN")
    common(p)

    p = sub.add_parser("stats", help="correlation/response/diffusion curves")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--csv", default=None, help="also write long-format CSV")
    common(p)

    p = sub.add_parser("propagate", help="fit per-event impact kernels")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--theta", type=float, default=0.0,
                   help="volume exponent of the signed flow")
    common(p)

    p = sub.add_parser("gaps", help="realized gaps and gap-flow kernels")
    p.add_argument("--in", dest="inp", required=True)
    common(p)

    p = sub.add_parser("closure", help="model diffusion curves")
    p.add_argument("--in", dest="inp", required=True)
    common(p)

    p = sub.add_parser("spread", help="spread response model")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--fit-alpha", action="store_true",
                   help="grid-search the mean-reversion strength")
    common(p)

    p = sub.add_parser("simulate", help="generate a synthetic stream")
    p.add_argument("--config", required=True,
                   help="key=value text file; see docs for keys")
    common(p)

    p = sub.add_parser("report", help="bundle every curve family")
    p.add_argument("--in", dest="inp", required=True)
    common(p)

    p = sub.add_parser("selftest", help="run the built-in oracle suite")
    p.add_argument("--fast", action="store_true")
    common(p, out_required=False)
    return ap


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


def _parse_trim(arg, default=(0, 0)):
    if arg is None:
        return default
    a, b = arg.split(",")
    return int(a), int(b)


def _meta(args):
    return {
        "units": "ticks",
        "threads": args.threads if args.threads is not None else "default",
        "seed": getattr(args, "seed", 0),
    }


def _dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jlist(arr):
    import numpy as np

    return [float(v) for v in np.asarray(arr).ravel()]


def _load_stream(args, trim_default=(0, 0)):
    from .events import trim_session
    from .ingest import load_event_csv

    stream = load_event_csv(args.inp)
    trim = _parse_trim(args.trim, trim_default)
    if trim != (0, 0):
        stream = trim_session(stream, *trim)
    return stream


TYPE_NAMES = ("MO0", "MOP", "CA0", "LO0", "CAP", "LOP")


def _pair_dict(arr3):
    out = {}
    for i, a in enumerate(TYPE_NAMES):
        for j, b in enumerate(TYPE_NAMES):
            out[f"{a}->{b}"] = _jlist(arr3[i, j])
    return out


def _type_dict(arr2):
    return {name: _jlist(arr2[k]) for k, name in enumerate(TYPE_NAMES)}


def _stats_payload(stream, args):
    from . import stats

    L = args.max_lag
    corr = stats.estimate_correlations(stream, max_lag=L, seed=args.seed)
    resp = stats.estimate_response(stream, max_lag=L, seed=args.seed)
    rs = stats.estimate_spread_response(stream, max_lag=L, seed=args.seed)
    dif = stats.estimate_diffusion(stream, max_lag=L, seed=args.seed)
    payload = {
        "lags": list(range(L + 1)),
        "P": {n: float(corr.probabilities[k])
              for k, n in enumerate(TYPE_NAMES)},
        "C": _pair_dict(corr.signed),
        "PI": _pair_dict(corr.unsigned),
        "R": _type_dict(resp.response),
        "RS": _type_dict(rs.spread_response),
        "D": _jlist(dif.diffusion),
        "sign_autocorr": _jlist(corr.sign_autocorr),
        "side_autocorr": _jlist(corr.side_autocorr),
        "meta": _meta(args),
    }
    return payload, corr, resp, rs, dif


def _write_stats_csv(path, corr, resp, rs, dif):
    rows = ["# units: ticks (R, RS), ticks^2 (D), dimensionless (C, PI)",
            "quantity,pi1,pi2,lag,value,stderr,count"]

    def emit(quantity, pi1, pi2, lag, value, stderr, count):
        se = "" if stderr is None else repr(float(stderr))
        rows.append(f"{quantity},{pi1},{pi2},{lag},{float(value)!r},{se},"
                    f"{int(count)}")

    L = corr.max_lag
    for i, a in enumerate(TYPE_NAMES):
        for j, b in enumerate(TYPE_NAMES):
            for lag in range(L + 1):
                se = (corr.signed_se[i, j, lag]
                      if corr.signed_se is not None else None)
                emit("C", a, b, lag, corr.signed[i, j, lag], se,
                     corr.pair_counts[i, j, lag])
                emit("PI", a, b, lag, corr.unsigned[i, j, lag], None,
                     corr.pair_counts[i, j, lag])
    for i, a in enumerate(TYPE_NAMES):
        for lag in range(L + 1):
            se = (resp.response_se[i, lag]
                  if resp.response_se is not None else None)
            emit("R", a, "", lag, resp.response[i, lag], se,
                 resp.response_counts[i, lag])
            se = (rs.spread_response_se[i, lag]
                  if rs.spread_response_se is not None else None)
            emit("RS", a, "", lag, rs.spread_response[i, lag], se,
                 rs.spread_response_counts[i, lag])
    for lag in range(L + 1):
        se = (dif.diffusion_se[lag] if dif.diffusion_se is not None else None)
        emit("D", "", "", lag, dif.diffusion[lag], se,
             dif.diffusion_counts[lag])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


def _cmd_ingest(args):
    from .ingest import IngestConfig, classify, load_bbo_csv, \
        load_trades_csv, write_event_csv

    cfg = IngestConfig(symbol=args.symbol, tick_size=args.tick_size)
    stream, report = classify(load_bbo_csv(args.bbo),
                              load_trades_csv(args.trades), cfg)
    write_event_csv(stream, args.out)
    summary = {k: v for k, v in report.__dict__.items()}
    summary["conserved"] = report.conserved()
    summary["meta"] = _meta(args)
    _dump(summary, args.out + ".report.json")
    print(f"wrote {len(stream)} events to {args.out}")
    return 0


def _cmd_stats(args):
    stream = _load_stream(args)
    payload, corr, resp, rs, dif = _stats_payload(stream, args)
    _dump(payload, args.out)
    if args.csv:
        _write_stats_csv(args.csv, corr, resp, rs, dif)
    print(f"wrote {args.out}")
    return 0


def _cmd_propagate(args):
    from . import propagator, stats

    stream = _load_stream(args)
    L = args.max_lag
    corr = stats.estimate_correlations(stream, max_lag=L, n_bootstrap=0)
    resp = stats.estimate_response(stream, max_lag=L, n_bootstrap=0)
    ps = propagator.solve_multi_event(corr, resp, lam=args.lam)
    prices, flow, days = propagator.market_order_flow(
        stream, propagator.SignedFlowConfig(theta=args.theta))
    mo_lag = min(L, max(10, len(flow) // 10))
    base = propagator.solve_single_event(
        propagator.series_response(prices, flow, mo_lag, days),
        propagator.series_autocorr(flow, mo_lag, days),
        lam=args.lam)
    payload = {
        "lags": list(range(1, L + 1)),
        "G": _type_dict(ps.propagators),
        "baselineG": _jlist(base.kernel),
        "baseline_lags": list(range(1, mo_lag + 1)),
        "residual": ps.relative_residual,
        "baseline_residual": base.relative_residual,
        "lambda": ps.lam,
        "reliable_lag": ps.reliable_lag,
        "meta": _meta(args),
    }
    _dump(payload, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_gaps(args):
    from . import gapmodel, stats

    stream = _load_stream(args, trim_default=(30, 40))
    L = args.max_lag
    corr = stats.estimate_correlations(stream, max_lag=L, n_bootstrap=0)
    rg = gapmodel.realized_gaps(stream)
    ker = gapmodel.calibrate_kernels(stream, corr, kernel_lag=args.kernel_lag,
                                     lam=args.lam)
    ell = min(300, L)
    dec = gapmodel.decompose_impact(rg, ker, ell)
    closure = gapmodel.predict_diffusion_closure(rg, ker, corr, ell,
                                                 d0=args.d0)

    def kd(arr):
        out = {}
        for i, a in enumerate(TYPE_NAMES):
            for j, b in enumerate(("MOP", "CAP", "LOP")):
                out[f"{a}->{b}"] = _jlist(arr[i, j])
        return out

    payload = {
        "deltaR": {n: float(rg.delta_r[k])
                   for k, n in enumerate(("MOP", "CAP", "LOP"))},
        "unconditional_gap": rg.unconditional_gap,
        "K": kd(ker.kernel),
        "Ktilde": kd(ker.kernel_mean),
        "kappa": kd(ker.kappa),
        "kappa_se": kd(ker.kappa_se),
        "Gstar": _type_dict(dec.total),
        "dGstar": _type_dict(dec.delta_star),
        "Ghat": _type_dict(dec.bare),
        "Dclosure": _jlist(closure),
        "D0": args.d0,
        "lambda": ker.lam,
        "kernel_lag": ker.max_lag,
        "meta": _meta(args),
    }
    _dump(payload, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_closure(args):
    from . import gapmodel, stats

    stream = _load_stream(args, trim_default=(30, 40))
    L = args.max_lag
    corr = stats.estimate_correlations(stream, max_lag=L, n_bootstrap=0)
    dif = stats.estimate_diffusion(stream, max_lag=L, n_bootstrap=0)
    rg = gapmodel.realized_gaps(stream)
    ker = gapmodel.calibrate_kernels(stream, corr, kernel_lag=args.kernel_lag,
                                     lam=args.lam)
    ell = min(300, L)
    payload = {
        "lags": list(range(ell + 1)),
        "D_empirical": _jlist(dif.diffusion[:ell + 1]),
        "D_constant": _jlist(gapmodel.predict_diffusion_constant(
            rg, corr, ell)),
        "D_closure": _jlist(gapmodel.predict_diffusion_closure(
            rg, ker, corr, ell, d0=args.d0)),
        "D0": args.d0,
        "units": "ticks^2",
        "meta": _meta(args),
    }
    _dump(payload, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_spread(args):
    from . import spread, stats

    stream = _load_stream(args, trim_default=(30, 40))
    L = args.max_lag
    corr = stats.estimate_correlations(stream, max_lag=L, n_bootstrap=0)
    rs = stats.estimate_spread_response(stream, max_lag=L, n_bootstrap=0)
    model = spread.build_spread_model(stream, alpha=args.alpha)
    ell = min(300, L)
    alpha = args.alpha
    if args.fit_alpha:
        alpha, _grid, _obj = spread.fit_alpha(model, corr,
                                              rs.spread_response, ell)
        model = spread.build_spread_model(stream, alpha=alpha)
    pred = spread.predict_spread_response(model, corr, ell)
    acf, rate, diag = spread.spread_autocorrelation(stream, ell)
    payload = {
        "alpha": alpha,
        "meanS": model.mean_spread,
        "meanS_by_type": {n: float(model.mean_spread_by_type[k])
                          for k, n in enumerate(TYPE_NAMES)},
        "RS_pred": _type_dict(pred),
        "RS_empirical": _type_dict(rs.spread_response[:, :ell + 1]),
        "spread_acf": _jlist(acf),
        "acf_exponential_rate": rate,
        "acf_fit": diag,
        # one admissible choice for the asymptotic correction; see the
        # predict_spread_response docs
        "pi_tail_adjustment": "multiplicative on (PI+1) beyond half the lag "
                              "cutoff, zero-drift tail",
        "meta": _meta(args),
    }
    _dump(payload, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args):
    from .ingest import write_event_csv
    from .simconfig import config_from_file

    cfg = config_from_file(args.config, seed_override=args.seed
                           if args.seed else None)
    from .sim import generate

    stream = generate(cfg)
    write_event_csv(stream, args.out)
    print(f"wrote {len(stream)} events to {args.out}")
    return 0


def _cmd_report(args):
    os.makedirs(args.out, exist_ok=True)
    stream = _load_stream(args)
    payload, corr, resp, rs, dif = _stats_payload(stream, args)
    _dump(payload, os.path.join(args.out, "stats.json"))
    _write_stats_csv(os.path.join(args.out, "stats.csv"),
                     corr, resp, rs, dif)

    class _A:
        pass

    for name, fn, trim in (("propagators.json", _cmd_propagate, (0, 0)),
                           ("gaps.json", _cmd_gaps, (30, 40)),
                           ("closure.json", _cmd_closure, (30, 40)),
                           ("spread.json", _cmd_spread, (30, 40))):
        sub = _A()
        sub.__dict__.update(args.__dict__)
        sub.theta = 0.0
        sub.fit_alpha = True
        sub.out = os.path.join(args.out, name)
        if args.trim is None:
            sub.trim = f"{trim[0]},{trim[1]}"
        fn(sub)
    manifest = {
        "files": ["stats.json", "stats.csv", "propagators.json",
                  "gaps.json", "closure.json", "spread.json"],
        "meta": _meta(args),
    }
    _dump(manifest, os.path.join(args.out, "manifest.json"))
    print(f"wrote report bundle to {args.out}")
    return 0


def _cmd_selftest(args):
    from .selftest import run_all

    results = run_all(out_dir=args.out, fast=args.fast, seed=args.seed)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "propagate": _cmd_propagate,
    "gaps": _cmd_gaps,
    "closure": _cmd_closure,
    "spread": _cmd_spread,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - the CLI contract is JSON errors
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
