"""Command-line entry point: ``detect``, ``simulate``, ``verify``, ``code-stats``.

Exit codes: 0 success (no alarm for ``detect``), 2 alarm (``detect`` only),
1 error or failed verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

from . import __version__
from .alphabet_dist import read_stream
from .config import RunConfig, parse_config
from .detectors import Detector, DetectorConfig, aux_stop, validate_config
from .empirical import estimate_empirical
from .errors import ChangeDetectionError
from .simulator import (OptimalityRow, Procedure, StreamSpec, delay_slope, estimate_arl0,
                        estimate_error_prob, estimate_worst_delay, optimality_experiment,
                        trials_csv)
from .universal_code import KTCoder, kraft_sum, redundancy
from .verify import SUITES, run_suite

log = logging.getLogger("unicusum")

EXIT_OK, EXIT_ERROR, EXIT_ALARM = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"not serialisable: {type(x)}")


def _overrides(args) -> dict:
    keys = ("seed", "trials", "horizon", "gamma", "alpha", "lambda", "mode", "n0", "delta",
            "penalty", "smoothing", "experiment", "kappa", "change_point")
    return {k: getattr(args, k.replace("lambda", "lam"), None) for k in keys}


def _write(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_detect(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    stream = read_stream(args.stream, cfg.k, binary=args.binary)
    mu0, mu1 = cfg.dist0, cfg.dist1
    est = None
    symbols = stream.symbols
    if cfg.mode == "empirical":
        if len(symbols) <= cfg.n0:
            raise ChangeDetectionError(f"stream has {len(symbols)} symbols, needs more than "
                                       f"the n0={cfg.n0} warm-up")
        est = estimate_empirical(symbols[:cfg.n0], cfg.k, cfg.smoothing)
        symbols = symbols[cfg.n0:]
        reference = est.mu_hat
    else:
        reference = mu0
    if args.aux:
        if cfg.alpha is None:
            raise ChangeDetectionError("--aux needs alpha")
    det_cfg = DetectorConfig(cfg.mode, reference, cfg.threshold, cfg.lam or 0.0, post=mu1,
                             penalty=cfg.penalty, max_starts=cfg.max_starts)
    if mu1 is not None:
        validate_config(det_cfg, mu0, mu1, est, cfg.delta)
    if args.aux:
        report = aux_stop(symbols, det_cfg, trace=args.trace is not None)
    else:
        report = Detector(det_cfg).run(symbols, trace=args.trace is not None)
    if args.trace is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "statistic"])
        for i, v in enumerate(report.statistic_trace, 1):
            w.writerow([i, repr(float(v))])
        Path(args.trace).write_text(buf.getvalue())
    out = {"version": __version__, "config": cfg.to_dict(), "report": report.to_dict()}
    if est is not None:
        out["estimate"] = est.to_dict()
    _write(args.out, _dump(out) + "\n")
    return EXIT_ALARM if report.stopped else EXIT_OK


def _spec(cfg: RunConfig, change_point=None) -> StreamSpec:
    mu1 = cfg.dist1 if cfg.mu1 is not None else cfg.dist0
    n0 = cfg.n0 if cfg.mode == "empirical" else 0
    return StreamSpec(cfg.dist0, mu1, n0=n0, change_point=change_point,
                      horizon=cfg.horizon, seed=cfg.seed)


def _proc(cfg: RunConfig, auxiliary=False) -> Procedure:
    return Procedure(cfg.mode, cfg.threshold, cfg.lam or 0.0, cfg.penalty, cfg.smoothing,
                     auxiliary, cfg.max_starts)


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    header = {"version": __version__, "config": cfg.to_dict()}
    exp = cfg.experiment
    if exp in ("error-prob", "arl"):
        fn = estimate_error_prob if exp == "error-prob" else estimate_arl0
        s = fn(_spec(cfg), _proc(cfg, exp == "error-prob"), cfg.trials, delta=cfg.delta)
        csv_text, summary = trials_csv(s.results, header), s.to_dict()
    elif exp == "delay":
        s = estimate_worst_delay(_spec(cfg, cfg.change_point or 1), _proc(cfg), cfg.trials)
        csv_text, summary = trials_csv(s.results, header), s.to_dict()
    elif exp == "slope":
        if cfg.mu1 is None:
            raise ChangeDetectionError("slope experiment needs mu1")
        r = delay_slope(_spec(cfg, cfg.change_point or 1), _proc(cfg), cfg.gammas, cfg.trials)
        blocks = []
        for g, s in zip(r.gammas_log2, r.summaries):
            blocks.append(trials_csv(s.results, {**header, "log2_gamma": g}))
        csv_text, summary = "".join(blocks), r.to_dict()
    else:
        rows = optimality_experiment(cfg.dist0, cfg.dist1, cfg.kappa,
                                     cfg.gamma if cfg.gamma else 2.0 ** 12,
                                     cfg.n0_schedule, cfg.trials, cfg.seed, cfg.delta)
        buf = io.StringIO()
        buf.write(f"# unicusum {__version__}\n# config: {json.dumps(header['config'], sort_keys=True)}\n")
        names = [f.name for f in fields(OptimalityRow)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for row in rows:
            w.writerow([getattr(row, n) for n in names])
        csv_text = buf.getvalue()
        summary = {"experiment": "optimality", "rows": [asdict(r) for r in rows],
                   "version": __version__, "config": cfg.to_dict()}
    summary["run_config"] = cfg.to_dict()
    if args.out:
        Path(args.out).write_text(csv_text)
        Path(args.out).with_suffix(".json").write_text(_dump(summary) + "\n")
        sys.stdout.write(_dump(summary) + "\n")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_verify(args) -> int:
    print(f"unicusum {__version__} verify {args.suite}")
    checks = run_suite(args.suite)
    for c in checks:
        print(c.line())
    if args.out:
        Path(args.out).write_text(_dump({"version": __version__, "suite": args.suite,
                                         "checks": [asdict(c) for c in checks]}) + "\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ERROR


def code_stats_csv(k: int, max_n: int) -> str:
    coder = KTCoder(k)
    buf = io.StringIO()
    buf.write(f"# unicusum {__version__}\n# config: {json.dumps({'k': k, 'max_n': max_n, 'code': 'kt'})}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "kraft_sum", "max_redundancy_bits"])
    for n in range(max_n + 1):
        w.writerow([n, repr(kraft_sum(coder, n)), repr(redundancy(coder, None, n))])
    return buf.getvalue()


def cmd_code_stats(args) -> int:
    _write(args.out, code_stats_csv(args.k, args.max_n))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    overrides = argparse.ArgumentParser(add_help=False)
    overrides.add_argument("--config", required=True, help="JSON config file or inline JSON")
    overrides.add_argument("--gamma", type=float)
    overrides.add_argument("--alpha", type=float)
    overrides.add_argument("--lambda", dest="lam", type=float)
    overrides.add_argument("--mode", choices=("page", "jbpage", "empirical"))
    overrides.add_argument("--n0", type=int)
    overrides.add_argument("--delta", type=float)
    overrides.add_argument("--kappa", type=float)
    overrides.add_argument("--penalty", choices=("window", "absolute_n"))
    overrides.add_argument("--smoothing", choices=("none", "add_half"))
    overrides.add_argument("--change-point", dest="change_point", type=int)

    p = argparse.ArgumentParser(prog="unicusum", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"unicusum {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", parents=[common, overrides], help="run a detector over a stream file")
    d.add_argument("stream")
    d.add_argument("--binary", action="store_true", help="stream is raw bytes, one symbol each")
    d.add_argument("--trace", help="write n,statistic per step to this CSV")
    d.add_argument("--aux", action="store_true", help="single-start stopping time (needs alpha)")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", parents=[common, overrides], help="run a Monte Carlo experiment")
    s.add_argument("--experiment", choices=("error-prob", "arl", "delay", "slope", "optimality"))
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    v.add_argument("suite", choices=sorted(SUITES) + ["all"])
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("code-stats", parents=[common], help="Kraft sums and KT redundancy")
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--max-n", type=int, default=12)
    c.set_defaults(func=cmd_code_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ChangeDetectionError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
