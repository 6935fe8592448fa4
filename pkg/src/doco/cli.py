"""Command line interface: run, evaluate, sweep and check.

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 comparator solver non-convergence.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, harness, persist, plotting, properties
from .algorithm import InvariantViolation
from .build import build
from .config import ConfigError, RunConfig, load_config, parse_config
from .evaluation import ComparatorError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_SOLVER = 4

OUT_ENV = "DOCO_OUT_DIR"

log = logging.getLogger("doco")


class _Fail(Exception):
    def __init__(self, code: int, report: dict):
        super().__init__(report.get("message", ""))
        self.code = code
        self.report = report
        self.out = None


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _out_dir(args, cfg: RunConfig | None) -> Path:
    out = getattr(args, "out", None) or (cfg.out if cfg is not None else None) or os.environ.get(OUT_ENV)
    if not out:
        raise _Fail(EXIT_CONFIG, {"status": "config_error", "keys": ["out"],
                                  "message": f"no output directory: pass --out, set config.out or {OUT_ENV}"})
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Fail(EXIT_CONFIG, {"status": "io_error", "path": str(path), "message": str(exc)}) from exc
    return path


def _load(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
        overrides = {}
        if getattr(args, "seed", None) is not None:
            overrides["seed"] = args.seed
        if getattr(args, "mode", None) is not None:
            overrides["mode"] = args.mode
        if getattr(args, "threads", None) is not None:
            overrides["threads"] = args.threads
        return cfg.with_overrides(**overrides) if overrides else cfg
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, {"status": "config_error", "keys": exc.keys, "message": str(exc)}) from exc


def _violation_report(v) -> dict:
    return {"status": "invariant_violation", **v.to_dict(), "message": v.describe()}


def _constants_summary(metrics) -> dict:
    c = metrics.constants.to_dict()
    c["regret_exponent"] = metrics.constants.regret_exponent
    c["fit_sq_exponents"] = list(metrics.constants.fit_sq_exponents)
    return c


def _final(metrics) -> dict:
    if metrics.T == 0:
        return {"T": 0}
    k = metrics.T - 1
    return {
        "T": metrics.T, "regret": float(metrics.regret[k]), "fit": float(metrics.fit[k]),
        "fit_sq": float(metrics.fit_sq[k]), "fit_diag": float(metrics.fit_diag[k]),
        "C_T_star": float(metrics.C_T_star[k]), "regret_rhs": float(metrics.regret_rhs[k]),
        "fit_sq_rhs": float(metrics.fit_sq_rhs[k]), "bounds_hold": metrics.bounds_hold(),
    }


def _write_report(out: Path, metrics) -> list[str]:
    persist.write_metrics(out / persist.METRICS_NAME, metrics)
    plotting.write_gnuplot(out)
    figs = plotting.write_figures(out, metrics)
    return [p.name for p in figs]


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        return _run_into(cfg, out)
    except _Fail as exc:
        exc.out = out
        raise


def _run_into(cfg: RunConfig, out: Path) -> int:
    try:
        res = harness.run_pipeline(cfg)
    except InvariantViolation as exc:
        raise _Fail(EXIT_INVARIANT, _violation_report(exc.violation)) from exc
    except ComparatorError as exc:
        raise _Fail(EXIT_SOLVER, {"status": "solver_nonconvergence", "message": str(exc),
                                  "diagnostics": exc.diagnostics}) from exc
    m = res.metrics
    persist.write_trace(out / persist.TRACE_NAME, res.trace)
    figs = _write_report(out, m)
    cons = m.consensus
    summary = {
        "config": cfg.to_dict(),
        "trace_sha256": persist.sha256_file(out / persist.TRACE_NAME),
        "metrics_sha256": persist.sha256_file(out / persist.METRICS_NAME),
        "final": _final(m),
        "constants": _constants_summary(m),
        "invariants": {
            "violations": [v.to_dict() for v in res.trace.violations],
            "consensus_passed": cons.passed,
            "consensus_worst_margin": cons.worst_margin,
            "consensus_violations": [{"t": t, "i": i, "margin": mg} for t, i, mg in cons.violations],
        },
        "comparator": {
            "solver": "SLSQP, started at the set center",
            "max_iterations": int(m.path.iterations.max()) if m.T else 0,
            "max_gradient_mapping": float(m.path.gradient_mapping.max()) if m.T else 0.0,
            "max_violation": float(m.path.violation.max()) if m.T else 0.0,
        },
        "figures": figs + ["plots.gp"],
        "generated_at": _timestamp(),
    }
    persist.write_json(out / persist.SUMMARY_NAME, summary)
    if cfg.strict and not cons.passed:
        t, i, margin = cons.violations[0]
        raise _Fail(EXIT_INVARIANT, {"status": "invariant_violation", "check": "consensus_error_bound",
                                     "t": t, "i": i, "value": margin, "bound": 0.0,
                                     "message": f"consensus error exceeds its bound at t={t}, i={i}"})
    print(f"run ok: T={cfg.T} regret={summary['final'].get('regret', 0.0):.6g} "
          f"fit={summary['final'].get('fit', 0.0):.6g} -> {out}")
    if res.trace.violations:
        print(f"audit: {len(res.trace.violations)} invariant violation(s) recorded in summary.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    src = Path(args.trace)
    summary_path = src / persist.SUMMARY_NAME
    try:
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        cfg = parse_config(summary["config"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise _Fail(EXIT_CONFIG, {"status": "io_error", "path": str(summary_path), "message": str(exc)}) from exc
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, {"status": "config_error", "keys": exc.keys, "message": str(exc)}) from exc
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    parts = build(cfg)
    p = parts.problem
    stored = persist.read_trace(src / persist.TRACE_NAME, p.n, p.d, p.m)
    try:
        m = evaluation.evaluate(stored, p, parts.weights, parts.mirror, parts.schedule)
    except ComparatorError as exc:
        raise _Fail(EXIT_SOLVER, {"status": "solver_nonconvergence", "message": str(exc),
                                  "diagnostics": exc.diagnostics}) from exc
    _write_report(out, m)
    # second route: own-loss values stored in the trace against a fresh evaluation
    own = np.array([[p.eval_objective(i, t, stored.x[t - 1, i]) for i in range(p.n)] for t in range(1, stored.T + 1)])
    f_gap = float(np.max(np.abs(own - stored.f_own))) if stored.T else 0.0
    print(f"evaluate ok: T={m.T} regret={_final(m).get('regret', 0.0):.6g} fit={_final(m).get('fit', 0.0):.6g} "
          f"bounds_hold={m.bounds_hold()} consensus_passed={m.consensus.passed} stored_f_gap={f_gap:.3e} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        exps = harness.parse_horizons(args.horizons)
    except ValueError as exc:
        raise _Fail(EXIT_CONFIG, {"status": "config_error", "keys": ["--horizons"], "message": str(exc)}) from exc
    try:
        res = harness.sweep(cfg, exps, seeds=args.seeds)
    except InvariantViolation as exc:
        raise _Fail(EXIT_INVARIANT, _violation_report(exc.violation)) from exc
    except ComparatorError as exc:
        raise _Fail(EXIT_SOLVER, {"status": "solver_nonconvergence", "message": str(exc),
                                  "diagnostics": exc.diagnostics}) from exc
    slope_rows = [(s.seed, "regret", s.regret_slope, res.regret_exponent) for s in res.per_seed]
    slope_rows += [(s.seed, "fit", s.fit_slope, "") for s in res.per_seed]
    if args.seeds > 1:
        slope_rows += [("median", "regret", res.regret_slope, res.regret_exponent), ("median", "fit", res.fit_slope, "")]
    persist.write_rows(out / "slopes.csv", ("seed", "metric", "slope", "reference_exponent"),
                       [(str(a), b, c, d if isinstance(d, str) else repr(float(d))) for a, b, c, d in slope_rows])
    bound_rows = []
    for s in res.per_seed:
        for k, T in enumerate(s.horizons):
            bound_rows.append((s.seed, T, s.regret[k], s.regret_rhs[k], s.fit[k], s.fit_sq[k], s.fit_sq_rhs[k],
                               s.C_T_star[k], str(bool(s.regret[k] <= s.regret_rhs[k])).lower(),
                               str(bool(s.fit_sq[k] <= s.fit_sq_rhs[k])).lower()))
    persist.write_rows(out / "bounds.csv", ("seed", "T", "regret", "regret_rhs", "fit", "fit_sq", "fit_sq_rhs",
                                            "C_T_star", "regret_ok", "fit_ok"), bound_rows)
    plotting.write_sweep_figure(out, res)
    for s in res.per_seed:
        print(f"seed {s.seed}: regret slope {s.regret_slope:.4f}  fit slope {s.fit_slope:.4f}  bounds_hold={s.bounds_hold}")
    if args.seeds > 1:
        print(f"median: regret slope {res.regret_slope:.4f}  fit slope {res.fit_slope:.4f}")
    print(f"reference regret exponent {res.regret_exponent:.4f} -> {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load(args)
    parts = build(cfg)
    results = properties.run_all(parts, cfg.seed, samples=args.samples, engine_T=args.engine_T,
                                 grid_rounds=args.grid_rounds)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    if args.out or cfg.out or os.environ.get(OUT_ENV):
        out = _out_dir(args, cfg)
        persist.write_json(out / "check.json", {"config": cfg.to_dict(), "passed": ok,
                                                "results": [r.to_dict() for r in results]})
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doco", description="Distributed online primal-dual mirror descent simulator.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configuration and write trace, metrics, summary and figures")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help=f"output directory (fallback: config.out, then ${OUT_ENV})")
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="mode", action="store_const", const="strict", help="abort on invariant violation")
    mode.add_argument("--audit", dest="mode", action="store_const", const="audit", help="record violations and continue")
    run.add_argument("--threads", type=int, help="worker threads for the per-node updates")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("evaluate", help="recompute metrics from a stored run directory")
    ev.add_argument("--trace", required=True, help="directory holding trace.csv and summary.json")
    ev.add_argument("--out", help="where to write metrics.csv and figures (default: the trace directory)")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="log-log slopes of regret and fit over horizons 2**k")
    sw.add_argument("--config", required=True)
    sw.add_argument("--horizons", default="8..13", help="log2 horizons, e.g. 8..13 or 9,11,13")
    sw.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds; >1 adds a median row")
    sw.add_argument("--out")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--threads", type=int)
    sw.set_defaults(func=cmd_sweep, mode=None)

    ck = sub.add_parser("check", help="run the sampled property suites for a configuration")
    ck.add_argument("--config", required=True)
    ck.add_argument("--out")
    ck.add_argument("--seed", type=int)
    ck.add_argument("--samples", type=int, default=1000)
    ck.add_argument("--engine-T", dest="engine_T", type=int, default=256)
    ck.add_argument("--grid-rounds", dest="grid_rounds", type=int, default=20,
                    help="rounds compared against the brute-force grid minimizer")
    ck.set_defaults(func=cmd_check, mode=None, threads=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Fail as exc:
        report = {"exit_code": exc.code, **exc.report}
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        if exc.out is not None and exc.code in (EXIT_INVARIANT, EXIT_SOLVER):
            try:
                persist.write_json(exc.out / persist.FAILURE_NAME, report)
            except OSError as err:
                log.error("could not write %s: %s", exc.out / persist.FAILURE_NAME, err)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
