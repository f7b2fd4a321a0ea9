"""Command-line front end.

Subcommands:
  solve         solve one problem from a JSON problem file
  scca          generate + solve a synthetic sparse-CCA instance
  bench         run a benchmark suite (corpus and/or an SCCA grid)
  corpus-check  validate every built-in oracle instance

Exit codes: 0 success (KKT point / suite completed / corpus valid),
2 certified infeasible stationary point, 1 limits or failures,
64 usage errors.  A machine-readable JSON report is always written.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .bench import (corpus_suite, profile_to_csv, results_to_csv, run_benchmark,
                    scca_suite)
from .corpus import corpus, validate_corpus
from .driver import SolverConfig, ledger_to_csv, report_to_json, solve
from .problem import load_problem
from .scca import scca_generate, scca_metrics, scca_problem

USAGE_ERROR = 64

_STATUS_EXIT = {"KktPoint": 0, "InfeasibleStationary": 2}


def _parse_override(text: str):
    if "=" not in text:
        raise ValueError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    return key.strip(), raw.strip()


def _coerce(key: str, raw: str, field_types: dict):
    if key not in field_types:
        raise ValueError(f"unknown config key {key!r}")
    ftype = field_types[key]
    if ftype is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if ftype is int:
        return int(raw)
    if ftype is float:
        return float(raw)
    if ftype is str:
        return raw
    return json.loads(raw)


def load_config(path=None, overrides=(), **direct) -> SolverConfig:
    """Defaults, then a JSON config file, then key=value overrides."""
    data = {}
    if path:
        with open(path) as fh:
            data.update(json.load(fh))
    data.update(direct)
    field_types = {}
    for f in dataclasses.fields(SolverConfig):
        field_types[f.name] = (f.type if isinstance(f.type, type)
                               else {"float": float, "int": int, "bool": bool,
                                     "str": str}.get(str(f.type).split("[")[0].strip(), None))
    for item in overrides:
        key, raw = _parse_override(item)
        data[key] = _coerce(key, raw, field_types)
    return SolverConfig.from_dict(data)


def write_config(cfg: SolverConfig, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _flag_overrides(args) -> dict:
    out = {}
    if getattr(args, "alpha_rule", None) is not None:
        out["alpha_rule"] = args.alpha_rule
    if getattr(args, "time_limit", None) is not None:
        out["time_limit"] = args.time_limit
    if getattr(args, "max_iter", None) is not None:
        out["max_iter"] = args.max_iter
    return out


def _cmd_solve(args) -> int:
    cfg = load_config(args.config, args.set, **_flag_overrides(args))
    prob = load_problem(args.problem)
    out = _out_dir(args)
    try:
        report = solve(prob, cfg)
    except Exception as exc:
        (out / "report.json").write_text(json.dumps(
            {"status": "Error", "problem": prob.name,
             "error": f"{type(exc).__name__}: {exc}"}, indent=2))
        raise
    (out / "ledger.csv").write_text(ledger_to_csv(report.records))
    (out / "report.json").write_text(report_to_json(report, {"problem": prob.name}))
    if args.verbose:
        print(f"{prob.name}: {report.status} in {report.iterations} iterations, "
              f"chi={report.chi:.3e}, ||c||={report.c_norm:.3e}")
    return _STATUS_EXIT.get(report.status, 1)


def _cmd_scca(args) -> int:
    cfg = load_config(args.config, args.set, alpha0=args.alpha0,
                      **_flag_overrides(args))
    seeds = args.seed or [0]
    rows = []
    status_worst = 0
    out = _out_dir(args)
    for seed in seeds:
        data = scca_generate(args.n, args.n, args.N or args.n, seed)
        prob = scca_problem(data, args.lam)
        t0 = time.perf_counter()
        try:
            report = solve(prob, cfg)
        except Exception as exc:
            rows.append({"instance": prob.name, "seed": seed, "status": "Error",
                         "iters": 0, "time_s": time.perf_counter() - t0,
                         "chi": float("inf"), "c_norm": float("inf"),
                         "rho_xy": 0.0, "sr_x": 0.0, "sr_y": 0.0, "sr": 0.0,
                         "sl": -1, "voc_x": 0.0, "voc_y": 0.0,
                         "error": f"{type(exc).__name__}: {exc}"})
            status_worst = 1
            continue
        wall = time.perf_counter() - t0
        met = scca_metrics(report.x[:args.n], report.x[args.n:2 * args.n], data,
                           wall_time=wall)
        rows.append({
            "instance": prob.name, "seed": seed, "status": report.status,
            "iters": report.iterations, "time_s": wall, "chi": report.chi,
            "c_norm": report.c_norm, "rho_xy": met.rho_xy, "sr_x": met.sr_x,
            "sr_y": met.sr_y, "sr": met.sr, "sl": met.sl,
            "voc_x": met.voc_x, "voc_y": met.voc_y,
        })
        (out / f"ledger-seed{seed}.csv").write_text(ledger_to_csv(report.records))
        status_worst = max(status_worst, _STATUS_EXIT.get(report.status, 1))
        if args.verbose:
            r = rows[-1]
            print(f"seed {seed}: {r['status']} rho={r['rho_xy']:.4f} "
                  f"sr={r['sr']:.4f} sl={r['sl']} t={wall:.1f}s")
    (out / "scca.json").write_text(json.dumps(
        {"config_hash": cfg.config_hash(), "rows": rows}, indent=2, sort_keys=True))
    header = ["instance", "seed", "status", "iters", "time_s", "chi", "c_norm",
              "rho_xy", "sr_x", "sr_y", "sr", "sl", "voc_x", "voc_y"]
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(r[h])) if isinstance(r[h], float)
                              else str(r[h]) for h in header))
    (out / "scca.csv").write_text("\n".join(lines) + "\n")
    return status_worst


def _cmd_bench(args) -> int:
    cfg = load_config(args.config, args.set, **_flag_overrides(args))
    cells = []
    if args.suite in ("corpus", "all"):
        cells += corpus_suite(cfg)
    if args.suite in ("scca", "all"):
        scfg = load_config(args.config, args.set, alpha0=1e-3,
                           **_flag_overrides(args))
        cells += scca_suite(args.n or [200], args.lam or [1e-2, 1e-3, 1e-4],
                            args.seed or [0], scfg)
    results = run_benchmark(cells, threads=args.threads)
    out = _out_dir(args)
    label = f"{args.suite}-{cfg.alpha_rule}"
    (out / "results.csv").write_text(results_to_csv(results))
    (out / "profile.csv").write_text(profile_to_csv(results, label))
    n_err = sum(1 for r in results if r.status == "Error")
    (out / "bench.json").write_text(json.dumps({
        "cells": len(results), "errors": n_err,
        "statuses": {r.instance + f"-s{r.seed}": r.status for r in results},
    }, indent=2, sort_keys=True))
    if args.verbose:
        for r in results:
            print(f"{r.instance} seed={r.seed}: {r.status} ({r.time_s:.1f}s)"
                  + (f"  [{r.error}]" if r.error else ""))
    return 1 if n_err else 0


def _cmd_corpus_check(args) -> int:
    insts = validate_corpus()
    out = _out_dir(args)
    (out / "corpus.json").write_text(json.dumps(
        [{"name": i.name, "note": i.note, "expected": i.expected_status}
         for i in insts], indent=2, sort_keys=True))
    if args.verbose:
        for inst in insts:
            print(f"{inst.name}: oracle certified ({inst.expected_status})")
    print(f"corpus-check: {len(insts)} oracle instances certified")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgcon", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="config override (repeatable)")
        sp.add_argument("--out", default="pgcon-out", help="output directory")
        sp.add_argument("--alpha-rule", choices=["hold", "min_cap", "verbatim_max"],
                        default=None, help="proximal update on accepted steps")
        sp.add_argument("--time-limit", type=float, default=None, metavar="SECS")
        sp.add_argument("--max-iter", type=int, default=None)
        sp.add_argument("--verbose", "-v", action="store_true")

    sp = sub.add_parser("solve", help="solve a problem file")
    sp.add_argument("--problem", required=True, help="JSON problem file")
    common(sp)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("scca", help="synthetic sparse-CCA run")
    sp.add_argument("--n", type=int, default=200, help="n_x = n_y (divisible by 8)")
    sp.add_argument("--N", type=int, default=None, help="samples (default n)")
    sp.add_argument("--lambda", dest="lam", type=float, default=1e-2)
    sp.add_argument("--seed", type=int, action="append", help="repeatable")
    sp.add_argument("--alpha0", type=float, default=1e-3)
    common(sp)
    sp.set_defaults(func=_cmd_scca)

    sp = sub.add_parser("bench", help="run a benchmark suite")
    sp.add_argument("--suite", choices=["corpus", "scca", "all"], default="corpus")
    sp.add_argument("--n", type=int, action="append", help="SCCA sizes (repeatable)")
    sp.add_argument("--lambda", dest="lam", type=float, action="append")
    sp.add_argument("--seed", type=int, action="append")
    sp.add_argument("--threads", type=int, default=None,
                    help="parallel cells (default PGCON_THREADS or 1)")
    common(sp)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("corpus-check", help="validate oracle instances")
    common(sp)
    sp.set_defaults(func=_cmd_corpus_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap to the documented code
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"pgcon: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:
        print(f"pgcon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
