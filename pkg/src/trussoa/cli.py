"""Command-line entry points: solve, gradcheck, bench, gen.

Exit codes of ``solve``: 0 converged, 2 no feasible design, 3 iteration or
time cap reached, 4 stopped on a solver error, 1 bad input.  The log level
is read from ``TRUSSOA_LOG_LEVEL`` (default ``WARNING``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cases import CaseFile, dumps_case, gen_case, load_case, save_case
from .driver import bilevel_oa, enumerate_baseline, write_result
from .exceptions import CaseFormatError, NoSolutionError, TrussOAError
from .gradcheck import check_model_gradients, check_psi_gradient, random_state
from .slave import SlaveOptions

log = logging.getLogger("trussoa")

EXIT_OK, EXIT_INPUT, EXIT_NO_SOLUTION, EXIT_CAP, EXIT_ERROR = 0, 1, 2, 3, 4
BENCH_COLUMNS = ("instance", "w_star", "iter", "nlp", "fem", "wall_ms", "status")
CATALOG_COUNTS = (4, 9, 12, 15, 18, 36, 45, 72, 90)


def slave_options(case: CaseFile) -> SlaveOptions:
    o = case.options
    return SlaveOptions(tol_feas=o["tol_feas"], kkt_tol=o["kkt_tol"], tol_act=o["tol_act"],
                        max_iter=int(o["slave_max_iter"]), stress_scale=o["stress_scale"])


def run_case(case: CaseFile, solver: str = "oa", epsilon=None, max_iter=None, max_time=None,
             jobs: int = 1, dump_milp: bool = False):
    """Run one case with the OA loop or the enumeration baseline."""
    model, catalogs = case.to_model(), case.to_catalogs()
    opts = slave_options(case)
    if solver == "oa":
        return bilevel_oa(model, catalogs, case.b0(),
                          epsilon if epsilon is not None else case.options["epsilon"],
                          bounds=case.bounds, a_init=case.a_init(), slave_opts=opts,
                          max_iter=int(max_iter if max_iter is not None else case.options["max_iter"]),
                          max_time=max_time, tol_act=case.options["tol_act"],
                          kkt_tol=case.options["kkt_tol"], dump_milp=dump_milp)
    if solver == "enum":
        return enumerate_baseline(model, catalogs, bounds=case.bounds, a_init=case.a_init(),
                                  slave_opts=opts, jobs=jobs)
    raise ValueError(f"unknown solver {solver!r}")


def _metadata(argv, wall_s):
    return {
        "package": "trussoa", "version": __version__,
        "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
        "platform": platform.platform(), "argv": list(argv),
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_s": wall_s, "seed": None,
    }


def cmd_solve(args) -> int:
    try:
        case = load_case(args.case)
    except (OSError, CaseFormatError) as exc:
        print(f"error: {args.case}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_case(case, out / "case.json")
    t0 = time.perf_counter()
    try:
        result = run_case(case, args.solver, args.epsilon, args.max_iter, args.max_time, args.jobs,
                          args.dump_milp)
    except NoSolutionError as exc:
        (out / "metadata.json").write_text(json.dumps(_metadata(sys.argv, time.perf_counter() - t0), indent=1))
        (out / "result.json").write_text(json.dumps({"solver": args.solver, "termination": "no-solution",
                                                     "message": str(exc)}, indent=1) + "\n")
        print(f"no feasible design: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except TrussOAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_result(result, out)
    (out / "metadata.json").write_text(json.dumps(_metadata(sys.argv, time.perf_counter() - t0), indent=1) + "\n")
    print(f"{case.name}: w* = {result.w_star:.6f} kg, c* = {result.c_star.tolist()}, "
          f"{result.iterations} iterations, {result.nlp_solves} NLP, {result.fem_calls} FEM, "
          f"termination {result.termination}")
    if result.termination in ("master-infeasible", "enumeration-complete"):
        return EXIT_OK
    if result.termination in ("iteration-cap", "time-cap"):
        return EXIT_CAP
    return EXIT_ERROR


def _parse_catalogs(text, n, p):
    c = [int(v) for v in text.split(",")]
    if len(c) != n or not all(0 <= v < p for v in c):
        raise ValueError(f"--catalogs needs {n} comma-separated indices in [0, {p})")
    return np.eye(p)[c]


def cmd_gradcheck(args) -> int:
    try:
        case = load_case(args.case)
    except (OSError, CaseFormatError) as exc:
        print(f"error: {args.case}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    model, catalogs = case.to_model(), case.to_catalogs()
    rng = np.random.default_rng(args.seed)
    a, B = random_state(model, catalogs, case.bounds, rng)
    if args.catalogs:
        try:
            B = _parse_catalogs(args.catalogs, model.n_bars, catalogs.p)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    ok = True
    print(f"{'function':<14}{'wrt':<5}{'max rel err':>14}  {'limit':>8}  result")
    for r in check_model_gradients(model, catalogs, a, B):
        limit = 1e-5
        passed = r.max_rel_error <= limit
        ok &= passed
        print(f"{r.function:<14}{r.wrt:<5}{r.max_rel_error:>14.3e}  {limit:>8.0e}  {'pass' if passed else 'FAIL'}")
    if not args.skip_psi:
        rows = check_psi_gradient(model, catalogs, B, case.bounds, case.a_init(), slave_options(case),
                                  tol_act=case.options["tol_act"])
        print(f"\n{'bar':>4} {'from':>5} {'to':>4} {'analytic':>14} {'finite diff':>14} {'rel err':>10}  result")
        for r in rows:
            if not r.stable:
                verdict = "unstable"
            else:
                verdict = "pass" if r.rel_error <= 1e-2 else "FAIL"
                ok &= verdict == "pass"
            print(f"{r.bar:>4} {r.source:>5} {r.target:>4} {r.analytic:>14.6e} {r.finite_difference:>14.6e} "
                  f"{r.rel_error:>10.2e}  {verdict}")
    print("\ngradcheck:", "pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_ERROR


def _bench_instances(suite, max_blocks):
    if suite == "scaling-elements":
        return [(f"cantilever-{5 * b:03d}bars", gen_case("cantilever", blocks=b)) for b in range(1, max_blocks + 1)]
    if suite == "scaling-catalogs":
        return [(f"ten-bar-p{p:02d}", gen_case("ten-bar", ubar=10.0, p=p)) for p in CATALOG_COUNTS]
    raise ValueError(f"unknown suite {suite!r}")


def _bench_one(item):
    name, case, max_time = item
    t0 = time.perf_counter()
    try:
        r = run_case(case, "oa", max_time=max_time)
        status = r.termination
        return {"instance": name, "w_star": r.w_star, "iter": r.iterations, "nlp": r.nlp_solves,
                "fem": r.fem_calls, "wall_ms": round(r.wall_ms, 3), "status": status}
    except TrussOAError as exc:
        return {"instance": name, "w_star": "", "iter": "", "nlp": "", "fem": "",
                "wall_ms": round((time.perf_counter() - t0) * 1e3, 3), "status": f"failed: {exc}"}


def run_bench(suite, out_dir, jobs=1, max_blocks=10, max_time=None):
    """Run a benchmark suite and write ``<suite>.csv`` into ``out_dir``; returns the rows."""
    items = [(name, case, max_time) for name, case in _bench_instances(suite, max_blocks)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_bench_one, items))
    else:
        rows = []
        for it in items:
            rows.append(_bench_one(it))
            log.info("bench %s: %s", it[0], rows[-1]["status"])
    rows.sort(key=lambda r: r["instance"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{suite}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


def cmd_bench(args) -> int:
    rows = run_bench(args.suite, args.out, args.jobs, args.max_blocks, args.max_time)
    for r in rows:
        print(",".join(str(r[k]) for k in BENCH_COLUMNS))
    return EXIT_OK if all(not str(r["status"]).startswith("failed") for r in rows) else EXIT_ERROR


def cmd_gen(args) -> int:
    params = {}
    if args.name == "cantilever":
        params = {"blocks": args.blocks, "p": args.p}
    elif args.name == "ten-bar":
        params = {"ubar": args.ubar, "p": args.p}
    elif args.name in ("two-bar", "dome120"):
        params = {"ubar": args.ubar}
    try:
        case = gen_case(args.name, **params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out == "-":
        sys.stdout.write(dumps_case(case) + "\n")
    else:
        save_case(case, args.out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="trussoa", description="Mixed categorical truss sizing by outer approximation")
    ap.add_argument("--version", action="version", version=f"trussoa {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a case and write a run archive")
    s.add_argument("--case", required=True)
    s.add_argument("--solver", choices=("oa", "enum"), default="oa")
    s.add_argument("--out", required=True)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--max-time", type=float, help="wall-clock cap in seconds (oa only)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes (enum only)")
    s.add_argument("--dump-milp", action="store_true", help="write every MILP(k) as an LP file")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    g.add_argument("--case", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--catalogs", help="comma-separated 0-based catalog per bar (default: random)")
    g.add_argument("--skip-psi", action="store_true", help="only check the function gradients")
    g.set_defaults(func=cmd_gradcheck)

    b = sub.add_parser("bench", help="run a scaling suite and write a CSV")
    b.add_argument("--suite", required=True, choices=("scaling-elements", "scaling-catalogs"))
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--max-blocks", type=int, default=10, help="largest cantilever (scaling-elements)")
    b.add_argument("--max-time", type=float, help="per-instance wall-clock cap in seconds")
    b.set_defaults(func=cmd_bench)

    n = sub.add_parser("gen", help="write a benchmark case file")
    n.add_argument("--name", required=True, choices=("two-bar", "ten-bar", "cantilever", "dome120"))
    n.add_argument("--blocks", type=int)
    n.add_argument("--ubar", type=float)
    n.add_argument("--p", type=int, help="number of catalogs (ten-bar, cantilever)")
    n.add_argument("--out", required=True, help="output path, or - for stdout")
    n.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("TRUSSOA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
