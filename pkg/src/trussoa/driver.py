"""Bi-level outer-approximation loop and the exhaustive baseline.

The outer loop alternates a slave solve at the current catalogs ``B^(k)``,
which yields ``Psi(B^(k))`` and ``dPsi/dB``, with the master MILP over the
accumulated cuts.  It stops when the master becomes infeasible under the cap
``U_min - epsilon`` and returns the best feasible slave solution seen.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import CatalogSet
from .exceptions import InconsistentKKTError, NoSolutionError, SizeGuardError, TrussOAError
from .fem import FemCounter, TrussModel
from .master import MasterState, OACut, add_cut, dump_lp, solve_milp
from .model import ChoiceMatrix
from .postopt import QualificationWarning, detect_active, kkt_multipliers, psi_gradient
from .slave import SlaveOptions, solve_slave

__all__ = [
    "HISTORY_COLUMNS",
    "OracleResult",
    "RunResult",
    "TrussOracle",
    "bilevel_oa",
    "enumerate_baseline",
    "hamming",
    "history_csv",
    "result_to_dict",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("k", "U", "U_min", "eta", "fem_calls", "nlp_solves", "wall_ms")


@dataclass(frozen=True, eq=False)
class OracleResult:
    """What the outer loop needs from one slave evaluation."""

    psi: float
    gradient: np.ndarray
    feasible: bool
    a: np.ndarray | None = None
    fem_calls: int = 0
    flags: tuple = ()
    solution: object = field(default=None, repr=False)


class TrussOracle:
    """Slave solve plus post-optimal gradient for a truss case.

    Parameters
    ----------
    bounds : (lower, upper)
        Area bounds in mm^2.
    a_init : array_like, optional
        Starting areas of every slave solve; the upper bounds by default.
    tol_act : float
        Activity tolerance of the post-optimal analysis.
    kkt_tol : float
        Admissible stationarity residual of the recovered multipliers.
    """

    def __init__(self, model: TrussModel, catalogs: CatalogSet, bounds, a_init=None,
                 slave_opts: SlaveOptions | None = None, tol_act: float = 1e-5, kkt_tol: float = 1e-6):
        self.model, self.catalogs = model, catalogs
        self.bounds = bounds
        self.a_init = a_init
        self.slave_opts = slave_opts or SlaveOptions()
        self.tol_act = tol_act
        self.kkt_tol = kkt_tol
        self.counter = FemCounter()
        self.kkt_records = []

    def solve(self, B: ChoiceMatrix):
        local = FemCounter()
        sol = solve_slave(self.model, self.catalogs, B, self.a_init, self.bounds, self.slave_opts, local)
        self.counter.merge(local)
        return sol, local.count

    def gradient(self, sol):
        """``dPsi/dB`` at a slave solution, with a tuple of degradation flags."""
        ev = sol.constraint_values
        flags = []
        active = detect_active(sol, self.tol_act)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", QualificationWarning)
            try:
                mults = kkt_multipliers(ev.dw_da, ev.ds_da, ev.ddelta_da, active,
                                        tol=self.kkt_tol if sol.feasible else math.inf)
            except InconsistentKKTError:
                flags.append("kkt-inconsistent")
                mults = kkt_multipliers(ev.dw_da, ev.ds_da, ev.ddelta_da, active, tol=math.inf)
        if any(issubclass(w.category, QualificationWarning) for w in caught):
            flags.append("qualification")
        if sol.feasible:
            self.kkt_records.append((mults.residual, min((float(np.min(v)) for v in
                                     (mults.lambda_s, mults.lambda_delta, mults.lambda_lb, mults.lambda_ub)
                                     if v.size), default=0.0)))
        return psi_gradient(ev.dw_dB, ev.ds_dB, ev.ddelta_dB, mults, active), tuple(flags)

    def __call__(self, B: ChoiceMatrix) -> OracleResult:
        sol, calls = self.solve(B)
        grad, flags = self.gradient(sol)
        if not sol.feasible:
            flags = ("infeasible-slave",) + flags
        if sol.status != "kkt":
            flags = flags + (f"slave-{sol.status}",)
        return OracleResult(sol.psi, grad, sol.feasible, sol.a_star, calls, flags, sol)


@dataclass(frozen=True, eq=False)
class RunResult:
    """Incumbent design, per-iteration history and counters of one run.

    ``history`` rows are dicts with the keys of ``HISTORY_COLUMNS`` plus
    ``c`` (0-based catalog vector of the slave point), ``feasible`` and
    ``flags``.  ``fem_calls``, ``nlp_solves`` and ``wall_ms`` are cumulative.
    """

    a_star: np.ndarray | None
    B_star: ChoiceMatrix | None
    w_star: float
    history: tuple
    termination: str
    fem_calls: int
    nlp_solves: int
    wall_ms: float
    solver: str = "oa"
    flags: tuple = ()
    milp_dumps: tuple = field(default=(), repr=False)

    @property
    def c_star(self):
        return None if self.B_star is None else self.B_star.catalog_vector()

    @property
    def iterations(self):
        return len(self.history)


def _row(k, U, U_min, eta, fem, nlp, wall_ms, c, feasible, flags):
    return {"k": k, "U": U, "U_min": U_min, "eta": eta, "fem_calls": fem, "nlp_solves": nlp,
            "wall_ms": wall_ms, "c": [int(v) for v in c],
            "feasible": bool(feasible), "flags": list(flags)}


def bilevel_oa(model: TrussModel | None = None, catalogs: CatalogSet | None = None, B0=None,
               epsilon: float = 1e-3, *, bounds=(100.0, 2000.0), a_init=None, oracle=None,
               max_iter: int = 200, max_time: float | None = None, slave_opts: SlaveOptions | None = None,
               tol_act: float = 1e-5, kkt_tol: float = 1e-6, dump_milp: bool = False) -> RunResult:
    """Outer-approximation loop over the catalog choice.

    Parameters
    ----------
    model, catalogs : TrussModel, CatalogSet
        The structure; may be omitted when ``oracle`` is given.
    B0 : ChoiceMatrix
        Binary starting point.  Defaults to catalog 0 for every bar.
    epsilon : float
        Required improvement (kg) of each new master solution.
    oracle : callable, optional
        ``oracle(B) -> OracleResult``; replaces the truss slave, e.g. with a
        synthetic function in tests.
    max_iter : int
        Cap on outer iterations (slave solves).
    max_time : float, optional
        Wall-clock cap in seconds.
    dump_milp : bool
        Keep every MILP(k) in LP text format in ``RunResult.milp_dumps``.

    Raises
    ------
    NoSolutionError
        No feasible slave solution was found before termination.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if oracle is None:
        if model is None or catalogs is None:
            raise ValueError("either a model and catalogs or an oracle is required")
        oracle = TrussOracle(model, catalogs, bounds, a_init, slave_opts, tol_act, kkt_tol)
    if B0 is None:
        if model is None:
            raise ValueError("B0 is required with a custom oracle")
        B0 = ChoiceMatrix.from_catalogs(np.zeros(model.n_bars, dtype=int), catalogs.p)
    elif not isinstance(B0, ChoiceMatrix):
        B0 = ChoiceMatrix(B0)
    if not B0.binary:
        raise ValueError("B0 must be binary")
    t0 = time.perf_counter()
    state = MasterState(B0.n, B0.p, epsilon=epsilon)
    B = B0
    fem = nlp = 0
    U_min = math.inf
    incumbent = None
    history, dumps, run_flags = [], [], []
    termination = "iteration-cap"
    while True:
        if len(history) >= max_iter:
            termination = "iteration-cap"
            break
        if max_time is not None and time.perf_counter() - t0 > max_time:
            termination = "time-cap"
            break
        k = len(history)
        try:
            res = oracle(B)
        except TrussOAError as exc:
            if incumbent is None:
                raise NoSolutionError(f"slave failed at iteration {k} with no incumbent: {exc}") from exc
            log.warning("slave failed at iteration %d: %s", k, exc)
            termination = "error"
            run_flags.append(f"error: {exc}")
            break
        nlp += 1
        fem += res.fem_calls
        if res.feasible and res.psi < U_min:
            U_min = res.psi
            incumbent = (B, res)
        state = add_cut(state, OACut(B, res.psi, res.gradient)).with_upper_bound(U_min)
        if not res.feasible:
            # its own cut does not exclude an infeasible point from the master
            state = state.with_nogood(B)
        if res.flags:
            run_flags.extend(f"k={k}: {f}" for f in res.flags)
        milp = solve_milp(state)
        if dump_milp:
            dumps.append(dump_lp(state, f"MILP({k})"))
        history.append(_row(k, res.psi, U_min, milp.eta if milp.feasible else None, fem, nlp,
                            (time.perf_counter() - t0) * 1e3,
                            B.catalog_vector(), res.feasible, res.flags))
        log.info("OA k=%d U=%.6g U_min=%.6g eta=%s", k, res.psi, U_min,
                 f"{milp.eta:.6g}" if milp.feasible else "infeasible")
        if not milp.feasible:
            termination = "master-infeasible"
            break
        B = milp.B
    wall = (time.perf_counter() - t0) * 1e3
    if incumbent is None:
        raise NoSolutionError("no feasible design was found")
    B_star, res = incumbent
    return RunResult(a_star=None if res.a is None else np.asarray(res.a), B_star=B_star, w_star=float(res.psi),
                     history=tuple(history), termination=termination, fem_calls=fem, nlp_solves=nlp,
                     wall_ms=wall, solver="oa", flags=tuple(run_flags), milp_dumps=tuple(dumps))


def _enum_worker(args):
    model, catalogs, bounds, a_init, opts, combos = args
    out = []
    for c in combos:
        counter = FemCounter()
        t0 = time.perf_counter()
        B = ChoiceMatrix.from_catalogs(c, catalogs.p)
        try:
            sol = solve_slave(model, catalogs, B, a_init, bounds, opts, counter)
            out.append((tuple(c), sol.psi, sol.feasible, sol.a_star, counter.count, sol.status,
                        time.perf_counter() - t0))
        except TrussOAError as exc:
            out.append((tuple(c), math.nan, False, None, counter.count, f"error: {exc}",
                        time.perf_counter() - t0))
    return out


def enumerate_baseline(model: TrussModel, catalogs: CatalogSet, *, bounds=(100.0, 2000.0), a_init=None,
                       slave_opts: SlaveOptions | None = None, limit: int = 10**6, jobs: int = 1,
                       chunk: int = 64) -> RunResult:
    """Solve the slave problem for every binary B and keep the lightest feasible one.

    Ties in weight are broken by the lexicographically smallest catalog
    vector.  ``history`` holds one row per slave solve in lexicographic order
    of the catalog vectors.
    """
    n, p = model.n_bars, catalogs.p
    total = p**n
    if total > limit:
        raise SizeGuardError(f"p^n = {total} exceeds the enumeration limit {limit}")
    opts = slave_opts or SlaveOptions()
    combos = list(itertools.product(range(p), repeat=n))
    batches = [combos[i:i + chunk] for i in range(0, len(combos), chunk)]
    t0 = time.perf_counter()
    tasks = [(model, catalogs, bounds, a_init, opts, b) for b in batches]
    if jobs > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_enum_worker, tasks))
    else:
        results = [_enum_worker(t) for t in tasks]
    records = [r for batch in results for r in batch]
    history = []
    fem = 0
    best = None
    U_min = math.inf
    flags = []
    busy = 0.0
    for k, (c, psi, feas, a, calls, status, elapsed) in enumerate(records):
        fem += calls
        busy += elapsed
        if feas and (best is None or psi < best[1]):
            best = (c, psi, a)
            U_min = psi
        if status != "kkt":
            flags.append(f"c={list(c)}: {status}")
        history.append(_row(k, psi, U_min, None, fem, k + 1, busy * 1e3, c, feas, ()))
    wall = (time.perf_counter() - t0) * 1e3
    if best is None:
        raise NoSolutionError("every catalog assignment is infeasible")
    return RunResult(a_star=np.asarray(best[2]), B_star=ChoiceMatrix.from_catalogs(best[0], p), w_star=float(best[1]),
                     history=tuple(history), termination="enumeration-complete", fem_calls=fem,
                     nlp_solves=len(records), wall_ms=wall, solver="enum", flags=tuple(flags))


def hamming(c1, c2) -> int:
    """Number of positions where two catalog vectors differ."""
    c1, c2 = np.asarray(c1), np.asarray(c2)
    if c1.shape != c2.shape:
        raise ValueError("catalog vectors must have the same length")
    return int(np.count_nonzero(c1 != c2))


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf") if not math.isnan(v) else "nan"


def result_to_dict(result: RunResult) -> dict:
    """JSON-ready form of a run result (catalog indices are 0-based)."""
    return {
        "solver": result.solver,
        "termination": result.termination,
        "w_star": result.w_star,
        "c_star": None if result.c_star is None else [int(v) for v in result.c_star],
        "a_star": None if result.a_star is None else [float(v) for v in result.a_star],
        "iterations": result.iterations,
        "fem_calls": result.fem_calls,
        "nlp_solves": result.nlp_solves,
        "wall_ms": result.wall_ms,
        "flags": list(result.flags),
        "history": [{k: (_num(v) if k in ("U", "U_min", "eta") else v) for k, v in row.items()}
                    for row in result.history],
    }


def history_csv(result: RunResult) -> str:
    """History as CSV with the header ``k,U,U_min,eta,fem_calls,nlp_solves,wall_ms``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in result.history:
        out = []
        for key in HISTORY_COLUMNS:
            v = row[key]
            if v is None:
                out.append("")
            elif key in ("U", "U_min", "eta"):
                out.append(repr(float(v)))
            elif key == "wall_ms":
                out.append(f"{v:.3f}")
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def write_result(result: RunResult, out_dir) -> None:
    """Write ``result.json`` and ``history.csv`` (and MILP dumps) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(json.dumps(result_to_dict(result), indent=1) + "\n")
    (out / "history.csv").write_text(history_csv(result))
    if result.milp_dumps:
        d = out / "milp"
        d.mkdir(exist_ok=True)
        for k, text in enumerate(result.milp_dumps):
            (d / f"milp_{k:03d}.lp").write_text(text)
