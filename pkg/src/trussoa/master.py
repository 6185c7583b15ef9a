"""Master problem: minimise the outer approximation of Psi over binary B.

MILP(k) reads

    min eta  s.t.  eta >= v_j + g_j^T (B - B_j)   for every cut j,
                   sum_c B_ic = 1                  for every bar i,
                   eta <= U_min - epsilon          (when U_min is finite),
                   B binary.

It is solved by best-first branch and bound on the LP relaxation
``0 <= B <= 1``.  The LP works with ``eta = L + eta'`` and ``eta' >= 0``,
where ``L`` is the largest over cuts of the smallest value the cut can take
on the row-stochastic set; ``L`` is a valid lower bound of ``eta`` so the
shift loses nothing.

Visited designs whose slave problem was infeasible can have a cut value
below the cap; those are excluded with no-good rows
``sum_i B_{i, c_i} <= n - 1``.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DuplicateCutError, MilpError, SizeGuardError
from .lp import simplex
from .model import ChoiceMatrix

__all__ = [
    "MasterState",
    "MilpOutcome",
    "OACut",
    "add_cut",
    "brute_force_milp",
    "cut_values",
    "dump_lp",
    "solve_milp",
]

INT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class OACut:
    """Linearisation ``eta >= value + gradient . (B - point)`` at a binary point."""

    point: ChoiceMatrix
    value: float
    gradient: np.ndarray

    def __post_init__(self):
        if not isinstance(self.point, ChoiceMatrix):
            object.__setattr__(self, "point", ChoiceMatrix(self.point))
        if not self.point.binary:
            raise ValueError("cut points must be binary choice matrices")
        g = np.array(self.gradient, dtype=float).reshape(-1)
        if g.size != self.point.n * self.point.p:
            raise ValueError("cut gradient must have n * p entries")
        if not (math.isfinite(self.value) and np.all(np.isfinite(g))):
            raise ValueError("cut value and gradient must be finite")
        g.setflags(write=False)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "value", float(self.value))

    @property
    def offset(self):
        """Constant ``value - g . point`` so that the cut reads ``eta >= offset + g . B``."""
        return self.value - float(self.gradient @ self.point.flat)


@dataclass(frozen=True, eq=False)
class MasterState:
    """Cuts collected so far, best upper bound and improvement tolerance."""

    n: int
    p: int
    cuts: tuple = ()
    u_min: float = math.inf
    epsilon: float = 1e-3
    nogoods: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(self.cuts))
        object.__setattr__(self, "nogoods", tuple(tuple(int(c) for c in ng) for ng in self.nogoods))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def with_upper_bound(self, u_min: float) -> "MasterState":
        return replace(self, u_min=float(u_min))

    def with_nogood(self, point: ChoiceMatrix) -> "MasterState":
        return replace(self, nogoods=self.nogoods + (tuple(point.catalog_vector().tolist()),))

    @property
    def has_cap(self):
        return math.isfinite(self.u_min)

    @property
    def cap(self):
        return self.u_min - self.epsilon

    @property
    def constraint_count(self):
        """Linear rows of MILP(k): cuts, row sums, cap and no-goods."""
        return len(self.cuts) + self.n + int(self.has_cap) + len(self.nogoods)


@dataclass(frozen=True, eq=False)
class MilpOutcome:
    """Optimal binary point and its ``eta``, or an infeasibility verdict."""

    feasible: bool
    B: ChoiceMatrix | None = None
    eta: float | None = None
    nodes: int = 0
    lp_iterations: int = 0
    root_bound: float | None = None


def add_cut(state: MasterState, cut: OACut) -> MasterState:
    """Return a new state with ``cut`` appended; duplicate points are refused."""
    if (cut.point.n, cut.point.p) != (state.n, state.p):
        raise ValueError("cut dimensions do not match the master state")
    for c in state.cuts:
        if c.point == cut.point:
            raise DuplicateCutError(f"a cut at {cut.point!r} already exists")
    return replace(state, cuts=state.cuts + (cut,))


def cut_values(state: MasterState, flatB: np.ndarray) -> np.ndarray:
    """Cut linearisations evaluated at one or several flattened B (last axis)."""
    G = np.array([c.gradient for c in state.cuts])
    off = np.array([c.offset for c in state.cuts])
    return flatB @ G.T + off


def _lower_shift(state):
    """Largest over cuts of the smallest value each cut takes on the simplex rows."""
    best = -math.inf
    for c in state.cuts:
        g = c.gradient.reshape(state.n, state.p)
        best = max(best, c.offset + float(g.min(axis=1).sum()))
    return best


class _Relaxation:
    """LP relaxation of MILP(k) with some B entries fixed to zero."""

    def __init__(self, state: MasterState):
        self.state = state
        n, p = state.n, state.p
        self.N = n * p
        self.L = _lower_shift(state)
        self.G = np.array([c.gradient for c in state.cuts])
        self.off = np.array([c.offset for c in state.cuts])

    def solve(self, allowed):
        """Solve with columns outside ``allowed`` fixed to zero."""
        st = self.state
        n, p = st.n, st.p
        cols = np.flatnonzero(allowed)
        rows_ok = allowed.reshape(n, p).any(axis=1)
        if not rows_ok.all():
            return None, 0
        nc = cols.size
        # variables: B[cols], eta'
        A_ub, b_ub = [], []
        for j in range(len(st.cuts)):
            A_ub.append(np.concatenate([self.G[j, cols], [-1.0]]))
            b_ub.append(self.L - self.off[j])
        if st.has_cap:
            A_ub.append(np.concatenate([np.zeros(nc), [1.0]]))
            b_ub.append(st.cap - self.L)
        for ng in st.nogoods:
            hit = np.zeros(self.N)
            hit[np.arange(n) * p + np.array(ng)] = 1.0
            A_ub.append(np.concatenate([hit[cols], [0.0]]))
            b_ub.append(n - 1.0)
        A_eq = np.zeros((n, nc + 1))
        A_eq[cols // p, np.arange(nc)] = 1.0
        cvec = np.zeros(nc + 1)
        cvec[-1] = 1.0
        res = simplex(cvec, np.array(A_ub).reshape(-1, nc + 1), np.array(b_ub), A_eq, np.ones(n))
        if res.status == "unbounded":
            raise MilpError("LP relaxation unbounded; eta has no lower bound")
        if res.status != "optimal":
            return None, res.iterations
        x = np.zeros(self.N)
        x[cols] = res.x[:nc]
        return (x, self.L + res.x[-1]), res.iterations


def _exact_eta(state, flatB):
    return float(np.max(cut_values(state, flatB)))


def _nogood_ok(state, c):
    return all(tuple(c) != ng for ng in state.nogoods)


def solve_milp(state: MasterState, gap: float = 1e-10, max_nodes: int = 200000) -> MilpOutcome:
    """Exact MILP(k) optimum by LP-based best-first branch and bound.

    Branches on the most fractional ``B_ic`` (ties: lowest flat index).  The
    fix-to-one child zeroes the rest of the row.  Nodes whose LP bound is
    within ``gap`` of the incumbent are pruned.
    """
    if not state.cuts:
        raise ValueError("the master problem needs at least one cut")
    n, p = state.n, state.p
    relax = _Relaxation(state)
    counter = itertools.count()
    lp_its = 0
    root_allowed = np.ones(n * p, dtype=bool)
    sol, its = relax.solve(root_allowed)
    lp_its += its
    if sol is None:
        return MilpOutcome(False, nodes=1, lp_iterations=lp_its)
    root_bound = sol[1]
    heap = [(sol[1], next(counter), root_allowed, sol[0])]
    best_eta, best_c = math.inf, None
    nodes = 1
    while heap:
        bound, _, allowed, x = heapq.heappop(heap)
        if bound >= best_eta - gap:
            continue
        X = x.reshape(n, p)
        frac = np.abs(x - np.round(x))
        if frac.max() <= INT_TOL:
            c = np.argmax(X, axis=1)
            flat = ChoiceMatrix.from_catalogs(c, p).flat
            eta = _exact_eta(state, flat)
            if (not state.has_cap or eta <= state.cap) and _nogood_ok(state, c):
                if eta < best_eta - gap or (abs(eta - best_eta) <= gap and tuple(c) < tuple(best_c)):
                    best_eta, best_c = eta, c
                continue
            # the exact cap check rejected a point the LP accepted within its
            # tolerance; keep branching on a row that is not fixed yet
            open_rows = allowed.reshape(n, p).sum(axis=1) > 1
            cand = [k for k in np.flatnonzero(x > 0.5) if open_rows[k // p]]
            if not cand:
                continue
            k = int(cand[0])
        else:
            score = np.where(allowed, np.abs(x - 0.5), np.inf)
            k = int(np.argmin(score))
        i = k // p
        # child with B_k fixed to one
        a1 = allowed.copy()
        a1[i * p:(i + 1) * p] = False
        a1[k] = True
        # child with B_k fixed to zero
        a0 = allowed.copy()
        a0[k] = False
        for child in (a1, a0):
            if np.array_equal(child, allowed):
                continue
            nodes += 1
            if nodes > max_nodes:
                raise MilpError(f"branch and bound exceeded {max_nodes} nodes")
            sol, its = relax.solve(child)
            lp_its += its
            if sol is not None and sol[1] < best_eta - gap:
                heapq.heappush(heap, (sol[1], next(counter), child, sol[0]))
    if best_c is None:
        return MilpOutcome(False, nodes=nodes, lp_iterations=lp_its, root_bound=root_bound)
    return MilpOutcome(True, ChoiceMatrix.from_catalogs(best_c, p), best_eta, nodes, lp_its, root_bound)


def brute_force_milp(state: MasterState, limit: int = 10**6) -> MilpOutcome:
    """MILP(k) by enumerating every binary B; a testing oracle."""
    if not state.cuts:
        raise ValueError("the master problem needs at least one cut")
    n, p = state.n, state.p
    total = p**n
    if total > limit:
        raise SizeGuardError(f"p^n = {total} exceeds the enumeration limit {limit}")
    # all catalog vectors in lexicographic order
    grid = np.array(np.meshgrid(*[np.arange(p)] * n, indexing="ij")).reshape(n, -1).T
    flat = np.zeros((grid.shape[0], n * p))
    flat[np.arange(grid.shape[0])[:, None], np.arange(n) * p + grid] = 1.0
    eta = np.max(cut_values(state, flat), axis=1)
    ok = np.ones(grid.shape[0], dtype=bool)
    if state.has_cap:
        ok &= eta <= state.cap
    for ng in state.nogoods:
        ok &= ~np.all(grid == np.array(ng), axis=1)
    if not ok.any():
        return MilpOutcome(False, nodes=int(total))
    idx = np.flatnonzero(ok)
    k = idx[np.argmin(eta[idx])]
    return MilpOutcome(True, ChoiceMatrix.from_catalogs(grid[k], p), float(eta[k]), nodes=int(total))


def dump_lp(state: MasterState, title: str = "MILP") -> str:
    """MILP(k) in the plain-text LP format (objective, rows, bounds, binaries).

    Variables are named ``B_i_c`` (0-based) and ``eta``.
    """
    n, p = state.n, state.p
    name = [f"B_{i}_{c}" for i in range(n) for c in range(p)]

    def lin(coefs):
        terms = [f"{'-' if v < 0 else '+'} {abs(v):.17g} {name[k]}" for k, v in enumerate(coefs) if v != 0.0]
        return " ".join(terms) if terms else "0 B_0_0"

    lines = [f"\\ {title}: {len(state.cuts)} cuts, n = {n}, p = {p}", "Minimize", " obj: eta", "Subject To"]
    for j, c in enumerate(state.cuts):
        lines.append(f" cut_{j}: {lin(c.gradient)} - eta <= {-c.offset:.17g}")
    for i in range(n):
        lines.append(f" row_{i}: " + " + ".join(f"B_{i}_{c}" for c in range(p)) + " = 1")
    if state.has_cap:
        lines.append(f" cap: eta <= {state.cap:.17g}")
    for j, ng in enumerate(state.nogoods):
        lines.append(f" nogood_{j}: " + " + ".join(f"B_{i}_{c}" for i, c in enumerate(ng)) + f" <= {n - 1}")
    lines += ["Bounds", " eta free", "Binaries"]
    for k in range(0, n * p, 10):
        lines.append(" " + " ".join(name[k:k + 10]))
    lines.append("End")
    return "\n".join(lines) + "\n"
