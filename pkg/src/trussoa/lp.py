"""Dense two-phase primal simplex for small linear programs.

Solves ``min c^T x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and
``x >= 0`` on a full tableau.  Dantzig pricing is used until a run of
degenerate pivots is detected, after which Bland's rule takes over to rule
out cycling.  Good enough for the master problems, which have at most a few
hundred rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import MilpError

__all__ = ["LPResult", "simplex"]


@dataclass(frozen=True, eq=False)
class LPResult:
    status: str          # 'optimal', 'infeasible' or 'unbounded'
    x: np.ndarray | None
    fun: float | None
    iterations: int


class _Tableau:
    def __init__(self, T, basis, tol):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Optimise the objective stored in the last row over ``allowed`` columns."""
        T, tol = self.T, self.tol
        m = T.shape[0] - 1
        bland = False
        degenerate = 0
        for _ in range(max_iter):
            red = T[-1, :-1]
            cand = np.flatnonzero((red < -tol) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            colj = T[:m, j]
            pos = colj > tol
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:m, -1][pos] / colj[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + tol * max(1.0, abs(rmin)))
            # among ties, leave with the smallest basic index (Bland) for determinism
            r = int(ties[np.argmin(self.basis[ties])])
            if rmin <= tol:
                degenerate += 1
                if degenerate > 50:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j)
        raise MilpError(f"simplex iteration limit {max_iter} reached")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-9,
            max_iter: int | None = None) -> LPResult:
    """Solve a linear program in inequality/equality form with ``x >= 0``.

    Returns
    -------
    LPResult
        ``x`` and ``fun`` are set only when ``status == 'optimal'``.
    """
    c = np.asarray(c, dtype=float)
    N = c.size
    A_ub = np.zeros((0, N)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, N)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, N)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, N)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me
    if not (np.all(np.isfinite(A_ub)) and np.all(np.isfinite(A_eq)) and np.all(np.isfinite(c))
            and np.all(np.isfinite(b_ub)) and np.all(np.isfinite(b_eq))):
        raise MilpError("non-finite LP data")
    if m == 0:
        if np.any(c < -tol):
            return LPResult("unbounded", None, None, 0)
        return LPResult("optimal", np.zeros(N), 0.0, 0)
    max_iter = max_iter or 50 * (m + N) + 1000

    # columns: structural | slacks | artificials
    A = np.zeros((m, N + mu))
    A[:mu, :N] = A_ub
    A[:mu, N:] = np.eye(mu)
    A[mu:, :N] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)
    needs_art = np.ones(m, dtype=bool)
    needs_art[:mu] = flip[:mu]
    art_rows = np.flatnonzero(needs_art)
    na = art_rows.size
    ncol = N + mu + na
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :N + mu] = A
    T[art_rows, N + mu + np.arange(na)] = 1.0
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    basis[:mu] = N + np.arange(mu)
    basis[art_rows] = N + mu + np.arange(na)
    tab = _Tableau(T, basis, tol)
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))

    if na:
        T[-1, :] = 0.0
        T[-1, N + mu:ncol] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        status = tab.run(np.ones(ncol, dtype=bool), max_iter)
        if status != "optimal":
            raise MilpError("phase 1 of the simplex did not reach an optimum")
        if -T[-1, -1] > tol * scale * 10:
            return LPResult("infeasible", None, None, tab.iterations)
        # drive remaining artificials out of the basis
        keep_rows = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= N + mu:
                cand = np.flatnonzero(np.abs(T[r, :N + mu]) > tol)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                else:
                    keep_rows[r] = False
        if not keep_rows.all():
            rows = np.concatenate([np.flatnonzero(keep_rows), [m]])
            tab.T = T = T[rows]
            tab.basis = tab.basis[keep_rows]
            m = T.shape[0] - 1
    allowed = np.zeros(ncol, dtype=bool)
    allowed[:N + mu] = True
    T[-1, :] = 0.0
    T[-1, :N] = c
    for r in range(m):
        j = tab.basis[r]
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status = tab.run(allowed, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, tab.iterations)
    x = np.zeros(ncol)
    x[tab.basis] = T[:m, -1]
    x = x[:N]
    x[np.abs(x) < tol] = 0.0
    return LPResult("optimal", x, float(c @ x), tab.iterations)
