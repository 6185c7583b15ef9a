"""Continuous sizing for frozen catalogs: minimise the weight over the areas.

The solver is the Method of Moving Asymptotes (MMA) with the usual
primal-dual interior-point treatment of its convex separable subproblem.
Variables are scaled to ``x = (a - lb) / (ub - lb)``, the weight is divided by
its value at the starting point, stresses by ``stress_scale`` and
displacements by ``|ubar|``.

Once MMA has settled close to a vertex-like optimum, a Newton iteration on the
KKT system of the guessed active set drives the constraints to zero to
machine precision.  This matters downstream: the post-optimal multipliers are
only meaningful at a point where the active constraints hold with equality.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr
from scipy.optimize import nnls

from .catalog import CatalogSet
from .exceptions import EvaluationError
from .fem import FemCounter, TrussModel
from .model import ChoiceMatrix, Evaluation, evaluate

__all__ = ["SlaveOptions", "SlaveSolution", "scaled_kkt_residual", "solve_slave"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlaveOptions:
    """Tolerances and MMA parameters of one slave solve.

    ``tol_feas`` and ``kkt_tol`` are in normalised units (constraints divided
    by their scale, stationarity relative to the weight gradient).
    """

    tol_feas: float = 1e-6
    kkt_tol: float = 1e-6
    tol_act: float = 1e-5
    max_iter: int = 500
    step_tol: float = 1e-9
    stress_scale: float = 200.0
    move: float = 0.5
    asyinit: float = 0.5
    asyincr: float = 1.2
    asydecr: float = 0.7
    penalty: float = 1000.0
    polish: bool = True
    polish_trigger: float = 1e-2
    max_polish: int = 12


@dataclass(frozen=True, eq=False)
class SlaveSolution:
    """Result of :func:`solve_slave`.

    ``psi`` equals ``weight(a_star, B)``; it is only a valid upper bound of
    the categorical problem when ``feasible`` is true.  ``status`` is one of
    ``'kkt'``, ``'step'`` or ``'max_iter'``.
    """

    a_star: np.ndarray
    psi: float
    feasible: bool
    iterations: int
    kkt_residual: float
    constraint_values: Evaluation
    B: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    status: str = "kkt"
    polished: bool = False
    fem_calls: int = 0
    max_violation: float = 0.0
    stress_scale: float = 200.0
    disp_scale: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: tuple = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "kkt"


class _Scaled:
    """The sizing problem in normalised variables, with FEM accounting."""

    def __init__(self, model, catalogs, B, lower, upper, opts, counter):
        self.model, self.catalogs, self.B = model, catalogs, B
        self.lower, self.upper = lower, upper
        self.span = upper - lower
        self.opts = opts
        self.counter = counter
        ubar = np.abs(model.disp_bounds)
        self.disp_scale = np.where(ubar > 0, ubar, 1.0)
        self.g_scale = np.concatenate([np.full(4 * model.n_bars, opts.stress_scale), self.disp_scale])
        self.w_ref = 1.0

    def areas(self, x):
        return self.lower + self.span * np.clip(x, 0.0, 1.0)

    def __call__(self, x):
        ev = evaluate(self.model, self.catalogs, self.areas(x), self.B, want_gradients=True,
                      wrt=("a",), counter=self.counter)
        f0 = ev.weight / self.w_ref
        df0 = ev.dw_da * self.span / self.w_ref
        g = np.concatenate([ev.s_flat, ev.delta]) / self.g_scale
        dg = np.vstack([ev.ds_da, ev.ddelta_da]) / self.g_scale[:, None] * self.span[None, :]
        if not (np.all(np.isfinite(dg)) and np.all(np.isfinite(df0))):
            raise EvaluationError("non-finite gradient in slave problem")
        return f0, df0, g, dg, ev


def scaled_kkt_residual(x, df0, g, dg, tol_act=1e-5, tol_bnd=1e-5):
    """Relative stationarity residual with nonnegative multipliers.

    Constraints with ``g >= -tol_act`` and variables within ``tol_bnd`` of a
    bound are treated as active.  The returned value also accounts for
    primal infeasibility, so it is zero only at a KKT point.
    """
    act = np.flatnonzero(g >= -tol_act)
    n = x.size
    cols = [dg[act].T]
    lo = np.flatnonzero(x <= tol_bnd)
    hi = np.flatnonzero(x >= 1.0 - tol_bnd)
    if lo.size:
        cols.append(-np.eye(n)[:, lo])
    if hi.size:
        cols.append(np.eye(n)[:, hi])
    M = np.hstack(cols) if cols else np.zeros((n, 0))
    scale = max(np.max(np.abs(df0)), 1e-300)
    if M.shape[1] == 0:
        stat = np.max(np.abs(df0)) / scale
    else:
        norms = np.linalg.norm(M, axis=0)
        norms[norms == 0] = 1.0
        lam, _ = nnls(M / norms, -df0)
        stat = np.max(np.abs(df0 + (M / norms) @ lam)) / scale
    return float(max(stat, np.max(g, initial=0.0)))


# ---------------------------------------------------------------------------
# MMA
# ---------------------------------------------------------------------------

def _asymptotes(it, x, xold1, xold2, low, upp, opts):
    if it <= 2:
        return x - opts.asyinit, x + opts.asyinit
    zzz = (x - xold1) * (xold1 - xold2)
    factor = np.ones_like(x)
    factor[zzz > 0] = opts.asyincr
    factor[zzz < 0] = opts.asydecr
    low = x - factor * (xold1 - low)
    upp = x + factor * (upp - xold1)
    low = np.clip(low, x - 10.0, x - 0.01)
    upp = np.clip(upp, x + 0.01, x + 10.0)
    return low, upp


def _mma_step(it, x, xold1, xold2, low, upp, df0, g, dg, opts):
    """One MMA subproblem on the unit box; returns the new point and duals."""
    raa0, albefa = 1e-5, 0.1
    low, upp = _asymptotes(it, x, xold1, xold2, low, upp, opts)
    alfa = np.maximum.reduce([low + albefa * (x - low), x - opts.move, np.zeros_like(x)])
    beta = np.minimum.reduce([upp - albefa * (upp - x), x + opts.move, np.ones_like(x)])
    ux1, xl1 = upp - x, x - low
    ux2, xl2 = ux1**2, xl1**2
    p0 = np.maximum(df0, 0.0)
    q0 = np.maximum(-df0, 0.0)
    pq0 = 0.001 * (p0 + q0) + raa0
    p0 = (p0 + pq0) * ux2
    q0 = (q0 + pq0) * xl2
    P = np.maximum(dg, 0.0)
    Q = np.maximum(-dg, 0.0)
    PQ = 0.001 * (P + Q) + raa0
    P = (P + PQ) * ux2[None, :]
    Q = (Q + PQ) * xl2[None, :]
    b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - g
    m = g.size
    xnew, lam = _subsolv(low, upp, alfa, beta, p0, q0, P, Q, b,
                         a0=1.0, a=np.zeros(m), c=np.full(m, opts.penalty), d=np.ones(m))
    return xnew, lam, low, upp


def _subsolv(low, upp, alfa, beta, p0, q0, P, Q, b, a0, a, c, d, epsimin=1e-7):
    """Primal-dual Newton method for the separable MMA subproblem."""
    m, n = P.shape
    een, eem = np.ones(n), np.ones(m)
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = eem.copy()
    z = 1.0
    lam = eem.copy()
    xsi = np.maximum(een / (x - alfa), een)
    eta = np.maximum(een / (beta - x), een)
    mu = np.maximum(eem, 0.5 * c)
    zet = 1.0
    s = eem.copy()

    def residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1, xl1 = upp - x, x - low
        plam = p0 + P.T @ lam
        qlam = q0 + Q.T @ lam
        gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
        rex = plam / ux1**2 - qlam / xl1**2 - xsi + eta
        rey = c + d * y - mu - lam
        rez = a0 - zet - a @ lam
        relam = gvec - a * z - y + s - b
        rexsi = xsi * (x - alfa) - epsi
        reeta = eta * (beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * s - epsi
        return np.concatenate([rex, rey, [rez], relam, rexsi, reeta, remu, [rezet], res])

    while epsi > epsimin:
        r = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
        resnorm, resmax = np.linalg.norm(r), np.max(np.abs(r))
        it = 0
        while resmax > 0.9 * epsi and it < 200:
            it += 1
            ux1, xl1 = upp - x, x - low
            ux2, xl2 = ux1**2, xl1**2
            ux3, xl3 = ux1 * ux2, xl1 * xl2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            GG = P / ux2[None, :] - Q / xl2[None, :]
            dpsidx = plam / ux2 - qlam / xl2
            delx = dpsidx - epsi / (x - alfa) + epsi / (beta - x)
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = 2.0 * (plam / ux3 + qlam / xl3) + xsi / (x - alfa) + eta / (beta - x)
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy
            if m < n:
                blam = dellam + dely / diagy - GG @ (delx / diagx)
                AA = np.empty((m + 1, m + 1))
                AA[:m, :m] = np.diag(diaglamyi) + (GG / diagx[None, :]) @ GG.T
                AA[:m, m] = a
                AA[m, :m] = a
                AA[m, m] = -zet / z
                sol = np.linalg.solve(AA, np.concatenate([blam, [delz]]))
                dlam, dz = sol[:m], sol[m]
                dx = -delx / diagx - (GG.T @ dlam) / diagx
            else:
                dellamyi = dellam + dely / diagy
                Axx = np.diag(diagx) + (GG.T / diaglamyi[None, :]) @ GG
                azz = zet / z + a @ (a / diaglamyi)
                axz = -GG.T @ (a / diaglamyi)
                bx = delx + GG.T @ (dellamyi / diaglamyi)
                bz = delz - a @ (dellamyi / diaglamyi)
                AA = np.empty((n + 1, n + 1))
                AA[:n, :n] = Axx
                AA[:n, n] = axz
                AA[n, :n] = axz
                AA[n, n] = azz
                sol = np.linalg.solve(AA, -np.concatenate([bx, [bz]]))
                dx, dz = sol[:n], sol[n]
                dlam = (GG @ dx) / diaglamyi - dz * (a / diaglamyi) + dellamyi / diaglamyi
            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsi / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - (s * dlam) / lam
            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            stmxx = np.max(-1.01 * dxx / xx)
            stmalfa = np.max(-1.01 * dx / (x - alfa))
            stmbeta = np.max(1.01 * dx / (beta - x))
            steg = 1.0 / max(stmalfa, stmbeta, stmxx, 1.0)
            old = (x, y, z, lam, xsi, eta, mu, zet, s)
            for _ in range(50):
                x = old[0] + steg * dx
                y = old[1] + steg * dy
                z = old[2] + steg * dz
                lam = old[3] + steg * dlam
                xsi = old[4] + steg * dxsi
                eta = old[5] + steg * deta
                mu = old[6] + steg * dmu
                zet = old[7] + steg * dzet
                s = old[8] + steg * ds
                r = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
                newnorm = np.linalg.norm(r)
                if newnorm <= resnorm:
                    break
                steg *= 0.5
            resnorm, resmax = newnorm, np.max(np.abs(r))
        epsi *= 0.1
    return x, lam


# ---------------------------------------------------------------------------
# Active-set Newton polish
# ---------------------------------------------------------------------------

def _independent_rows(J, rows, rtol=1e-8):
    """Subset of ``rows`` whose Jacobian rows are linearly independent."""
    if rows.size == 0 or J.shape[1] == 0:
        return rows[:0] if J.shape[1] == 0 else rows
    norms = np.linalg.norm(J, axis=1)
    keep = norms > 0
    if not np.any(keep):
        return rows[:0]
    Jn = J[keep] / norms[keep, None]
    _, R, piv = qr(Jn.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > rtol * d[0]))
    return np.sort(rows[keep][piv[:rank]])


def _nonnegative_kkt(df0, JA, lo, hi):
    """Stationarity residual with nonnegative multipliers on ``JA`` and bounds."""
    n = df0.size
    M = np.hstack([JA.T, -np.eye(n)[:, lo], np.eye(n)[:, hi]])
    if M.shape[1] == 0:
        return float(np.max(np.abs(df0)))
    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0] = 1.0
    lam, _ = nnls(M / norms, -df0)
    return float(np.max(np.abs(df0 + (M / norms) @ lam)))


def _polish(prob, x0, opts, max_rounds=8, max_newton=30):
    """Solve the KKT equations of a guessed active set by Newton's method.

    Returns the polished point or ``None`` when no consistent active set is
    found.  The guess is corrected by dropping constraints with negative
    multipliers, freeing bounds with wrongly signed multipliers, and adding
    violated constraints.
    """
    n = x0.size
    f0, df0, g, dg, _ = prob(x0)
    act = set(np.flatnonzero(g >= -1e-3).tolist())
    bnd_tol = 1e-4
    at_lo = set(np.flatnonzero(x0 <= bnd_tol).tolist())
    at_hi = set(np.flatnonzero(x0 >= 1.0 - bnd_tol).tolist())
    seen = set()
    for _ in range(max_rounds):
        key = (frozenset(act), frozenset(at_lo), frozenset(at_hi))
        if key in seen:
            return None
        seen.add(key)
        A_all = np.array(sorted(act), dtype=int)
        F = np.array([i for i in range(n) if i not in at_lo and i not in at_hi], dtype=int)
        x = x0.copy()
        x[list(at_lo)] = 0.0
        x[list(at_hi)] = 1.0
        x[F] = np.clip(x[F], 0.0, 1.0)
        # constraints that coincide on the fixed face (equal member forces at
        # a bound, say) make the Newton system singular; keep a basis of them
        A = _independent_rows(prob(x)[3][np.ix_(A_all, F)], A_all)
        lam = None
        left_box = None
        for _ in range(max_newton):
            f0, df0, g, dg, _ = prob(x)
            if F.size == 0:
                break
            gA = g[A]
            JA = dg[np.ix_(A, F)]
            if A.size >= F.size:
                dxF = np.linalg.lstsq(JA, -gA, rcond=None)[0] if A.size else np.zeros(F.size)
                res = np.max(np.abs(gA), initial=0.0)
            else:
                if lam is None:
                    lam = np.linalg.lstsq(JA.T, -df0[F], rcond=None)[0] if A.size else np.zeros(0)
                H = np.zeros((F.size, F.size))
                if A.size:
                    h = 1e-6
                    for jj, f in enumerate(F):
                        xp = x.copy()
                        xp[f] += h if x[f] + h <= 1.0 else -h
                        step = xp[f] - x[f]
                        dgp = prob(xp)[3]
                        H[:, jj] = lam @ ((dgp[np.ix_(A, F)] - JA) / step)
                    H = 0.5 * (H + H.T)
                K = np.zeros((F.size + A.size, F.size + A.size))
                K[:F.size, :F.size] = H
                K[:F.size, F.size:] = JA.T
                K[F.size:, :F.size] = JA
                rhs = -np.concatenate([df0[F] + JA.T @ lam, gA])
                res = np.max(np.abs(rhs))
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    return None
                dxF, dlam = sol[:F.size], sol[F.size:]
                lam = lam + dlam
            if not np.all(np.isfinite(dxF)):
                return None
            xF = x[F] + dxF
            out = np.flatnonzero((xF < -1e-10) | (xF > 1.0 + 1e-10))
            if out.size:
                left_box = F[out], xF[out]
                break
            x[F] = np.clip(xF, 0.0, 1.0)
            if np.max(np.abs(dxF), initial=0.0) < 1e-13 or res < 1e-14:
                break
        if left_box is not None:
            idx, vals = left_box
            for i, v in zip(idx, vals):
                (at_lo if v < 0 else at_hi).add(int(i))
            continue
        f0, df0, g, dg, _ = prob(x)
        # multipliers of the equality-constrained problem, on the basis rows
        JA_full = dg[A]
        if A.size:
            if A.size <= F.size:
                lamA = np.linalg.lstsq(JA_full[:, F].T, -df0[F], rcond=None)[0]
            else:
                lamA = nnls(JA_full[:, F].T, -df0[F])[0] if F.size else np.zeros(A.size)
        else:
            lamA = np.zeros(0)
        r = df0 + JA_full.T @ lamA
        scale = np.max(np.abs(df0))
        inactive = np.setdiff1d(np.arange(g.size), A_all)
        viol = inactive[g[inactive] > opts.tol_feas]
        if not viol.size and _nonnegative_kkt(df0, dg[A_all], sorted(at_lo), sorted(at_hi)) \
                <= 1e-3 * opts.kkt_tol * scale:
            return x
        changed = False
        if lamA.size and lamA.min() < -1e-9 * scale:
            act.discard(int(A[np.argmin(lamA)]))
            changed = True
        lo_bad = [i for i in at_lo if r[i] < -1e-9 * scale]
        hi_bad = [i for i in at_hi if r[i] > 1e-9 * scale]
        if not changed and (lo_bad or hi_bad):
            worst = max(lo_bad + hi_bad, key=lambda i: abs(r[i]))
            at_lo.discard(worst)
            at_hi.discard(worst)
            changed = True
        if not changed and viol.size:
            act.add(int(viol[np.argmax(g[viol])]))
            changed = True
        log.debug("polish round: active %s, lower %s, upper %s, lam min %.3g, changed %s",
                  A.tolist(), sorted(at_lo), sorted(at_hi),
                  lamA.min() if lamA.size else 0.0, changed)
        if not changed:
            return x
    return None


# ---------------------------------------------------------------------------
# Driver of one slave solve
# ---------------------------------------------------------------------------

def _bounds(bounds, n):
    lower, upper = bounds
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
    if np.any(lower <= 0) or np.any(upper <= lower):
        raise ValueError("area bounds must satisfy 0 < lower < upper")
    return lower, upper


def solve_slave(model: TrussModel, catalogs: CatalogSet, B, a_init=None, bounds=(100.0, 2000.0),
                opts: SlaveOptions | None = None, counter: FemCounter | None = None) -> SlaveSolution:
    """Minimise the weight over the areas for a fixed choice matrix.

    Parameters
    ----------
    B : ChoiceMatrix or array_like
        Binary or relaxed row-stochastic choice matrix.
    a_init : array_like, optional
        Starting areas; the upper bounds by default.
    bounds : (lower, upper)
        Scalars or n-vectors in mm^2.
    counter : FemCounter, optional
        Receives every structural analysis of the solve.

    Returns
    -------
    SlaveSolution
    """
    opts = opts or SlaveOptions()
    Bv = np.asarray(B.values if isinstance(B, ChoiceMatrix) else B, dtype=float)
    n = model.n_bars
    lower, upper = _bounds(bounds, n)
    a0 = upper.copy() if a_init is None else np.asarray(a_init, dtype=float).reshape(-1)
    if a0.shape != (n,) or np.any(a0 < lower - 1e-12) or np.any(a0 > upper + 1e-12):
        raise ValueError("a_init must lie within the bounds")
    local = FemCounter()
    prob = _Scaled(model, catalogs, Bv, lower, upper, opts, local)
    x = (np.clip(a0, lower, upper) - lower) / prob.span
    prob.w_ref = 1.0
    f0, df0, g, dg, _ = prob(x)
    prob.w_ref = max(f0, 1e-300)
    f0, df0 = 1.0, df0 / prob.w_ref

    xold1 = xold2 = x.copy()
    low, upp = x - opts.asyinit, x + opts.asyinit
    best = (x.copy(), f0, float(np.max(g, initial=-np.inf)))
    history = []
    status = "max_iter"
    polished = False
    polish_tries = 0
    it = 0

    def better(cand, inc):
        cf = cand[2] <= opts.tol_feas
        bf = inc[2] <= opts.tol_feas
        if cf != bf:
            return cf
        return cand[1] < inc[1] if cf else cand[2] < inc[2]

    while it < opts.max_iter:
        it += 1
        xnew, _, low, upp = _mma_step(it, x, xold1, xold2, low, upp, df0, g, dg, opts)
        xold2, xold1 = xold1, x
        step = float(np.max(np.abs(xnew - x)))
        x = xnew
        f0, df0, g, dg, _ = prob(x)
        viol = float(np.max(g, initial=-np.inf))
        cand = (x.copy(), f0, viol)
        if better(cand, best):
            best = cand
        history.append((it, f0 * prob.w_ref, viol))
        if (opts.polish and polish_tries < opts.max_polish and step < opts.polish_trigger
                and viol < opts.polish_trigger):
            polish_tries += 1
            xp = _polish(prob, x, opts)
            if xp is not None:
                pf0, pdf0, pg, pdg, _ = prob(xp)
                pviol = float(np.max(pg, initial=-np.inf))
                res = scaled_kkt_residual(xp, pdf0, pg, pdg, opts.tol_act)
                inc_ok = best[2] > opts.tol_feas or pf0 <= best[1] * (1.0 + 1e-6)
                if pviol <= opts.tol_feas and res <= opts.kkt_tol and inc_ok:
                    best = (xp, pf0, pviol)
                    polished = True
                    status = "kkt"
                    break
        if viol <= opts.tol_feas and scaled_kkt_residual(x, df0, g, dg, opts.tol_act) <= opts.kkt_tol:
            best = cand
            status = "kkt"
            if opts.polish:
                # land exactly on the active constraints when possible
                xp = _polish(prob, x, opts)
                if xp is not None:
                    pf0, pdf0, pg, pdg, _ = prob(xp)
                    pviol = float(np.max(pg, initial=-np.inf))
                    if (pviol <= opts.tol_feas and pf0 <= f0 * (1.0 + 1e-6)
                            and scaled_kkt_residual(xp, pdf0, pg, pdg, opts.tol_act) <= opts.kkt_tol):
                        best = (xp, pf0, pviol)
                        polished = True
            break
        if step <= opts.step_tol:
            status = "step"
            break

    xb = best[0]
    a_star = prob.areas(xb)
    ev = evaluate(model, catalogs, a_star, Bv, want_gradients=True, counter=local)
    f0, df0, g, dg, _ = prob(xb)
    kkt = scaled_kkt_residual(xb, df0, g, dg, opts.tol_act)
    viol = float(np.max(g, initial=-np.inf))
    feasible = viol <= opts.tol_feas
    if status == "kkt" and kkt > opts.kkt_tol:
        status = "max_iter"
    if counter is not None:
        counter.merge(local)
    log.debug("slave: %d iterations, status %s, psi %.6g, feasible %s, kkt %.2e",
              it, status, ev.weight, feasible, kkt)
    return SlaveSolution(a_star=a_star, psi=ev.weight, feasible=feasible, iterations=it,
                         kkt_residual=kkt, constraint_values=ev, B=Bv, lower=lower, upper=upper,
                         status=status, polished=polished, fem_calls=local.count,
                         max_violation=viol, stress_scale=opts.stress_scale,
                         disp_scale=prob.disp_scale, history=tuple(history))
