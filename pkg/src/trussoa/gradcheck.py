"""Finite-difference checks of the analytic gradients.

Two families of checks:

* function gradients (weight, stress and displacement constraints with
  respect to ``a`` and ``B``) against central differences;
* the post-optimal ``dPsi/dB`` against central differences of re-solved
  slave optima, along directions that move mass between two entries of a
  row so that row sums stay equal to one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import CatalogSet
from .fem import TrussModel
from .model import evaluate
from .postopt import detect_active, post_optimal_gradient
from .slave import SlaveOptions, solve_slave

__all__ = ["GradientRow", "PsiRow", "check_model_gradients", "check_psi_gradient", "random_state"]


@dataclass(frozen=True)
class GradientRow:
    function: str
    wrt: str
    max_rel_error: float


@dataclass(frozen=True)
class PsiRow:
    bar: int
    source: int
    target: int
    analytic: float
    finite_difference: float
    rel_error: float
    stable: bool


def random_state(model: TrussModel, catalogs: CatalogSet, bounds, rng, relaxed=False):
    """Random areas within the bounds and a random one-hot (or relaxed) B."""
    lo, hi = bounds
    a = rng.uniform(lo, hi, model.n_bars)
    if relaxed:
        B = rng.dirichlet(np.ones(catalogs.p), size=model.n_bars)
    else:
        B = np.eye(catalogs.p)[rng.integers(0, catalogs.p, model.n_bars)]
    return a, B


def _rowwise_error(an, fd):
    """Per-function relative error ``max_j |fd - an| / max_j |an|``."""
    an = np.atleast_2d(an)
    fd = np.atleast_2d(fd)
    scale = np.max(np.abs(an), axis=1)
    floor = 1e-9 * max(float(np.max(scale, initial=0.0)), 1e-300)
    err = np.max(np.abs(fd - an), axis=1) / np.maximum(scale, floor)
    return float(np.max(err, initial=0.0))


def check_model_gradients(model: TrussModel, catalogs: CatalogSet, a, B, rel_step=1e-6):
    """Compare every analytic gradient block with central differences.

    Returns a list of :class:`GradientRow`, one per (function, variable).
    """
    a = np.asarray(a, dtype=float)
    B = np.asarray(B, dtype=float)
    n, p = B.shape
    ev = evaluate(model, catalogs, a, B, want_gradients=True)

    def funcs(aa, BB):
        e = evaluate(model, catalogs, aa, BB)
        return np.array([e.weight]), e.s_flat, e.delta

    fd_a = [np.zeros((1, n)), np.zeros((4 * n, n)), np.zeros((model.n_disp, n))]
    for j in range(n):
        h = rel_step * a[j]
        ap, am = a.copy(), a.copy()
        ap[j] += h
        am[j] -= h
        for blk, fp, fm in zip(fd_a, funcs(ap, B), funcs(am, B)):
            blk[:, j] = (fp - fm) / (2 * h)
    fd_B = [np.zeros((1, n * p)), np.zeros((4 * n, n * p)), np.zeros((model.n_disp, n * p))]
    flat = B.reshape(-1)
    for j in range(n * p):
        h = rel_step * max(abs(flat[j]), 1.0)
        bp, bm = flat.copy(), flat.copy()
        bp[j] += h
        bm[j] -= h
        for blk, fp, fm in zip(fd_B, funcs(a, bp.reshape(n, p)), funcs(a, bm.reshape(n, p))):
            blk[:, j] = (fp - fm) / (2 * h)
    rows = [
        GradientRow("weight", "a", _rowwise_error(ev.dw_da[None, :], fd_a[0])),
        GradientRow("weight", "B", _rowwise_error(ev.dw_dB[None, :], fd_B[0])),
        GradientRow("stress", "a", _rowwise_error(ev.ds_da, fd_a[1])),
        GradientRow("stress", "B", _rowwise_error(ev.ds_dB, fd_B[1])),
    ]
    if model.n_disp:
        rows += [GradientRow("displacement", "a", _rowwise_error(ev.ddelta_da, fd_a[2])),
                 GradientRow("displacement", "B", _rowwise_error(ev.ddelta_dB, fd_B[2]))]
    return rows


def check_psi_gradient(model: TrussModel, catalogs: CatalogSet, B, bounds, a_init=None,
                       opts: SlaveOptions | None = None, h=1e-4, tol_act=1e-5, bars=None):
    """Directional ``dPsi/dB`` against central differences of re-solved optima.

    For every bar ``i`` (or those in ``bars``) and every catalog ``c'`` other
    than the chosen one, the direction moves mass ``h`` from the chosen entry
    to ``c'``.  At a binary point the backward step leaves ``[0, 1]`` by
    ``h``; the functions are smooth there, so the central difference is still
    meaningful.  A row is ``stable`` when both perturbed solves keep the
    active set of the base point.
    """
    opts = opts or SlaveOptions()
    B = np.asarray(B, dtype=float)
    n, p = B.shape
    base = solve_slave(model, catalogs, B, a_init, bounds, opts)
    active0, _, grad = post_optimal_gradient(base, tol_act)
    rows = []
    for i in (range(n) if bars is None else bars):
        src = int(np.argmax(B[i]))
        for tgt in range(p):
            if tgt == src:
                continue
            d = np.zeros((n, p))
            d[i, src], d[i, tgt] = -1.0, 1.0
            sp = solve_slave(model, catalogs, B + h * d, a_init, bounds, opts)
            sm = solve_slave(model, catalogs, B - h * d, a_init, bounds, opts)
            stable = (sp.feasible and sm.feasible and detect_active(sp, tol_act) == active0
                      and detect_active(sm, tol_act) == active0)
            fd = (sp.psi - sm.psi) / (2 * h)
            an = float(grad @ d.reshape(-1))
            scale = max(abs(an), abs(fd), 1e-12)
            rows.append(PsiRow(i, src, tgt, an, fd, abs(fd - an) / scale, stable))
    return rows
