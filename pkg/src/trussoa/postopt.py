"""Post-optimal sensitivity of the slave optimum with respect to the catalogs.

At a slave solution ``a*(B)`` the active constraints, together with the KKT
multipliers recovered from the stationarity equations, give the derivative
of the optimal weight ``Psi(B)`` without differentiating ``a*``:

    dPsi/dB = dw/dB + lambda_s^T ds_A/dB + lambda_delta^T ddelta_A/dB

Bound constraints on the areas do not depend on ``B`` and drop out.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import nnls

from .exceptions import InconsistentKKTError, QualificationError
from .model import Evaluation

__all__ = [
    "ActiveSets",
    "Multipliers",
    "QualificationWarning",
    "detect_active",
    "kkt_multipliers",
    "post_optimal_gradient",
    "psi_gradient",
]

log = logging.getLogger(__name__)


class QualificationWarning(UserWarning):
    """Dependent active gradients were dropped; the cut is only approximate."""


@dataclass(frozen=True)
class ActiveSets:
    """0-based indices of active stress, displacement and bound constraints.

    ``stress`` indexes the flattened (n x 4) stress constraints.
    """

    stress: tuple = ()
    disp: tuple = ()
    lower: tuple = ()
    upper: tuple = ()

    def __post_init__(self):
        for name in ("stress", "disp", "lower", "upper"):
            object.__setattr__(self, name, tuple(sorted(int(i) for i in getattr(self, name))))
        if set(self.lower) & set(self.upper):
            raise ValueError("a variable cannot sit on both of its bounds")

    @property
    def size(self):
        return len(self.stress) + len(self.disp) + len(self.lower) + len(self.upper)


@dataclass(frozen=True, eq=False)
class Multipliers:
    """Nonnegative KKT multipliers, in kg per raw constraint unit.

    ``lambda_s`` is in kg/MPa, ``lambda_delta`` in kg/mm and the bound
    multipliers in kg/mm^2, each aligned with the matching ``ActiveSets``
    index tuple.  ``residual`` is the stationarity residual relative to the
    largest weight-gradient entry; ``degraded`` flags a least-squares
    estimate after dependent active gradients were dropped.
    """

    lambda_s: np.ndarray
    lambda_delta: np.ndarray
    lambda_lb: np.ndarray
    lambda_ub: np.ndarray
    residual: float = 0.0
    degraded: bool = False


def detect_active(sol, tol_act: float = 1e-5) -> ActiveSets:
    """Active constraints of a slave solution.

    A constraint is active when its normalised value is ``>= -tol_act``; an
    area bound is active when ``|a - bound| <= tol_act * (ub - lb)``.
    Normalisation divides stresses by ``sol.stress_scale`` and displacements
    by ``sol.disp_scale``, as inside the slave solver.
    """
    ev: Evaluation = sol.constraint_values
    s = ev.s_flat / sol.stress_scale
    d = ev.delta / sol.disp_scale
    span = sol.upper - sol.lower
    a = sol.a_star
    lower = np.flatnonzero(np.abs(a - sol.lower) <= tol_act * span)
    upper = np.flatnonzero(np.abs(a - sol.upper) <= tol_act * span)
    upper = np.setdiff1d(upper, lower)
    return ActiveSets(stress=np.flatnonzero(s >= -tol_act), disp=np.flatnonzero(d >= -tol_act),
                      lower=lower, upper=upper)


def kkt_multipliers(dw_da, ds_da, ddelta_da, active: ActiveSets, tol: float = 1e-6,
                    on_dependent: str = "drop") -> Multipliers:
    """Solve the stationarity equations for nonnegative multipliers.

    Solves ``dw/da + lambda_s^T ds_A/da + lambda_delta^T ddelta_A/da
    - lambda_lb^T I_lb + lambda_ub^T I_ub = 0`` by nonnegative least squares
    on column-normalised gradients.

    Parameters
    ----------
    dw_da : (n,) array
    ds_da : (4n, n) array
    ddelta_da : (d, n) array
    active : ActiveSets
    tol : float
        Admissible stationarity residual relative to ``max |dw/da|``.
    on_dependent : {'drop', 'raise'}
        Behaviour when the active gradients are linearly dependent: drop the
        dependent columns with a warning, or raise ``QualificationError``.

    Raises
    ------
    QualificationError
        Dependent active gradients and ``on_dependent='raise'``.
    InconsistentKKTError
        The residual exceeds ``tol``.
    """
    dw_da = np.asarray(dw_da, dtype=float)
    n = dw_da.size
    S = np.asarray(ds_da, dtype=float)[list(active.stress)] if active.stress else np.zeros((0, n))
    D = np.asarray(ddelta_da, dtype=float)[list(active.disp)] if active.disp else np.zeros((0, n))
    eye = np.eye(n)
    M = np.hstack([S.T, D.T, -eye[:, list(active.lower)], eye[:, list(active.upper)]])
    sizes = (len(active.stress), len(active.disp), len(active.lower), len(active.upper))
    gscale = float(np.max(np.abs(dw_da), initial=0.0))
    if M.shape[1] == 0:
        res = gscale
        return _finish(np.zeros(0), sizes, res, gscale, tol, degraded=False)

    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0.0] = 1.0
    Mn = M / norms
    degraded = False
    keep = np.arange(M.shape[1])
    if M.shape[1] > 0:
        _, R, piv = linalg.qr(Mn, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-10 * max(diag[0], 1e-300))) if diag.size else 0
        if rank < M.shape[1]:
            if on_dependent == "raise":
                raise QualificationError(
                    f"active constraint gradients are dependent (rank {rank} < {M.shape[1]})")
            keep = np.sort(piv[:rank])
            degraded = True
            warnings.warn(f"dropping {M.shape[1] - rank} dependent active constraint gradient(s)",
                          QualificationWarning, stacklevel=2)
    lam_k, _ = nnls(Mn[:, keep], -dw_da, maxiter=50 * M.shape[1] + 100)
    lam_n = np.zeros(M.shape[1])
    lam_n[keep] = lam_k
    lam = lam_n / norms
    res = float(np.max(np.abs(dw_da + M @ lam), initial=0.0))
    return _finish(lam, sizes, res, gscale, tol, degraded)


def _finish(lam, sizes, res, gscale, tol, degraded):
    rel = res / gscale if gscale > 0 else res
    if rel > tol:
        raise InconsistentKKTError(f"stationarity residual {rel:.3e} exceeds {tol:.1e}")
    lam = np.where(lam < 0.0, 0.0, lam)
    cuts = np.cumsum((0,) + sizes)
    parts = [lam[cuts[k]:cuts[k + 1]] for k in range(4)]
    return Multipliers(*parts, residual=rel, degraded=degraded)


def psi_gradient(dw_dB, ds_dB, ddelta_dB, mults: Multipliers, active: ActiveSets) -> np.ndarray:
    """Derivative of the slave optimal weight with respect to flattened ``B``."""
    g = np.array(dw_dB, dtype=float)
    if len(active.stress) != mults.lambda_s.size or len(active.disp) != mults.lambda_delta.size:
        raise ValueError("multipliers do not match the active sets")
    if active.stress:
        S = np.asarray(ds_dB)[list(active.stress)]
        if S.shape[1] != g.size:
            raise ValueError("ds_dB has the wrong number of columns")
        g += mults.lambda_s @ S
    if active.disp:
        D = np.asarray(ddelta_dB)[list(active.disp)]
        if D.shape[1] != g.size:
            raise ValueError("ddelta_dB has the wrong number of columns")
        g += mults.lambda_delta @ D
    return g


def post_optimal_gradient(sol, tol_act: float = 1e-5, tol: float = 1e-6, on_dependent: str = "drop"):
    """Active sets, multipliers and ``dPsi/dB`` of a slave solution in one call."""
    ev = sol.constraint_values
    active = detect_active(sol, tol_act)
    mults = kkt_multipliers(ev.dw_da, ev.ds_da, ev.ddelta_da, active, tol, on_dependent)
    grad = psi_gradient(ev.dw_dB, ev.ds_dB, ev.ddelta_dB, mults, active)
    return active, mults, grad
