"""Relaxed categorical coding and the weight / constraint functions.

A choice matrix ``B`` (n x p) weights the catalog properties of every bar.
Binary row-stochastic matrices are physical designs; relaxed ones only exist
so that the functions can be differentiated with respect to ``B``.

Flattening convention: ``B`` is vectorised row by row (index ``i * p + c``) and
the stress constraints ``s`` (n x 4) likewise (index ``i * 4 + j``), with
``j = 0..3`` the tension, compression, Euler buckling and local buckling
limits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import CatalogSet
from .exceptions import EvaluationError
from .fem import FemCounter, TrussModel, assemble_and_solve, state_sensitivity

__all__ = [
    "N_STRESS",
    "ChoiceMatrix",
    "Evaluation",
    "evaluate",
    "relaxed_modulus",
    "weight",
    "weight_gradients",
]

N_STRESS = 4
_ROW_TOL = 1e-12


class ChoiceMatrix:
    """Row-stochastic n x p matrix of catalog weights.

    Parameters
    ----------
    values : array_like, shape (n, p)
    binary : bool, optional
        Require every entry to be exactly 0 or 1.  Inferred when omitted.
    """

    def __init__(self, values, binary=None):
        B = np.array(values, dtype=float)
        if B.ndim != 2:
            raise ValueError("choice matrix must be two-dimensional")
        if np.any(B < -_ROW_TOL) or np.any(B > 1 + _ROW_TOL):
            raise ValueError("choice matrix entries must lie in [0, 1]")
        if np.any(np.abs(B.sum(axis=1) - 1.0) > _ROW_TOL):
            raise ValueError("every row of a choice matrix must sum to 1")
        is_binary = bool(np.all((B == 0.0) | (B == 1.0)))
        if binary is None:
            binary = is_binary
        elif binary and not is_binary:
            raise ValueError("binary choice matrix has non 0/1 entries")
        B.setflags(write=False)
        self._B = B
        self.binary = bool(binary)

    @classmethod
    def from_catalogs(cls, c, p):
        """One-hot matrix from a vector of 0-based catalog indices."""
        c = np.asarray(c, dtype=int).reshape(-1)
        if np.any(c < 0) or np.any(c >= p):
            raise ValueError(f"catalog index out of range [0, {p})")
        B = np.zeros((c.size, p))
        B[np.arange(c.size), c] = 1.0
        return cls(B, binary=True)

    @classmethod
    def uniform(cls, n, p):
        return cls(np.full((n, p), 1.0 / p))

    @property
    def n(self):
        return self._B.shape[0]

    @property
    def p(self):
        return self._B.shape[1]

    @property
    def values(self):
        return self._B

    @property
    def flat(self):
        return self._B.reshape(-1)

    def catalog_vector(self):
        """0-based index of the chosen catalog per bar (binary matrices only)."""
        if not self.binary:
            raise ValueError("catalog vector is only defined for binary matrices")
        return np.argmax(self._B, axis=1)

    def __array__(self, dtype=None, copy=None):
        return self._B if dtype is None else self._B.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ChoiceMatrix):
            return NotImplemented
        return self._B.shape == other._B.shape and bool(np.all(self._B == other._B))

    def __hash__(self):
        return hash((self._B.shape, self._B.tobytes()))

    def __repr__(self):
        if self.binary:
            return f"ChoiceMatrix.from_catalogs({self.catalog_vector().tolist()}, p={self.p})"
        return f"ChoiceMatrix({self._B.tolist()!r})"


def _as_matrix(B, n=None, p=None):
    B = np.asarray(B, dtype=float)
    if n is not None and B.shape != (n, p):
        raise ValueError(f"choice matrix must have shape ({n}, {p}), got {B.shape}")
    return B


def weight(model: TrussModel, catalogs: CatalogSet, a, B) -> float:
    """Structural weight ``sum_i sum_c rho_c l_i B_ic a_i`` in kg."""
    a = np.asarray(a, dtype=float)
    B = _as_matrix(B, model.n_bars, catalogs.p)
    return float(np.dot(model.lengths * a, B @ catalogs.density))


def weight_gradients(model: TrussModel, catalogs: CatalogSet, a, B):
    """Exact gradients of the weight with respect to ``a`` and flattened ``B``."""
    a = np.asarray(a, dtype=float)
    B = _as_matrix(B, model.n_bars, catalogs.p)
    dw_da = model.lengths * (B @ catalogs.density)
    dw_dB = np.outer(model.lengths * a, catalogs.density).reshape(-1)
    return dw_da, dw_dB


def relaxed_modulus(catalogs: CatalogSet, B) -> np.ndarray:
    """Young's modulus per bar, ``E_i = sum_c B_ic E_c``."""
    return np.asarray(B, dtype=float) @ catalogs.young_modulus


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Function values, and optionally gradients, at one ``(a, B)``.

    ``s`` has shape (n, 4); feasible designs have ``s <= 0`` and
    ``delta <= 0``.  Gradients of ``s`` are with respect to its flattened
    form, so ``ds_da`` has shape (4 n, n) and ``ds_dB`` (4 n, n p).
    """

    weight: float
    s: np.ndarray
    delta: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    dw_da: np.ndarray | None = None
    dw_dB: np.ndarray | None = None
    ds_da: np.ndarray | None = None
    ds_dB: np.ndarray | None = None
    ddelta_da: np.ndarray | None = None
    ddelta_dB: np.ndarray | None = None

    @property
    def s_flat(self):
        return self.s.reshape(-1)

    def max_violation(self, stress_scale=1.0, disp_scale=None):
        """Largest constraint value after optional normalisation (<= 0 is feasible)."""
        vals = [self.s_flat / stress_scale]
        if self.delta.size:
            vals.append(self.delta / (1.0 if disp_scale is None else disp_scale))
        return float(np.max(np.concatenate(vals)))

    def is_feasible(self, tol=0.0, stress_scale=1.0, disp_scale=None):
        return self.max_violation(stress_scale, disp_scale) <= tol


def evaluate(model: TrussModel, catalogs: CatalogSet, a, B, want_gradients=False,
             wrt=("a", "B"), counter: FemCounter | None = None) -> Evaluation:
    """Weight, stress constraints and displacement constraints.

    Parameters
    ----------
    a : array_like, shape (n,)
        Cross-section areas in mm^2, strictly positive.
    B : array_like, shape (n, p)
        Choice matrix.  Any real matrix is accepted so that gradients can be
        checked off the row-stochastic set.
    want_gradients : bool
        Also compute the gradients listed in ``wrt``.
    wrt : tuple of {'a', 'B'}
    counter : FemCounter, optional
        Counts the single structural analysis.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    n, p = model.n_bars, catalogs.p
    B = _as_matrix(B, n, p)
    if a.shape != (n,):
        raise ValueError(f"a must have shape ({n},)")
    ell = model.lengths
    E_rel = B @ catalogs.young_modulus
    state = assemble_and_solve(model, E_rel * a, counter)
    phi = state.phi
    sigma = phi / a
    rowsum = B.sum(axis=1)

    euler = catalogs.euler_coefficient[None, :] * (a / ell**2)[:, None]        # (n, p)
    raw = np.empty((n, p, N_STRESS))
    raw[:, :, 0] = sigma[:, None] - catalogs.sigma_t[None, :]
    raw[:, :, 1] = -sigma[:, None] - catalogs.sigma_c[None, :]
    raw[:, :, 2] = -sigma[:, None] - euler
    raw[:, :, 3] = -sigma[:, None] - catalogs.local_buckling_stress[None, :]
    s = np.einsum("ic,icj->ij", B, raw)
    delta = model.projector @ state.u - model.disp_bounds
    w = float(np.dot(ell * a, B @ catalogs.density))
    if not (np.isfinite(w) and np.all(np.isfinite(s)) and np.all(np.isfinite(delta))):
        raise EvaluationError("non-finite weight or constraint value")
    if not want_gradients:
        return Evaluation(w, s, delta, phi, state.u)

    dw_da, dw_dB = weight_gradients(model, catalogs, a, B)
    # Sensitivities per unit area: dEA_k/da_k = E_k.
    du_da, dphi_da = state_sensitivity(model, state, np.diag(E_rel))
    dsig_da = dphi_da / a[:, None] - np.diag(phi / a**2)
    sign = np.array([1.0, -1.0, -1.0, -1.0])
    out = dict(dw_da=dw_da, dw_dB=dw_dB)
    if "a" in wrt:
        ds_da = (rowsum[:, None, None] * sign[None, :, None]) * dsig_da[:, None, :]
        ds_da[np.arange(n), 2, np.arange(n)] -= (B @ catalogs.euler_coefficient) / ell**2
        out["ds_da"] = ds_da.reshape(n * N_STRESS, n)
        out["ddelta_da"] = model.projector @ du_da
    if "B" in wrt:
        # dEA_k/dB_kc = a_k E_c = (a_k E_c / E_k) dEA_k/da_k
        scale = (a / E_rel)[:, None] * catalogs.young_modulus[None, :]            # (n, p)
        dsig_dB = (dphi_da / a[:, None])[:, :, None] * scale[None, :, :]          # (i, k, c)
        ds_dB = (rowsum[:, None, None, None] * sign[None, :, None, None]) * dsig_dB[:, None, :, :]
        ds_dB[np.arange(n), :, np.arange(n), :] += raw.transpose(0, 2, 1)
        out["ds_dB"] = ds_dB.reshape(n * N_STRESS, n * p)
        ddelta_dB = (model.projector @ du_da)[:, :, None] * scale[None, :, :]
        out["ddelta_dB"] = ddelta_dB.reshape(model.n_disp, n * p)
    return Evaluation(w, s, delta, phi, state.u, **out)
