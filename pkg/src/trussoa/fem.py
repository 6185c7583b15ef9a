"""Direct stiffness analysis of pin-jointed trusses.

The global stiffness matrix is assembled as ``K = C diag(EA / l) C^T`` where
column ``i`` of ``C`` holds the direction cosines of bar ``i`` scattered on the
free degrees of freedom of its end nodes (minus sign at the first node).  All
parameter sensitivities go through the per-bar axial stiffness ``EA``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .exceptions import DegenerateBarError, DomainError, UnderRestrainedError

__all__ = [
    "FemCounter",
    "FemState",
    "TrussModel",
    "assemble_and_solve",
    "element_geometry",
    "state_sensitivity",
]


class FemCounter:
    """Accumulates the number of structural analyses of one run."""

    def __init__(self, count: int = 0):
        self.count = int(count)

    def add(self, n: int = 1) -> None:
        self.count += int(n)

    def merge(self, other: "FemCounter") -> None:
        self.count += other.count

    def __repr__(self):
        return f"FemCounter({self.count})"


@dataclass(frozen=True, eq=False)
class TrussModel:
    """Geometry, supports, loads and displacement selector of a truss.

    Parameters
    ----------
    nodes : array_like, shape (N, dim)
        Node coordinates in mm, ``dim`` is 2 or 3.
    bars : array_like, shape (n, 2)
        Node index pairs of the bars.
    fixed_dofs : sequence of (node, axis)
        Restrained degrees of freedom.
    loads : array_like, shape (N, dim)
        Nodal forces in N.  Components on fixed dofs are ignored.
    disp_selector : sequence of (node, axis, sign)
        Rows of the projector ``P``; each row picks ``sign * u[node, axis]``.
    disp_bounds : array_like, shape (d,)
        Displacement limits ``ubar`` in mm.
    """

    nodes: np.ndarray
    bars: np.ndarray
    fixed_dofs: tuple = ()
    loads: np.ndarray | None = None
    disp_selector: tuple = ()
    disp_bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
            raise ValueError("nodes must have shape (N, 2) or (N, 3)")
        bars = np.array(self.bars, dtype=int).reshape(-1, 2)
        n_nodes, dim = nodes.shape
        if bars.size and (bars.min() < 0 or bars.max() >= n_nodes):
            raise ValueError("bar references a node that does not exist")
        for i, (na, nb) in enumerate(bars):
            if na == nb:
                raise DegenerateBarError(f"bar {i} joins node {na} to itself")
        fixed = tuple(sorted({(int(nd), int(ax)) for nd, ax in self.fixed_dofs}))
        for nd, ax in fixed:
            if not (0 <= nd < n_nodes and 0 <= ax < dim):
                raise ValueError(f"fixed dof {(nd, ax)} out of range")
        loads = np.zeros_like(nodes) if self.loads is None else np.array(self.loads, dtype=float)
        if loads.shape != nodes.shape:
            raise ValueError("loads must have the same shape as nodes")
        sel = tuple((int(nd), int(ax), float(sg)) for nd, ax, sg in self.disp_selector)
        for nd, ax, _ in sel:
            if not (0 <= nd < n_nodes and 0 <= ax < dim):
                raise ValueError(f"displacement selector row {(nd, ax)} out of range")
        ubar = np.array(self.disp_bounds, dtype=float).reshape(-1)
        if ubar.size != len(sel):
            raise ValueError("disp_bounds must have one entry per selector row")
        for name, value in (("nodes", nodes), ("bars", bars), ("fixed_dofs", fixed),
                            ("loads", loads), ("disp_selector", sel), ("disp_bounds", ubar)):
            object.__setattr__(self, name, value)
        for arr in (nodes, bars, loads, ubar):
            arr.setflags(write=False)
        # Coincident nodes are reported at construction time.
        bad = np.flatnonzero(self.lengths <= 0.0)
        if bad.size:
            raise DegenerateBarError(f"bar {bad[0]} has coincident end nodes")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_bars(self) -> int:
        return self.bars.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def dof_map(self) -> np.ndarray:
        """(N, dim) array mapping each nodal dof to its free index, or -1."""
        fixed = np.zeros((self.n_nodes, self.dim), dtype=bool)
        for nd, ax in self.fixed_dofs:
            fixed[nd, ax] = True
        dmap = -np.ones((self.n_nodes, self.dim), dtype=int)
        dmap[~fixed] = np.arange(int((~fixed).sum()))
        dmap.setflags(write=False)
        return dmap

    @property
    def n_free(self) -> int:
        return int((self.dof_map >= 0).sum())

    @cached_property
    def _vectors(self) -> np.ndarray:
        return self.nodes[self.bars[:, 1]] - self.nodes[self.bars[:, 0]]

    @cached_property
    def lengths(self) -> np.ndarray:
        ell = np.linalg.norm(self._vectors, axis=1)
        ell.setflags(write=False)
        return ell

    @cached_property
    def cosines(self) -> np.ndarray:
        cos = self._vectors / self.lengths[:, None]
        cos.setflags(write=False)
        return cos

    @cached_property
    def connectivity(self) -> np.ndarray:
        """The (q, n) matrix ``C`` with ``elongation = C^T u``."""
        C = np.zeros((self.n_free, self.n_bars))
        for i, (na, nb) in enumerate(self.bars):
            for ax in range(self.dim):
                da, db = self.dof_map[na, ax], self.dof_map[nb, ax]
                if da >= 0:
                    C[da, i] -= self.cosines[i, ax]
                if db >= 0:
                    C[db, i] += self.cosines[i, ax]
        C.setflags(write=False)
        return C

    @cached_property
    def f(self) -> np.ndarray:
        """Load vector on the free dofs."""
        f = self.loads[self.dof_map >= 0].copy()
        f.setflags(write=False)
        return f

    @property
    def n_disp(self) -> int:
        return len(self.disp_selector)

    @cached_property
    def projector(self) -> np.ndarray:
        """The (d, q) selector ``P``; rows on fixed dofs are zero."""
        P = np.zeros((self.n_disp, self.n_free))
        for r, (nd, ax, sg) in enumerate(self.disp_selector):
            dof = self.dof_map[nd, ax]
            if dof >= 0:
                P[r, dof] = sg
        P.setflags(write=False)
        return P

    def full_displacements(self, u: np.ndarray) -> np.ndarray:
        """Scatter a free-dof vector back to an (N, dim) nodal array."""
        out = np.zeros((self.n_nodes, self.dim))
        out[self.dof_map >= 0] = u
        return out


@dataclass(frozen=True, eq=False)
class FemState:
    """Solved state of a truss for one set of axial stiffnesses."""

    axial_stiffness: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    factorization: tuple
    elongation: np.ndarray
    residual: float


def element_geometry(model: TrussModel, i: int) -> tuple[float, np.ndarray]:
    """Length and unit direction of bar ``i``."""
    if not 0 <= i < model.n_bars:
        raise IndexError(f"bar index {i} out of range")
    return float(model.lengths[i]), model.cosines[i].copy()


def assemble_and_solve(model: TrussModel, EA, counter: FemCounter | None = None) -> FemState:
    """Assemble the reduced stiffness matrix and solve ``K u = f``.

    Parameters
    ----------
    model : TrussModel
    EA : array_like, shape (n,)
        Axial stiffness of every bar in N.  Must be strictly positive.
    counter : FemCounter, optional
        Incremented by one.

    Returns
    -------
    FemState
    """
    EA = np.asarray(EA, dtype=float).reshape(-1)
    if EA.shape != (model.n_bars,):
        raise ValueError(f"EA must have shape ({model.n_bars},), got {EA.shape}")
    if not np.all(np.isfinite(EA)) or np.any(EA <= 0.0):
        raise DomainError("axial stiffness must be finite and strictly positive")
    if counter is not None:
        counter.add(1)
    C = model.connectivity
    k = EA / model.lengths
    K = (C * k) @ C.T
    f = model.f
    try:
        factor = linalg.cho_factor(K, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise UnderRestrainedError("reduced stiffness matrix is not positive definite; "
                                   "the model is not properly restrained") from exc
    u = linalg.cho_solve(factor, f, check_finite=False)
    fnorm = np.linalg.norm(f)
    residual = float(np.linalg.norm(K @ u - f) / fnorm) if fnorm > 0 else float(np.linalg.norm(K @ u))
    if residual > 1e-8:
        # Near-singular systems pass Cholesky but fail equilibrium.
        raise UnderRestrainedError(f"equilibrium residual {residual:.2e} exceeds 1e-8")
    elong = C.T @ u
    phi = k * elong
    return FemState(EA.copy(), u, phi, factor, elong, residual)


def state_sensitivity(model: TrussModel, state: FemState, dEA_dtheta):
    """Directional derivatives of ``u`` and ``phi`` along ``dEA/dtheta``.

    Reuses the factorization stored in ``state``; no new analysis is counted.

    Parameters
    ----------
    dEA_dtheta : array_like, shape (n,) or (n, k)
        One direction per column.

    Returns
    -------
    du : ndarray, shape (q,) or (q, k)
    dphi : ndarray, shape (n,) or (n, k)
    """
    d = np.asarray(dEA_dtheta, dtype=float)
    if d.shape[0] != model.n_bars or d.ndim > 2:
        raise ValueError(f"direction must have leading dimension {model.n_bars}, got {d.shape}")
    ell = model.lengths
    dk = d / ell[:, None] if d.ndim == 2 else d / ell
    elong = state.elongation
    # dK/dtheta u = C diag(dk) C^T u
    rhs_bar = dk * elong[:, None] if d.ndim == 2 else dk * elong
    du = -linalg.cho_solve(state.factorization, model.connectivity @ rhs_bar, check_finite=False)
    k = state.axial_stiffness / ell
    dphi_rhs = model.connectivity.T @ du
    dphi = rhs_bar + (k[:, None] * dphi_rhs if d.ndim == 2 else k * dphi_rhs)
    return du, dphi
