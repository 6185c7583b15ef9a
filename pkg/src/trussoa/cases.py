"""Case files: geometry, loads, catalogs, bounds and solver options.

A case is stored as one JSON document (see ``docs/case-format.md`` in the
repository for the field-by-field description).  All indices in a case file
are 0-based.  Lengths are in mm, forces in N, stresses in MPa and densities
in kg/mm^3.

The generators reproduce the benchmark structures: a 2-bar truss, the
10-bar cantilever, the scalable cantilever made of square blocks, and the
120-bar dome.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .catalog import (
    MATERIALS,
    PROFILE_DIMENSIONS,
    CatalogEntry,
    CatalogSet,
    Material,
    ProfileShape,
)
from .exceptions import CaseFormatError
from .fem import TrussModel
from .model import ChoiceMatrix

__all__ = [
    "CASE_NAMES",
    "CaseFile",
    "catalog_subset",
    "dumps_case",
    "gen_case",
    "load_case",
    "loads_case",
    "save_case",
]

FORMAT_TAG = "trussoa-case"
FORMAT_VERSION = 1
CASE_NAMES = ("two-bar", "ten-bar", "cantilever", "dome120")

DEFAULT_OPTIONS = {
    "epsilon": 1e-3,
    "max_iter": 200,
    "tol_feas": 1e-6,
    "kkt_tol": 1e-6,
    "tol_act": 1e-5,
    "slave_max_iter": 500,
    "stress_scale": 200.0,
}


def _tuple2(rows, conv):
    return tuple(tuple(conv(v) for v in row) for row in rows)


@dataclass(frozen=True)
class CaseFile:
    """In-memory form of a case file.

    ``loads`` holds sparse rows ``(node, f_x, f_y[, f_z])``;
    ``disp_constraints`` rows are ``(node, axis, sign, ubar)``;
    ``catalogs`` rows are ``(material, profile, kratio or None)``.
    """

    name: str
    nodes: tuple
    bars: tuple
    fixed_dofs: tuple
    loads: tuple
    disp_constraints: tuple
    materials: dict
    profiles: dict
    catalogs: tuple
    lower: float
    upper: float
    initial_areas: object = None
    B0: tuple | None = None
    inertia_axis: str = "strong"
    options: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", _tuple2(self.nodes, float))
        object.__setattr__(self, "bars", _tuple2(self.bars, int))
        object.__setattr__(self, "fixed_dofs", _tuple2(self.fixed_dofs, int))
        object.__setattr__(self, "loads", tuple((int(r[0]),) + tuple(float(v) for v in r[1:])
                                                for r in self.loads))
        object.__setattr__(self, "disp_constraints", tuple((int(r[0]), int(r[1]), float(r[2]), float(r[3]))
                                                           for r in self.disp_constraints))
        object.__setattr__(self, "catalogs", tuple((str(m), str(p), None if k is None else float(k))
                                                   for m, p, k in self.catalogs))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if self.initial_areas is not None and not np.isscalar(self.initial_areas):
            object.__setattr__(self, "initial_areas", tuple(float(v) for v in self.initial_areas))
        elif self.initial_areas is not None:
            object.__setattr__(self, "initial_areas", float(self.initial_areas))
        if self.B0 is not None:
            object.__setattr__(self, "B0", tuple(int(c) for c in self.B0))
        object.__setattr__(self, "options", {**DEFAULT_OPTIONS, **dict(self.options)})
        _validate(self)

    @property
    def n_bars(self):
        return len(self.bars)

    @property
    def p(self):
        return len(self.catalogs)

    @property
    def dim(self):
        return len(self.nodes[0])

    def to_model(self) -> TrussModel:
        nodes = np.array(self.nodes)
        loads = np.zeros_like(nodes)
        for row in self.loads:
            loads[row[0]] += row[1:]
        sel = [(nd, ax, sg) for nd, ax, sg, _ in self.disp_constraints]
        ubar = [u for *_, u in self.disp_constraints]
        return TrussModel(nodes=nodes, bars=np.array(self.bars).reshape(-1, 2), fixed_dofs=self.fixed_dofs,
                          loads=loads, disp_selector=sel, disp_bounds=ubar)

    def to_catalogs(self) -> CatalogSet:
        mats = {k: Material(k, **v) for k, v in self.materials.items()}
        profs = {k: ProfileShape(k, v["kind"], v["thickness"], v["height"], v["width"])
                 for k, v in self.profiles.items()}
        return CatalogSet(tuple(CatalogEntry(mats[m], profs[p], kratio_override=k,
                                             inertia_axis=self.inertia_axis)
                                for m, p, k in self.catalogs))

    @property
    def bounds(self):
        return self.lower, self.upper

    def a_init(self) -> np.ndarray:
        if self.initial_areas is None:
            return np.full(self.n_bars, self.upper)
        return np.broadcast_to(np.asarray(self.initial_areas, dtype=float), (self.n_bars,)).copy()

    def b0(self) -> ChoiceMatrix:
        c = np.zeros(self.n_bars, dtype=int) if self.B0 is None else np.array(self.B0)
        return ChoiceMatrix.from_catalogs(c, self.p)

    def with_options(self, **kw) -> "CaseFile":
        return replace(self, options={**self.options, **kw})


def _validate(case: CaseFile):
    def fail(path, msg):
        raise CaseFormatError(f"{path}: {msg}")

    if not case.nodes:
        fail("nodes", "at least one node is required")
    dim = len(case.nodes[0])
    if dim not in (2, 3):
        fail("nodes[0]", "nodes need 2 or 3 coordinates")
    for i, nd in enumerate(case.nodes):
        if len(nd) != dim:
            fail(f"nodes[{i}]", f"expected {dim} coordinates")
    N = len(case.nodes)
    if not case.bars:
        fail("bars", "at least one bar is required")
    for i, b in enumerate(case.bars):
        if len(b) != 2 or not all(0 <= v < N for v in b):
            fail(f"bars[{i}]", f"expected two node indices in [0, {N})")
        if b[0] == b[1]:
            fail(f"bars[{i}]", "bar joins a node to itself")
    for i, fd in enumerate(case.fixed_dofs):
        if len(fd) != 2 or not (0 <= fd[0] < N and 0 <= fd[1] < dim):
            fail(f"fixed_dofs[{i}]", "expected [node, axis] within range")
    for i, ld in enumerate(case.loads):
        if len(ld) != dim + 1 or not 0 <= ld[0] < N:
            fail(f"loads[{i}]", f"expected [node, {dim} force components]")
    for i, dc in enumerate(case.disp_constraints):
        if not (0 <= dc[0] < N and 0 <= dc[1] < dim):
            fail(f"displacement_constraints[{i}]", "node or axis out of range")
        if dc[2] not in (1.0, -1.0):
            fail(f"displacement_constraints[{i}].sign", "must be +1 or -1")
    for name, m in case.materials.items():
        for key in ("density", "young_modulus", "poisson", "sigma_t", "sigma_c"):
            if key not in m:
                fail(f"materials.{name}.{key}", "missing")
            if not isinstance(m[key], (int, float)) or not m[key] > 0:
                fail(f"materials.{name}.{key}", "must be a positive number")
        if not m["poisson"] < 0.5:
            fail(f"materials.{name}.poisson", "must be below 0.5")
    for name, pr in case.profiles.items():
        for key in ("kind", "thickness", "height", "width"):
            if key not in pr:
                fail(f"profiles.{name}.{key}", "missing")
        if pr["kind"] not in ("I", "C", "T"):
            fail(f"profiles.{name}.kind", "must be one of I, C, T")
        if not 0 < pr["thickness"] < min(pr["height"], pr["width"]):
            fail(f"profiles.{name}.thickness", "must be positive and below height and width")
    if not case.catalogs:
        fail("catalogs", "at least one catalog is required")
    for i, (m, p, k) in enumerate(case.catalogs):
        if m not in case.materials:
            fail(f"catalogs[{i}].material", f"unknown material {m!r}")
        if p not in case.profiles:
            fail(f"catalogs[{i}].profile", f"unknown profile {p!r}")
        if k is not None and not 0 < k < 1:
            fail(f"catalogs[{i}].kratio", "must lie in (0, 1)")
    if not 0 < case.lower < case.upper:
        fail("area_bounds", "need 0 < lower < upper")
    if case.initial_areas is not None:
        a = np.atleast_1d(np.asarray(case.initial_areas, dtype=float))
        if a.size not in (1, len(case.bars)):
            fail("initial_areas", "expected a scalar or one value per bar")
        if np.any(a < case.lower) or np.any(a > case.upper):
            fail("initial_areas", "must lie within the area bounds")
    if case.B0 is not None:
        if len(case.B0) != len(case.bars):
            fail("B0", "expected one catalog index per bar")
        if not all(0 <= c < len(case.catalogs) for c in case.B0):
            fail("B0", f"catalog index out of range [0, {len(case.catalogs)})")
    if case.inertia_axis not in ("strong", "weak"):
        fail("inertia_axis", "must be 'strong' or 'weak'")
    unknown = set(case.options) - set(DEFAULT_OPTIONS)
    if unknown:
        fail(f"options.{sorted(unknown)[0]}", "unknown option")
    if not case.options["epsilon"] > 0:
        fail("options.epsilon", "must be positive")


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def case_to_dict(case: CaseFile) -> dict:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "name": case.name,
        "description": case.description,
        "units": {"length": "mm", "force": "N", "stress": "MPa", "density": "kg/mm^3"},
        "nodes": [list(n) for n in case.nodes],
        "bars": [list(b) for b in case.bars],
        "fixed_dofs": [list(f) for f in case.fixed_dofs],
        "loads": [list(ld) for ld in case.loads],
        "displacement_constraints": [{"node": nd, "axis": ax, "sign": sg, "ubar": u}
                                     for nd, ax, sg, u in case.disp_constraints],
        "materials": {k: dict(v) for k, v in case.materials.items()},
        "profiles": {k: dict(v) for k, v in case.profiles.items()},
        "catalogs": [{"material": m, "profile": p, "kratio": k} for m, p, k in case.catalogs],
        "inertia_axis": case.inertia_axis,
        "area_bounds": {"lower": case.lower, "upper": case.upper},
        "initial_areas": list(case.initial_areas) if isinstance(case.initial_areas, tuple)
        else case.initial_areas,
        "B0": None if case.B0 is None else list(case.B0),
        "options": dict(case.options),
    }


def _get(d, key, path, kind=None):
    if not isinstance(d, dict) or key not in d:
        raise CaseFormatError(f"{path + '.' if path else ''}{key}: missing required field")
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise CaseFormatError(f"{path + '.' if path else ''}{key}: expected {kind.__name__ if isinstance(kind, type) else 'a different type'}")
    return v


def case_from_dict(d: dict) -> CaseFile:
    if not isinstance(d, dict):
        raise CaseFormatError("<root>: expected a JSON object")
    if d.get("format") != FORMAT_TAG:
        raise CaseFormatError(f"format: expected {FORMAT_TAG!r}")
    if d.get("version") != FORMAT_VERSION:
        raise CaseFormatError(f"version: unsupported version {d.get('version')!r}")
    dcs = []
    for i, dc in enumerate(_get(d, "displacement_constraints", "", list)):
        path = f"displacement_constraints[{i}]"
        dcs.append((_get(dc, "node", path, int), _get(dc, "axis", path, int),
                    _get(dc, "sign", path, (int, float)), _get(dc, "ubar", path, (int, float))))
    cats = []
    for i, c in enumerate(_get(d, "catalogs", "", list)):
        path = f"catalogs[{i}]"
        cats.append((_get(c, "material", path, str), _get(c, "profile", path, str), c.get("kratio")))
    bounds = _get(d, "area_bounds", "", dict)
    try:
        return CaseFile(
            name=_get(d, "name", "", str),
            description=d.get("description", ""),
            nodes=_get(d, "nodes", "", list),
            bars=_get(d, "bars", "", list),
            fixed_dofs=_get(d, "fixed_dofs", "", list),
            loads=_get(d, "loads", "", list),
            disp_constraints=dcs,
            materials=_get(d, "materials", "", dict),
            profiles=_get(d, "profiles", "", dict),
            catalogs=cats,
            lower=_get(bounds, "lower", "area_bounds", (int, float)),
            upper=_get(bounds, "upper", "area_bounds", (int, float)),
            initial_areas=d.get("initial_areas"),
            B0=d.get("B0"),
            inertia_axis=d.get("inertia_axis", "strong"),
            options=d.get("options", {}),
        )
    except CaseFormatError:
        raise
    except (TypeError, ValueError, IndexError) as exc:
        raise CaseFormatError(f"<root>: malformed value ({exc})") from exc


def dumps_case(case: CaseFile) -> str:
    return json.dumps(case_to_dict(case), indent=1)


def loads_case(text: str) -> CaseFile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return case_from_dict(d)


def save_case(case: CaseFile, path) -> None:
    Path(path).write_text(dumps_case(case) + "\n")


def load_case(path) -> CaseFile:
    return loads_case(Path(path).read_text())


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _material_table(names):
    return {k: {"density": MATERIALS[k].density, "young_modulus": MATERIALS[k].young_modulus,
                "poisson": MATERIALS[k].poisson, "sigma_t": MATERIALS[k].sigma_t,
                "sigma_c": MATERIALS[k].sigma_c} for k in names}


def _profile_table(names):
    out = {}
    for nm in names:
        kind, size = nm[0], int(nm[1:])
        t, h, w = PROFILE_DIMENSIONS[size - 1]
        out[nm] = {"kind": kind, "thickness": float(t), "height": float(h), "width": float(w)}
    return out


def catalog_subset(p: int):
    """First ``p`` (material, profile) pairs of the scaling order.

    The order runs over sizes 1..10, then profile kinds I, C, T, then the
    materials AL2139, TA6V, AL2024, so ``p = 2`` gives AL2139-I1 and TA6V-I1.
    """
    if not 1 <= p <= 90:
        raise ValueError("p must lie in [1, 90]")
    pairs = [(mat, f"{kind}{size}") for size in range(1, 11) for kind in "ICT"
             for mat in ("AL2139", "TA6V", "AL2024")]
    return pairs[:p]


def _full_catalogs():
    return [(mat, f"{kind}{size}") for mat in ("AL2139", "TA6V", "AL2024")
            for kind in "ICT" for size in range(1, 11)]


def _with_catalogs(pairs):
    mats = sorted({m for m, _ in pairs}, key=["AL2139", "TA6V", "AL2024"].index)
    profs = sorted({p for _, p in pairs}, key=lambda s: ("ICT".index(s[0]), int(s[1:])))
    return _material_table(mats), _profile_table(profs), [(m, p, None) for m, p in pairs]


def two_bar(ubar=7.0) -> CaseFile:
    """Two bars meeting at a loaded free node, both 1414.2 mm long.

    The free node sits at the origin and the supports at (1000, -1000) and
    (1000, 1000).  The load has components (-100 kN, -100 kN), so only the
    second bar is stressed.  The vertical deflection of the free node is
    limited to ``ubar``.
    """
    mats, profs, cats = _with_catalogs([("AL2139", "I1"), ("TA6V", "I1")])
    return CaseFile(
        name="two-bar",
        description="2-bar truss; free node at origin, supports at (1000,-1000) and (1000,1000) mm",
        nodes=[[0.0, 0.0], [1000.0, -1000.0], [1000.0, 1000.0]],
        bars=[[0, 1], [0, 2]],
        fixed_dofs=[[1, 0], [1, 1], [2, 0], [2, 1]],
        loads=[[0, -1.0e5, -1.0e5]],
        disp_constraints=[(0, 1, -1.0, ubar)],
        materials=mats, profiles=profs, catalogs=cats,
        lower=300.0, upper=2000.0, initial_areas=2000.0, B0=(1, 0),
    )


def _block_truss(blocks, length=1000.0, height=1000.0):
    """Nodes, bars and supports of a cantilever made of square blocks.

    Nodes are numbered from the free end: node ``2k`` is the top and
    ``2k + 1`` the bottom node of section ``k`` (section 0 is the tip), the
    last two nodes are clamped.  For ``blocks = 2`` this is the classical
    10-bar numbering.
    """
    nb = blocks
    nodes = []
    for k in range(nb + 1):
        x = (nb - k) * length
        nodes += [[x, height], [x, 0.0]]
    top = lambda k: 2 * k
    bot = lambda k: 2 * k + 1
    chords_top, chords_bot, verticals, diag_a, diag_b = [], [], [], [], []
    for k in range(nb):
        # block between section k (free side) and k + 1 (support side)
        chords_top.append([top(k + 1), top(k)])
        chords_bot.append([bot(k + 1), bot(k)])
        verticals.append([top(k), bot(k)])
        diag_a.append([top(k + 1), bot(k)])
        diag_b.append([bot(k + 1), top(k)])
    if nb == 2:
        # classical 10-bar order: top chords, bottom chords, verticals, diagonals
        bars = [chords_top[1], chords_top[0], chords_bot[1], chords_bot[0], verticals[1], verticals[0],
                diag_a[1], diag_b[1], diag_a[0], diag_b[0]]
    else:
        bars = []
        for k in reversed(range(nb)):
            bars += [chords_top[k], chords_bot[k], verticals[k], diag_a[k], diag_b[k]]
    fixed = [[top(nb), 0], [top(nb), 1], [bot(nb), 0], [bot(nb), 1]]
    return nodes, bars, fixed


def ten_bar(ubar=22.0, p=2) -> CaseFile:
    """The 10-bar cantilever with 1000 mm square blocks and a 100 kN tip load.

    The vertical tip deflection at the loaded node is limited to ``ubar``.
    """
    nodes, bars, fixed = _block_truss(2)
    mats, profs, cats = _with_catalogs(catalog_subset(p))
    return CaseFile(
        name="ten-bar",
        description=f"10-bar cantilever, 1000 mm blocks, tip deflection limit {ubar:g} mm",
        nodes=nodes, bars=bars, fixed_dofs=fixed,
        loads=[[1, 0.0, -1.0e5]],
        disp_constraints=[(1, 1, -1.0, ubar)],
        materials=mats, profiles=profs, catalogs=cats,
        lower=100.0, upper=1300.0, initial_areas=1300.0,
    )


def cantilever(blocks=3, p=2) -> CaseFile:
    """Cantilever of ``blocks`` square blocks (5 bars each), 30 kN tip load."""
    if int(blocks) < 1:
        raise ValueError("blocks must be at least 1")
    nodes, bars, fixed = _block_truss(int(blocks))
    mats, profs, cats = _with_catalogs(catalog_subset(p))
    return CaseFile(
        name="cantilever",
        description=f"{blocks}-block cantilever, 1000 mm blocks, no displacement limit",
        nodes=nodes, bars=bars, fixed_dofs=fixed,
        loads=[[1, 0.0, -3.0e4]],
        disp_constraints=[],
        materials=mats, profiles=profs, catalogs=cats,
        lower=100.0, upper=2000.0, initial_areas=2000.0,
    )


def dome120(ubar=10.0) -> CaseFile:
    """The 120-bar dome with all 90 catalogs.

    Apex at 7000 mm, inner ring of 12 nodes (radius 6940, height 5850),
    outer ring of 24 nodes (radius 12500, height 3000) and 12 pinned supports
    (radius 15890).  Loads point downwards: 60 kN at the apex, 30 kN on the
    inner ring, 10 kN on the outer ring.  The apex deflection is limited to
    ``ubar``.
    """
    def ring(r, z, count, offset=0.0):
        return [[r * math.cos(math.radians(offset + 360.0 * k / count)),
                 r * math.sin(math.radians(offset + 360.0 * k / count)), z] for k in range(count)]

    nodes = [[0.0, 0.0, 7000.0]] + ring(6940.0, 5850.0, 12) + ring(12500.0, 3000.0, 24) \
        + ring(15890.0, 0.0, 12)
    apex = 0
    r1 = lambda j: 1 + j % 12
    r2 = lambda j: 13 + j % 24
    sp = lambda j: 37 + j % 12
    bars = [[apex, r1(j)] for j in range(12)]
    bars += [[r1(j), r1(j + 1)] for j in range(12)]
    bars += [[r2(j), r2(j + 1)] for j in range(24)]
    for j in range(12):
        bars += [[r1(j), r2(2 * j - 1)], [r1(j), r2(2 * j + 1)]]
    for j in range(12):
        bars += [[r2(2 * j - 1), sp(j)], [r2(2 * j + 1), sp(j)]]
    bars += [[r1(j), r2(2 * j)] for j in range(12)]
    bars += [[r2(2 * j), sp(j)] for j in range(12)]
    fixed = [[sp(j), ax] for j in range(12) for ax in range(3)]
    loads = [[apex, 0.0, 0.0, -6.0e4]]
    loads += [[r1(j), 0.0, 0.0, -3.0e4] for j in range(12)]
    loads += [[r2(j), 0.0, 0.0, -1.0e4] for j in range(24)]
    mats, profs, cats = _with_catalogs(_full_catalogs())
    return CaseFile(
        name="dome120",
        description="120-bar dome; apex z=7000, rings r=6940/z=5850 (12) and r=12500/z=3000 (24), "
                    "supports r=15890/z=0 (12); lengths in mm",
        nodes=nodes, bars=bars, fixed_dofs=fixed, loads=loads,
        disp_constraints=[(apex, 2, -1.0, ubar)],
        materials=mats, profiles=profs, catalogs=cats,
        lower=100.0, upper=6000.0, initial_areas=6000.0,
    )


def gen_case(name: str, **params) -> CaseFile:
    """Build one of the benchmark cases by name.

    ``two-bar`` and ``dome120`` accept ``ubar``; ``ten-bar`` accepts ``ubar``
    and ``p``; ``cantilever`` accepts ``blocks`` and ``p``.
    """
    builders = {"two-bar": two_bar, "ten-bar": ten_bar, "cantilever": cantilever, "dome120": dome120}
    if name not in builders:
        raise ValueError(f"unknown case {name!r}; expected one of {', '.join(CASE_NAMES)}")
    params = {k: v for k, v in params.items() if v is not None}
    try:
        return builders[name](**params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {name!r}: {exc}") from exc
