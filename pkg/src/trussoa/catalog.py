"""Materials, thin-walled profiles and catalog entries.

A catalog entry pairs one material with one reference profile.  The profile
is scaled homothetically with the cross-section area, so every length of the
section grows like ``sqrt(a / a0)`` and the bending inertia like
``(a / a0) ** 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainError

__all__ = [
    "CatalogEntry",
    "CatalogSet",
    "MATERIALS",
    "Material",
    "PROFILE_DIMENSIONS",
    "ProfileShape",
    "default_catalogs",
    "default_profiles",
    "profile_area",
    "profile_inertia",
    "reference_inertia",
]


@dataclass(frozen=True)
class Material:
    """Isotropic material.  Units: kg/mm^3 and MPa."""

    name: str
    density: float
    young_modulus: float
    poisson: float
    sigma_t: float
    sigma_c: float

    def __post_init__(self):
        for attr in ("density", "young_modulus", "poisson", "sigma_t", "sigma_c"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"material {self.name!r}: {attr} must be strictly positive")
        if not self.poisson < 0.5:
            raise ValueError(f"material {self.name!r}: poisson must lie in (0, 0.5)")


@dataclass(frozen=True)
class ProfileShape:
    """Reference thin-walled section ``(thickness, height, width)`` in mm."""

    name: str
    kind: str
    thickness: float
    height: float
    width: float

    def __post_init__(self):
        if self.kind not in ("I", "C", "T"):
            raise ValueError(f"profile {self.name!r}: unknown kind {self.kind!r}")
        if min(self.thickness, self.height, self.width) <= 0:
            raise ValueError(f"profile {self.name!r}: dimensions must be strictly positive")
        if not self.thickness < min(self.height, self.width):
            raise ValueError(f"profile {self.name!r}: thickness must be below height and width")

    @property
    def x0(self):
        return (self.thickness, self.height, self.width)


def profile_area(shape: ProfileShape) -> float:
    """Thin-walled area: ``2wt + ht`` for I and C, ``wt + ht`` for T."""
    t, h, w = shape.x0
    n_flanges = 1 if shape.kind == "T" else 2
    return n_flanges * w * t + h * t


def reference_inertia(shape: ProfileShape, axis: str = "strong") -> float:
    """Thin-walled second moment of area of the reference section.

    Wall self-inertia terms of order ``t^3`` are neglected.  Flanges sit at the
    ends of the web (I, C) or at its top (T).

    Parameters
    ----------
    axis : {'strong', 'weak'}
        ``strong`` bends about the axis normal to the web.
    """
    t, h, w = shape.x0
    if axis == "strong":
        if shape.kind in ("I", "C"):
            return t * h**3 / 12.0 + 2.0 * w * t * (h / 2.0) ** 2
        a_web, a_fl = h * t, w * t
        yc = (a_web * h / 2.0 + a_fl * h) / (a_web + a_fl)
        return t * h**3 / 12.0 + a_web * (h / 2.0 - yc) ** 2 + a_fl * (h - yc) ** 2
    if axis == "weak":
        if shape.kind == "I":
            return 2.0 * t * w**3 / 12.0
        if shape.kind == "T":
            return t * w**3 / 12.0
        # C: web at x = 0, flanges spanning [0, w]
        a_web, a_fl = h * t, 2.0 * w * t
        xc = a_fl * w / 2.0 / (a_web + a_fl)
        return 2.0 * (t * w**3 / 12.0 + w * t * (w / 2.0 - xc) ** 2) + a_web * xc**2
    raise ValueError(f"unknown inertia axis {axis!r}")


@dataclass(frozen=True)
class CatalogEntry:
    """One categorical option: a material and a reference profile.

    ``kratio`` overrides the default local-buckling thickness ratio
    ``t / w`` when given.
    """

    material: Material
    profile: ProfileShape
    kratio_override: float | None = None
    inertia_axis: str = "strong"

    @property
    def name(self) -> str:
        return f"{self.material.name}-{self.profile.name}"

    @property
    def a0(self) -> float:
        return profile_area(self.profile)

    @property
    def I0(self) -> float:
        return reference_inertia(self.profile, self.inertia_axis)

    @property
    def kratio(self) -> float:
        if self.kratio_override is not None:
            return float(self.kratio_override)
        return self.profile.thickness / self.profile.width


def profile_inertia(area: float, entry: CatalogEntry) -> float:
    """Bending inertia of ``entry`` scaled to cross-section ``area``."""
    if not area > 0:
        raise DomainError("area must be strictly positive")
    return entry.I0 * (area / entry.a0) ** 2


@dataclass(frozen=True, eq=False)
class CatalogSet:
    """The p catalog entries available to every bar, as flat arrays."""

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("a catalog set needs at least one entry")
        object.__setattr__(self, "entries", entries)
        for e in entries:
            if not 0.0 < e.kratio < 1.0:
                raise ValueError(f"catalog {e.name}: kratio must lie in (0, 1)")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, c):
        return self.entries[c]

    def __eq__(self, other):
        return isinstance(other, CatalogSet) and self.entries == other.entries

    __hash__ = None

    @property
    def p(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def _arr(self, values):
        arr = np.array(values, dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def density(self):
        return self._arr([e.material.density for e in self.entries])

    @cached_property
    def young_modulus(self):
        return self._arr([e.material.young_modulus for e in self.entries])

    @cached_property
    def poisson(self):
        return self._arr([e.material.poisson for e in self.entries])

    @cached_property
    def sigma_t(self):
        return self._arr([e.material.sigma_t for e in self.entries])

    @cached_property
    def sigma_c(self):
        return self._arr([e.material.sigma_c for e in self.entries])

    @cached_property
    def a0(self):
        return self._arr([e.a0 for e in self.entries])

    @cached_property
    def I0(self):
        return self._arr([e.I0 for e in self.entries])

    @cached_property
    def kratio(self):
        return self._arr([e.kratio for e in self.entries])

    @cached_property
    def euler_coefficient(self):
        """``pi^2 E I0 / a0^2``: Euler stress is this times ``a / l^2``."""
        return self._arr(np.pi**2 * self.young_modulus * self.I0 / self.a0**2)

    @cached_property
    def local_buckling_stress(self):
        """``4 pi^2 E k^2 / (12 (1 - nu^2))``, independent of the area."""
        return self._arr(4.0 * np.pi**2 * self.young_modulus * self.kratio**2
                         / (12.0 * (1.0 - self.poisson**2)))


MATERIALS = {
    "AL2139": Material("AL2139", 2.8e-6, 7.1e4, 0.3, 1.5e2, 2.0e2),
    "AL2024": Material("AL2024", 2.77e-6, 7.4e4, 0.33, 1.6e2, 2.1e2),
    "TA6V": Material("TA6V", 4.43e-6, 11.0e4, 0.33, 11.0e2, 8.6e2),
}

# (thickness, height, width) of sizes 1..10, shared by the I, C and T families
PROFILE_DIMENSIONS = [
    (5, 50, 40),
    (10, 110, 40),
    (10, 90, 40),
    (10, 100, 40),
    (5, 100, 40),
    (10, 60, 40),
    (15, 100, 40),
    (10, 70, 35),
    (10, 80, 40),
    (10, 90, 45),
]


def default_profiles() -> dict[str, ProfileShape]:
    """The thirty reference profiles I1..I10, C1..C10, T1..T10."""
    out = {}
    for kind in ("I", "C", "T"):
        for k, (t, h, w) in enumerate(PROFILE_DIMENSIONS, start=1):
            out[f"{kind}{k}"] = ProfileShape(f"{kind}{k}", kind, float(t), float(h), float(w))
    return out


def default_catalogs(inertia_axis: str = "strong") -> CatalogSet:
    """The 90 catalog entries, numbered by material block then profile kind.

    Entries 0-29 are AL2139, 30-59 TA6V and 60-89 AL2024; within each block
    come I1..I10, C1..C10, T1..T10.
    """
    profiles = default_profiles()
    entries = []
    for mat in ("AL2139", "TA6V", "AL2024"):
        for kind in ("I", "C", "T"):
            for k in range(1, 11):
                entries.append(CatalogEntry(MATERIALS[mat], profiles[f"{kind}{k}"],
                                            inertia_axis=inertia_axis))
    return CatalogSet(tuple(entries))
