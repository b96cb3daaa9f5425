"""Component families ``Lambda = disjoint union of Lambda_e`` and their duals.

A family lives over a Euclidean space ``V`` of dimension ``d`` written in a
fixed global coordinate system; the inner product is data.  Archimedean
components are copies of ``iV*`` tagged with a norm ``||e||``.  Lattice-type
components (non-archimedean fields, and compact real tori) are compact tori
``iV*/Gamma_e^dual`` where ``Gamma_e`` is given by an integer basis.

Points of ``iV*`` are stored by their real coordinates ``xi`` (``lambda = i xi``)
so that ``<lambda, x> = i xi . x``.  Dual lattice bases are returned "in units
of 2 pi": the rational matrix ``C`` represents the basis ``2 pi C``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import lattice


class Kind(enum.Enum):
    ARCHIMEDEAN = "archimedean"
    NON_ARCHIMEDEAN = "non-archimedean"
    # Compact real torus duals (e.g. SO(2)(R)^ = Z): lattice-type, no residue field.
    COMPACT = "compact"


@dataclass(frozen=True)
class FieldKind:
    kind: Kind
    residue_cardinality: int | None = None

    @classmethod
    def archimedean(cls) -> "FieldKind":
        return cls(Kind.ARCHIMEDEAN)

    @classmethod
    def non_archimedean(cls, q: int) -> "FieldKind":
        return cls(Kind.NON_ARCHIMEDEAN, int(q))

    @classmethod
    def compact(cls) -> "FieldKind":
        return cls(Kind.COMPACT)

    @property
    def is_archimedean(self) -> bool:
        return self.kind is Kind.ARCHIMEDEAN

    @property
    def lattice_type(self) -> bool:
        return self.kind is not Kind.ARCHIMEDEAN

    def problems(self) -> list[str]:
        if self.kind is Kind.NON_ARCHIMEDEAN:
            if self.residue_cardinality is None or self.residue_cardinality < 2:
                return ["non-archimedean field needs residue cardinality q >= 2"]
        elif self.residue_cardinality is not None:
            return [f"{self.kind.value} field must not carry a residue cardinality"]
        return []


@dataclass(frozen=True)
class ComponentDescriptor:
    id: str
    norm: float | None = None
    lattice: np.ndarray | None = None  # columns generate Gamma_e

    def __post_init__(self):
        if self.lattice is not None:
            arr = np.asarray(self.lattice, dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, "lattice", arr)


@dataclass(frozen=True)
class NormRule:
    """Arithmetic progression of archimedean norms for generated components."""

    start: float
    step: float
    prefix: str = "e"


@dataclass(frozen=True)
class SpaceFamily:
    field: FieldKind
    dim: int
    inner_product: np.ndarray
    components: tuple[ComponentDescriptor, ...]
    label: str = ""
    norm_rule: NormRule | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ip = np.asarray(self.inner_product, dtype=np.float64).reshape(self.dim, self.dim)
        ip.setflags(write=False)
        object.__setattr__(self, "inner_product", ip)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "_index", {c.id: c for c in self.components})

    def __hash__(self):
        return hash((self.label, self.dim, tuple(c.id for c in self.components)))

    def __eq__(self, other):
        return self is other or (
            isinstance(other, SpaceFamily)
            and self.label == other.label
            and self.field == other.field
            and self.dim == other.dim
            and np.array_equal(self.inner_product, other.inner_product)
            and [c.id for c in self.components] == [c.id for c in other.components]
        )

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.components]

    def component(self, e: str) -> ComponentDescriptor:
        try:
            return self._index[e]
        except KeyError:
            raise KeyError(f"unknown component {e!r} in family {self.label!r}") from None

    def norm_of(self, e: str) -> float:
        """Component norm ``||e||``; lattice-type components count as 0."""
        c = self.component(e)
        return float(c.norm) if c.norm is not None else 0.0

    def basis(self, e: str) -> np.ndarray:
        c = self.component(e)
        if c.lattice is None:
            raise ValueError(f"component {e!r} of {self.label!r} has no lattice")
        return c.lattice

    def metric_norm(self, x) -> np.ndarray:
        """``sqrt(x^T G x)`` for rows of ``x`` (vectors in V)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.sqrt(np.einsum("pi,ij,pj->p", x, self.inner_product, x))

    def dual_norm(self, xi) -> np.ndarray:
        """Norm on V* induced by the inner product (``sqrt(xi^T G^{-1} xi)``)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        ginv = np.linalg.inv(self.inner_product) if self.dim else np.zeros((0, 0))
        return np.sqrt(np.einsum("pi,ij,pj->p", xi, ginv, xi))

    def with_generated(self, count: int) -> "SpaceFamily":
        """Append ``count`` archimedean components following ``norm_rule``."""
        if self.norm_rule is None or self.field.lattice_type:
            raise ValueError("family has no archimedean norm rule")
        rule = self.norm_rule
        start = len(self.components)
        extra = tuple(
            ComponentDescriptor(f"{rule.prefix}{start + i}", rule.start + rule.step * (start + i))
            for i in range(count)
        )
        return SpaceFamily(self.field, self.dim, self.inner_product, self.components + extra,
                           self.label, self.norm_rule)


@dataclass
class ValidationReport:
    ok: bool
    issues: list[tuple[str | None, str]] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def add(self, where, message):
        self.issues.append((where, message))
        self.ok = False

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(f"{w}: {m}" if w is not None else m for w, m in self.issues)


def validate_family(fam: SpaceFamily) -> ValidationReport:
    rep = ValidationReport(True)
    for msg in fam.field.problems():
        rep.add(None, msg)
    d = fam.dim
    if d < 0:
        rep.add(None, "negative dimension")
        return rep
    ip = fam.inner_product
    if d:
        if not np.allclose(ip, ip.T, atol=1e-12, rtol=0):
            rep.add(None, "inner product is not symmetric")
        elif np.linalg.eigvalsh(ip).min() <= 1e-10:
            rep.add(None, "inner product is not positive-definite")
    seen = set()
    for c in fam.components:
        if c.id in seen:
            rep.add(c.id, "duplicate component id")
        seen.add(c.id)
        if fam.field.is_archimedean:
            if c.norm is None:
                rep.add(c.id, "archimedean component without a norm")
            elif not (c.norm >= 0 and math.isfinite(c.norm)):
                rep.add(c.id, f"norm {c.norm} is not a non-negative real")
        else:
            if c.lattice is None:
                rep.add(c.id, "lattice-type component without a lattice basis")
            elif c.lattice.shape != (d, d):
                rep.add(c.id, f"lattice basis has shape {c.lattice.shape}, expected {(d, d)}")
            elif d and lattice.rational_det(c.lattice) == 0:
                rep.add(c.id, "degenerate lattice (basis has determinant 0)")
    return rep


def _require_lattice_type(fam: SpaceFamily):
    if not fam.field.lattice_type:
        raise ValueError(f"family {fam.label!r} is archimedean; it has no lattices")


def dual_lattice(fam: SpaceFamily, e: str) -> np.ndarray:
    """Basis of ``Gamma_e^dual = Hom(Gamma_e, 2 pi i Z)`` in units of 2 pi.

    Returns the exact rational matrix ``C = (B^T)^{-1}``; the dual lattice in
    ``xi``-coordinates is spanned by the columns of ``2 pi C``.
    """
    _require_lattice_type(fam)
    B = fam.basis(e)
    if fam.dim == 0:
        return np.zeros((0, 0), dtype=object)
    return lattice.rational_inverse(B.T)


def dual_basis_of(basis_units_2pi) -> np.ndarray:
    """Dual of a lattice in V* given in units of 2 pi, returned as a basis of V."""
    C = lattice.rational_matrix(basis_units_2pi)
    return lattice.rational_inverse(C.T)


def lattice_covolume(fam: SpaceFamily, e: str) -> float:
    """``|det B| * sqrt(det G)``."""
    _require_lattice_type(fam)
    B = fam.basis(e)
    if fam.dim == 0:
        return 1.0
    return float(abs(lattice.rational_det(B))) * math.sqrt(float(np.linalg.det(fam.inner_product)))


def dual_covolume(fam: SpaceFamily, e: str) -> float:
    """Covolume of ``Gamma_e^dual`` under the dual metric ``G^{-1}``."""
    _require_lattice_type(fam)
    if fam.dim == 0:
        return 1.0
    C = dual_lattice(fam, e)
    det = float(abs(lattice.rational_det(C))) * (2 * math.pi) ** fam.dim
    return det / math.sqrt(float(np.linalg.det(fam.inner_product)))


def point_family(label: str, ids, field_kind: FieldKind | None = None, norms=None) -> SpaceFamily:
    """A family of zero-dimensional components (each ``Lambda_e`` is a point)."""
    field_kind = field_kind or FieldKind.archimedean()
    ids = [str(i) for i in ids]
    if norms is None:
        norms = [0.0] * len(ids)
    comps = tuple(
        ComponentDescriptor(i, norm=float(n) if field_kind.is_archimedean else None,
                            lattice=None if field_kind.is_archimedean else np.zeros((0, 0), dtype=np.int64))
        for i, n in zip(ids, norms)
    )
    return SpaceFamily(field_kind, 0, np.zeros((0, 0)), comps, label)
