"""
Measurement schemes, reading scales, conditioned and component states.

A scheme couples an object (dimension ``dim_s``) to an apparatus
(``dim_a``) prepared in ``apparatus_state``; the pointer POVM is read
through ``pointer_map``, which sends pointer-effect indices to outcome
indices. A :class:`ReadingScale` partitions the pointer indices into cells,
each carrying a real value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linop
from .errors import DimensionError, InconsistencyError, ValidationError
from .quantum import Povm, State, hermitian_basis_states

TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """Trace-preserving map on ``H_S (x) H_A`` in Kraus form."""

    kraus: tuple[np.ndarray, ...]
    kind: str = "channel"

    def __post_init__(self):
        ks = tuple(linop.cmatrix(k, "Kraus operator") for k in self.kraus)
        if not ks:
            raise ValidationError("a coupling needs at least one Kraus operator")
        n = ks[0].shape[0]
        if any(k.shape != (n, n) for k in ks):
            raise DimensionError("Kraus operators must be square and of equal size")
        if self.kind not in ("unitary", "channel"):
            raise ValidationError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "unitary" and len(ks) != 1:
            raise ValidationError("a unitary coupling has exactly one Kraus operator")
        defect = linop.fro(sum(linop.dagger(k) @ k for k in ks) - np.eye(n))
        if defect > 1e-9 * max(1, n):
            what = "unitary" if self.kind == "unitary" else "trace preserving"
            raise ValidationError(f"coupling is not {what} (defect {defect:.3e})")
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def unitary(cls, u) -> "Coupling":
        return cls((u,), "unitary")

    @classmethod
    def channel(cls, kraus: Sequence) -> "Coupling":
        return cls(tuple(kraus), "channel")

    @classmethod
    def identity(cls, n: int) -> "Coupling":
        return cls.unitary(np.eye(n, dtype=complex))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def matrix(self) -> np.ndarray:
        if self.kind != "unitary":
            raise ValidationError("coupling is not unitary")
        return self.kraus[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ linop.dagger(k) for k in self.kraus)

    def adjoint(self, x: np.ndarray) -> np.ndarray:
        return sum(linop.dagger(k) @ x @ k for k in self.kraus)


@dataclass(frozen=True)
class MeasurementScheme:
    dim_s: int
    dim_a: int
    pointer: Povm
    apparatus_state: State
    coupling: Coupling
    pointer_map: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.pointer.dim != self.dim_a:
            raise DimensionError(f"pointer acts on dim {self.pointer.dim}, apparatus has dim {self.dim_a}")
        if self.apparatus_state.dim != self.dim_a:
            raise DimensionError("apparatus state dimension does not match dim_a")
        if self.coupling.dim != self.dim_s * self.dim_a:
            raise DimensionError(f"coupling acts on dim {self.coupling.dim}, expected {self.dim_s * self.dim_a}")
        if self.pointer_map is None:
            object.__setattr__(self, "pointer_map", tuple(range(len(self.pointer))))
        pm = tuple(int(k) for k in self.pointer_map)
        if len(pm) != len(self.pointer):
            raise ValidationError("pointer_map must assign an outcome to every pointer effect")
        if min(pm) < 0:
            raise ValidationError("pointer_map outcomes must be non-negative indices")
        object.__setattr__(self, "pointer_map", pm)

    @property
    def dim(self) -> int:
        return self.dim_s * self.dim_a

    @property
    def is_unitary(self) -> bool:
        return self.coupling.kind == "unitary"


@dataclass(frozen=True)
class Cell:
    pointer_indices: frozenset[int]
    value: float


@dataclass(frozen=True)
class ReadingScale:
    """Ordered partition of pointer indices; cell ``i`` is addressed by position."""

    cells: tuple[Cell, ...]

    def __post_init__(self):
        cells = tuple(Cell(frozenset(int(k) for k in c.pointer_indices), float(c.value)) for c in self.cells)
        if not cells:
            raise ValidationError("a reading scale needs at least one cell")
        seen: set[int] = set()
        for c in cells:
            if seen & c.pointer_indices:
                raise ValidationError("reading-scale cells overlap")
            seen |= c.pointer_indices
        values = [c.value for c in cells]
        if len(set(values)) != len(values):
            raise ValidationError(f"cell values must be distinct, got {values}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]], values: Sequence[float]) -> "ReadingScale":
        if len(groups) != len(values):
            raise ValidationError("one value per cell required")
        return cls(tuple(Cell(frozenset(g), v) for g, v in zip(groups, values)))

    @classmethod
    def finest(cls, scheme: MeasurementScheme, values: Sequence[float] | None = None) -> "ReadingScale":
        """One cell per outcome of the pointer map.

        Without explicit values a cell takes the label of its lowest pointer index.
        """
        outcomes = sorted(set(scheme.pointer_map))
        groups = [[k for k, o in enumerate(scheme.pointer_map) if o == out] for out in outcomes]
        if values is None:
            labels = scheme.pointer.labels
            values = [labels[g[0]] for g in groups]
        return cls.from_groups(groups, values)

    @classmethod
    def from_outcomes(
        cls, scheme: MeasurementScheme, outcome_groups: Sequence[Sequence[int]], values: Sequence[float]
    ) -> "ReadingScale":
        """Cells given as sets of outcomes, pulled back through the pointer map."""
        groups = [[k for k, o in enumerate(scheme.pointer_map) if o in set(g)] for g in outcome_groups]
        return cls.from_groups(groups, values)

    @property
    def values(self) -> np.ndarray:
        return np.array([c.value for c in self.cells])

    def __len__(self) -> int:
        return len(self.cells)

    def check(self, scheme: MeasurementScheme) -> None:
        covered = set().union(*(c.pointer_indices for c in self.cells))
        if covered != set(range(len(scheme.pointer))):
            raise ValidationError("reading scale does not partition the pointer indices")

    def merged(self, i: int, j: int) -> "ReadingScale":
        """Scale with cells ``i`` and ``j`` joined (keeps the value of ``i``)."""
        a, b = self.cells[i], self.cells[j]
        rest = [c for k, c in enumerate(self.cells) if k not in (i, j)]
        return ReadingScale((Cell(a.pointer_indices | b.pointer_indices, a.value), *rest))


def pointer_effects(scheme: MeasurementScheme, scale: ReadingScale) -> list[np.ndarray]:
    """Coarse-grained pointer effects ``Z_i`` (sum over the pointer indices of each cell)."""
    scale.check(scheme)
    mats = scheme.pointer.matrices
    zero = np.zeros((scheme.dim_a, scheme.dim_a), dtype=complex)
    return [sum((mats[k] for k in sorted(c.pointer_indices)), zero) for c in scale.cells]


def _state_matrix(t, d: int) -> np.ndarray:
    m = t.matrix if isinstance(t, State) else linop.cmatrix(t)
    if m.shape != (d, d):
        raise DimensionError(f"object state has shape {m.shape}, scheme expects {(d, d)}")
    return m


def evolve(scheme: MeasurementScheme, x) -> np.ndarray:
    """Image of ``x (x) T_A`` under the coupling; ``x`` may be any object operator."""
    x = _state_matrix(x, scheme.dim_s)
    return scheme.coupling.apply(np.kron(x, scheme.apparatus_state.matrix))


def joint_final_state(scheme: MeasurementScheme, t) -> State:
    return State(evolve(scheme, t), tol=1e-9)


def heisenberg_pointer(scheme: MeasurementScheme, z: np.ndarray) -> np.ndarray:
    """Dual-map image ``V*(I (x) z)`` on the compound space."""
    return scheme.coupling.adjoint(np.kron(np.eye(scheme.dim_s), z))


def measured_povm(scheme: MeasurementScheme, scale: ReadingScale | None = None, tol: float = 1e-9) -> Povm:
    """The observable measured by the scheme with respect to a reading scale.

    Entry ``E_i[b, a]`` is ``tr[V(|a><b| (x) T_A) (I (x) Z_i)]``: the pointer
    probability evaluated on the matrix units of the object space. The result
    is then checked against direct pointer statistics on a spanning set of
    vector states.
    """
    if scale is None:
        scale = ReadingScale.finest(scheme)
    zs = pointer_effects(scheme, scale)
    ds, da = scheme.dim_s, scheme.dim_a
    ta = scheme.apparatus_state.matrix
    effects = []
    for z in zs:
        m = heisenberg_pointer(scheme, z).reshape(ds, da, ds, da)
        # sum_{c,d} M[(b,c),(a,d)] T_A[d,c]
        e = np.einsum("bcad,dc->ba", m, ta)
        effects.append((e + linop.dagger(e)) / 2)
    residual = 0.0
    for t in hermitian_basis_states(ds):
        w = evolve(scheme, t)
        ra = linop.partial_trace(w, ds, da, keep="A")
        for e, z in zip(effects, zs):
            residual = max(residual, abs(np.trace(t.matrix @ e) - np.trace(ra @ z)))
    if residual > tol:
        raise InconsistencyError(f"measured POVM reconstruction residual {residual:.3e}")
    return Povm.from_matrices(effects, scale.values, tol=max(1e-10, tol))


@dataclass(frozen=True)
class ComponentStates:
    """Weight and normalized reduced states for one cell.

    Zero-weight cells carry zero matrices (``defined`` is False).
    """

    cell: int
    weight: float
    object: np.ndarray
    apparatus: np.ndarray
    defined: bool


@dataclass
class MeasurementRecord:
    """Everything derived from one run ``(scheme, T, reading scale)``.

    Cached so the per-cell operations do not recompute the joint state.
    """

    scheme: MeasurementScheme
    t: np.ndarray
    scale: ReadingScale
    tol: float = TOL

    @cached_property
    def joint(self) -> np.ndarray:
        return evolve(self.scheme, self.t)

    @cached_property
    def pointer_effects(self) -> list[np.ndarray]:
        return pointer_effects(self.scheme, self.scale)

    @cached_property
    def pointer_roots(self) -> list[np.ndarray]:
        return [linop.psd_sqrt(z) for z in self.pointer_effects]

    @cached_property
    def reduced_object(self) -> np.ndarray:
        return linop.partial_trace(self.joint, self.scheme.dim_s, self.scheme.dim_a, keep="S")

    @cached_property
    def reduced_apparatus(self) -> np.ndarray:
        return linop.partial_trace(self.joint, self.scheme.dim_s, self.scheme.dim_a, keep="A")

    @cached_property
    def conditioned(self) -> list[np.ndarray]:
        eye = np.eye(self.scheme.dim_s)
        out = []
        for r in self.pointer_roots:
            k = np.kron(eye, r)
            out.append(k @ self.joint @ k)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([np.trace(v).real for v in self.conditioned])

    @cached_property
    def components(self) -> list[ComponentStates]:
        ds, da = self.scheme.dim_s, self.scheme.dim_a
        out = []
        for i, (v, p) in enumerate(zip(self.conditioned, self.weights)):
            if p <= self.tol:
                out.append(ComponentStates(i, float(max(p, 0.0)), np.zeros((ds, ds), complex),
                                           np.zeros((da, da), complex), False))
                continue
            obj = linop.partial_trace(v, ds, da, keep="S") / p
            app = linop.partial_trace(v, ds, da, keep="A") / p
            out.append(ComponentStates(i, float(p), obj, app, True))
        return out

    @property
    def n_cells(self) -> int:
        return len(self.scale)


def measure(scheme: MeasurementScheme, t, scale: ReadingScale | None = None, tol: float = TOL) -> MeasurementRecord:
    if scale is None:
        scale = ReadingScale.finest(scheme)
    scale.check(scheme)
    return MeasurementRecord(scheme, _state_matrix(t, scheme.dim_s), scale, tol)


def conditioned_joint(scheme: MeasurementScheme, t, scale: ReadingScale, i: int) -> np.ndarray:
    """Unnormalized conditioned state ``(I (x) Z_i^1/2) V(T (x) T_A) (I (x) Z_i^1/2)``."""
    return measure(scheme, t, scale).conditioned[i]


def component_states(scheme: MeasurementScheme, t, scale: ReadingScale, i: int) -> ComponentStates:
    return measure(scheme, t, scale).components[i]


def apparatus_component_from_reduced(rec: MeasurementRecord, i: int) -> np.ndarray:
    """Apparatus component state from the reduced apparatus state alone,
    ``Z_i^1/2 R_A(V(T (x) T_A)) Z_i^1/2 / p_i``."""
    p = rec.weights[i]
    if p <= rec.tol:
        return np.zeros((rec.scheme.dim_a, rec.scheme.dim_a), complex)
    r = rec.pointer_roots[i]
    return r @ rec.reduced_apparatus @ r / p


@dataclass(frozen=True)
class Residual:
    ok: bool
    residual: float


def _rec(scheme, t, scale, tol) -> MeasurementRecord:
    if isinstance(scheme, MeasurementRecord):
        return scheme
    return measure(scheme, t, scale, tol=min(tol, TOL))


def check_object_additivity(scheme, t=None, scale=None, tol: float = 1e-10) -> Residual:
    """Final object state versus the weighted mixture of object component states."""
    rec = _rec(scheme, t, scale, tol)
    mix = sum(c.weight * c.object for c in rec.components)
    r = linop.fro(rec.reduced_object - mix)
    return Residual(r <= tol, r)


@dataclass(frozen=True)
class ValueDefiniteness:
    ok: bool
    trace_defects: tuple[float, ...]
    eigen_defects: tuple[float, ...]

    @property
    def worst(self) -> float:
        return max(self.trace_defects + self.eigen_defects)


def check_pointer_value_definiteness(scheme, t=None, scale=None, tol: float = 1e-10) -> ValueDefiniteness:
    """Per cell with non-negligible weight: ``tr[T_A(i) Z_i] = 1`` and ``Z_i T_A(i) = T_A(i)``."""
    rec = _rec(scheme, t, scale, tol)
    tr_def, eig_def = [], []
    for c, z in zip(rec.components, rec.pointer_effects):
        if c.weight <= tol:
            tr_def.append(0.0)
            eig_def.append(0.0)
            continue
        tr_def.append(abs(np.trace(c.apparatus @ z).real - 1.0))
        eig_def.append(linop.fro(z @ c.apparatus - c.apparatus))
    ok = max(tr_def + eig_def) <= tol
    return ValueDefiniteness(ok, tuple(tr_def), tuple(eig_def))


def check_pointer_mixture(scheme, t=None, scale=None, tol: float = 1e-10) -> Residual:
    """Final apparatus state versus the weighted mixture of apparatus component states."""
    rec = _rec(scheme, t, scale, tol)
    mix = sum(c.weight * c.apparatus for c in rec.components)
    r = linop.fro(rec.reduced_apparatus - mix)
    return Residual(r <= tol, r)


@dataclass(frozen=True)
class Orthogonality:
    ok: bool
    overlaps: np.ndarray

    @property
    def worst(self) -> float:
        n = self.overlaps.shape[0]
        off = [self.overlaps[i, j] for i in range(n) for j in range(n) if i != j]
        return max(off, default=0.0)


def check_component_orthogonality(scheme, t=None, scale=None, tol: float = 1e-10) -> Orthogonality:
    """Pairwise ``tr[T_S(i) T_S(j)]``; orthogonal iff every off-diagonal entry is below ``tol``."""
    rec = _rec(scheme, t, scale, tol)
    comps = rec.components
    n = len(comps)
    table = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            table[i, j] = np.trace(comps[i].object @ comps[j].object).real
    out = Orthogonality(False, table)
    return Orthogonality(out.worst <= tol, table)
