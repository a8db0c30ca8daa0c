"""
States, effects and finite POVMs together with the Born probability rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linop
from .errors import DimensionError, ValidationError

TOL = 1e-10


@dataclass(frozen=True)
class State:
    """Density operator: Hermitian, positive, unit trace."""

    matrix: np.ndarray
    tol: float = field(default=TOL, repr=False, compare=False)

    def __post_init__(self):
        m = linop.cmatrix(self.matrix, "state")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"state must be square, got {m.shape}")
        scale = max(1.0, linop.fro(m))
        if linop.hermitian_defect(m) > self.tol * scale:
            raise ValidationError("state is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > self.tol * max(1, m.shape[0]):
            raise ValidationError(f"state trace is {tr:.12g}, expected 1")
        w = np.linalg.eigvalsh((m + linop.dagger(m)) / 2)
        if w[0] < -self.tol * scale:
            raise ValidationError(f"state has negative eigenvalue {w[0]:.3e}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vector) -> "State":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-10:
            raise ValidationError(f"vector state needs a unit vector (norm {n:.12g})")
        return cls(linop.projector(v))

    @classmethod
    def basis(cls, d: int, k: int) -> "State":
        return cls(linop.projector(linop.basis_vector(d, k)))

    @classmethod
    def maximally_mixed(cls, d: int) -> "State":
        return cls(np.eye(d, dtype=complex) / d)

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > tol))

    def is_pure(self, tol: float = 1e-9) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - 1.0) <= tol

    def vector(self, tol: float = 1e-9) -> np.ndarray:
        """Unit vector of a vector state (phase fixed by the largest entry)."""
        if not self.is_pure(tol):
            raise ValidationError("state is not a vector state")
        w, v = np.linalg.eigh(self.matrix)
        psi = v[:, -1]
        k = int(np.argmax(np.abs(psi)))
        return psi * (abs(psi[k]) / psi[k])


@dataclass(frozen=True)
class Effect:
    """Positive operator below the identity, tagged with a real outcome value."""

    matrix: np.ndarray
    label: float = 0.0

    def __post_init__(self):
        m = linop.cmatrix(self.matrix, "effect")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"effect must be square, got {m.shape}")
        if linop.hermitian_defect(m) > TOL * max(1.0, linop.fro(m)):
            raise ValidationError("effect is not Hermitian")
        w = np.linalg.eigvalsh((m + linop.dagger(m)) / 2)
        if w.size and (w[0] < -TOL or w[-1] > 1 + TOL):
            raise ValidationError(f"effect spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [0, 1]")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "label", float(self.label))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Povm:
    """Finite discrete observable: effects summing to the identity."""

    effects: tuple[Effect, ...]
    tol: float = field(default=TOL, repr=False, compare=False)

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ValidationError("a POVM needs at least one effect")
        d = effects[0].dim
        if any(e.dim != d for e in effects):
            raise DimensionError("POVM effects have different dimensions")
        total = sum(e.matrix for e in effects)
        defect = linop.fro(total - np.eye(d))
        if defect > self.tol * max(1, d):
            raise ValidationError(f"POVM effects do not sum to the identity (defect {defect:.3e})")
        labels = [e.label for e in effects]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"POVM labels must be distinct, got {labels}")
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_matrices(cls, matrices: Sequence, labels: Sequence[float] | None = None, tol: float = TOL):
        if labels is None:
            labels = range(len(matrices))
        if len(labels) != len(matrices):
            raise ValidationError("number of labels does not match number of effects")
        return cls(tuple(Effect(m, l) for m, l in zip(matrices, labels)), tol=tol)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def matrices(self) -> list[np.ndarray]:
        return [e.matrix for e in self.effects]

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.effects])

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, i: int) -> Effect:
        return self.effects[i]


def _matrix_of(t) -> np.ndarray:
    return t.matrix if isinstance(t, (State, Effect)) else np.asarray(t, dtype=complex)


def prob(t, e) -> float:
    """Probability ``tr[T E]`` of an effect in a state, clamped to [0, 1]."""
    tm, em = _matrix_of(t), _matrix_of(e)
    if tm.shape != em.shape:
        raise DimensionError(f"state {tm.shape} and effect {em.shape} dimensions differ")
    p = np.trace(tm @ em)
    if abs(p.imag) > 1e-10:
        raise ValidationError(f"tr[T E] has imaginary part {p.imag:.3e}")
    return float(min(1.0, max(0.0, p.real)))


def outcome_distribution(t, e: Povm) -> np.ndarray:
    tm = _matrix_of(t)
    if tm.shape[0] != e.dim:
        raise DimensionError(f"state of dim {tm.shape[0]} and POVM of dim {e.dim}")
    return np.array([prob(tm, m) for m in e.matrices])


@dataclass(frozen=True)
class SharpnessReport:
    sharp: bool
    idempotency: tuple[float, ...]
    max_overlap: float

    def __bool__(self) -> bool:
        return self.sharp


def is_sharp(e: Povm, tol: float = 1e-10) -> SharpnessReport:
    """Check that every effect is a projection and distinct effects are orthogonal."""
    mats = e.matrices
    idem = tuple(linop.fro(m @ m - m) for m in mats)
    overlap = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            overlap = max(overlap, linop.fro(mats[i] @ mats[j]))
    sharp = max(idem) <= tol and overlap <= tol
    return SharpnessReport(sharp, idem, overlap)


def spectral_projections(h, tol: float = 1e-9) -> list[tuple[float, np.ndarray]]:
    """Group the eigenvectors of ``h`` into ``(eigenvalue, projection)`` pairs."""
    eig = linop.herm_eig(h)
    w, v = eig.eigenvalues, eig.eigenvectors
    out: list[tuple[float, np.ndarray]] = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol:
            block = v[:, start:k]
            out.append((float(np.mean(w[start:k])), block @ linop.dagger(block)))
            start = k
    return out


def spectral_povm(h, cells: Sequence[tuple[float, float]], labels: Sequence[float] | None = None) -> Povm:
    """Sharp POVM of ``h`` binned into the half-open intervals ``[lo, hi)``.

    The interval with the largest upper bound is closed on the right.
    Default labels are the interval midpoints.
    """
    eig = linop.herm_eig(h)
    cells = [(float(lo), float(hi)) for lo, hi in cells]
    for lo, hi in cells:
        if not hi > lo:
            raise ValidationError(f"empty interval [{lo}, {hi})")
    order = sorted(range(len(cells)), key=lambda k: cells[k][0])
    for a, b in zip(order, order[1:]):
        if cells[b][0] < cells[a][1]:
            raise ValidationError(f"intervals {cells[a]} and {cells[b]} overlap")
    top = max(hi for _, hi in cells)
    v = eig.eigenvectors
    members: list[list[int]] = [[] for _ in cells]
    for k, lam in enumerate(eig.eigenvalues):
        hit = [c for c, (lo, hi) in enumerate(cells) if lo <= lam < hi or (hi == top and lam == hi)]
        if not hit:
            raise ValidationError(f"eigenvalue {lam:.12g} is not covered by any interval")
        members[hit[0]].append(k)
    mats = [v[:, idx] @ linop.dagger(v[:, idx]) for idx in members]
    if labels is None:
        labels = [(lo + hi) / 2 for lo, hi in cells]
    return Povm.from_matrices(mats, labels)


def hermitian_basis_states(d: int) -> list[State]:
    """``d**2`` vector states whose projections span the operator space."""
    out = [State.basis(d, k) for k in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            for phase in (1.0, 1j):
                v = linop.basis_vector(d, j) + phase * linop.basis_vector(d, k)
                out.append(State.pure(v / np.sqrt(2)))
    return out


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> State:
    return State(linop.random_density(d, rng, rank))


def default_test_states(d: int, seed: int = 0, n_random: int = 20) -> list[State]:
    """Spanning basis states followed by seeded random mixed states."""
    rng = np.random.default_rng(seed)
    return hermitian_basis_states(d) + [random_state(d, rng) for _ in range(n_random)]
