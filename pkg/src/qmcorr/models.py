"""
Product couplings ``U = exp(i lam A (x) B)`` and the desk-scale fixtures
built on them: CNOT (Lueders), the controlled rotation (unsharp, first kind
but not repeatable) and the cyclic shift model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linop
from .errors import DimensionError, InconsistencyError, ValidationError
from .quantum import Povm, State, spectral_projections
from .scheme import (
    Coupling,
    MeasurementScheme,
    ReadingScale,
    measure,
    measured_povm,
    pointer_effects,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class ProductCouplingSpec:
    """Generators of ``exp(i lam A (x) B)``: ``A`` on the object, ``B`` on the apparatus."""

    A: np.ndarray
    B: np.ndarray
    lam: float

    def __post_init__(self):
        for name in ("A", "B"):
            m = linop.cmatrix(getattr(self, name), name)
            if not linop.is_hermitian(m):
                raise ValidationError(f"{name} must be Hermitian")
            object.__setattr__(self, name, m)
        object.__setattr__(self, "lam", float(self.lam))

    def unitary(self) -> np.ndarray:
        """Exponential assembled in the product eigenbasis of ``A`` and ``B``."""
        ea, eb = linop.herm_eig(self.A), linop.herm_eig(self.B)
        v = np.kron(ea.eigenvectors, eb.eigenvectors)
        phases = np.exp(1j * self.lam * np.kron(ea.eigenvalues, eb.eigenvalues))
        return (v * phases) @ linop.dagger(v)

    def unitary_direct(self) -> np.ndarray:
        """Exponential of the full ``A (x) B`` generator (independent route)."""
        from scipy.linalg import expm

        return expm(1j * self.lam * np.kron(self.A, self.B))

    def spectral(self) -> list[tuple[float, np.ndarray]]:
        return spectral_projections(self.A)


@dataclass(frozen=True)
class ProductScheme(MeasurementScheme):
    spec: ProductCouplingSpec | None = None


def build_product_scheme(spec: ProductCouplingSpec, pointer: Povm, t_A: State,
                         pointer_map: Sequence[int] | None = None) -> ProductScheme:
    ds, da = spec.A.shape[0], spec.B.shape[0]
    if pointer.dim != da or t_A.dim != da:
        raise DimensionError("pointer and apparatus state must live on the space of B")
    return ProductScheme(ds, da, pointer, t_A, Coupling.unitary(spec.unitary()),
                         None if pointer_map is None else tuple(pointer_map), spec)


def shifted_apparatus_state(spec: ProductCouplingSpec, a: float, t_A: State) -> State:
    """``exp(i lam a B) T_A exp(-i lam a B)``."""
    u = linop.expm_i_herm(spec.B, spec.lam * a)
    return State(u @ t_A.matrix @ linop.dagger(u), tol=1e-9)


def final_apparatus_closed_form(spec: ProductCouplingSpec, t, t_A: State) -> np.ndarray:
    """Final apparatus state as the mixture of shifted apparatus states weighted by ``tr[T P_k]``."""
    tm = t.matrix if isinstance(t, State) else np.asarray(t, complex)
    return sum(np.trace(tm @ p).real * shifted_apparatus_state(spec, a, t_A).matrix for a, p in spec.spectral())


def measured_povm_closed_form(spec: ProductCouplingSpec, pointer: Povm, t_A: State,
                              scale: ReadingScale, check: bool = True, tol: float = 1e-8) -> Povm:
    """``E_i = sum_k tr[T_A^(lam a_k) Z_i] P_k`` over the spectral resolution of ``A``.

    With ``check`` the result is compared against the generic reconstruction
    from the full scheme.
    """
    scheme = build_product_scheme(spec, pointer, t_A)
    zs = pointer_effects(scheme, scale)
    spectral = spec.spectral()
    shifted = [shifted_apparatus_state(spec, a, t_A).matrix for a, _ in spectral]
    effects = []
    for z in zs:
        effects.append(sum(np.trace(s @ z).real * p for s, (_, p) in zip(shifted, spectral)))
    povm = Povm.from_matrices(effects, scale.values, tol=1e-9)
    if check:
        generic = measured_povm(scheme, scale)
        gap = max(linop.fro(a - b) for a, b in zip(povm.matrices, generic.matrices))
        if gap > tol:
            raise InconsistencyError(f"closed-form and generic measured POVMs differ by {gap:.3e}")
    return povm


def kraus_component_state(scheme: ProductScheme, t, scale: ReadingScale, i: int) -> np.ndarray:
    """Object component state from the operator-sum form.

    ``L_kn = sum_a <psi_k| Z_i^1/2 exp(i lam a B) phi_n> P_a`` with
    ``T_A = sum_n t_n |phi_n><phi_n|``; the result is compared with the
    partial-trace route.
    """
    spec = getattr(scheme, "spec", None)
    if spec is None:
        raise ValidationError("kraus_component_state needs a product-coupling scheme")
    tm = t.matrix if isinstance(t, State) else np.asarray(t, complex)
    root = linop.psd_sqrt(pointer_effects(scheme, scale)[i])
    tn, phis = np.linalg.eigh(scheme.apparatus_state.matrix)
    spectral = spec.spectral()
    shifts = [linop.expm_i_herm(spec.B, spec.lam * a) for a, _ in spectral]
    acc = np.zeros_like(tm)
    for n in range(len(tn)):
        if tn[n] <= 1e-14:
            continue
        for k in range(scheme.dim_a):
            lk = sum((root @ u @ phis[:, n])[k] * p for u, (_, p) in zip(shifts, spectral))
            acc = acc + tn[n] * lk @ tm @ linop.dagger(lk)
    p_i = np.trace(acc).real
    if p_i <= 1e-12:
        return np.zeros_like(tm)
    out = acc / p_i
    direct = measure(scheme, tm, scale).components[i].object
    gap = linop.fro(out - direct)
    if gap > 1e-8:
        raise InconsistencyError(f"operator-sum and partial-trace component states differ by {gap:.3e}")
    return out


def kraus_operators(scheme: ProductScheme, scale: ReadingScale, i: int) -> list[np.ndarray]:
    """The operators ``L_kn`` of cell ``i`` (weights ``sqrt(t_n)`` included)."""
    spec = getattr(scheme, "spec", None)
    if spec is None:
        raise ValidationError("kraus_operators needs a product-coupling scheme")
    root = linop.psd_sqrt(pointer_effects(scheme, scale)[i])
    tn, phis = np.linalg.eigh(scheme.apparatus_state.matrix)
    spectral = spec.spectral()
    shifts = [linop.expm_i_herm(spec.B, spec.lam * a) for a, _ in spectral]
    out = []
    for n in range(len(tn)):
        if tn[n] <= 1e-14:
            continue
        for k in range(scheme.dim_a):
            out.append(np.sqrt(tn[n]) * sum((root @ u @ phis[:, n])[k] * p for u, (_, p) in zip(shifts, spectral)))
    return out


# -- fixtures ----------------------------------------------------------------


def qubit_pointer() -> Povm:
    return Povm.from_matrices([P0, P1], [0.0, 1.0])


def build_cnot() -> ProductScheme:
    """CNOT coupling as ``exp(i pi P1 (x) (I - X)/2)``, pointer in the computational basis."""
    spec = ProductCouplingSpec(P1, (np.eye(2) - SIGMA_X) / 2, np.pi)
    return build_product_scheme(spec, qubit_pointer(), State.basis(2, 0))


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(phi: float) -> np.ndarray:
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def build_controlled_rotation(theta: float) -> ProductScheme:
    """``U = P0 (x) I + P1 (x) R_y(theta)``; measures ``{I - s^2 P1, s^2 P1}`` with ``s = sin(theta/2)``.

    Realized as ``exp(i P1 (x) B)`` with ``B = -theta/2 * sigma_y``.
    """
    if not 0 < theta <= np.pi:
        raise ValidationError(f"theta must lie in (0, pi], got {theta}")
    spec = ProductCouplingSpec(P1, -theta / 2 * SIGMA_Y, 1.0)
    return build_product_scheme(spec, qubit_pointer(), State.basis(2, 0))


def build_kicked_cnot(phi: float = np.pi / 2) -> MeasurementScheme:
    """CNOT followed by an ``R_x(phi)`` kick on the object: sharp but not of the first kind."""
    u = np.kron(rx(phi), np.eye(2)) @ build_cnot().coupling.matrix
    return MeasurementScheme(2, 2, qubit_pointer(), State.basis(2, 0), Coupling.unitary(u))


def build_unsharp_cnot(z1: Sequence[float] = (0.1, 0.8)) -> MeasurementScheme:
    """CNOT read out through the unsharp pointer ``Z_1 = z1[0] P0 + z1[1] P1``."""
    z = np.diag(z1).astype(complex)
    pointer = Povm.from_matrices([np.eye(2) - z, z], [0.0, 1.0])
    cnot = build_cnot()
    return MeasurementScheme(2, 2, pointer, cnot.apparatus_state, cnot.coupling)


def cyclic_shift(n: int) -> np.ndarray:
    return np.roll(np.eye(n, dtype=complex), 1, axis=0)


def discrete_momentum(n: int) -> np.ndarray:
    """Hermitian ``B`` with ``exp(i B)`` equal to the cyclic shift ``|m> -> |m+1 mod n>``."""
    f = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    # S f_k = exp(-2 pi i k / n) f_k for the Fourier vectors f_k = f[:, k]
    ks = np.arange(n)
    angles = -2 * np.pi * ks / n
    return (f * angles) @ linop.dagger(f)


def build_shift_model(n: int, eigenvalues: Sequence[int]) -> ProductScheme:
    """Finite translation model: ``A = diag(eigenvalues)`` coupled to the discrete momentum.

    The pointer is the position basis of a cyclic register of length ``n``
    read through ``g``: position ``a_k mod n`` reports outcome ``k``; any
    remaining positions form one extra off-scale outcome.
    """
    eig = [int(a) for a in eigenvalues]
    if any(float(a) != float(b) for a, b in zip(eig, eigenvalues)):
        raise ValidationError("shift-model eigenvalues must be integers")
    if len(set(eig)) != len(eig):
        raise ValidationError("shift-model eigenvalues must be distinct")
    if n < len(eig):
        raise ValidationError(f"register length {n} is smaller than the number of eigenvalues")
    residues = [a % n for a in eig]
    if len(set(residues)) != len(residues):
        raise ValidationError(f"eigenvalues {eig} alias modulo {n}")
    spec = ProductCouplingSpec(np.diag(eig).astype(complex), discrete_momentum(n), 1.0)
    pointer_map = []
    off_scale = len(eig)
    for m in range(n):
        pointer_map.append(residues.index(m) if m in residues else off_scale)
    pointer = Povm.from_matrices([linop.projector(linop.basis_vector(n, m)) for m in range(n)],
                                 [float(m) for m in range(n)])
    scheme = build_product_scheme(spec, pointer, State.basis(n, 0), pointer_map)
    direct = sum(np.kron(np.diag(linop.basis_vector(len(eig), k)), np.linalg.matrix_power(cyclic_shift(n), a % n))
                 for k, a in enumerate(eig))
    if linop.fro(direct - scheme.coupling.matrix) > 1e-9:
        raise InconsistencyError("shift-model exponential does not reproduce the cyclic shifts")
    return scheme


def shift_scale(scheme: ProductScheme) -> ReadingScale:
    """Reading scale of the shift model: one cell per eigenvalue, valued by the eigenvalue."""
    eig = [float(a) for a in np.real(np.diag(scheme.spec.A))]
    n_out = max(scheme.pointer_map) + 1
    values = eig + ([min(eig) - 1.0] if n_out > len(eig) else [])
    return ReadingScale.from_outcomes(scheme, [[k] for k in range(n_out)], values)
