"""
Dense complex-matrix kernel.

All operators are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Bipartite spaces are always ordered (object, apparatus), so an operator on
``H_S (x) H_A`` has row index ``s * dim_a + a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

DEFAULT_TOL = 1e-10


def cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-d complex array, raising on bad input."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def fro(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def _scaled(tol: float, m: np.ndarray) -> float:
    return tol * max(1.0, fro(m))


def hermitian_defect(h: np.ndarray) -> float:
    return fro(h - dagger(h))


def is_hermitian(h: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    h = cmatrix(h)
    return h.shape[0] == h.shape[1] and hermitian_defect(h) <= _scaled(tol, h)


def _require_square(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def _require_hermitian(h: np.ndarray, tol: float, name: str) -> None:
    _require_square(h, name)
    d = hermitian_defect(h)
    if d > _scaled(tol, h):
        raise ValidationError(f"{name} is not Hermitian (defect {d:.3e})")


def kron(a, b) -> np.ndarray:
    return np.kron(cmatrix(a, "a"), cmatrix(b, "b"))


def partial_trace(m, dim_s: int, dim_a: int, keep: str = "S") -> np.ndarray:
    """Trace out one factor of an operator on ``H_S (x) H_A``.

    ``keep="S"`` returns the reduced object operator (trace over the
    apparatus); ``keep="A"`` the reduced apparatus operator.
    """
    m = cmatrix(m)
    n = dim_s * dim_a
    if m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} operator, got {m.shape}")
    t = m.reshape(dim_s, dim_a, dim_s, dim_a)
    if keep == "S":
        return np.einsum("iaja->ij", t)
    if keep == "A":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"keep must be 'S' or 'A', got {keep!r}")


@dataclass(frozen=True)
class HermEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def herm_eig(h, tol: float = DEFAULT_TOL) -> HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    h = cmatrix(h)
    _require_hermitian(h, tol, "h")
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    return HermEig(w, v)


def psd_sqrt(p, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Positive square root; eigenvalues in ``[-tol, 0)`` are clamped to zero.

    Eigenvalues at round-off level are also zeroed, since their square roots
    (about 1e-8) would otherwise leak into the result.
    """
    p = cmatrix(p)
    eig = herm_eig(p, tol)
    w = eig.eigenvalues
    if w.size and w[0] < -1e-8 * max(1.0, fro(p)):
        raise ValidationError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    floor = 64 * np.finfo(float).eps * max(float(np.abs(w).max()), 1.0) if w.size else 0.0
    w = np.where(w <= floor, 0.0, w)
    v = eig.eigenvectors
    return (v * np.sqrt(w)) @ dagger(v)


def expm_i_herm(h, scale: float) -> np.ndarray:
    """``exp(i * scale * h)`` for Hermitian ``h`` via its eigenbasis."""
    eig = herm_eig(h)
    v = eig.eigenvectors
    return (v * np.exp(1j * scale * eig.eigenvalues)) @ dagger(v)


def support_projection(p, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Smallest projection Q with Q p = p (eigenvalues above ``tol`` count)."""
    p = cmatrix(p)
    eig = herm_eig(p)
    if eig.eigenvalues.size and eig.eigenvalues[0] < -max(tol, 1e-8 * fro(p)):
        raise ValidationError("support_projection needs a positive semidefinite matrix")
    v = eig.eigenvectors[:, eig.eigenvalues > tol]
    return v @ dagger(v)


@dataclass(frozen=True)
class SchmidtForm:
    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def vector(self) -> np.ndarray:
        return np.einsum("k,ik,ak->ia", self.coefficients, self.left, self.right).reshape(-1)


def _fix_phase(v: np.ndarray, tol: float) -> np.ndarray:
    # first entry with non-negligible modulus made real positive
    idx = np.flatnonzero(np.abs(v) > tol)
    if idx.size == 0:
        return v
    z = v[idx[0]]
    return v * (abs(z) / z)


def schmidt(v, dim_s: int, dim_a: int, tol: float = DEFAULT_TOL) -> SchmidtForm:
    """Schmidt (biorthogonal) decomposition of a unit vector in ``H_S (x) H_A``.

    Computed from the eigendecomposition of the reduced object state.
    Coefficients are returned in descending order; degenerate coefficients
    are ordered lexicographically by the (phase-fixed) left vectors.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != dim_s * dim_a:
        raise DimensionError(f"vector of length {v.size} does not fit {dim_s}x{dim_a}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"schmidt needs a unit vector (norm {norm:.12g})")
    psi = v.reshape(dim_s, dim_a)
    w, u = np.linalg.eigh(psi @ dagger(psi))
    # eigenvalues of psi psi^dag carry absolute round-off near eps, so
    # coefficients below about sqrt(eps) cannot be resolved
    floor = max(tol**2, 64 * np.finfo(float).eps * max(float(w.max()), 1.0))
    keep = w > floor
    w, u = w[keep], u[:, keep]
    coeffs = np.sqrt(w)
    cols = [_fix_phase(u[:, k], tol) for k in range(u.shape[1])]

    def key(k):
        c = cols[k]
        return (-round(float(coeffs[k]), 9),) + tuple(
            x for z in c for x in (round(float(z.real), 9), round(float(z.imag), 9))
        )

    order = sorted(range(len(cols)), key=key)
    coeffs = coeffs[order]
    left = np.column_stack([cols[k] for k in order]) if order else np.zeros((dim_s, 0), complex)
    right = (psi.T @ np.conj(left)) / coeffs if order else np.zeros((dim_a, 0), complex)
    return SchmidtForm(coeffs, left, right)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like unitary from the QR decomposition of a complex Gaussian matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return g / np.linalg.norm(g)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Wishart-type random density matrix of the given rank (full rank by default)."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, np.conj(v))


def basis_vector(d: int, k: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[k] = 1.0
    return e


def pure_expect(psi: np.ndarray, x: np.ndarray, y: np.ndarray) -> complex:
    """``<Psi| x (x) y |Psi>`` for a joint vector given as a ``dim_s x dim_a`` matrix."""
    return complex(np.trace(dagger(psi) @ x @ psi @ y.T))
