"""
Truncated single-mode quadrature model: signal quadrature ``a^q`` coupled to
the probe quadrature ``b^q`` through ``exp(i lam a^q (x) b^q)``, read out on
the probe phase quadrature ``b^p``.

Both modes are truncated to their lowest ``N`` Fock levels. Because the
coupling is diagonal in the eigenbasis of the truncated ``a^q``, everything
here is computed from the response table ``z[j, k]`` (probability of the
``j``-th ``b^p`` eigenvalue given the ``k``-th ``a^q`` eigenvalue) without
forming ``N**2``-dimensional operators. :attr:`QuadratureModel.scheme` gives
the dense scheme for small ``N`` as an independent cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Sequence

import numpy as np

from . import linop
from .correlate import BivariateDist, CorrStats, _stats, corr_stats
from .errors import DimensionError, InconsistencyError, TruncationError, ValidationError
from .models import ProductCouplingSpec, ProductScheme, build_product_scheme
from .quantum import Povm, State
from .scheme import ReadingScale

TRUNCATION_GUARD = 1e-6
DENSE_LIMIT = 32


def annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def quadratures(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated ``q = (a* + a)/sqrt2`` and ``p = i(a* - a)/sqrt2``."""
    a = annihilation(n)
    ad = linop.dagger(a)
    return (ad + a) / np.sqrt(2), 1j * (ad - a) / np.sqrt(2)


def commutator_defect(n: int) -> tuple[float, float]:
    """Size of ``[q, p] - i`` off and on the top Fock level."""
    q, p = quadratures(n)
    d = q @ p - p @ q - 1j * np.eye(n)
    top = abs(d[-1, -1])
    d[-1, -1] = 0
    return linop.fro(d), top


def vacuum(n: int) -> np.ndarray:
    return linop.basis_vector(n, 0)


def coherent(n: int, alpha: complex) -> np.ndarray:
    """Coherent state truncated to ``n`` levels and renormalized."""
    v = np.zeros(n, dtype=complex)
    v[0] = 1.0
    for k in range(1, n):
        v[k] = v[k - 1] * alpha / math.sqrt(k)
    return v / np.linalg.norm(v)


def squeezed_vacuum(n: int, r: float) -> np.ndarray:
    """Squeezed vacuum with ``Var(p) = exp(-2r)/2`` and ``Var(q) = exp(2r)/2``."""
    v = np.zeros(n, dtype=complex)
    t = math.tanh(r)
    for m in range(0, (n + 1) // 2):
        logc = 0.5 * math.lgamma(2 * m + 1) - m * math.log(2) - math.lgamma(m + 1)
        v[2 * m] = (t**m) * math.exp(logc)
    return v / np.linalg.norm(v)


def _as_vector_or_matrix(signal, n: int):
    if isinstance(signal, State):
        m = signal.matrix
    else:
        s = np.asarray(signal, dtype=complex)
        m = linop.projector(s / np.linalg.norm(s)) if s.ndim == 1 else s
    if m.shape != (n, n):
        raise DimensionError(f"signal has shape {m.shape}, model truncation is {n}")
    return m


def _moments(values: np.ndarray, probs: np.ndarray) -> tuple[float, float]:
    mean = float(values @ probs)
    return mean, float(((values - mean) ** 2) @ probs)


@dataclass
class QuadratureModel:
    N: int
    lam: float
    probe: np.ndarray
    bins: int | None = None
    aq: np.ndarray = field(init=False, repr=False)
    bq: np.ndarray = field(init=False, repr=False)
    bp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.aq, _ = quadratures(self.N)
        self.bq, self.bp = quadratures(self.N)

    @cached_property
    def _aq_eig(self):
        return np.linalg.eigh(self.aq)

    @cached_property
    def _bp_eig(self):
        return np.linalg.eigh(self.bp)

    @property
    def signal_values(self) -> np.ndarray:
        """Eigenvalues of the truncated ``a^q`` (ascending)."""
        return self._aq_eig[0]

    @property
    def pointer_values(self) -> np.ndarray:
        """Eigenvalues of the truncated ``b^p`` (ascending)."""
        return self._bp_eig[0]

    @cached_property
    def shifted_probes(self) -> np.ndarray:
        """Column ``k`` is ``exp(i lam x_k b^q) phi`` in the Fock basis."""
        w, v = np.linalg.eigh(self.bq)
        coeff = linop.dagger(v) @ self.probe
        phases = np.exp(1j * self.lam * np.outer(w, self.signal_values))
        return v @ (phases * coeff[:, None])

    @cached_property
    def response(self) -> np.ndarray:
        """``z[j, k] = |<p_j| exp(i lam x_k b^q) phi>|^2``."""
        return np.abs(linop.dagger(self._bp_eig[1]) @ self.shifted_probes) ** 2

    def signal_weights(self, signal) -> np.ndarray:
        """``p_k = <v_k| T |v_k>`` for the ``a^q`` eigenvectors ``v_k``."""
        t = _as_vector_or_matrix(signal, self.N)
        v = self._aq_eig[1]
        return np.real(np.einsum("ik,ij,jk->k", np.conj(v), t, v))

    def pointer_distribution(self, signal) -> np.ndarray:
        return self.response @ self.signal_weights(signal)

    def pointer_povm(self) -> Povm:
        """Sharp ``b^p`` readout, one effect per eigenvalue."""
        v = self._bp_eig[1]
        return Povm.from_matrices([linop.projector(v[:, j]) for j in range(self.N)], self.pointer_values)

    def reading_scale(self, signal=None, bins: int | None = None) -> ReadingScale:
        """Equal-probability cells of the final pointer distribution.

        Values are the probability median of each cell in pointer units,
        divided by ``lam``. Without ``bins`` every eigenvalue is its own cell.
        Without a signal the probe distribution itself is binned.
        """
        bins = self.bins if bins is None else bins
        pv = self.pointer_values
        if bins is None or bins >= self.N:
            return ReadingScale.from_groups([[j] for j in range(self.N)], pv / self.lam)
        if bins < 2:
            raise ValidationError("a binned reading scale needs at least two cells")
        if signal is None:
            dist = np.abs(linop.dagger(self._bp_eig[1]) @ self.probe) ** 2
        else:
            dist = self.pointer_distribution(signal)
        dist = dist / dist.sum()
        mid = np.cumsum(dist) - dist / 2
        cell_of = np.minimum(bins - 1, (mid * bins).astype(int))
        groups, values = [], []
        for c in range(bins):
            idx = np.flatnonzero(cell_of == c)
            if idx.size == 0:
                continue
            mass = dist[idx]
            if mass.sum() > 0:
                med = idx[np.searchsorted(np.cumsum(mass), mass.sum() / 2)]
            else:
                med = idx[idx.size // 2]
            groups.append(idx.tolist())
            values.append(pv[med] / self.lam)
        return ReadingScale.from_groups(groups, values)

    def cell_response(self, scale: ReadingScale) -> np.ndarray:
        """``e[i, k] = tr[T_A^(lam x_k) Z_i]``: the measured effects on the ``a^q`` grid."""
        out = np.zeros((len(scale), self.N))
        for i, c in enumerate(scale.cells):
            out[i] = self.response[sorted(c.pointer_indices)].sum(axis=0)
        return out

    def effects(self, scale: ReadingScale) -> list[np.ndarray]:
        v = self._aq_eig[1]
        return [(v * e) @ linop.dagger(v) for e in self.cell_response(scale)]

    def pointer_effects(self, scale: ReadingScale) -> list[np.ndarray]:
        v = self._bp_eig[1]
        return [v[:, sorted(c.pointer_indices)] @ linop.dagger(v[:, sorted(c.pointer_indices)]) for c in scale.cells]

    def joint_vector(self, signal_vector) -> np.ndarray:
        """Final compound vector as a ``N x N`` matrix (object rows, probe columns)."""
        phi = np.asarray(signal_vector, dtype=complex).reshape(-1)
        v = self._aq_eig[1]
        c = linop.dagger(v) @ phi
        return (v * c) @ self.shifted_probes.T

    def truncation_defect(self, signal) -> float:
        """Largest top-Fock-level population of the signal and of the final probe state."""
        t = _as_vector_or_matrix(signal, self.N)
        p = self.signal_weights(signal)
        probe_top = float(np.abs(self.shifted_probes[-1]) ** 2 @ p)
        return max(float(t[-1, -1].real), probe_top)

    def spec(self) -> ProductCouplingSpec:
        return ProductCouplingSpec(self.aq, self.bq, self.lam)

    @cached_property
    def scheme(self) -> ProductScheme:
        """Dense ``N**2``-dimensional scheme (only for ``N <= 32``)."""
        if self.N > DENSE_LIMIT:
            raise DimensionError(f"dense quadrature scheme limited to N <= {DENSE_LIMIT}")
        return build_product_scheme(self.spec(), self.pointer_povm(), State.pure(self.probe))


def build_quadrature_model(N: int, lam: float, probe=None, bins: int | None = None,
                           min_N: int = 16) -> QuadratureModel:
    if N < min_N:
        raise TruncationError(f"truncation N={N} is below the minimum {min_N}")
    if lam == 0:
        raise ValidationError("coupling constant must be nonzero")
    phi = vacuum(N) if probe is None else np.asarray(probe, dtype=complex).reshape(-1)
    if phi.size != N:
        raise DimensionError(f"probe has {phi.size} entries, expected {N}")
    if abs(np.linalg.norm(phi) - 1) > 1e-10:
        raise ValidationError("probe must be a unit vector")
    if bins is not None and bins < 2:
        raise ValidationError("bins must be at least 2")
    off, _ = commutator_defect(N)
    if off > 1e-9:
        raise TruncationError(f"commutator defect {off:.3e} leaks below the top Fock level")
    return QuadratureModel(N, float(lam), phi, bins)


def _guard(m: QuadratureModel, signal, check: bool) -> float:
    defect = m.truncation_defect(signal)
    if check and defect > TRUNCATION_GUARD:
        raise TruncationError(
            f"top-level population {defect:.3e} exceeds {TRUNCATION_GUARD:g} (N={m.N}, lambda={m.lam:g})")
    return defect


@dataclass(frozen=True)
class VarianceDecomposition:
    var_E: float
    var_aq: float
    noise: float
    truncation_defect: float

    @property
    def relative_residual(self) -> float:
        return abs(self.var_E - self.var_aq - self.noise) / self.var_E


def variance_decomposition(m: QuadratureModel, signal, check_truncation: bool = True,
                           rtol: float = 0.05) -> VarianceDecomposition:
    """Variance of the measured observable against signal variance plus probe noise.

    ``var_E`` comes from the first two moments of the measured POVM on the
    finest scale; ``noise`` is ``Var(b^p, probe) / lam**2``.
    """
    defect = _guard(m, signal, check_truncation)
    scale = m.reading_scale(bins=m.N)
    probs = m.cell_response(scale) @ m.signal_weights(signal)
    _, var_e = _moments(scale.values, probs)
    t = _as_vector_or_matrix(signal, m.N)
    mean_a = np.trace(t @ m.aq).real
    var_a = np.trace(t @ m.aq @ m.aq).real - mean_a**2
    pb = m.probe
    mean_p = np.vdot(pb, m.bp @ pb).real
    var_p = np.vdot(pb, m.bp @ m.bp @ pb).real - mean_p**2
    out = VarianceDecomposition(float(var_e), float(var_a), float(var_p / m.lam**2), defect)
    if check_truncation and out.relative_residual > rtol:
        raise InconsistencyError(f"variance decomposition residual {out.relative_residual:.3e} exceeds {rtol}")
    return out


def observable_table(m: QuadratureModel, signal, scale: ReadingScale) -> BivariateDist:
    """``mu(i, j) = sum_k p_k e_i(k) e_j(k)``: the measured-versus-pointer table.

    Exact for this coupling because both the measured effects and the
    conditional pointer statistics are diagonal in the ``a^q`` eigenbasis.
    """
    e = m.cell_response(scale)
    p = m.signal_weights(signal)
    mu = (e * p) @ e.T
    return BivariateDist(scale.values, scale.values, mu / mu.sum())


def observable_correlation(m: QuadratureModel, signal, scale: ReadingScale | None = None) -> CorrStats:
    if scale is None:
        scale = m.reading_scale(bins=m.N)
    return corr_stats(observable_table(m, signal, scale))


@dataclass(frozen=True)
class ValueChain:
    """Ingredients of the value correlation of one cell for a vector signal."""

    eps12: float
    mean_E: float
    mean_E2: float
    eps1: float
    eps2: float
    var_E_operator: float
    var_pointer: float


def _vector(signal, n: int) -> np.ndarray:
    if isinstance(signal, State):
        return signal.vector()
    v = np.asarray(signal, dtype=complex).reshape(-1)
    if v.size != n:
        raise DimensionError(f"signal vector has {v.size} entries, expected {n}")
    return v / np.linalg.norm(v)


def value_chain(m: QuadratureModel, signal, scale: ReadingScale, i: int) -> ValueChain:
    phi = _vector(signal, m.N)
    psi = m.joint_vector(phi)
    e = m.effects(scale)[i]
    z = m.pointer_effects(scale)[i]
    eye = np.eye(m.N)
    ex = lambda x, y: linop.pure_expect(psi, x, y).real  # noqa: E731
    eps12, eps1, eps2 = ex(e, z), ex(e, eye), ex(eye, z)
    mean_e = np.vdot(phi, e @ phi).real
    mean_e2 = np.vdot(phi, e @ e @ phi).real
    return ValueChain(eps12, mean_e, mean_e2, eps1, eps2,
                      ex(e @ e, eye) - eps1**2, ex(eye, z @ z) - eps2**2)


def quadrature_value_correlation(m: QuadratureModel, signal, scale: ReadingScale, i: int,
                                 check_truncation: bool = True) -> CorrStats:
    """Correlation of ``E_i (x) I`` and ``I (x) Z_i`` in the final compound vector state.

    Moments follow the standard definitions: ``sigma1**2`` uses ``E_i**2`` and
    ``sigma2**2`` uses ``Z_i**2``.
    """
    _guard(m, signal, check_truncation)
    c = value_chain(m, signal, scale, i)
    p = c.eps2
    if p <= 1e-10 or p >= 1 - 1e-10:
        raise ValidationError(f"cell {i} has degenerate weight {p:.3e}")
    return _stats(c.eps1, c.eps2, c.eps12, c.var_E_operator, c.var_pointer, c.eps12 - c.eps1 * c.eps2, 1e-12)


def quadrature_state_correlation(m: QuadratureModel, signal, scale: ReadingScale, i: int) -> CorrStats:
    """Correlation of the object and probe component states of cell ``i``."""
    phi = _vector(signal, m.N)
    psi = m.joint_vector(phi)
    z = m.pointer_effects(scale)[i]
    psi_i = psi @ z.T
    p = np.vdot(psi_i, psi_i).real
    if p <= 1e-12:
        raise ValidationError(f"cell {i} has zero weight")
    ts = psi_i @ linop.dagger(psi_i) / p
    ta = psi_i.T @ np.conj(psi_i) / p
    eye = np.eye(m.N)
    ex = lambda x, y: linop.pure_expect(psi, x, y).real  # noqa: E731
    e1, e2, e12 = ex(ts, eye), ex(eye, ta), ex(ts, ta)
    return _stats(e1, e2, e12, ex(ts @ ts, eye) - e1**2, ex(eye, ta @ ta) - e2**2, e12 - e1 * e2, 1e-12)


def convolution_effects(m: QuadratureModel, scale: ReadingScale, x: np.ndarray | None = None) -> np.ndarray:
    """Measured effects as smeared indicator functions on the ``a^q`` spectrum.

    Integrates the continuum ``b^p`` density of the probe over each cell
    shifted by ``lam * x``; cell edges sit halfway between neighbouring
    ``b^p`` eigenvalues. Independent of the truncated coupling.
    """
    from scipy.integrate import quad

    xs = m.signal_values if x is None else np.asarray(x, dtype=float)
    pv = m.pointer_values
    mids = (pv[1:] + pv[:-1]) / 2
    density = _probe_momentum_density(m.probe)
    out = np.zeros((len(scale), xs.size))
    for i, c in enumerate(scale.cells):
        idx = sorted(c.pointer_indices)
        lo = -np.inf if idx[0] == 0 else mids[idx[0] - 1]
        hi = np.inf if idx[-1] == m.N - 1 else mids[idx[-1]]
        for k, xv in enumerate(xs):
            shift = m.lam * xv
            out[i, k] = quad(density, lo - shift, hi - shift, limit=200)[0]
    return out


def _probe_momentum_density(probe: np.ndarray):
    """Continuum density of ``p`` for a finite Fock superposition."""
    coeffs = np.asarray(probe, dtype=complex)
    n = coeffs.size

    def density(p: float) -> float:
        # Hermite functions by recurrence; <p|n> = (-i)^n psi_n(p)
        h_prev, h = 0.0, math.pi**-0.25 * math.exp(-p * p / 2)
        amp = coeffs[0] * h
        for k in range(1, n):
            h_prev, h = h, math.sqrt(2 / k) * p * h - math.sqrt((k - 1) / k) * h_prev
            amp += coeffs[k] * (-1j) ** k * h
        return abs(amp) ** 2

    return density


@dataclass(frozen=True)
class SweepRow:
    lam: float
    var_aq: float
    var_bp_scaled: float
    var_E: float
    rho_obs: float
    rho_value_cell0: float
    truncation_defect: float


SWEEP_COLUMNS = ("lambda", "var_aq", "var_bp_scaled", "var_E", "rho_obs", "rho_value_cell0", "truncation_defect")


def quadrature_correlation_sweep(N: int, lambdas: Sequence[float], signal, probe=None,
                                 bins: int | None = None, check_truncation: bool = False) -> list[SweepRow]:
    """Per coupling constant: variance decomposition, observable correlation on the
    fine scale and value correlation of cell 0 on the two-cell median scale."""
    if len(lambdas) == 0:
        raise ValidationError("at least one coupling constant is required")
    rows = []
    for lam in lambdas:
        m = build_quadrature_model(N, lam, probe, bins)
        vd = variance_decomposition(m, signal, check_truncation=False)
        if check_truncation:
            _guard(m, signal, True)
        fine = m.reading_scale(signal, bins)
        rho = observable_correlation(m, signal, fine).rho
        median = m.reading_scale(signal, 2)
        rv = quadrature_value_correlation(m, signal, median, 0, check_truncation=False).rho
        rows.append(SweepRow(float(lam), vd.var_aq, vd.noise, vd.var_E, rho, rv, vd.truncation_defect))
    return rows


def fmt(x: float) -> str:
    """12 significant digits, fixed formatting."""
    return format(float(x), ".12g")


def write_sweep_csv(rows: Sequence[SweepRow], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([fmt(r.lam), fmt(r.var_aq), fmt(r.var_bp_scaled), fmt(r.var_E), fmt(r.rho_obs),
                    fmt(r.rho_value_cell0), fmt(r.truncation_defect)])
