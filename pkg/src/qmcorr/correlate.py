"""
Correlations of finite bivariate distributions and the three correlation
functionals of a measurement: between observables, between values of a
single outcome, and between final component states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linop
from .errors import InconsistencyError, ValidationError
from .scheme import MeasurementRecord, MeasurementScheme, ReadingScale, measure, measured_povm

TOL = 1e-10


@dataclass(frozen=True)
class BivariateDist:
    """Joint probability table ``table[i, j]`` over ``row_values x col_values``."""

    row_values: np.ndarray
    col_values: np.ndarray
    table: np.ndarray

    def __post_init__(self):
        rv = np.asarray(self.row_values, dtype=float).reshape(-1)
        cv = np.asarray(self.col_values, dtype=float).reshape(-1)
        tab = np.asarray(self.table, dtype=float)
        if tab.shape != (rv.size, cv.size):
            raise ValidationError(f"table shape {tab.shape} does not match values {(rv.size, cv.size)}")
        if tab.min(initial=0.0) < -1e-10:
            raise ValidationError("probabilities must be non-negative")
        if abs(tab.sum() - 1.0) > 1e-10:
            raise ValidationError(f"table sums to {tab.sum():.12g}, expected 1")
        object.__setattr__(self, "row_values", rv)
        object.__setattr__(self, "col_values", cv)
        object.__setattr__(self, "table", np.clip(tab, 0.0, None))

    @property
    def row_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


@dataclass(frozen=True)
class CorrStats:
    eps1: float
    eps2: float
    eps12: float
    sigma1: float
    sigma2: float
    rho: float | None

    @property
    def defined(self) -> bool:
        return self.rho is not None


def _stats(eps1, eps2, eps12, var1, var2, cov, tol) -> CorrStats:
    s1 = math.sqrt(max(var1, 0.0))
    s2 = math.sqrt(max(var2, 0.0))
    rho = cov / (s1 * s2) if s1 * s2 > tol else None
    return CorrStats(float(eps1), float(eps2), float(eps12), s1, s2, None if rho is None else float(rho))


def corr_stats(d: BivariateDist, tol: float = 1e-12) -> CorrStats:
    """Means, standard deviations, mixed moment and normalized correlation.

    ``rho`` is None when ``sigma1 * sigma2 <= tol``.
    """
    x, y, mu = d.row_values, d.col_values, d.table
    m1, m2 = d.row_marginal, d.col_marginal
    e1, e2 = float(x @ m1), float(y @ m2)
    e12 = float(x @ mu @ y)
    var1 = float(((x - e1) ** 2) @ m1)
    var2 = float(((y - e2) ** 2) @ m2)
    cov = float((x - e1) @ mu @ (y - e2))
    return _stats(e1, e2, e12, var1, var2, cov, tol)


@dataclass(frozen=True)
class AffineLink:
    slope: float
    intercept: float

    def __post_init__(self):
        if self.slope == 0:
            raise ValidationError("an affine link needs a nonzero slope")

    def __call__(self, y):
        return self.slope * np.asarray(y) + self.intercept


@dataclass(frozen=True)
class Dependence:
    kind: str  # "independent" | "dependent" | "completely-dependent"
    link: AffineLink | None = None
    mapping: dict | None = None


def classify_dependence(d: BivariateDist, tol: float = 1e-10) -> Dependence:
    """Independent, dependent, or completely dependent (``pi_1 = h(pi_2)`` a.e.).

    ``h`` is the column-argmax map on the support of the column marginal. If
    it is affine over the support values the link is returned as well.
    """
    mu = d.table
    m1, m2 = d.row_marginal, d.col_marginal
    if np.max(np.abs(mu - np.outer(m1, m2))) <= tol:
        return Dependence("independent")
    support = np.flatnonzero(m2 > tol)
    h = {int(j): int(np.argmax(mu[:, j])) for j in support}
    expected = np.zeros_like(mu)
    for j, i in h.items():
        expected[i, j] = m2[j]
    if np.max(np.abs(mu - expected)) > tol:
        return Dependence("dependent")
    mapping = {float(d.col_values[j]): float(d.row_values[i]) for j, i in h.items()}
    ys = d.col_values[support]
    xs = np.array([d.row_values[h[int(j)]] for j in support])
    link = None
    if np.ptp(ys) > 0:
        a, b = np.polyfit(ys, xs, 1)
        if abs(a) > tol and np.max(np.abs(a * ys + b - xs)) <= tol * max(1.0, np.max(np.abs(xs))):
            link = AffineLink(float(a), float(b))
    return Dependence("completely-dependent", link, mapping)


def ell(stats: CorrStats, sign: int = 1) -> AffineLink:
    """The affine map ``y -> +-(sigma1/sigma2)(y - eps2) + eps1``."""
    a = sign * stats.sigma1 / stats.sigma2
    return AffineLink(a, stats.eps1 - a * stats.eps2)


# -- measurement correlations ------------------------------------------------


def _record(scheme, t, scale) -> MeasurementRecord:
    if isinstance(scheme, MeasurementRecord):
        return scheme
    return measure(scheme, t, scale)


def observable_bivariate(scheme: MeasurementScheme, t=None, scale: ReadingScale | None = None,
                         povm=None) -> BivariateDist:
    """Joint distribution ``tr[V(T (x) T_A) E_i (x) Z_j]`` of measured and pointer observables.

    Rows carry the measured observable, columns the coarse-grained pointer;
    both are labelled by the cell values.
    """
    rec = _record(scheme, t, scale)
    if povm is None:
        povm = measured_povm(rec.scheme, rec.scale)
    ds, da = rec.scheme.dim_s, rec.scheme.dim_a
    w = rec.joint.reshape(ds, da, ds, da)
    effects, zs = povm.matrices, rec.pointer_effects
    # tr[W (E (x) Z)] = sum W[s,a,t,b] E[t,s] Z[b,a]
    mu = np.array([[np.einsum("satb,ts,ba->", w, e, z).real for z in zs] for e in effects])
    prior = np.array([np.trace(rec.t @ e).real for e in effects])
    if np.max(np.abs(mu.sum(axis=0) - prior)) > 1e-9:
        raise InconsistencyError("pointer marginal does not reproduce the measured statistics")
    values = rec.scale.values
    return BivariateDist(values, values, mu)


def observable_correlation(scheme: MeasurementScheme, t=None, scale: ReadingScale | None = None,
                           tol: float = 1e-9) -> CorrStats:
    """Correlation of the measured observable and the pointer in the final state.

    At ``|rho| = 1`` the joint table must be the complete dependence through
    the affine map of matching sign; a violation raises ``InconsistencyError``.
    """
    d = observable_bivariate(scheme, t, scale)
    stats = corr_stats(d)
    if stats.defined and abs(abs(stats.rho) - 1.0) <= tol:
        link = ell(stats, 1 if stats.rho > 0 else -1)
        expected = np.zeros_like(d.table)
        for j, y in enumerate(d.col_values):
            hits = np.flatnonzero(np.abs(d.row_values - link(y)) <= 1e-6 * max(1.0, abs(link(y))))
            if hits.size:
                expected[hits[0], j] = d.col_marginal[j]
        gap = np.max(np.abs(d.table - expected))
        if gap > max(1e-6, 100 * tol):
            raise InconsistencyError(f"|rho| = 1 but the table is not affinely dependent (gap {gap:.3e})")
    return stats


def _group_eig(h: np.ndarray, tol: float = 1e-9) -> list[tuple[float, np.ndarray]]:
    w, v = np.linalg.eigh((h + linop.dagger(h)) / 2)
    out = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol:
            b = v[:, start:k]
            out.append((float(np.mean(w[start:k])), b @ linop.dagger(b)))
            start = k
    return out


def operator_pair_dist(joint: np.ndarray, x: np.ndarray, y: np.ndarray, dim_s: int, dim_a: int) -> BivariateDist:
    """Joint spectral distribution of ``x (x) I`` and ``I (x) y`` in a compound state."""
    xs, ys = _group_eig(x), _group_eig(y)
    w = joint.reshape(dim_s, dim_a, dim_s, dim_a)
    mu = np.array([[np.einsum("satb,ts,ba->", w, q, r).real for _, r in ys] for _, q in xs])
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    return BivariateDist([a for a, _ in xs], [b for b, _ in ys], mu)


def operator_pair_moments(joint: np.ndarray, x: np.ndarray, y: np.ndarray, dim_s: int, dim_a: int,
                          tol: float = 1e-12) -> CorrStats:
    """Same correlation computed from operator moments, squares included."""
    ex = lambda a, b: np.trace(joint @ np.kron(a, b)).real  # noqa: E731
    i_s, i_a = np.eye(dim_s), np.eye(dim_a)
    e1, e2, e12 = ex(x, i_a), ex(i_s, y), ex(x, y)
    var1 = ex(x @ x, i_a) - e1**2
    var2 = ex(i_s, y @ y) - e2**2
    return _stats(e1, e2, e12, var1, var2, e12 - e1 * e2, tol)


def _degenerate(p: float, tol: float) -> bool:
    return p <= tol or p >= 1.0 - tol


def value_correlation(scheme: MeasurementScheme, t=None, scale: ReadingScale | None = None, i: int = 0,
                      tol: float = 1e-10, povm=None) -> CorrStats:
    """Correlation of ``E_i (x) I`` and ``I (x) Z_i`` in the final compound state.

    The mixed moment is cross-checked against ``tr[I_i(I_i(T))]`` and the
    spectral route against the operator-moment route. Degenerate weights
    (``p_i`` within ``tol`` of 0 or 1) give an undefined ``rho``.
    """
    rec = _record(scheme, t, scale)
    if povm is None:
        povm = measured_povm(rec.scheme, rec.scale)
    ds, da = rec.scheme.dim_s, rec.scheme.dim_a
    e, z = povm.matrices[i], rec.pointer_effects[i]
    stats = corr_stats(operator_pair_dist(rec.joint, e, z, ds, da))
    moments = operator_pair_moments(rec.joint, e, z, ds, da)
    inst = linop.partial_trace(rec.conditioned[i], ds, da, keep="S")
    twice = np.trace(inst @ e).real
    if abs(stats.eps12 - moments.eps12) > 1e-10 or abs(twice - moments.eps12) > 1e-10:
        raise InconsistencyError("value-correlation mixed moment routes disagree")
    if _degenerate(rec.weights[i], tol):
        return CorrStats(stats.eps1, stats.eps2, stats.eps12, stats.sigma1, stats.sigma2, None)
    return stats


def state_correlation(scheme: MeasurementScheme, t=None, scale: ReadingScale | None = None, i: int = 0,
                      tol: float = 1e-10) -> CorrStats:
    """Correlation of ``T_S(i) (x) I`` and ``I (x) T_A(i)`` in the final compound state."""
    rec = _record(scheme, t, scale)
    comp = rec.components[i]
    ds, da = rec.scheme.dim_s, rec.scheme.dim_a
    if not comp.defined:
        return CorrStats(0.0, 0.0, 0.0, 0.0, 0.0, None)
    stats = corr_stats(operator_pair_dist(rec.joint, comp.object, comp.apparatus, ds, da))
    if _degenerate(comp.weight, tol):
        return CorrStats(stats.eps1, stats.eps2, stats.eps12, stats.sigma1, stats.sigma2, None)
    return stats


def reduced_state_correlation(scheme: MeasurementScheme, t, tol: float = 1e-9) -> CorrStats:
    """Correlation of the two reduced final states of a unitary vector scheme."""
    from .quantum import State

    if not scheme.is_unitary:
        raise ValidationError("reduced_state_correlation needs a unitary coupling")
    ts = t if isinstance(t, State) else State(t)
    if not ts.is_pure(tol) or not scheme.apparatus_state.is_pure(tol):
        raise ValidationError("reduced_state_correlation needs vector object and apparatus states")
    rec = measure(scheme, ts)
    ds, da = scheme.dim_s, scheme.dim_a
    return corr_stats(operator_pair_dist(rec.joint, rec.reduced_object, rec.reduced_apparatus, ds, da))


def uncorrelated_dependent_table() -> BivariateDist:
    """Hand-built counterexample: ``pi_2 = pi_1 ** 2`` with ``pi_1`` uniform on {-1, 0, 1}."""
    return BivariateDist([-1.0, 0.0, 1.0], [0.0, 1.0],
                         np.array([[0.0, 1 / 3], [1 / 3, 0.0], [0.0, 1 / 3]]))


def product_table(m1: Sequence[float], m2: Sequence[float], x: Sequence[float], y: Sequence[float]) -> BivariateDist:
    return BivariateDist(x, y, np.outer(m1, m2))
