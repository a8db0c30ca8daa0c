"""
Independent brute-force recomputation of every reported quantity.

Tensor products, partial traces, dual maps and expectation values are
written out as explicit sums over the product basis; correlations use raw
moments instead of joint spectral measures. Only matrix multiplication and
Hermitian eigendecomposition are shared with the main path. Intended for
total dimension at most 16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import correlate
from .errors import DimensionError
from .quantum import State
from .scheme import (
    MeasurementScheme,
    ReadingScale,
    check_component_orthogonality,
    check_pointer_mixture,
    check_pointer_value_definiteness,
    measure,
    measured_povm,
)
from .transformer import StateTransformer

MAX_DIM = 16


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for j in range(n):
            for k in range(m):
                for l in range(m):
                    out[i * m + k, j * m + l] = a[i, j] * b[k, l]
    return out


def _trace_out_a(w: np.ndarray, ds: int, da: int) -> np.ndarray:
    out = np.zeros((ds, ds), dtype=complex)
    for s in range(ds):
        for t in range(ds):
            for a in range(da):
                out[s, t] += w[s * da + a, t * da + a]
    return out


def _trace_out_s(w: np.ndarray, ds: int, da: int) -> np.ndarray:
    out = np.zeros((da, da), dtype=complex)
    for a in range(da):
        for b in range(da):
            for s in range(ds):
                out[a, b] += w[s * da + a, s * da + b]
    return out


def _tr(m: np.ndarray) -> float:
    return float(sum(m[k, k] for k in range(m.shape[0])).real)


def _sqrt_psd(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((p + p.conj().T) / 2)
    # round-off eigenvalues would leak as sqrt(eps)
    w = np.where(w <= 64 * np.finfo(float).eps * max(np.abs(w).max(), 1.0), 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def _fro(m: np.ndarray) -> float:
    return math.sqrt(float(sum(abs(x) ** 2 for x in m.ravel())))


def _rho(e1, e2, e12, v1, v2) -> float | None:
    # raw-moment variances carry cancellation error of order eps
    v1, v2 = (0.0 if v <= 1e-13 else v for v in (v1, v2))
    s = math.sqrt(v1 * v2)
    return None if s <= 1e-12 else (e12 - e1 * e2) / s


@dataclass
class BruteForce:
    """Everything about one ``(scheme, T, scale)`` computed by explicit sums."""

    scheme: MeasurementScheme
    t: np.ndarray
    scale: ReadingScale
    effects: list[np.ndarray] = field(init=False)
    joint: np.ndarray = field(init=False)
    z: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        s = self.scheme
        ds, da = s.dim_s, s.dim_a
        ta = s.apparatus_state.matrix
        kraus = s.coupling.kraus
        self.joint = sum(k @ _kron(self.t, ta) @ k.conj().T for k in kraus)
        self.z = []
        for c in self.scale.cells:
            acc = np.zeros((da, da), dtype=complex)
            for idx in c.pointer_indices:
                acc = acc + s.pointer.matrices[idx]
            self.z.append(acc)
        self.effects = []
        for z in self.z:
            dual = sum(k.conj().T @ _kron(np.eye(ds), z) @ k for k in kraus)
            e = np.zeros((ds, ds), dtype=complex)
            for a in range(ds):
                for b in range(ds):
                    for c in range(da):
                        for d in range(da):
                            e[a, b] += dual[a * da + c, b * da + d] * ta[d, c]
            self.effects.append(e)

    @property
    def dims(self) -> tuple[int, int]:
        return self.scheme.dim_s, self.scheme.dim_a

    def conditioned(self, i: int) -> np.ndarray:
        r = _kron(np.eye(self.dims[0]), _sqrt_psd(self.z[i]))
        return r @ self.joint @ r

    def weight(self, i: int) -> float:
        return _tr(self.conditioned(i))

    def components(self, i: int) -> tuple[np.ndarray, np.ndarray] | None:
        v = self.conditioned(i)
        p = _tr(v)
        if p <= 1e-10:
            return None
        return _trace_out_a(v, *self.dims) / p, _trace_out_s(v, *self.dims) / p

    def expect(self, x: np.ndarray, y: np.ndarray) -> float:
        return _tr(self.joint @ _kron(x, y))

    def pair_rho(self, x: np.ndarray, y: np.ndarray) -> float | None:
        ds, da = self.dims
        ia, is_ = np.eye(da), np.eye(ds)
        e1, e2 = self.expect(x, ia), self.expect(is_, y)
        v1 = self.expect(x @ x, ia) - e1**2
        v2 = self.expect(is_, y @ y) - e2**2
        return _rho(e1, e2, self.expect(x, y), v1, v2)

    def observable_rho(self) -> float | None:
        vals = self.scale.values
        mu = np.array([[self.expect(e, z) for z in self.z] for e in self.effects])
        r, c = mu.sum(axis=1), mu.sum(axis=0)
        e1, e2 = float(vals @ r), float(vals @ c)
        e12 = float(vals @ mu @ vals)
        return _rho(e1, e2, e12, float(vals**2 @ r) - e1**2, float(vals**2 @ c) - e2**2)

    def mixture_residual(self) -> float:
        ds, da = self.dims
        total = np.zeros((da, da), dtype=complex)
        for i in range(len(self.z)):
            comp = self.components(i)
            if comp is not None:
                total += self.weight(i) * comp[1]
        return _fro(_trace_out_s(self.joint, ds, da) - total)

    def orthogonality(self) -> float:
        objs = [self.components(i) for i in range(len(self.z))]
        worst = 0.0
        for i, a in enumerate(objs):
            for j, b in enumerate(objs):
                if i != j and a is not None and b is not None:
                    worst = max(worst, _tr(a[0] @ b[0]))
        return worst

    def value_definiteness(self) -> float:
        worst = 0.0
        for i, z in enumerate(self.z):
            comp = self.components(i)
            if comp is not None:
                ta = comp[1]
                worst = max(worst, abs(_tr(ta @ z) - 1.0), _fro(z @ ta - ta))
        return worst

    def first_kind(self) -> float:
        after = _trace_out_a(self.joint, *self.dims)
        return max(abs(_tr(self.t @ e) - _tr(after @ e)) for e in self.effects)

    def repeat_probability(self, i: int) -> float | None:
        comp = self.components(i)
        return None if comp is None else _tr(comp[0] @ self.effects[i])


@dataclass(frozen=True)
class Comparison:
    quantity: str
    main: float | None
    oracle: float | None

    @property
    def discrepancy(self) -> float:
        if self.main is None or self.oracle is None:
            return 0.0 if self.main is None and self.oracle is None else math.inf
        return abs(self.main - self.oracle)


@dataclass
class OracleReport:
    comparisons: list[Comparison] = field(default_factory=list)

    def add(self, quantity: str, main, oracle) -> None:
        self.comparisons.append(Comparison(quantity, None if main is None else float(main),
                                           None if oracle is None else float(oracle)))

    def add_matrix(self, quantity: str, main: np.ndarray, oracle: np.ndarray) -> None:
        self.comparisons.append(Comparison(quantity, 0.0, float(np.max(np.abs(main - oracle)))))

    @property
    def max_discrepancy(self) -> float:
        return max((c.discrepancy for c in self.comparisons), default=0.0)


def _rho_or_none(stats) -> float | None:
    return stats.rho


def run_oracle(scheme: MeasurementScheme, states: Sequence, scale: ReadingScale | None = None) -> OracleReport:
    """Compare the main path against brute force on every state and cell."""
    if scheme.dim > MAX_DIM:
        raise DimensionError(f"oracle limited to total dimension {MAX_DIM}, scenario has {scheme.dim}")
    if scale is None:
        scale = ReadingScale.finest(scheme)
    report = OracleReport()
    povm = measured_povm(scheme, scale)
    st = StateTransformer(scheme, scale)
    for n, t in enumerate(states):
        tm = t.matrix if isinstance(t, State) else np.asarray(t, dtype=complex)
        bf = BruteForce(scheme, tm, scale)
        if n == 0:
            for i, (e_main, e_bf) in enumerate(zip(povm.matrices, bf.effects)):
                report.add_matrix(f"effect[{i}]", e_main, e_bf)
        rec = measure(scheme, tm, scale)
        tag = f"state[{n}]"
        report.add(f"{tag}.pointer_mixture", check_pointer_mixture(rec).residual, bf.mixture_residual())
        report.add(f"{tag}.orthogonality", check_component_orthogonality(rec).worst, bf.orthogonality())
        report.add(f"{tag}.value_definiteness", check_pointer_value_definiteness(rec, tol=1e-10).worst,
                   bf.value_definiteness())
        after = st.apply_total(tm)
        fk = max(abs(np.trace(tm @ e) - np.trace(after @ e)) for e in povm.matrices)
        report.add(f"{tag}.first_kind", fk, bf.first_kind())
        report.add(f"{tag}.rho_obs", _rho_or_none(correlate.observable_correlation(rec)), bf.observable_rho())
        for i, comp in enumerate(rec.components):
            cell = f"{tag}.cell[{i}]"
            report.add(f"{cell}.weight", comp.weight, bf.weight(i))
            bfc = bf.components(i)
            if comp.defined and bfc is not None:
                report.add_matrix(f"{cell}.object", comp.object, bfc[0])
                report.add_matrix(f"{cell}.apparatus", comp.apparatus, bfc[1])
                report.add(f"{cell}.repeat_probability", np.trace(comp.object @ povm.matrices[i]).real,
                           bf.repeat_probability(i))
            p = comp.weight
            degenerate = p <= 1e-10 or p >= 1 - 1e-10
            vmain = _rho_or_none(correlate.value_correlation(rec, i=i, povm=povm))
            vbf = None if degenerate else bf.pair_rho(bf.effects[i], bf.z[i])
            report.add(f"{cell}.rho_value", vmain, vbf)
            smain = _rho_or_none(correlate.state_correlation(rec, i=i))
            sbf = None if degenerate or bfc is None else bf.pair_rho(bfc[0], bfc[1])
            report.add(f"{cell}.rho_state", smain, sbf)
    return report
