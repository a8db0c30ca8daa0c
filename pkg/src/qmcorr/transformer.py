"""
State transformers (instruments) and the first-kind / repeatability checks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linop
from .quantum import Povm, State, default_test_states
from .scheme import MeasurementScheme, ReadingScale, evolve, measured_povm, pointer_effects


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    INCONCLUSIVE = "inconclusive"

    def __bool__(self) -> bool:
        return self is Verdict.TRUE


def verdict(worst: float, tol: float, band: float = 10.0) -> Verdict:
    """TRUE below ``tol``, FALSE above ``band * tol``, INCONCLUSIVE in between."""
    if worst <= tol:
        return Verdict.TRUE
    if worst > band * tol:
        return Verdict.FALSE
    return Verdict.INCONCLUSIVE


@dataclass
class StateTransformer:
    """The instrument ``i -> I_i`` induced by a scheme and a reading scale."""

    scheme: MeasurementScheme
    scale: ReadingScale = None

    def __post_init__(self):
        if self.scale is None:
            self.scale = ReadingScale.finest(self.scheme)
        self.scale.check(self.scheme)

    @cached_property
    def povm(self) -> Povm:
        return measured_povm(self.scheme, self.scale)

    @cached_property
    def _roots(self) -> list[np.ndarray]:
        eye = np.eye(self.scheme.dim_s)
        return [np.kron(eye, linop.psd_sqrt(z)) for z in pointer_effects(self.scheme, self.scale)]

    def __len__(self) -> int:
        return len(self.scale)

    def apply(self, i: int, t) -> np.ndarray:
        """``I_i(T)``: reduced object part of the conditioned joint state.

        Linear in ``t``, so unnormalized operators are accepted.
        """
        r = self._roots[i]
        v = r @ evolve(self.scheme, t) @ r
        return linop.partial_trace(v, self.scheme.dim_s, self.scheme.dim_a, keep="S")

    def apply_total(self, t) -> np.ndarray:
        w = evolve(self.scheme, t)
        return linop.partial_trace(w, self.scheme.dim_s, self.scheme.dim_a, keep="S")

    def kraus(self, i: int) -> list[np.ndarray]:
        """Object-space Kraus operators of ``I_i``.

        ``(I (x) <psi_m| Z_i^1/2) K (I (x) sqrt(t_n) |phi_n>)`` over the
        coupling's Kraus operators ``K``, the apparatus basis ``psi_m`` and
        the spectral decomposition of the apparatus state.
        """
        ds, da = self.scheme.dim_s, self.scheme.dim_a
        w, v = np.linalg.eigh(self.scheme.apparatus_state.matrix)
        r = self._roots[i]
        out = []
        for k in self.scheme.coupling.kraus:
            rk = (r @ k).reshape(ds, da, ds, da)
            for n in range(da):
                if w[n] <= 1e-14:
                    continue
                col = np.einsum("smtb,b->smt", rk, v[:, n]) * np.sqrt(w[n])
                out.extend(col[:, m, :] for m in range(da))
        return out


def _matrices(states) -> list[np.ndarray]:
    return [s.matrix if isinstance(s, State) else np.asarray(s, complex) for s in states]


def _test_states(st: StateTransformer, states) -> list[np.ndarray]:
    if states is None:
        states = default_test_states(st.scheme.dim_s)
    return _matrices(states)


@dataclass(frozen=True)
class CheckReport:
    verdict: Verdict
    worst: float
    per_cell: tuple[float, ...] = field(default=())

    def __bool__(self) -> bool:
        return bool(self.verdict)


def check_first_kind(st: StateTransformer, states: Sequence | None = None, tol: float = 1e-9) -> CheckReport:
    """Outcome probabilities before and after the measurement coincide."""
    effects = st.povm.matrices
    per_cell = np.zeros(len(effects))
    for t in _test_states(st, states):
        after = st.apply_total(t)
        for i, e in enumerate(effects):
            per_cell[i] = max(per_cell[i], abs(np.trace(t @ e) - np.trace(after @ e)))
    worst = float(per_cell.max())
    return CheckReport(verdict(worst, tol), worst, tuple(per_cell))


@dataclass(frozen=True)
class RepeatReport(CheckReport):
    min_repeat_probability: float = 1.0


def check_repeatable(st: StateTransformer, states: Sequence | None = None, tol: float = 1e-9) -> RepeatReport:
    """Each normalized object component state is a 1-eigenstate of its effect.

    Both the probability form ``tr[T_S(i) E_i] = 1`` and the eigenstate form
    ``E_i T_S(i) = T_S(i)`` are evaluated; the report carries the worse one.
    """
    effects = st.povm.matrices
    per_cell = np.zeros(len(effects))
    min_p = 1.0
    for t in _test_states(st, states):
        for i, e in enumerate(effects):
            out = st.apply(i, t)
            w = np.trace(out).real
            if w <= tol:
                continue
            ts = out / w
            p = np.trace(ts @ e).real
            min_p = min(min_p, p)
            per_cell[i] = max(per_cell[i], abs(p - 1.0), linop.fro(e @ ts - ts))
    worst = float(per_cell.max())
    return RepeatReport(verdict(worst, tol), worst, tuple(per_cell), float(min_p))


def check_repeat_composition(st: StateTransformer, states: Sequence | None = None, tol: float = 1e-9) -> CheckReport:
    """``tr[I_i(I_j(T))] = delta_ij tr[I_j(T)]`` for all cells and test states."""
    n = len(st)
    per_cell = np.zeros(n)
    for t in _test_states(st, states):
        first = [st.apply(j, t) for j in range(n)]
        for j in range(n):
            for i in range(n):
                lhs = np.trace(st.apply(i, first[j])).real
                rhs = np.trace(first[j]).real if i == j else 0.0
                per_cell[i] = max(per_cell[i], abs(lhs - rhs))
    worst = float(per_cell.max())
    return CheckReport(verdict(worst, tol), worst, tuple(per_cell))
