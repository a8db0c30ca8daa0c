"""
Randomized verification of the structural results linking component-state
orthogonality, repeatability, pointer properties and strong correlations.

Each family draws schemes from the hypothesis class of one result, evaluates
premise and conclusion residuals, and records a per-instance verdict. An
implication instance whose premise is clearly false is ``SKIP`` (vacuous);
an equivalence instance passes when both sides agree. Residuals inside the
tolerance band of :func:`qmcorr.transformer.verdict` give ``INCONCLUSIVE``,
which is reported but never counted as a counterexample.

Families
    orthogonal-components      orthogonal object components => pointer mixture and value-definiteness
    unitary-mixture            unitary coupling, vector states: orthogonality <=> pointer mixture
    observable-repeatability   finite scale: eigenstate condition for all T <=> observable correlation 1
    value-eigenstate           eigenstate condition => value correlation 1 and pointer eigenstates
    sharp-value-eigenstate     sharp observable: eigenstate condition <=> value correlation 1 and pointer eigenstates
    state-orthogonality        vector components: orthogonality <=> state correlation 1 and pointer eigenstates
    reduced-states             unitary vector scheme: reduced final states correlate with rho = 1
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linop
from .correlate import CorrStats, observable_correlation, reduced_state_correlation, state_correlation, value_correlation
from .errors import QMError
from .models import build_cnot, build_controlled_rotation, build_kicked_cnot, build_shift_model, build_unsharp_cnot, shift_scale
from .quantum import Povm, State, default_test_states, is_sharp
from .scheme import (
    Coupling,
    MeasurementScheme,
    ReadingScale,
    check_component_orthogonality,
    check_pointer_mixture,
    check_pointer_value_definiteness,
    measure,
    measured_povm,
)
from .transformer import StateTransformer, Verdict, check_repeatable, verdict

TOL_PREMISE = 1e-8
TOL_CONCLUSION = 1e-6
FAULTS = ("flip-rho-sign",)

FAMILIES = (
    "orthogonal-components",
    "unitary-mixture",
    "observable-repeatability",
    "value-eigenstate",
    "sharp-value-eigenstate",
    "state-orthogonality",
    "reduced-states",
)


# -- random scheme generators ------------------------------------------------


@dataclass
class Instance:
    kind: str
    scheme: MeasurementScheme
    state: State
    scale: ReadingScale | None = None


def _block_pointer(m: int, r: int) -> Povm:
    eye = np.eye(m * r)
    return Povm.from_matrices([np.diag(eye[i * r:(i + 1) * r].sum(axis=0)) for i in range(m)], range(m))


def _partition(n: int, m: int, rng) -> list[int]:
    """Split ``n`` into ``m`` positive parts."""
    cuts = np.sort(rng.choice(np.arange(1, n), size=m - 1, replace=False)) if m > 1 else []
    edges = [0, *cuts, n]
    return [edges[k + 1] - edges[k] for k in range(m)]


def _block_shift(m: int, r: int, i: int) -> np.ndarray:
    """Permutation sending apparatus block ``j`` to block ``j + i mod m``."""
    d = m * r
    out = np.zeros((d, d))
    for j in range(m):
        for k in range(r):
            out[((j + i) % m) * r + k, j * r + k] = 1.0
    return out


def _embed(block: np.ndarray, d: int, start: int) -> np.ndarray:
    out = np.eye(d, dtype=complex)
    n = block.shape[0]
    out[start:start + n, start:start + n] = block
    return out


def _random_state(d: int, rng, pure: bool) -> State:
    if pure:
        return State.pure(linop.random_unit_vector(d, rng))
    return State(linop.random_density(d, rng))


def luders_scheme(rng, pure_apparatus: bool = False, channel_kick: bool = False,
                  object_kick: bool = False) -> MeasurementScheme:
    """Scheme of the form ``sum_i P_i (x) G_i`` whose pointer blocks record the ``P_i``.

    ``G_i`` moves the apparatus block holding ``T_A`` onto pointer block
    ``i``, so object components are ``P_i T P_i`` up to normalization.
    ``channel_kick`` follows the coupling with a random mixed-unitary channel
    that is block-diagonal in the ``P_i`` (orthogonality survives);
    ``object_kick`` follows it with a generic object unitary (the measured
    observable stays sharp, orthogonality is lost).
    """
    m = int(rng.integers(2, 4))
    ds = m + int(rng.integers(0, 2))
    r = int(rng.integers(1, 3))
    da = m * r
    ranks = _partition(ds, m, rng)
    q = linop.random_unitary(ds, rng)
    starts = np.cumsum([0, *ranks[:-1]])
    projs = [q[:, s:s + k] @ linop.dagger(q[:, s:s + k]) for s, k in zip(starts, ranks)]
    u = sum(np.kron(p, _embed(linop.random_unitary(r, rng), da, i * r) @ _block_shift(m, r, i))
            for i, p in enumerate(projs))
    if pure_apparatus or r == 1:
        vec = np.zeros(da, complex)
        vec[:r] = linop.random_unit_vector(r, rng)
        t_a = State.pure(vec)
    else:
        mat = np.zeros((da, da), complex)
        mat[:r, :r] = linop.random_density(r, rng)
        t_a = State(mat)
    if object_kick:
        coupling = Coupling.unitary(np.kron(linop.random_unitary(ds, rng), np.eye(da)) @ u)
    elif channel_kick:
        weights = rng.dirichlet(np.ones(2))
        kraus = []
        for w in weights:
            block = np.zeros((ds, ds), complex)
            for s, k in zip(starts, ranks):
                qi = q[:, s:s + k]
                block += qi @ linop.random_unitary(k, rng) @ linop.dagger(qi)
            kraus.append(np.sqrt(w) * np.kron(block, np.eye(da)) @ u)
        coupling = Coupling.channel(kraus)
    else:
        coupling = Coupling.unitary(u)
    return MeasurementScheme(ds, da, _block_pointer(m, r), t_a, coupling)


def unitary_vector_scheme(rng) -> MeasurementScheme:
    """Haar-random coupling, vector apparatus state, sharp block pointer."""
    m = int(rng.integers(2, 4))
    ds = int(rng.integers(2, 4))
    r = int(rng.integers(1, 3))
    da = m * r
    return MeasurementScheme(ds, da, _block_pointer(m, r), State.basis(da, 0),
                             Coupling.unitary(linop.random_unitary(ds * da, rng)))


def _unitary_with_first_column(psi: np.ndarray, rng) -> np.ndarray:
    d = psi.size
    m = np.column_stack([psi, rng.normal(size=(d, d - 1)) + 1j * rng.normal(size=(d, d - 1))])
    q, rr = np.linalg.qr(m)
    d = np.diag(rr)
    return q * (d / np.abs(d))


def vector_component_scheme(rng, orthogonal: bool) -> tuple[MeasurementScheme, State]:
    """Unitary scheme driving ``e_0 (x) e_0`` to ``sum_i sqrt(p_i) phi_i (x) chi_i``.

    ``chi_i`` lies in pointer block ``i`` so every component state is a
    vector state; ``phi_i`` are orthonormal or generic.
    """
    m = int(rng.integers(2, 4))
    ds = m + int(rng.integers(0, 2))
    r = int(rng.integers(1, 3))
    da = m * r
    phis = linop.random_unitary(ds, rng)[:, :m] if orthogonal else \
        np.column_stack([linop.random_unit_vector(ds, rng) for _ in range(m)])
    p = rng.dirichlet(np.ones(m))
    psi = np.zeros(ds * da, complex)
    for i in range(m):
        chi = np.zeros(da, complex)
        chi[i * r:(i + 1) * r] = linop.random_unit_vector(r, rng)
        psi += np.sqrt(p[i]) * np.kron(phis[:, i], chi)
    psi /= np.linalg.norm(psi)
    u = _unitary_with_first_column(psi, rng)
    scheme = MeasurementScheme(ds, da, _block_pointer(m, r), State.basis(da, 0), Coupling.unitary(u))
    return scheme, State.basis(ds, 0)


def fixture_catalogue() -> list[Instance]:
    plus = State.pure(np.array([1, 1]) / np.sqrt(2))
    shift = build_shift_model(3, [0, 1, 2])
    return [
        Instance("fixture:cnot", build_cnot(), plus),
        Instance("fixture:crot", build_controlled_rotation(np.pi / 2), plus),
        Instance("fixture:kicked", build_kicked_cnot(), plus),
        Instance("fixture:unsharp", build_unsharp_cnot(), plus),
        Instance("fixture:shift3", shift, State.pure(np.ones(3) / np.sqrt(3)), shift_scale(shift)),
    ]


# -- reporting ---------------------------------------------------------------


@dataclass(frozen=True)
class InstanceResult:
    family: str
    index: int
    kind: str
    status: str
    premise: float
    conclusion: float
    note: str = ""


def _num(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class FamilyReport:
    name: str
    results: list[InstanceResult] = field(default_factory=list)

    def count(self, status: str) -> int:
        return sum(r.status == status for r in self.results)

    @property
    def ok(self) -> bool:
        return self.count("FAIL") == 0

    def summary(self) -> str:
        prem = max((r.premise for r in self.results), default=0.0)
        conc = max((r.conclusion for r in self.results if r.status != "SKIP"), default=0.0)
        return (f"THEOREM {self.name} {'PASS' if self.ok else 'FAIL'} instances={len(self.results)} "
                f"pass={self.count('PASS')} fail={self.count('FAIL')} "
                f"inconclusive={self.count('INCONCLUSIVE')} skip={self.count('SKIP')} "
                f"worst_premise={_num(prem)} worst_conclusion={_num(conc)}")


@dataclass
class TheoremReport:
    seed: int
    count: int
    families: list[FamilyReport]

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.families)

    @property
    def failing(self) -> list[str]:
        return [f.name for f in self.families if not f.ok]

    def lines(self, instances: bool = True) -> list[str]:
        out = [f"VERIFY seed={self.seed} count={self.count}"]
        for f in self.families:
            if instances:
                for r in f.results:
                    line = (f"INSTANCE {r.family} {r.index} {r.kind} {r.status} "
                            f"premise={_num(r.premise)} conclusion={_num(r.conclusion)}")
                    out.append(line + (f" {r.note}" if r.note else ""))
            out.append(f.summary())
        out.append(f"RESULT {'PASS' if self.ok else 'FAIL'}")
        return out

    def text(self, instances: bool = True) -> str:
        return "\n".join(self.lines(instances)) + "\n"


# -- per-family evaluation ---------------------------------------------------


class _Ctx:
    def __init__(self, tol_p: float, tol_c: float, fault: str | None):
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}")
        self.tol_p, self.tol_c, self.fault = tol_p, tol_c, fault

    def rho(self, stats: CorrStats) -> float | None:
        if stats.rho is None:
            return None
        return -stats.rho if self.fault == "flip-rho-sign" else stats.rho

    def implication(self, premise: float, conclusion: float) -> str:
        vp = verdict(premise, self.tol_p)
        if vp is Verdict.FALSE:
            return "SKIP"
        if vp is Verdict.INCONCLUSIVE:
            return "INCONCLUSIVE"
        vc = verdict(conclusion, self.tol_c)
        return {Verdict.TRUE: "PASS", Verdict.FALSE: "FAIL"}.get(vc, "INCONCLUSIVE")

    def equivalence(self, left: float, right: float) -> str:
        vl, vr = verdict(left, self.tol_p), verdict(right, self.tol_c)
        if Verdict.INCONCLUSIVE in (vl, vr):
            return "INCONCLUSIVE"
        return "PASS" if vl == vr else "FAIL"


def _value_side(ctx: _Ctx, rec, povm: Povm) -> tuple[float, float]:
    """Worst ``|1 - rho_value|`` over nondegenerate cells and worst pointer eigenstate defect."""
    worst_b = 0.0
    for i, p in enumerate(rec.weights):
        if p <= 1e-9 or p >= 1 - 1e-9:
            continue
        stats = value_correlation(rec, i=i, povm=povm)
        rho = ctx.rho(stats)
        worst_b = max(worst_b, 1.0 if rho is None else abs(1.0 - rho))
    return worst_b, check_pointer_value_definiteness(rec, tol=1e-9).worst


def _eigenstate_defect(rec, povm: Povm) -> float:
    worst = 0.0
    for c, e in zip(rec.components, povm.matrices):
        if c.defined:
            worst = max(worst, linop.fro(e @ c.object - c.object))
    return worst


def _guarded(fn: Callable[[], InstanceResult], family: str, index: int, kind: str) -> InstanceResult:
    try:
        return fn()
    except QMError as exc:
        return InstanceResult(family, index, kind, "FAIL", float("nan"), float("nan"), f"error={type(exc).__name__}")


def _orthogonal_components(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state, inst.scale)
    a = check_component_orthogonality(rec).worst
    b = check_pointer_mixture(rec).residual
    c = check_pointer_value_definiteness(rec, tol=1e-9).worst
    return InstanceResult("orthogonal-components", idx, inst.kind, ctx.implication(a, max(b, c)), a, max(b, c))


def _unitary_mixture(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state, inst.scale)
    a = check_component_orthogonality(rec).worst
    b = check_pointer_mixture(rec).residual
    status = ctx.equivalence(a, b)
    side = "both" if a <= ctx.tol_p else "neither"
    return InstanceResult("unitary-mixture", idx, inst.kind, status, a, b, f"holds={side}")


def _observable_repeatability(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    st = StateTransformer(inst.scheme, inst.scale)
    tests = default_test_states(inst.scheme.dim_s, seed=idx, n_random=6)
    a = check_repeatable(st, tests, tol=ctx.tol_p).worst
    b = 0.0
    for t in tests:
        rec = measure(inst.scheme, t, st.scale)
        p = np.array([np.trace(t.matrix @ e).real for e in st.povm.matrices])
        vals = st.scale.values
        if p @ vals**2 - (p @ vals) ** 2 <= 1e-9:
            continue
        rho = ctx.rho(observable_correlation(rec))
        b = max(b, 1.0 if rho is None else abs(1.0 - rho))
    return InstanceResult("observable-repeatability", idx, inst.kind, ctx.equivalence(a, b), a, b)


def _value_eigenstate(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state, inst.scale)
    povm = measured_povm(inst.scheme, rec.scale)
    a = _eigenstate_defect(rec, povm)
    b, c = _value_side(ctx, rec, povm)
    return InstanceResult("value-eigenstate", idx, inst.kind, ctx.implication(a, max(b, c)), a, max(b, c))


def _sharp_value_eigenstate(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state, inst.scale)
    povm = measured_povm(inst.scheme, rec.scale)
    sharp = is_sharp(povm, tol=1e-9)
    a = _eigenstate_defect(rec, povm)
    b, c = _value_side(ctx, rec, povm)
    if not sharp:
        return InstanceResult("sharp-value-eigenstate", idx, inst.kind, "SKIP", a, max(b, c), "unsharp")
    return InstanceResult("sharp-value-eigenstate", idx, inst.kind, ctx.equivalence(a, max(b, c)), a, max(b, c))


def _state_orthogonality(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state, inst.scale)
    purity = 0.0
    for comp in rec.components:
        if comp.defined:
            purity = max(purity, 1.0 - np.trace(comp.object @ comp.object).real,
                         1.0 - np.trace(comp.apparatus @ comp.apparatus).real)
    a = check_component_orthogonality(rec).worst
    b = 0.0
    for i, p in enumerate(rec.weights):
        if p <= 1e-9 or p >= 1 - 1e-9:
            continue
        rho = ctx.rho(state_correlation(rec, i=i))
        b = max(b, 1.0 if rho is None else abs(1.0 - rho))
    c = check_pointer_value_definiteness(rec, tol=1e-9).worst
    note = f"vector_defect={_num(purity)}"
    if purity > ctx.tol_p:
        return InstanceResult("state-orthogonality", idx, inst.kind, "SKIP", a, max(b, c), note)
    return InstanceResult("state-orthogonality", idx, inst.kind, ctx.equivalence(a, max(b, c)), a, max(b, c), note)


def _reduced_states(ctx: _Ctx, idx: int, inst: Instance) -> InstanceResult:
    rec = measure(inst.scheme, inst.state)
    ws = np.sort(np.linalg.eigvalsh(rec.reduced_object))[::-1]
    wa = np.sort(np.linalg.eigvalsh(rec.reduced_apparatus))[::-1]
    k = min(ws.size, wa.size)
    spectra = max(float(np.max(np.abs(ws[:k] - wa[:k]))), float(np.max(np.abs(ws[k:]), initial=0.0)),
                  float(np.max(np.abs(wa[k:]), initial=0.0)))
    rho = ctx.rho(reduced_state_correlation(inst.scheme, inst.state))
    if rho is None:
        # maximally mixed reduced states carry no variance
        return InstanceResult("reduced-states", idx, inst.kind, "SKIP", spectra, 0.0, "rho=undefined")
    b = abs(1.0 - rho)
    status = ctx.implication(0.0, max(b, spectra))
    return InstanceResult("reduced-states", idx, inst.kind, status, spectra, b, f"spectra={_num(spectra)}")


# -- drivers -----------------------------------------------------------------


def _family_rng(seed: int, family: str) -> np.random.Generator:
    return np.random.default_rng([seed, FAMILIES.index(family)])


def _instances(family: str, seed: int, count: int) -> list[Instance]:
    rng = _family_rng(seed, family)
    out = []
    for k in range(count):
        if family == "orthogonal-components":
            s = luders_scheme(rng, channel_kick=bool(k % 2))
            out.append(Instance("luders-kicked" if k % 2 else "luders", s, _random_state(s.dim_s, rng, k % 3 == 0)))
        elif family == "unitary-mixture":
            s = unitary_vector_scheme(rng) if k % 2 else luders_scheme(rng, pure_apparatus=True)
            out.append(Instance("haar" if k % 2 else "luders", s, _random_state(s.dim_s, rng, True)))
        elif family == "observable-repeatability":
            kind = ("luders", "luders-kicked", "object-kicked", "haar")[k % 4]
            if kind == "haar":
                s = unitary_vector_scheme(rng)
            else:
                s = luders_scheme(rng, channel_kick=kind == "luders-kicked", object_kick=kind == "object-kicked")
            out.append(Instance(kind, s, State.maximally_mixed(s.dim_s)))
        elif family == "value-eigenstate":
            kind = ("luders", "luders-kicked", "object-kicked")[k % 3]
            s = luders_scheme(rng, channel_kick=kind == "luders-kicked", object_kick=kind == "object-kicked")
            out.append(Instance(kind, s, _random_state(s.dim_s, rng, k % 2 == 0)))
        elif family == "sharp-value-eigenstate":
            kind = ("luders", "object-kicked", "luders-kicked")[k % 3]
            s = luders_scheme(rng, channel_kick=kind == "luders-kicked", object_kick=kind == "object-kicked")
            out.append(Instance(kind, s, _random_state(s.dim_s, rng, k % 2 == 0)))
        elif family == "state-orthogonality":
            orth = k % 2 == 0
            s, t = vector_component_scheme(rng, orth)
            out.append(Instance("orthonormal" if orth else "generic", s, t))
        elif family == "reduced-states":
            s = unitary_vector_scheme(rng)
            out.append(Instance("haar", s, _random_state(s.dim_s, rng, True)))
    return out


_EVALUATORS = {
    "orthogonal-components": _orthogonal_components,
    "unitary-mixture": _unitary_mixture,
    "observable-repeatability": _observable_repeatability,
    "value-eigenstate": _value_eigenstate,
    "sharp-value-eigenstate": _sharp_value_eigenstate,
    "state-orthogonality": _state_orthogonality,
    "reduced-states": _reduced_states,
}

# fixtures appended to the random instances of a family
_FIXTURES = {
    "orthogonal-components": ("fixture:cnot", "fixture:crot", "fixture:kicked", "fixture:unsharp", "fixture:shift3"),
    "unitary-mixture": ("fixture:cnot", "fixture:crot", "fixture:shift3"),
    "observable-repeatability": ("fixture:cnot", "fixture:crot", "fixture:kicked", "fixture:shift3"),
    "value-eigenstate": ("fixture:cnot", "fixture:crot", "fixture:shift3"),
    "sharp-value-eigenstate": ("fixture:cnot", "fixture:kicked", "fixture:shift3"),
    "state-orthogonality": ("fixture:cnot", "fixture:crot"),
    "reduced-states": ("fixture:cnot", "fixture:crot"),
}


def verify_family(family: str, seed: int, count: int, tol_premise: float = TOL_PREMISE,
                  tol_conclusion: float = TOL_CONCLUSION, fault: str | None = None) -> FamilyReport:
    ctx = _Ctx(tol_premise, tol_conclusion, fault)
    fixtures = {f.kind: f for f in fixture_catalogue()}
    cases = _instances(family, seed, count) + [fixtures[k] for k in _FIXTURES[family]]
    ev = _EVALUATORS[family]
    report = FamilyReport(family)
    for idx, inst in enumerate(cases):
        report.results.append(_guarded(lambda: ev(ctx, idx, inst), family, idx, inst.kind))
    return report


def verify_theorems(seed: int = 1, count: int = 100, tol_premise: float = TOL_PREMISE,
                    tol_conclusion: float = TOL_CONCLUSION, fault: str | None = None,
                    families: tuple[str, ...] = FAMILIES) -> TheoremReport:
    """Run every family with ``count`` random instances plus the fixture catalogue.

    Deterministic in ``seed``: each family draws from its own generator, so
    results do not depend on which other families run.
    """
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown families: {sorted(unknown)}")
    reports = [verify_family(f, seed, count, tol_premise, tol_conclusion, fault) for f in families]
    return TheoremReport(seed, count, reports)
