"""qmcli: simulate scenarios, verify the structural results, sweep the quadrature model, run the oracle."""

from __future__ import annotations

import argparse
import sys
from contextlib import ExitStack
from typing import Sequence

import numpy as np

from . import correlate, quadrature, theorems
from .errors import DimensionError, InconsistencyError, QMError, TruncationError, ValidationError
from .oracle import run_oracle
from .quantum import is_sharp
from .scenario import Scenario, load_scenario
from .scheme import (
    check_component_orthogonality,
    check_object_additivity,
    check_pointer_mixture,
    check_pointer_value_definiteness,
    measure,
)
from .transformer import StateTransformer, Verdict, check_first_kind, check_repeat_composition, check_repeatable, verdict

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DIM, EXIT_TRUNC = 0, 1, 2, 3, 4


def num(x) -> str:
    """12 significant digits; tiny values and negative zero print as 0."""
    if x is None:
        return "undefined"
    x = float(x)
    if abs(x) < 1e-14:
        x = 0.0
    return format(x + 0.0, ".12g")


def cnum(z: complex) -> str:
    re, im = num(z.real), num(z.imag)
    if im == "0":
        return re
    return f"{re}{'' if im.startswith('-') else '+'}{im}j"


def matrix_lines(m: np.ndarray, indent: str) -> list[str]:
    return [indent + "[" + ", ".join(cnum(z) for z in row) + "]" for row in np.asarray(m)]


class Report:
    def __init__(self, out):
        self.out = out
        self.warnings = 0

    def line(self, text: str = "") -> None:
        self.out.write(text + "\n")

    def check(self, indent: str, name: str, v: Verdict, **fields) -> None:
        extra = " ".join(f"{k}={num(val)}" for k, val in fields.items())
        self.line(f"{indent}CHECK {name} {v.name} {extra}".rstrip())
        if v is Verdict.INCONCLUSIVE:
            self.warnings += 1
            self.line(f"{indent}WARN {name} is within the tolerance band")


def simulate(sc: Scenario, tol: float, out) -> int:
    rep = Report(out)
    s, scale = sc.scheme, sc.scale
    rep.line(f"SCENARIO {sc.name} dim_s={s.dim_s} dim_a={s.dim_a} cells={len(scale)} states={len(sc.states)}")
    st = StateTransformer(s, scale)
    povm = st.povm
    if "povm" in sc.analyses:
        rep.line("POVM")
        for i, e in enumerate(povm.matrices):
            rep.line(f"  EFFECT {i} value={num(scale.values[i])}")
            for row in matrix_lines(e, "    "):
                rep.line(row)
        sh = is_sharp(povm, tol=tol)
        rep.line(f"  SHARP {'yes' if sh.sharp else 'no'} idempotency={num(max(sh.idempotency))} overlap={num(sh.max_overlap)}")
    if "checks" in sc.analyses:
        fk = check_first_kind(st, tol=tol)
        rep.check("", "first_kind", fk.verdict, worst=fk.worst)
        rp = check_repeatable(st, tol=tol)
        rep.check("", "repeatable", rp.verdict, worst=rp.worst, repeat_probability=rp.min_repeat_probability)
        rc = check_repeat_composition(st, tol=tol)
        rep.check("", "repeat_composition", rc.verdict, worst=rc.worst)
    for n, t in enumerate(sc.states):
        rec = measure(s, t, scale)
        rep.line(f"STATE {n}")
        for comp in rec.components:
            rep.line(f"  CELL {comp.cell} value={num(scale.values[comp.cell])} weight={num(comp.weight)}"
                     + ("" if comp.defined else " components=undefined"))
            if "components" in sc.analyses and comp.defined:
                rep.line("    OBJECT")
                for row in matrix_lines(comp.object, "      "):
                    rep.line(row)
                rep.line("    APPARATUS")
                for row in matrix_lines(comp.apparatus, "      "):
                    rep.line(row)
        if "checks" in sc.analyses:
            vd = check_pointer_value_definiteness(rec, tol=tol)
            rep.check("  ", "value_definiteness", verdict(vd.worst, tol), worst=vd.worst)
            mx = check_pointer_mixture(rec, tol=tol)
            rep.check("  ", "pointer_mixture", verdict(mx.residual, tol), residual=mx.residual)
            ad = check_object_additivity(rec, tol=tol)
            rep.check("  ", "object_additivity", verdict(ad.residual, tol), residual=ad.residual)
            orth = check_component_orthogonality(rec, tol=tol)
            rep.check("  ", "orthogonality", verdict(orth.worst, tol), worst=orth.worst)
        if "correlations" in sc.analyses:
            rep.line(f"  RHO observable {num(correlate.observable_correlation(rec).rho)}")
            for i in range(len(scale)):
                rv = correlate.value_correlation(rec, i=i, povm=povm).rho
                rs = correlate.state_correlation(rec, i=i).rho
                rep.line(f"  RHO value cell={i} {num(rv)}")
                rep.line(f"  RHO state cell={i} {num(rs)}")
    rep.line(f"END warnings={rep.warnings}")
    return EXIT_OK


def _parse_lambdas(text: str) -> list[float]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ValidationError("empty lambda list")
    try:
        return [float(x) for x in items]
    except ValueError:
        raise ValidationError(f"cannot parse lambda list {text!r}") from None


def _parse_signal(text: str, n: int) -> np.ndarray:
    kind, _, arg = text.partition(":")
    if kind == "coherent":
        return quadrature.coherent(n, complex(arg or "1"))
    if kind == "vacuum":
        return quadrature.vacuum(n)
    raise ValidationError(f"unknown signal {text!r} (use coherent:ALPHA or vacuum)")


def _parse_probe(text: str, n: int) -> np.ndarray:
    kind, _, arg = text.partition(":")
    if kind == "vacuum":
        return quadrature.vacuum(n)
    if kind == "squeezed":
        return quadrature.squeezed_vacuum(n, float(arg or "0.5"))
    raise ValidationError(f"unknown probe {text!r} (use vacuum or squeezed:R)")


def sweep(args, out, err) -> int:
    lambdas = _parse_lambdas(args.lambdas)
    if args.N < 16:
        raise TruncationError(f"truncation N={args.N} is below the minimum 16")
    try:
        signal = _parse_signal(args.signal, args.N)
        probe = _parse_probe(args.probe, args.N)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    rows = quadrature.quadrature_correlation_sweep(args.N, lambdas, signal, probe, args.bins)
    quadrature.write_sweep_csv(rows, out)
    rhos = [r.rho_obs for r in rows]
    monotone = all(b > a for a, b in zip(rhos, rhos[1:]))
    sub_unity = all(r < 1 for r in rhos)
    guard = args.tol if args.tol is not None else quadrature.TRUNCATION_GUARD
    worst = max(r.truncation_defect for r in rows)
    err.write(f"SUMMARY rows={len(rows)} increasing={'yes' if monotone else 'no'} "
              f"sub_unity={'yes' if sub_unity else 'no'} max_truncation_defect={num(worst)}\n")
    if worst > guard:
        bad = [num(r.lam) for r in rows if r.truncation_defect > guard]
        err.write(f"TRUNCATION top-level population exceeds {num(guard)} at lambda={','.join(bad)}\n")
        return EXIT_TRUNC
    return EXIT_OK if monotone and sub_unity else EXIT_FAIL


def verify(args, out, err) -> int:
    rep = theorems.verify_theorems(args.seed, args.count,
                                   tol_conclusion=args.tol if args.tol is not None else theorems.TOL_CONCLUSION,
                                   fault=args.inject_fault)
    out.write(rep.text())
    if not rep.ok:
        err.write(f"FAILED {' '.join(rep.failing)}\n")
        return EXIT_FAIL
    return EXIT_OK


def oracle(sc: Scenario, tol: float, out) -> int:
    rep = run_oracle(sc.scheme, sc.states, sc.scale)
    out.write(f"ORACLE {sc.name} comparisons={len(rep.comparisons)}\n")
    worst_by_kind: dict[str, float] = {}
    for c in rep.comparisons:
        kind = c.quantity.split(".")[-1].split("[")[0]
        worst_by_kind[kind] = max(worst_by_kind.get(kind, 0.0), c.discrepancy)
    for kind in sorted(worst_by_kind):
        out.write(f"  {kind} {num(worst_by_kind[kind])}\n")
    out.write(f"MAX_DISCREPANCY {num(rep.max_discrepancy)}\n")
    if rep.max_discrepancy > tol:
        worst = max(rep.comparisons, key=lambda c: c.discrepancy)
        out.write(f"FAIL {worst.quantity} main={num(worst.main)} oracle={num(worst.oracle)}\n")
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmcli", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="report POVM, components, checks and correlations for a scenario")
    sim.add_argument("--scenario", required=True, help="PATH to a JSON scenario or builtin:NAME[?k=v&...]")
    sim.add_argument("--tol", type=float, default=None, help="verdict tolerance (default 1e-9)")
    sim.add_argument("--out", help="write the report here instead of stdout")

    ver = sub.add_parser("verify", help="run the randomized verification suite")
    ver.add_argument("--seed", type=int, default=1)
    ver.add_argument("--count", type=int, default=100, help="random instances per family")
    ver.add_argument("--tol", type=float, default=None, help="conclusion tolerance (default 1e-6)")
    ver.add_argument("--out", help="write the report here instead of stdout")
    ver.add_argument("--inject-fault", choices=theorems.FAULTS, default=None, help=argparse.SUPPRESS)

    sw = sub.add_parser("sweep", help="coupling-strength sweep of the truncated quadrature model (CSV)")
    sw.add_argument("--lambdas", default="0.5,1,2,4", help="comma-separated coupling constants")
    sw.add_argument("--N", type=int, default=64, help="Fock truncation per mode")
    sw.add_argument("--signal", default="coherent:1", help="coherent:ALPHA or vacuum")
    sw.add_argument("--probe", default="vacuum", help="vacuum or squeezed:R")
    sw.add_argument("--bins", type=int, default=None, help="equal-probability pointer cells (default: finest)")
    sw.add_argument("--tol", type=float, default=None, help="truncation guard (default 1e-6)")
    sw.add_argument("--out", help="CSV path (default stdout)")

    orc = sub.add_parser("oracle", help="cross-check a scenario against the brute-force path")
    orc.add_argument("--scenario", required=True)
    orc.add_argument("--tol", type=float, default=1e-8, help="maximum allowed discrepancy")
    orc.add_argument("--out")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    err = sys.stderr
    try:
        with ExitStack() as stack:
            out = stack.enter_context(open(args.out, "w", newline="")) if args.out else sys.stdout
            if args.command == "simulate":
                sc = load_scenario(args.scenario)
                tol = args.tol if args.tol is not None else sc.tol("check", 1e-9)
                return simulate(sc, tol, out)
            if args.command == "verify":
                if args.count < 1:
                    raise ValidationError("--count must be positive")
                return verify(args, out, err)
            if args.command == "sweep":
                return sweep(args, out, err)
            return oracle(load_scenario(args.scenario), args.tol, out)
    except DimensionError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DIM
    except TruncationError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_TRUNC
    except ValidationError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except InconsistencyError as exc:
        err.write(f"assertion failed: {exc}\n")
        return EXIT_FAIL
    except QMError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_FAIL
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
