"""
JSON scenario files and the built-in fixture catalogue.

A scenario describes one scheme, a list of input states and a reading
scale. Complex numbers are either plain numbers or ``[re, im]`` pairs;
matrices are row-major nested lists; a state is a density matrix or
``{"vector": [...]}``. Example::

    {
      "dim_s": 2, "dim_a": 2,
      "coupling": {"type": "unitary", "matrix": [[1,0,0,0],[0,1,0,0],[0,0,0,1],[0,0,1,0]]},
      "pointer": {"effects": [[[1,0],[0,0]], [[0,0],[0,1]]], "labels": [0, 1]},
      "apparatus_state": {"vector": [1, 0]},
      "states": [{"vector": [0.7071067811865476, 0.7071067811865476]}],
      "reading_scale": {"cells": [{"pointer_indices": [0], "value": 0},
                                  {"pointer_indices": [1], "value": 1}]}
    }

Coupling types: ``unitary`` (``matrix``), ``kraus`` (``operators``) and
``product`` (``A``, ``B``, ``lambda``; the coupling ``exp(i lambda A (x) B)``).
Optional keys: ``pointer_map``, ``analyses``, ``tolerances``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import parse_qsl, urlsplit

import numpy as np

from . import models, quadrature
from .errors import QMError, ValidationError
from .quantum import Povm, State
from .scheme import Coupling, MeasurementScheme, ReadingScale

ANALYSES = ("povm", "components", "checks", "correlations")


class ScenarioError(ValidationError):
    """Malformed scenario; carries a position (line/column or JSON path)."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass
class Scenario:
    name: str
    scheme: MeasurementScheme
    states: list[State]
    scale: ReadingScale
    analyses: tuple[str, ...] = ANALYSES
    tolerances: dict[str, float] = field(default_factory=dict)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


# -- JSON decoding -----------------------------------------------------------


def _complex(x, path: str) -> complex:
    if isinstance(x, bool):
        raise ScenarioError("expected a number", path)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ScenarioError("expected a number or an [re, im] pair", path)


def _vector(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ScenarioError("expected a non-empty list", path)
    return np.array([_complex(v, f"{path}[{k}]") for k, v in enumerate(x)])


def _matrix(x, path: str) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ScenarioError("expected a nested list (matrix)", path)
    rows = [_vector(r, f"{path}[{k}]") for k, r in enumerate(x)]
    if len({r.size for r in rows}) != 1 or rows[0].size != len(rows):
        raise ScenarioError("matrix must be square", path)
    return np.array(rows)


def _state(x, path: str) -> State:
    try:
        if isinstance(x, dict):
            if "vector" not in x:
                raise ScenarioError("state object needs a 'vector' key", path)
            return State.pure(_vector(x["vector"], f"{path}.vector"))
        return State(_matrix(x, path))
    except ScenarioError:
        raise
    except QMError as exc:
        raise ScenarioError(str(exc), path) from exc


def _get(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ScenarioError("expected an object", path)
    if key not in obj:
        raise ScenarioError(f"missing key '{key}'", path)
    return obj[key]


def _coupling(spec, path: str, ds: int, da: int) -> Coupling:
    kind = _get(spec, "type", path)
    if kind == "unitary":
        return Coupling.unitary(_matrix(_get(spec, "matrix", path), f"{path}.matrix"))
    if kind == "kraus":
        ops = _get(spec, "operators", path)
        if not isinstance(ops, list) or not ops:
            raise ScenarioError("expected a non-empty list of operators", f"{path}.operators")
        return Coupling.channel([_matrix(o, f"{path}.operators[{k}]") for k, o in enumerate(ops)])
    if kind == "product":
        a = _matrix(_get(spec, "A", path), f"{path}.A")
        b = _matrix(_get(spec, "B", path), f"{path}.B")
        lam = _get(spec, "lambda", path)
        if isinstance(lam, bool) or not isinstance(lam, (int, float)):
            raise ScenarioError("expected a real number", f"{path}.lambda")
        if a.shape[0] != ds or b.shape[0] != da:
            raise ScenarioError("A must act on the object and B on the apparatus", path)
        return Coupling.unitary(models.ProductCouplingSpec(a, b, float(lam)).unitary())
    raise ScenarioError(f"unknown coupling type {kind!r}", f"{path}.type")


def _dim(obj, key: str) -> int:
    v = _get(obj, key, "$")
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ScenarioError("expected a positive integer", f"$.{key}")
    return v


def scenario_from_dict(obj, name: str = "scenario") -> Scenario:
    if not isinstance(obj, dict):
        raise ScenarioError("top level must be an object", "$")
    ds, da = _dim(obj, "dim_s"), _dim(obj, "dim_a")
    try:
        coupling = _coupling(_get(obj, "coupling", "$"), "$.coupling", ds, da)
        ptr = _get(obj, "pointer", "$")
        effects = _get(ptr, "effects", "$.pointer")
        if not isinstance(effects, list) or not effects:
            raise ScenarioError("expected a non-empty list", "$.pointer.effects")
        mats = [_matrix(e, f"$.pointer.effects[{k}]") for k, e in enumerate(effects)]
        labels = ptr.get("labels")
        pointer = Povm.from_matrices(mats, labels)
        t_a = _state(_get(obj, "apparatus_state", "$"), "$.apparatus_state")
        scheme = MeasurementScheme(ds, da, pointer, t_a, coupling, obj.get("pointer_map"))
    except ScenarioError:
        raise
    except QMError as exc:
        raise ScenarioError(str(exc), "$") from exc
    raw_states = _get(obj, "states", "$")
    if not isinstance(raw_states, list) or not raw_states:
        raise ScenarioError("expected a non-empty list of states", "$.states")
    states = [_state(s, f"$.states[{k}]") for k, s in enumerate(raw_states)]
    if "reading_scale" in obj:
        cells = _get(obj["reading_scale"], "cells", "$.reading_scale")
        try:
            groups = [_get(c, "pointer_indices", f"$.reading_scale.cells[{k}]") for k, c in enumerate(cells)]
            values = [_get(c, "value", f"$.reading_scale.cells[{k}]") for k, c in enumerate(cells)]
            scale = ReadingScale.from_groups(groups, values)
            scale.check(scheme)
        except ScenarioError:
            raise
        except (QMError, TypeError) as exc:
            raise ScenarioError(str(exc), "$.reading_scale") from exc
    else:
        scale = ReadingScale.finest(scheme)
    analyses = tuple(obj.get("analyses", ANALYSES))
    bad = set(analyses) - set(ANALYSES)
    if bad:
        raise ScenarioError(f"unknown analyses {sorted(bad)}", "$.analyses")
    tolerances = obj.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ScenarioError("expected an object", "$.tolerances")
    return Scenario(name, scheme, states, scale, analyses, {k: float(v) for k, v in tolerances.items()})


def load_scenario_text(text: str, name: str = "scenario") -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
    return scenario_from_dict(obj, name)


# -- built-in fixtures -------------------------------------------------------

_PLUS = State.pure(np.array([1, 1]) / np.sqrt(2))


def _float_param(params: dict, key: str, default: float) -> float:
    if key not in params:
        return default
    try:
        v = float(params[key])
    except ValueError:
        raise ScenarioError(f"parameter {key}={params[key]!r} is not a number", "builtin") from None
    if not math.isfinite(v):
        raise ScenarioError(f"parameter {key} must be finite", "builtin")
    return v


def _int_param(params: dict, key: str, default: int) -> int:
    v = _float_param(params, key, default)
    if v != int(v):
        raise ScenarioError(f"parameter {key} must be an integer", "builtin")
    return int(v)


def builtin_names() -> tuple[str, ...]:
    return ("cnot", "crot", "shift3", "kicked", "unsharp", "quad")


def builtin(spec: str) -> Scenario:
    """Resolve ``name?key=value&...`` to a fixture scenario."""
    parts = urlsplit(spec)
    name = parts.path
    params = dict(parse_qsl(parts.query, keep_blank_values=True))
    allowed = {"cnot": set(), "crot": {"theta"}, "shift3": set(), "kicked": {"phi"}, "unsharp": {"z0", "z1"},
               "quad": {"N", "lambda", "alpha", "bins"}}
    if name not in allowed:
        raise ScenarioError(f"unknown builtin {name!r}; known: {', '.join(builtin_names())}", "builtin")
    extra = set(params) - allowed[name]
    if extra:
        raise ScenarioError(f"unknown parameters {sorted(extra)} for builtin {name}", "builtin")
    try:
        if name == "cnot":
            return Scenario("cnot", models.build_cnot(), [_PLUS], ReadingScale.finest(models.build_cnot()))
        if name == "crot":
            s = models.build_controlled_rotation(_float_param(params, "theta", np.pi / 2))
            return Scenario(f"crot?theta={params.get('theta', 'pi/2')}", s, [_PLUS], ReadingScale.finest(s))
        if name == "shift3":
            s = models.build_shift_model(3, [0, 1, 2])
            return Scenario("shift3", s, [State.pure(np.ones(3) / np.sqrt(3))], models.shift_scale(s))
        if name == "kicked":
            s = models.build_kicked_cnot(_float_param(params, "phi", np.pi / 2))
            return Scenario("kicked", s, [_PLUS], ReadingScale.finest(s))
        if name == "unsharp":
            s = models.build_unsharp_cnot((_float_param(params, "z0", 0.1), _float_param(params, "z1", 0.8)))
            return Scenario("unsharp", s, [_PLUS], ReadingScale.finest(s))
        n = _int_param(params, "N", 16)
        m = quadrature.build_quadrature_model(n, _float_param(params, "lambda", 1.0),
                                              bins=_int_param(params, "bins", 2))
        sig = State.pure(quadrature.coherent(n, _float_param(params, "alpha", 1.0)))
        return Scenario(f"quad?N={n}", m.scheme, [sig], m.reading_scale(sig))
    except ScenarioError:
        raise
    except ValueError as exc:
        if isinstance(exc, QMError) and not isinstance(exc, ValidationError):
            raise
        raise ScenarioError(str(exc), "builtin") from exc


def load_scenario(ref: str) -> Scenario:
    """``builtin:NAME[?params]`` or a path to a JSON file."""
    if ref.startswith("builtin:"):
        return builtin(ref[len("builtin:"):])
    path = Path(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from exc
    return load_scenario_text(text, path.name)
