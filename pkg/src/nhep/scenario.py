"""Scenario files: JSON documents describing a model, its initial state,
the integrator and the outputs.

Schema (all quantities SI)::

    {
      "model": "skate" | "skate_rotor" | "veselova",
      "params": {"m", "l", "g", "I": [3], "J": [3]}      # skate / skate_rotor
                {"I": [3], "w": [3]}                     # veselova, U = w . Gamma
      "initial": {"phi0"} | {"zeta": [5]} | {"Omega": [3], "Y": [3], "Gamma": [3]}
                 plus "theta_dot" for skate_rotor (default: zero rotor momentum)
                 {"Omega": [3], "Gamma": [3]} for veselova
      "integrator": {"method": "rk4"|"rk45", "dt", "t_end", "stop_at_event", "store_every"},
      "control": {"mode": "off"} | {"mode": "matched", "sigma", "rho" (optional)},
      "outputs": [{"path": "out.csv", "columns": [...] (optional)}],
      "equilibrium": {"kind": "sliding", "Y0"} | {"kind": "spinning", "Omega0"}
                     | {"kind": "custom", "zeta": [5], "multipliers": [3] (optional)}
    }
"""

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Optional

MODELS = ("skate", "skate_rotor", "veselova")

PARAM_KEYS = {
    "skate": {"m", "l", "g", "I"},
    "skate_rotor": {"m", "l", "g", "I", "J"},
    "veselova": {"I", "w"},
}
INITIAL_KEYS = {
    "skate": [{"phi0"}, {"zeta"}, {"Omega", "Y", "Gamma"}],
    "skate_rotor": [{"phi0"}, {"zeta"}, {"Omega", "Y", "Gamma"}],
    "veselova": [{"Omega", "Gamma"}],
}
INTEGRATOR_DEFAULTS = {"method": "rk4", "dt": 1e-4, "t_end": 1.0, "stop_at_event": False, "store_every": 1}
EQUILIBRIUM_KEYS = {"sliding": {"Y0"}, "spinning": {"Omega0"}, "custom": {"zeta", "multipliers"}}
VECTOR_LENGTHS = {"I": 3, "J": 3, "w": 3, "zeta": 5, "Omega": 3, "Y": 3, "Gamma": 3, "multipliers": 3}


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending key or line."""


@dataclass
class Scenario:
    model: str
    params: dict
    initial: dict
    integrator: dict = field(default_factory=lambda: dict(INTEGRATOR_DEFAULTS))
    control: dict = field(default_factory=lambda: {"mode": "off"})
    outputs: list = field(default_factory=list)
    equilibrium: Optional[dict] = None

    def to_dict(self):
        d = {
            "model": self.model,
            "params": copy.deepcopy(self.params),
            "initial": copy.deepcopy(self.initial),
            "integrator": copy.deepcopy(self.integrator),
            "control": copy.deepcopy(self.control),
            "outputs": copy.deepcopy(self.outputs),
        }
        if self.equilibrium is not None:
            d["equilibrium"] = copy.deepcopy(self.equilibrium)
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def controlled(self):
        return self.control.get("mode") == "matched"


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(f"{where}: value must be finite")
    return float(value)


def _vector(value, n, where):
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioError(f"{where}: expected a list of {n} numbers")
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(value)]


def _section(doc, key, required=True):
    if key not in doc:
        if required:
            raise ScenarioError(f"missing key '{key}'")
        return None
    value = doc[key]
    if not isinstance(value, dict):
        raise ScenarioError(f"{key}: expected an object")
    return value


def _check_keys(section, allowed, where):
    extra = set(section) - set(allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(extra)} (allowed: {sorted(allowed)})")


def _values(section, where):
    out = {}
    for key, value in section.items():
        if key in VECTOR_LENGTHS:
            out[key] = _vector(value, VECTOR_LENGTHS[key], f"{where}.{key}")
        else:
            out[key] = _number(value, f"{where}.{key}")
    return out


def from_dict(doc):
    """Validate and normalize a parsed document into a :class:`Scenario`."""
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object")
    _check_keys(doc, {"model", "params", "initial", "integrator", "control", "outputs", "equilibrium"}, "scenario")
    model = doc.get("model")
    if model not in MODELS:
        raise ScenarioError(f"model: expected one of {MODELS}, got {model!r}")

    params = _section(doc, "params")
    _check_keys(params, PARAM_KEYS[model], "params")
    missing = PARAM_KEYS[model] - set(params) - ({"w"} if model == "veselova" else set())
    if missing:
        raise ScenarioError(f"params: missing key(s) {sorted(missing)} for model '{model}'")
    params = _values(params, "params")
    if model == "veselova":
        params.setdefault("w", [0.0, 0.0, 0.0])

    initial = _section(doc, "initial")
    allowed_initial = set().union(*INITIAL_KEYS[model]) | ({"theta_dot"} if model == "skate_rotor" else set())
    _check_keys(initial, allowed_initial, "initial")
    base = set(initial) - {"theta_dot"}
    if base not in INITIAL_KEYS[model]:
        forms = " | ".join(str(sorted(f)) for f in INITIAL_KEYS[model])
        raise ScenarioError(f"initial: expected exactly one of {forms}, got {sorted(base)}")
    initial = _values(initial, "initial")

    integrator = dict(INTEGRATOR_DEFAULTS)
    section = _section(doc, "integrator", required=False) or {}
    _check_keys(section, INTEGRATOR_DEFAULTS, "integrator")
    for key, value in section.items():
        where = f"integrator.{key}"
        if key == "method":
            if value not in ("rk4", "rk45"):
                raise ScenarioError(f"{where}: expected 'rk4' or 'rk45', got {value!r}")
            integrator[key] = value
        elif key == "stop_at_event":
            if not isinstance(value, bool):
                raise ScenarioError(f"{where}: expected true or false")
            integrator[key] = value
        elif key == "store_every":
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ScenarioError(f"{where}: expected a positive integer")
            integrator[key] = value
        else:
            integrator[key] = _number(value, where)
            if integrator[key] <= 0:
                raise ScenarioError(f"{where}: must be positive")

    control = _section(doc, "control", required=False) or {"mode": "off"}
    mode = control.get("mode", "off")
    if mode not in ("off", "matched"):
        raise ScenarioError(f"control.mode: expected 'off' or 'matched', got {mode!r}")
    if mode == "matched":
        if model != "skate_rotor":
            raise ScenarioError("control.mode 'matched' requires model 'skate_rotor'")
        _check_keys(control, {"mode", "sigma", "rho"}, "control")
        if "sigma" not in control:
            raise ScenarioError("control: 'sigma' is required when mode is 'matched'")
        control = {"mode": "matched", **_values({k: v for k, v in control.items() if k != "mode"}, "control")}
        if control["sigma"] == 0:
            raise ScenarioError("control.sigma: must be nonzero")
    else:
        _check_keys(control, {"mode"}, "control")
        control = {"mode": "off"}

    outputs = doc.get("outputs", [])
    if not isinstance(outputs, list):
        raise ScenarioError("outputs: expected a list")
    norm_outputs = []
    for i, out in enumerate(outputs):
        if not isinstance(out, dict) or not isinstance(out.get("path"), str):
            raise ScenarioError(f"outputs[{i}]: expected an object with a string 'path'")
        _check_keys(out, {"path", "columns"}, f"outputs[{i}]")
        entry = {"path": out["path"]}
        if "columns" in out:
            cols = out["columns"]
            if not isinstance(cols, list) or not all(isinstance(c, str) for c in cols):
                raise ScenarioError(f"outputs[{i}].columns: expected a list of names")
            entry["columns"] = list(cols)
        norm_outputs.append(entry)

    equilibrium = _section(doc, "equilibrium", required=False)
    if equilibrium is not None:
        equilibrium = parse_equilibrium(equilibrium)

    return Scenario(
        model=model,
        params=params,
        initial=initial,
        integrator=integrator,
        control=control,
        outputs=norm_outputs,
        equilibrium=equilibrium,
    )


def parse_equilibrium(section):
    kind = section.get("kind")
    if kind not in EQUILIBRIUM_KEYS:
        raise ScenarioError(f"equilibrium.kind: expected one of {sorted(EQUILIBRIUM_KEYS)}, got {kind!r}")
    _check_keys(section, EQUILIBRIUM_KEYS[kind] | {"kind"}, "equilibrium")
    values = _values({k: v for k, v in section.items() if k != "kind"}, "equilibrium")
    if kind == "custom" and "zeta" not in values:
        raise ScenarioError("equilibrium: 'zeta' is required for kind 'custom'")
    if kind == "sliding":
        values.setdefault("Y0", 1.0)
    if kind == "spinning" and "Omega0" not in values:
        raise ScenarioError("equilibrium: 'Omega0' is required for kind 'spinning'")
    return {"kind": kind, **values}


def parse_scenario(text, source="<scenario>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return from_dict(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def load_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return parse_scenario(text, source=str(path))
