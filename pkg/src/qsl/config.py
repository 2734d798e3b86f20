"""YAML scenario configuration.

Physical quantities are dimensionless: energies and rates in units of ``delta``
for the twisted Landau-Zener and periodic scenarios, and of ``A(0)`` for Grover.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from qsl.core import HERMITIAN_TOL
from qsl.errors import ConfigError

SCENARIOS = ("twisted_lz", "grover", "periodic", "periodic_optimized", "custom")
MIN_STEPS = 100

_MODEL_KEYS = {
    "twisted_lz": {"protocol": "gaussian", "delta_tau": None, "v_over_delta2": None, "endpoint": "adiabatic"},
    "grover": {"n_items": 10, "a0_tf": 20.0, "protocol": "protocol1", "k": 1.0},
    "periodic": {"h_over_delta": None, "omega_over_delta": 20.0, "target": "initial", "periods": 5.0},
    "periodic_optimized": {
        "h_over_delta": None,
        "omega_over_delta": 20.0,
        "target": "initial",
        "periods": 10.0,
        "quadrature_substeps": 32,
    },
    "custom": {"hamiltonian": None, "reference": [], "psi0": None, "target": None},
}

_POSITIVE = {"delta_tau", "v_over_delta2", "a0_tf", "k", "h_over_delta", "omega_over_delta", "periods", "n_items"}


@dataclass
class ScenarioConfig:
    scenario: str
    model: dict
    n_steps: Optional[int] = None
    horizon: Optional[tuple] = None
    csv: str = "result.csv"
    columns: Optional[list] = None
    sweep: Optional[dict] = None
    source: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)


def _number(value, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _complex_array(value, key: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=object)
        out = np.vectorize(lambda x: complex(str(x).replace(" ", "")), otypes=[complex])(arr)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: entries must be numbers or complex literals such as '1-2j'") from None
    if out.ndim != ndim:
        raise ConfigError(f"{key}: expected a {ndim}-d array, got shape {out.shape}")
    return out


def _terms(items, key: str, dim: int) -> list:
    if not isinstance(items, list):
        raise ConfigError(f"{key}: expected a list of terms")
    terms = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "matrix" not in item:
            raise ConfigError(f"{key}[{i}]: each term needs a 'matrix'")
        mat = _complex_array(item["matrix"], f"{key}[{i}].matrix", 2)
        if mat.shape != (dim, dim):
            raise ConfigError(f"{key}[{i}].matrix: shape {mat.shape} does not match psi0 dimension {dim}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise ConfigError(f"{key}[{i}].matrix is not Hermitian")
        coeff = str(item.get("coefficient", "1"))
        if coeff not in ("1", "t", "cos", "sin"):
            raise ConfigError(f"{key}[{i}].coefficient must be one of 1, t, cos, sin")
        omega = _number(item.get("omega", 0.0), f"{key}[{i}].omega")
        terms.append((mat, coeff, omega))
    return terms


def _validate_model(scenario: str, given: dict) -> dict:
    defaults = _MODEL_KEYS[scenario]
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown model key(s) for {scenario}: {sorted(unknown)}")
    model = {}
    for key, default in defaults.items():
        if key in given:
            model[key] = given[key]
        elif default is None:
            raise ConfigError(f"missing required model key '{key}' for scenario {scenario}")
        else:
            model[key] = default
    for key in _POSITIVE & set(model):
        model[key] = _number(model[key], key)
        if not model[key] > 0:
            raise ConfigError(f"{key} must be positive, got {model[key]!r}")
    if "n_items" in model:
        if model["n_items"] != int(model["n_items"]) or model["n_items"] < 3:
            raise ConfigError("n_items must be an integer >= 3")
        model["n_items"] = int(model["n_items"])
    if "quadrature_substeps" in model:
        model["quadrature_substeps"] = int(_number(model["quadrature_substeps"], "quadrature_substeps"))
    if scenario == "custom":
        psi0 = _complex_array(model["psi0"], "psi0", 1)
        target = _complex_array(model["target"], "target", 1)
        if psi0.size < 2 or target.size != psi0.size:
            raise ConfigError("psi0 and target must have the same dimension >= 2")
        for name, vec in (("psi0", psi0), ("target", target)):
            if abs(np.linalg.norm(vec) - 1) > 1e-6:
                raise ConfigError(f"{name} must be normalized")
        model["psi0"], model["target"] = psi0, target
        model["hamiltonian"] = _terms(model["hamiltonian"], "hamiltonian", psi0.size)
        model["reference"] = _terms(model["reference"] or [], "reference", psi0.size)
    return model


def _validate_sweep(sweep) -> dict:
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must be a mapping")
    out = {"jobs": int(_number(sweep.get("jobs", 1), "sweep.jobs"))}
    for axis, upper in (("delta_tau", 1.0), ("v_over_delta2", 4.0)):
        spec = sweep.get(axis, {}) or {}
        if not isinstance(spec, dict):
            raise ConfigError(f"sweep.{axis} must be a mapping with 'max' and 'count'")
        hi = _number(spec.get("max", upper), f"sweep.{axis}.max")
        count = spec.get("count", 20)
        if hi <= 0 or not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ConfigError(f"sweep.{axis}: need max > 0 and integer count >= 1")
        out[axis] = {"max": hi, "count": count}
    if out["jobs"] < 1:
        raise ConfigError("sweep.jobs must be >= 1")
    return out


def parse_config(data: Any, source: Optional[str] = None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    unknown = set(data) - {"scenario", "model", "grid", "output", "sweep"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    model = _validate_model(scenario, data.get("model") or {})

    grid = data.get("grid") or {}
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a mapping")
    n_steps = grid.get("n_steps")
    if n_steps is not None:
        if isinstance(n_steps, bool) or not isinstance(n_steps, int) or n_steps < MIN_STEPS:
            raise ConfigError(f"grid.n_steps must be an integer >= {MIN_STEPS}")
    horizon = grid.get("horizon")
    if horizon is not None:
        if not isinstance(horizon, (list, tuple)) or len(horizon) != 2:
            raise ConfigError("grid.horizon must be [t_start, t_end]")
        horizon = (_number(horizon[0], "grid.horizon"), _number(horizon[1], "grid.horizon"))
        if not horizon[1] > horizon[0]:
            raise ConfigError("grid.horizon must satisfy t_end > t_start")
    if scenario == "custom" and horizon is None:
        raise ConfigError("custom scenario requires grid.horizon")
    if scenario != "custom" and horizon is not None:
        raise ConfigError(f"grid.horizon applies to custom only; {scenario} derives its horizon from the model")

    output = data.get("output") or {}
    if not isinstance(output, dict):
        raise ConfigError("output must be a mapping")
    columns = output.get("columns")
    if columns is not None:
        from qsl.scenarios import CSV_COLUMNS

        bad = [c for c in columns if c not in CSV_COLUMNS]
        if bad:
            raise ConfigError(f"unknown output column(s): {bad}")

    sweep = data.get("sweep")
    if sweep is not None:
        if scenario != "twisted_lz":
            raise ConfigError("sweeps are defined for the twisted_lz scenario only")
        sweep = _validate_sweep(sweep)
    return ScenarioConfig(
        scenario, model, n_steps, horizon, str(output.get("csv", "result.csv")), columns, sweep, source, data
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}".splitlines()[0]) from None
    return parse_config(data, str(path))


EXAMPLE_CONFIGS = {
    "twisted_lz.yaml": """\
# Twisted Landau-Zener sweep through an avoided crossing.
# Rates and times are in units of the gap parameter delta (delta = 1).
scenario: twisted_lz
model:
  protocol: gaussian        # tanh_step | gaussian | none
  delta_tau: 0.1            # twist duration times delta
  v_over_delta2: 2.0        # sweep rate over delta squared
  endpoint: adiabatic       # adiabatic | diabatic states at the window edges
grid:
  # n_steps: 20001          # omit to choose steps automatically
output:
  csv: twisted_lz.csv
""",
    "grover.yaml": """\
# Adiabatic Grover search with a counterdiabatic reference. Units of A(0).
scenario: grover
model:
  n_items: 10
  a0_tf: 20.0               # A(0) times the total time
  protocol: protocol1       # protocol1 | protocol2 | linear
  k: 1.0
output:
  csv: grover.csv
""",
    "periodic.yaml": """\
# Periodically driven two-level system with the Floquet-Magnus reference.
scenario: periodic
model:
  h_over_delta: 0.2
  omega_over_delta: 20.0
  target: initial           # initial | y  ((1, i)/sqrt 2)
  periods: 5
grid:
  n_steps: 1001
output:
  csv: periodic.csv
""",
    "periodic_optimized.yaml": """\
# Per-time optimized constant references for the periodic drive.
scenario: periodic_optimized
model:
  h_over_delta: 0.2
  omega_over_delta: 20.0
  target: initial
  periods: 10
  quadrature_substeps: 32   # refinement of the integral between grid points
grid:
  n_steps: 201
output:
  csv: periodic_optimized.csv
""",
    "custom.yaml": """\
# Arbitrary H(t) = sum_j f_j(t) M_j with f_j in {1, t, cos(omega t), sin(omega t)}.
scenario: custom
model:
  psi0: [1, 0]
  target: [1, 0]
  hamiltonian:
    - {matrix: [[0.5, 0], [0, -0.5]], coefficient: "1"}
    - {matrix: [[0, 0.1], [0.1, 0]], coefficient: cos, omega: 3.0}
  reference:
    - {matrix: [[0.5, 0], [0, -0.5]], coefficient: "1"}
grid:
  horizon: [0.0, 10.0]
  n_steps: 2001
output:
  csv: custom.csv
""",
    "sweep.yaml": """\
# Scatter of final-time bounds over a (delta tau, v / delta^2) box.
scenario: twisted_lz
model:
  protocol: gaussian
  delta_tau: 0.1            # ignored by the sweep, kept for single runs
  v_over_delta2: 2.0
sweep:
  delta_tau: {max: 1.0, count: 20}
  v_over_delta2: {max: 4.0, count: 20}
  jobs: 1
output:
  csv: sweep.csv
""",
}
