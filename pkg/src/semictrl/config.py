"""Scenario files: schema validation, normalization and system construction.

A scenario file is YAML (JSON is accepted too). It holds either a single
scenario mapping or ``scenarios: [...]``. Normalization fills every
default, so ``parse(serialize(s)) == s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import yaml

from .errors import ConfigError
from .mild import PicardConfig
from .model import (
    DenseMatrix,
    DiagonalSpectral,
    PointwisePolynomial,
    SemilinearSystem,
    TimeGrid,
    ZeroMap,
    dirichlet_laplacian,
)
from .verify import ALL_CHECKS

EXPERIMENTS = ("simulate", "steer", "probe", "verify", "gramian")
STOCHASTIC = ("probe", "verify")
_REQUIRED = object()


def _field(d, key, path, kind, default=_REQUIRED):
    p = f"{path}.{key}" if path else key
    if key not in d:
        if default is _REQUIRED:
            raise ConfigError(p, "required field missing")
        return default
    return _coerce(d[key], kind, p)


def _coerce(v, kind, path):
    try:
        if kind is float:
            if isinstance(v, bool):
                raise TypeError
            out = float(v)
            if not np.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise TypeError
            return int(v)
        if kind is str:
            if not isinstance(v, str):
                raise TypeError
            return v
        if kind is bool:
            if not isinstance(v, bool):
                raise TypeError
            return v
        if kind == "vector":
            out = [float(x) for x in v]
            if not out or not all(np.isfinite(out)):
                raise ValueError
            return out
        if kind == "matrix":
            rows = [[float(x) for x in row] for row in v]
            if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
                raise ValueError
            return rows
        if kind == "mapping":
            if not isinstance(v, dict):
                raise TypeError
            return v
    except (TypeError, ValueError):
        pass
    label = kind if isinstance(kind, str) else kind.__name__
    raise ConfigError(path, f"expected {label}, got {v!r}")


def _check_keys(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _positive(v, path, strict=True):
    if (v <= 0) if strict else (v < 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'nonnegative'}, got {v}")
    return v


def _choice(v, options, path):
    if v not in options:
        raise ConfigError(path, f"must be one of {list(options)}, got {v!r}")
    return v


# -- sections --------------------------------------------------------------------


def _generator(d, path):
    kind = _choice(_field(d, "kind", path, str), ("diagonal", "dense", "dirichlet_laplacian"), f"{path}.kind")
    if kind == "diagonal":
        _check_keys(d, ("kind", "eigenvalues"), path)
        return {"kind": kind, "eigenvalues": _field(d, "eigenvalues", path, "vector")}
    if kind == "dense":
        _check_keys(d, ("kind", "matrix"), path)
        mat = _field(d, "matrix", path, "matrix")
        if len(mat) != len(mat[0]):
            raise ConfigError(f"{path}.matrix", "generator matrix must be square")
        return {"kind": kind, "matrix": mat}
    _check_keys(d, ("kind", "n_modes", "length", "diffusivity"), path)
    return {
        "kind": kind,
        "n_modes": _positive(_field(d, "n_modes", path, int), f"{path}.n_modes"),
        "length": _positive(_field(d, "length", path, float, 1.0), f"{path}.length"),
        "diffusivity": _positive(_field(d, "diffusivity", path, float, 1.0), f"{path}.diffusivity"),
    }


def _gen_dim(g):
    if g["kind"] == "diagonal":
        return len(g["eigenvalues"])
    if g["kind"] == "dense":
        return len(g["matrix"])
    return g["n_modes"]


def _input(d, path, n):
    kind = _choice(_field(d, "kind", path, str, "identity"), ("identity", "matrix", "zero"), f"{path}.kind")
    if kind == "identity":
        _check_keys(d, ("kind",), path)
        return {"kind": kind}
    if kind == "zero":
        _check_keys(d, ("kind", "inputs"), path)
        return {"kind": kind, "inputs": _positive(_field(d, "inputs", path, int, 1), f"{path}.inputs")}
    _check_keys(d, ("kind", "matrix"), path)
    mat = _field(d, "matrix", path, "matrix")
    if len(mat) != n:
        raise ConfigError(f"{path}.matrix", f"B needs {n} rows to match the state dimension, got {len(mat)}")
    return {"kind": kind, "matrix": mat}


def _nonlinearity(d, path):
    kind = _choice(_field(d, "kind", path, str, "zero"), ("zero", "polynomial"), f"{path}.kind")
    if kind == "zero":
        _check_keys(d, ("kind",), path)
        return {"kind": kind}
    _check_keys(d, ("kind", "coefficients", "basis"), path)
    return {
        "kind": kind,
        "coefficients": _field(d, "coefficients", path, "vector"),
        "basis": _choice(_field(d, "basis", path, str, "identity"), ("identity", "sine"), f"{path}.basis"),
    }


def _system(d, path="system"):
    d = _coerce(d, "mapping", path)
    _check_keys(d, ("generator", "input", "nonlinearity"), path)
    gen = _generator(_coerce(_field(d, "generator", path, "mapping"), "mapping", f"{path}.generator"), f"{path}.generator")
    n = _gen_dim(gen)
    return {
        "generator": gen,
        "input": _input(_field(d, "input", path, "mapping", {}), f"{path}.input", n),
        "nonlinearity": _nonlinearity(_field(d, "nonlinearity", path, "mapping", {}), f"{path}.nonlinearity"),
    }


def _grid(d, path="grid"):
    d = _coerce(d, "mapping", path)
    _check_keys(d, ("tau", "n_steps"), path)
    return {
        "tau": _positive(_field(d, "tau", path, float), f"{path}.tau"),
        "n_steps": _positive(_field(d, "n_steps", path, int), f"{path}.n_steps"),
    }


def _picard(d, path="picard"):
    d = _coerce(d, "mapping", path)
    _check_keys(d, ("tol", "max_iterations", "blowup_threshold", "max_subinterval_halvings"), path)
    base = PicardConfig()
    return {
        "tol": _positive(_field(d, "tol", path, float, base.tol), f"{path}.tol"),
        "max_iterations": _positive(_field(d, "max_iterations", path, int, base.max_iterations), f"{path}.max_iterations"),
        "blowup_threshold": _positive(
            _field(d, "blowup_threshold", path, float, base.blowup_threshold), f"{path}.blowup_threshold"
        ),
        "max_subinterval_halvings": _positive(
            _field(d, "max_subinterval_halvings", path, int, base.max_subinterval_halvings),
            f"{path}.max_subinterval_halvings",
            strict=False,
        ),
    }


def _vector_of(v, n, path):
    v = _coerce(v, "vector", path)
    if len(v) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(v)}")
    return v


def _params(experiment, d, path, n, m):
    d = _coerce(d, "mapping", path)
    if experiment == "simulate":
        _check_keys(d, ("control", "x0"), path)
        ctrl = _coerce(d.get("control", {"kind": "zero"}), "mapping", f"{path}.control")
        kind = _choice(_field(ctrl, "kind", f"{path}.control", str), ("zero", "constant"), f"{path}.control.kind")
        if kind == "zero":
            _check_keys(ctrl, ("kind",), f"{path}.control")
            control = {"kind": "zero"}
        else:
            _check_keys(ctrl, ("kind", "value"), f"{path}.control")
            control = {"kind": "constant", "value": _vector_of(_field(ctrl, "value", f"{path}.control", "vector"), m, f"{path}.control.value")}
        x0 = _vector_of(d["x0"], n, f"{path}.x0") if "x0" in d else [0.0] * n
        return {"control": control, "x0": x0}
    if experiment == "steer":
        _check_keys(d, ("target", "mode", "tol", "max_iter"), path)
        return {
            "target": _vector_of(_field(d, "target", path, "vector"), n, f"{path}.target"),
            "mode": _choice(_field(d, "mode", path, str, "frozen"), ("frozen", "full_newton"), f"{path}.mode"),
            "tol": _positive(_field(d, "tol", path, float, 1e-10), f"{path}.tol"),
            "max_iter": _positive(_field(d, "max_iter", path, int, 50), f"{path}.max_iter"),
        }
    if experiment == "probe":
        _check_keys(d, ("n_directions", "directions", "radii", "tol", "max_iter"), path)
        out = {}
        if "directions" in d:
            dirs = _coerce(d["directions"], "matrix", f"{path}.directions")
            for i, row in enumerate(dirs):
                _vector_of(row, n, f"{path}.directions[{i}]")
                if abs(np.linalg.norm(row) - 1.0) > 1e-10:
                    raise ConfigError(f"{path}.directions[{i}]", "direction must be unit-norm")
            out["directions"] = dirs
        else:
            out["n_directions"] = _positive(_field(d, "n_directions", path, int), f"{path}.n_directions")
        radii = _field(d, "radii", path, "vector")
        for i, r in enumerate(radii):
            _positive(r, f"{path}.radii[{i}]")
        out.update(
            radii=radii,
            tol=_positive(_field(d, "tol", path, float, 1e-10), f"{path}.tol"),
            max_iter=_positive(_field(d, "max_iter", path, int, 50), f"{path}.max_iter"),
        )
        return out
    if experiment == "verify":
        keys = (
            "checks",
            "control_radius",
            "n_pairs",
            "theorem7_pairs",
            "ball_radius",
            "n_samples",
            "frechet_base",
            "frechet_scales",
            "gronwall_random",
        )
        _check_keys(d, keys, path)
        checks = d.get("checks", list(ALL_CHECKS))
        if not isinstance(checks, list):
            raise ConfigError(f"{path}.checks", "expected a list")
        for i, c in enumerate(checks):
            _choice(c, ALL_CHECKS, f"{path}.checks[{i}]")
        n_samples = _field(d, "n_samples", path, int, 1000)
        if n_samples < 100:
            raise ConfigError(f"{path}.n_samples", "needs at least 100 samples")
        scales = _field(d, "frechet_scales", path, "vector", [2.0**-k for k in range(3, 11)])
        for i, s in enumerate(scales):
            _positive(s, f"{path}.frechet_scales[{i}]")
        return {
            "checks": list(checks),
            "control_radius": _positive(_field(d, "control_radius", path, float, 0.1), f"{path}.control_radius"),
            "n_pairs": _positive(_field(d, "n_pairs", path, int, 200), f"{path}.n_pairs"),
            "theorem7_pairs": _positive(_field(d, "theorem7_pairs", path, int, 20), f"{path}.theorem7_pairs"),
            "ball_radius": _positive(_field(d, "ball_radius", path, float, 0.0), f"{path}.ball_radius", strict=False),
            "n_samples": n_samples,
            "frechet_base": _field(d, "frechet_base", path, float, 0.0),
            "frechet_scales": scales,
            "gronwall_random": _positive(_field(d, "gronwall_random", path, int, 10), f"{path}.gronwall_random", strict=False),
        }
    _check_keys(d, (), path)
    return {}


@dataclass
class Scenario:
    name: str
    experiment: str
    system: Dict[str, Any]
    grid: Dict[str, Any]
    picard: Dict[str, Any] = field(default_factory=lambda: _picard({}))
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d, path="") -> "Scenario":
        d = _coerce(d, "mapping", path or "scenario")
        experiment = _choice(_field(d, "experiment", path, str), EXPERIMENTS, _join(path, "experiment"))
        _check_keys(d, ("name", "experiment", "system", "grid", "picard", "seed", experiment), path)
        name = _field(d, "name", path, str)
        if not name:
            raise ConfigError(_join(path, "name"), "must be nonempty")
        system = _system(_field(d, "system", path, "mapping"), _join(path, "system"))
        n = _gen_dim(system["generator"])
        m = _input_dim(system["input"], n)
        if experiment in STOCHASTIC and "seed" not in d:
            raise ConfigError(_join(path, "seed"), f"required for the {experiment} experiment")
        return cls(
            name=name,
            experiment=experiment,
            system=system,
            grid=_grid(_field(d, "grid", path, "mapping"), _join(path, "grid")),
            picard=_picard(_field(d, "picard", path, "mapping", {}), _join(path, "picard")),
            params=_params(experiment, d.get(experiment, {}), _join(path, experiment), n, m),
            seed=_field(d, "seed", path, int, 0),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "experiment": self.experiment,
            "seed": self.seed,
            "system": self.system,
            "grid": self.grid,
            "picard": self.picard,
            self.experiment: self.params,
        }

    def with_seed(self, seed) -> "Scenario":
        d = self.to_dict()
        d["seed"] = int(seed)
        return Scenario.from_dict(d)

    # construction of the numerical objects

    @property
    def state_dim(self):
        return _gen_dim(self.system["generator"])

    @property
    def input_dim(self):
        return _input_dim(self.system["input"], self.state_dim)

    def build_system(self) -> SemilinearSystem:
        g = self.system["generator"]
        if g["kind"] == "diagonal":
            gen = DiagonalSpectral(tuple(g["eigenvalues"]))
        elif g["kind"] == "dense":
            gen = DenseMatrix(tuple(map(tuple, g["matrix"])))
        else:
            gen = dirichlet_laplacian(g["n_modes"], g["length"], g["diffusivity"])
        n = gen.dim
        inp = self.system["input"]
        if inp["kind"] == "identity":
            B = np.eye(n)
        elif inp["kind"] == "zero":
            B = np.zeros((n, inp["inputs"]))
        else:
            B = np.array(inp["matrix"])
        nl = self.system["nonlinearity"]
        if nl["kind"] == "zero":
            f = ZeroMap(n)
        else:
            f = PointwisePolynomial(tuple(nl["coefficients"]), n, nl["basis"])
        return SemilinearSystem(gen, B, f)

    def build_grid(self) -> TimeGrid:
        return TimeGrid(self.grid["tau"], self.grid["n_steps"])

    def build_picard(self) -> PicardConfig:
        return PicardConfig(**self.picard)


def _join(path, key):
    return f"{path}.{key}" if path else key


def _input_dim(inp, n):
    if inp["kind"] == "identity":
        return n
    if inp["kind"] == "zero":
        return inp["inputs"]
    return len(inp["matrix"][0])


# -- files -------------------------------------------------------------------------


def parse_scenarios(text: str) -> List[Scenario]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from None
    if data is None:
        raise ConfigError("", "empty configuration")
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a mapping")
    if "scenarios" in data:
        _check_keys(data, ("scenarios",), "")
        items = data["scenarios"] or []
        if not isinstance(items, list):
            raise ConfigError("scenarios", "expected a list")
        out = [Scenario.from_dict(item, f"scenarios[{i}]") for i, item in enumerate(items)]
    else:
        out = [Scenario.from_dict(data)]
    seen = set()
    for i, s in enumerate(out):
        if s.name in seen:
            raise ConfigError(f"scenarios[{i}].name", f"duplicate scenario name {s.name!r}")
        seen.add(s.name)
    return out


def serialize_scenario(s: Scenario) -> str:
    return yaml.safe_dump(s.to_dict(), sort_keys=False)


def parse_scenario(text: str) -> Scenario:
    items = parse_scenarios(text)
    if len(items) != 1:
        raise ConfigError("", f"expected one scenario, found {len(items)}")
    return items[0]


def shipped_scenarios() -> Dict[str, Path]:
    base = resources.files("semictrl") / "data" / "scenarios"
    return {p.name[: -len(".yaml")]: Path(str(p)) for p in sorted(base.iterdir(), key=lambda p: p.name) if p.name.endswith(".yaml")}


def resolve_config_path(ref: str) -> Path:
    """A file path, or the name of a shipped scenario."""
    p = Path(ref)
    if p.exists():
        return p
    shipped = shipped_scenarios()
    if ref in shipped:
        return shipped[ref]
    raise ConfigError("", f"no such config file or shipped scenario: {ref}")


def load_scenarios(ref: str) -> List[Scenario]:
    return parse_scenarios(resolve_config_path(ref).read_text())


def load_shipped(name: str) -> Scenario:
    return parse_scenario(shipped_scenarios()[name].read_text())
