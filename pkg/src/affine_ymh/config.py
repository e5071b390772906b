"""Scenario configs: JSON files describing a torus, a flat Higgs bundle and solver options."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bundle import FlatHiggsBundle, make_bundle
from .errors import ConfigError
from .geometry import AffineTorus, conformal_sine, make_torus, separable_sine
from .solver import SolverOptions


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("affine_ymh").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def encode_matrix(m) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    # adding 0.0 turns -0.0 into 0.0 so reports diff cleanly
    return [[[float(z.real) + 0.0, float(z.imag) + 0.0] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _format_path(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def validate_against(data, schema_name: str, source: str = "<config>"):
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        raise ConfigError(f"{source}: field {_format_path(error.absolute_path)}: {error.message}")


@dataclass
class ScenarioConfig:
    name: str
    torus: AffineTorus
    bundle: FlatHiggsBundle
    solver: SolverOptions
    initial_metric: np.ndarray | None = None
    outputs: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _metric_spec(spec, dim):
    if isinstance(spec, dict):
        if spec["family"] == "conformal_sine":
            return conformal_sine(dim, spec.get("amplitude", 1.0), spec.get("axis", 0))
        amplitudes = spec.get("amplitudes", [1.0] * dim)
        if len(amplitudes) != dim:
            raise ConfigError(f"field torus.metric.amplitudes: expected {dim} values, got {len(amplitudes)}")
        return separable_sine(amplitudes)
    return np.asarray(spec, dtype=float)


def build_torus(spec: dict, grid: int | None = None) -> AffineTorus:
    dim = spec["dim"]
    return make_torus(dim, grid or spec["grid"], _metric_spec(spec["metric"], dim), spec.get("nu", 1.0))


def build_bundle(spec: dict) -> FlatHiggsBundle:
    rank = spec["rank"]
    try:
        rho = [decode_matrix(m) for m in spec["monodromy"]]
        phi = [decode_matrix(m) for m in spec["higgs"]]
    except ValueError as exc:
        raise ConfigError(f"field bundle: ragged matrix ({exc})") from exc
    for name, mats in (("monodromy", rho), ("higgs", phi)):
        for k, m in enumerate(mats):
            if m.shape != (rank, rank):
                raise ConfigError(f"field bundle.{name}[{k}]: expected {rank}x{rank}, got {m.shape}")
    return make_bundle(rank, rho, phi)


def parse_config(data: dict, source: str = "<config>", grid: int | None = None, eps_min: float | None = None) -> ScenarioConfig:
    """Validate and build; structural problems raise ConfigError, mathematical ones their own error."""
    validate_against(data, "config", source)
    torus = build_torus(data["torus"], grid)
    bundle = build_bundle(data["bundle"])
    if bundle.dim != torus.dim:
        raise ConfigError(
            f"field bundle.monodromy: {bundle.dim} matrices for a torus of dimension {torus.dim}"
        )
    solver_kw = dict(data.get("solver", {}))
    if eps_min is not None:
        solver_kw["eps_min"] = eps_min
    known = {f.name for f in fields(SolverOptions)}
    try:
        opts = SolverOptions(**{k: v for k, v in solver_kw.items() if k in known})
    except ValueError as exc:
        raise ConfigError(f"field solver: {exc}") from exc
    H_init = None
    if "initial_metric" in data:
        H_init = decode_matrix(data["initial_metric"])
        if H_init.shape != (bundle.rank, bundle.rank):
            raise ConfigError(f"field initial_metric: expected {bundle.rank}x{bundle.rank}")
    return ScenarioConfig(
        data.get("name", Path(source).stem), torus, bundle, opts, H_init, data.get("outputs", {}), data
    )


def load_config(path, grid: int | None = None, eps_min: float | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return parse_config(data, str(path), grid, eps_min)


def scenario_dict(name: str, bundle: FlatHiggsBundle, grid: int = 32, metric=None, nu: float = 1.0) -> dict:
    """Config dict for a bundle on T^n with the given metric (default: identity)."""
    n = bundle.dim
    if metric is None:
        metric = np.eye(n).tolist()
    return {
        "name": name,
        "torus": {"dim": n, "grid": grid, "metric": metric, "nu": nu},
        "bundle": {
            "rank": bundle.rank,
            "monodromy": [encode_matrix(m) for m in bundle.monodromy],
            "higgs": [encode_matrix(p) for p in bundle.higgs],
        },
    }
