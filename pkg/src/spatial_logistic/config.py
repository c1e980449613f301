"""JSON run configuration."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, SpatialLogisticError
from .kernels import (
    Kernel,
    ModelParams,
    make_bump_kernel,
    make_gaussian_kernel,
    make_table_kernel,
    read_kernel_table,
)

KERNEL_KEYS = {
    "gaussian": {"kind", "sigma", "mass"},
    "bump": {"kind", "radius", "mass"},
    "custom-table": {"kind", "path", "table", "mass"},
}
TOP_KEYS = {"dimension", "model", "evolve", "stationary", "critical", "simulate", "seed", "threads", "backend"}
MODEL_KEYS = {"a_plus", "a_minus", "mortality"}
BLOCK_KEYS = {
    "evolve": {"t_end", "q0", "dt", "times", "grid", "indices"},
    "stationary": {"grid", "x_max", "n_x"},
    "critical": {"eps", "eps0", "n"},
    "simulate": {"eps", "L", "t_end", "replicates", "q0", "bins", "r_max", "record_every", "save_points"},
}
GRID_KEYS = {"r_max", "r_min", "order", "level"}


def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return obj


def _number(obj: dict, key: str, where: str, default=None, positive=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"missing {where}.{key}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{where}.{key} must be a finite number")
    if positive and val <= 0:
        raise ConfigError(f"{where}.{key} must be positive")
    return val


def build_kernel(spec: dict, dim: int, where: str, base_dir: Path) -> Kernel:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where} needs a 'kind'")
    kind = spec["kind"]
    if kind not in KERNEL_KEYS:
        raise ConfigError(f"{where}.kind must be one of {sorted(KERNEL_KEYS)}")
    _check_keys(spec, KERNEL_KEYS[kind], where)
    try:
        if kind == "gaussian":
            return make_gaussian_kernel(
                dim, _number(spec, "sigma", where, positive=True), _number(spec, "mass", where, 1.0, positive=True)
            )
        if kind == "bump":
            return make_bump_kernel(
                dim, _number(spec, "radius", where, 1.0, positive=True), _number(spec, "mass", where, 1.0, positive=True)
            )
        if dim != 1:
            raise ConfigError(f"{where}: custom-table kernels are one-dimensional")
        if ("path" in spec) == ("table" in spec):
            raise ConfigError(f"{where}: give exactly one of 'path' or 'table'")
        if "path" in spec:
            x, a = read_kernel_table((base_dir / spec["path"]).resolve())
        else:
            arr = np.asarray(spec["table"], dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ConfigError(f"{where}.table must be a list of [x, a] pairs")
            order = np.argsort(arr[:, 0])
            x, a = arr[order, 0], arr[order, 1]
        mass = _number(spec, "mass", where, positive=True) if "mass" in spec else None
        return make_table_kernel(x, a, mass)
    except ConfigError:
        raise
    except (SpatialLogisticError, ValueError, OSError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    dim: int
    params: ModelParams
    blocks: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    backend: str = "duhamel"

    def block(self, name: str) -> dict:
        return dict(self.blocks.get(name, {}))


def parse_config(doc: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate a config document and build its :class:`ModelParams`."""
    base_dir = Path(base_dir)
    _check_keys(doc, TOP_KEYS, "config")
    dim = doc.get("dimension")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ConfigError("dimension must be a positive integer")
    model = _check_keys(doc.get("model"), MODEL_KEYS, "model")
    for key in MODEL_KEYS:
        if key not in model:
            raise ConfigError(f"missing model.{key}")
    ap = build_kernel(model["a_plus"], dim, "model.a_plus", base_dir)
    am = build_kernel(model["a_minus"], dim, "model.a_minus", base_dir)
    m = _number(model, "mortality", "model", positive=True)
    blocks = {}
    for name, allowed in BLOCK_KEYS.items():
        if name in doc:
            blk = _check_keys(doc[name], allowed, name)
            if "grid" in blk:
                _check_keys(blk["grid"], GRID_KEYS, f"{name}.grid")
            blocks[name] = blk
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads must be a positive integer")
    backend = doc.get("backend", "duhamel")
    if backend not in ("duhamel", "rk4"):
        raise ConfigError("backend must be 'duhamel' or 'rk4'")
    return RunConfig(dim, ModelParams(ap, am, m), blocks, seed, threads, backend)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(doc, path.parent)
