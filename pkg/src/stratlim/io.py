"""Flat ``key = value`` config files, deterministic JSON and run manifests.

Config files hold one assignment per line; ``#`` starts a comment.  Keys
are the flat names listed in :data:`CONFIG_KEYS`; values are parsed with
the type of the default.  Example::

    # d=1 heat benchmark
    dim = 1
    side = 10.0
    n_points = 1024
    dt = 1.25e-4
    eps_values = 0.4, 0.2, 0.1, 0.05
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import GridSpec
from .pde_solver import InitialCondition, SimConfig
from .random_field import CorrelationModel

__all__ = [
    "CONFIG_KEYS",
    "ConfigError",
    "parse_config_text",
    "load_config",
    "build_sim_config",
    "dump_json",
    "write_json",
    "RunManifest",
]


class ConfigError(ValueError):
    pass


# name -> (default, help).  The type of the default drives parsing.
CONFIG_KEYS: dict[str, tuple[object, str]] = {
    "dim": (1, "spatial dimension d"),
    "side": (10.0, "box side L"),
    "n_points": (1024, "grid points per axis N (power of two)"),
    "m": (2, "order of the operator (even, > d)"),
    "T": (0.5, "final time"),
    "dt": (1.25e-4, "time step"),
    "scheme": ("splitting", "solver: splitting or duhamel"),
    "n_terms": (10, "Duhamel series terms"),
    "n_saves": (1, "snapshots saved along the trajectory"),
    "u0_kind": ("gaussian", "initial data: gaussian, indicator or point"),
    "u0_width": (0.0, "initial data width (0 means L/40)"),
    "correlation": ("gaussian", "correlation model: gaussian or sech"),
    "length_scale": (1.0, "correlation length"),
    "sigma": (1.0, "noise strength sigma (sqrt of the spectrum at 0)"),
    "eps_values": ((0.4, 0.2, 0.1, 0.05), "oscillation scales, comma separated"),
    "realizations": (200, "Monte-Carlo realizations"),
    "master_seed": (7, "master RNG seed"),
    "batch_size": (25, "realizations solved together"),
    "sentinel_realizations": (50, "realizations rerun on the refined grid (0 disables)"),
}


def _parse_value(key: str, raw: str):
    default = CONFIG_KEYS[key][0]
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file at ``path``, then ``overrides`` (``None`` values skipped)."""
    cfg = {k: v[0] for k, v in CONFIG_KEYS.items()}
    if path is not None:
        cfg.update(parse_config_text(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {k!r}")
        cfg[k] = _parse_value(k, v) if isinstance(v, str) else v
    return cfg


def build_sim_config(cfg: dict) -> SimConfig:
    grid = GridSpec(int(cfg["dim"]), float(cfg["side"]), int(cfg["n_points"]))
    model = CorrelationModel.with_sigma(
        float(cfg["sigma"]), kind=cfg["correlation"],
        length_scale=float(cfg["length_scale"]), dim=grid.dim,
    )
    width = float(cfg["u0_width"]) or None
    return SimConfig(
        grid=grid, m=int(cfg["m"]), T=float(cfg["T"]), dt=float(cfg["dt"]),
        u0=InitialCondition(cfg["u0_kind"], width), model=model,
        scheme=cfg["scheme"], n_saves=int(cfg["n_saves"]), n_terms=int(cfg["n_terms"]),
    )


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def write_json(path, obj):
    Path(path).write_text(dump_json(obj))


@dataclass
class RunManifest:
    """Provenance of one CLI run; the only place wall-clock data is stored."""

    subcommand: str
    config_digest: str
    master_seed: int | None
    outputs: list[str] = field(default_factory=list)
    code_version: str = __version__
    started: float = field(default_factory=time.time)
    wall_clock: float | None = None

    def finish(self):
        self.wall_clock = time.time() - self.started

    def to_json(self) -> dict:
        return {
            "schema": "run_manifest/1",
            "subcommand": self.subcommand,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "code_version": self.code_version,
            "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(self.started)),
            "wall_clock_seconds": self.wall_clock,
            "outputs": self.outputs,
        }
