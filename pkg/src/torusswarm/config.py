"""Trial configuration: flat key = value files, fail-closed parsing.

Configuration files are plain text: one `key = value` per line, blank lines
and `#` comments ignored. Unknown keys are an error. Every key mirrors a
TrialConfig field; defaults reproduce the nominal two-dimensional trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import ConfigError


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_sensing(raw: str) -> float:
    low = raw.strip().lower()
    if low in ("unlimited", "inf", "infinity"):
        return math.inf
    return float(raw)


@dataclass(frozen=True)
class TrialConfig:
    """Complete description of one co-simulation trial."""

    # geometry and discretization
    d: int = 2
    cells: int = 50
    # time stepping
    dt: float = 0.001
    steps: int = 200
    # agents
    agents: int = 100
    init: str = "random"             # random | lattice
    seed: int = 0
    # total mass carried by both levels (per-agent mass = mass / agents)
    mass: float = 100.0
    # interaction kernel
    kernel_strength: float = 0.05
    kernel_length_scale: float = 0.5
    kernel_family: str = "wrapped-gaussian-repulsive"
    sensing_radius: float = math.inf  # "unlimited" in files
    limit_physical_interactions: bool = False
    # target density
    target_concentration: float = 0.75
    target_center_x1: float = 0.0
    target_center_x2: float = 0.0
    target_mode: str = "static"      # static | evolving
    # continuum initial condition
    init_density: str = "uniform"    # uniform | target
    # density estimation
    kde_bandwidth: float = 0.3
    # control
    kp: float = 100.0
    modes: int = 0                   # 0 selects the full band n/2
    density_floor: float = 1e-6
    control_mode: str = "flux"       # flux | source
    # disturbance (step shape; onset < 0 selects half the horizon)
    disturbance_amplitude: float = 0.0
    disturbance_onset: float = -1.0
    # which levels to simulate
    legs: str = "both"               # both | discrete | continuous
    # outputs
    snapshot_stride: int = 0
    trajectory_stride: int = 0
    plots: bool = True
    backend: str = "auto"            # auto | compiled | python

    def validate(self) -> "TrialConfig":
        if self.d not in (1, 2):
            raise ConfigError(f"d must be 1 or 2, got {self.d}")
        if self.cells < 4 or self.cells % 2:
            raise ConfigError(f"cells must be even and >= 4, got {self.cells}")
        for name in ("dt", "mass", "kernel_length_scale", "kde_bandwidth",
                     "kp", "density_floor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("steps", "agents"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.kernel_strength < 0:
            raise ConfigError("kernel_strength must be >= 0")
        if not (self.sensing_radius > 0):
            raise ConfigError("sensing_radius must be > 0 or unlimited")
        if self.modes < 0 or (self.modes and self.modes > self.cells // 2):
            raise ConfigError(
                f"modes must be in [1, cells/2] or 0 for the full band")
        if self.init not in ("random", "lattice"):
            raise ConfigError(f"unknown init mode {self.init!r}")
        if self.target_mode not in ("static", "evolving"):
            raise ConfigError(f"unknown target_mode {self.target_mode!r}")
        if self.init_density not in ("uniform", "target"):
            raise ConfigError(f"unknown init_density {self.init_density!r}")
        if self.control_mode not in ("flux", "source"):
            raise ConfigError(f"unknown control_mode {self.control_mode!r}")
        if self.legs not in ("both", "discrete", "continuous"):
            raise ConfigError(f"unknown legs selection {self.legs!r}")
        if self.backend not in ("auto", "compiled", "python"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.snapshot_stride < 0 or self.trajectory_stride < 0:
            raise ConfigError("strides must be >= 0")
        return self

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @property
    def onset_time(self) -> float:
        if self.disturbance_onset < 0:
            return 0.5 * self.horizon
        return self.disturbance_onset

    @property
    def agent_mass(self) -> float:
        return self.mass / self.agents

    def with_updates(self, **kw) -> "TrialConfig":
        return replace(self, **kw).validate()


_PARSERS = {
    "d": int, "cells": int, "steps": int, "agents": int, "seed": int,
    "modes": int, "snapshot_stride": int, "trajectory_stride": int,
    "dt": float, "mass": float, "kernel_strength": float,
    "kernel_length_scale": float, "kde_bandwidth": float, "kp": float,
    "density_floor": float, "disturbance_amplitude": float,
    "disturbance_onset": float, "target_concentration": float,
    "target_center_x1": float, "target_center_x2": float,
    "sensing_radius": _parse_sensing,
    "limit_physical_interactions": _parse_bool, "plots": _parse_bool,
    "init": str, "kernel_family": str, "target_mode": str,
    "init_density": str, "control_mode": str, "legs": str, "backend": str,
}

assert set(_PARSERS) == {f.name for f in fields(TrialConfig)}


def parse_config_text(text: str, source: str = "<string>") -> TrialConfig:
    """Parse flat key = value text into a validated TrialConfig."""
    values = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {rawline!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    try:
        return TrialConfig(**values).validate()
    except ConfigError:
        raise
    except Exception as exc:  # dataclass-level type errors
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> TrialConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def dump_config(cfg: TrialConfig) -> str:
    """Render a config as parseable key = value text (resolved values)."""
    lines = []
    for f in fields(TrialConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = "unlimited" if (f.name == "sensing_radius" and math.isinf(val)) \
                else "%.17g" % val
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
