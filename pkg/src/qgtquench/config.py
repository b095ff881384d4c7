"""Run configuration: defaults, then a JSON file, then command-line flags."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import __version__, models
from .chern import NORMALIZATIONS, SphereGrid
from .geometry import GAUGES
from .models import ModelSpec
from .quench import TIME_UNITS, Schedule

# fields that never change results and are left out of the run id
_NON_SEMANTIC = ("threads", "out")


class ConfigError(ValueError):
    pass


def _default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass
class RunConfig:
    # model
    family: str = "dirac3d-eff"
    mass: float | None = None
    sign: int = 1
    frozen: dict | None = None
    gauge: str | None = None
    # quench protocol
    delta_lambda: float | None = None
    T: float = 0.001
    time_unit: str = "two-pi"
    substeps: int = 100
    schedule: str = "linear"
    # integration
    invariant: str = "real"
    pipeline: str = "metric"
    source: str = "quench"
    normalization: str = "oracle-calibrated"
    grid: list | None = None
    rule: str = "gauss"
    # metric sweeps
    preset: str | None = None
    fixed: list | None = None
    sweep_axis: int = 0
    sweep_values: list | None = None
    components: list | None = None
    # Chern sweeps
    sweep_param: str = "T"
    sweep_list: list | None = None
    # validation
    quick: bool = False
    corrupt: str | None = None
    # plumbing
    seed: int = 0
    threads: int = field(default_factory=_default_threads)
    out: str = "runs"

    def model_spec(self) -> ModelSpec:
        data: dict[str, Any] = {"family": self.family, "sign": self.sign}
        if self.mass is not None:
            data["mass"] = self.mass
        if self.frozen:
            data["frozen"] = self.frozen
        return ModelSpec.from_dict(data)

    def schedule_obj(self) -> Schedule:
        if self.schedule == "sudden":
            return Schedule.sudden()
        return Schedule("linear", self.T, self.substeps, self.time_unit)

    def grid_obj(self, kind: str, mode: str) -> SphereGrid:
        if self.grid is None:
            return SphereGrid.default(kind, mode, self.rule)
        return SphereGrid(kind, tuple(self.grid), self.rule)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def semantic_dict(self) -> dict:
        d = self.to_dict()
        for k in _NON_SEMANTIC:
            d.pop(k)
        return d

    def run_id(self, command: str) -> str:
        payload = json.dumps(
            {"command": command, "config": self.semantic_dict(), "version": __version__},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


FIELDS = {f.name for f in dataclasses.fields(RunConfig)}
_NUMERIC = ("delta_lambda", "T", "mass")
_NUMERIC_LISTS = ("fixed", "sweep_values", "sweep_list")
_PI_EXPR = re.compile(r"^\s*([-+]?[0-9.]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


def parse_number(value) -> float:
    """Float or a multiple of pi such as ``"pi/100"`` or ``"3*pi/4"``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
        m = _PI_EXPR.match(value)
        if m:
            head = m.group(1)
            factor = float(head) if head not in ("", "+", "-") else (-1.0 if head == "-" else 1.0)
            return factor * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    raise ConfigError(f"cannot read {value!r} as a number (use e.g. 0.01 or 'pi/100')")


def _coerce(layer: Mapping) -> dict:
    out = dict(layer)
    for key in _NUMERIC:
        if out.get(key) is not None:
            out[key] = parse_number(out[key])
    for key in _NUMERIC_LISTS:
        if out.get(key) is not None:
            if not isinstance(out[key], (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            out[key] = [parse_number(v) for v in out[key]]
    return out


def load_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def merge(*layers: Mapping | None) -> RunConfig:
    """Later layers win; ``None`` values in a layer mean "not set"."""
    values: dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        unknown = sorted(set(layer) - FIELDS)
        if unknown:
            raise ConfigError(
                f"unknown config key(s) {unknown}; valid keys are {sorted(FIELDS)}"
            )
        values.update({k: v for k, v in _coerce(layer).items() if v is not None})
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(cfg: RunConfig) -> None:
    _need(cfg.family in models.FAMILIES and cfg.family != "custom",
          f"family must be one of {[f for f in models.FAMILIES if f != 'custom']}, got {cfg.family!r}")
    _need(cfg.sign in (1, -1), f"sign must be 1 or -1, got {cfg.sign!r}")
    _need(cfg.gauge is None or cfg.gauge in GAUGES, f"gauge must be one of {GAUGES}")
    _need(cfg.delta_lambda is None or (isinstance(cfg.delta_lambda, (int, float))
          and math.isfinite(cfg.delta_lambda) and cfg.delta_lambda > 0),
          "delta_lambda must be a positive number")
    _need(isinstance(cfg.T, (int, float)) and math.isfinite(cfg.T) and cfg.T >= 0,
          "T must be a non-negative number")
    _need(cfg.time_unit in TIME_UNITS, f"time_unit must be one of {tuple(TIME_UNITS)}")
    _need(isinstance(cfg.substeps, int) and cfg.substeps >= 1, "substeps must be an integer >= 1")
    _need(cfg.schedule in ("sudden", "linear"), "schedule must be 'sudden' or 'linear'")
    _need(cfg.invariant in ("real", "second"), "invariant must be 'real' or 'second'")
    _need(cfg.pipeline in ("metric", "curvature"), "pipeline must be 'metric' or 'curvature'")
    _need(cfg.pipeline == "metric" or cfg.source != "quench",
          "the curvature pipeline has no quench source; use pipeline 'metric'")
    _need(cfg.source in ("analytic", "fd", "quench"), "source must be analytic, fd or quench")
    _need(cfg.normalization in NORMALIZATIONS, f"normalization must be one of {NORMALIZATIONS}")
    _need(cfg.rule in ("gauss", "midpoint"), "rule must be 'gauss' or 'midpoint'")
    _need(cfg.grid is None or (isinstance(cfg.grid, list) and all(isinstance(c, int) and c > 0 for c in cfg.grid)),
          "grid must be a list of positive integers")
    _need(cfg.sweep_param in ("T", "delta_lambda"), "sweep_param must be 'T' or 'delta_lambda'")
    _need(cfg.sweep_list is None or (isinstance(cfg.sweep_list, list) and len(cfg.sweep_list) > 0),
          "sweep_list must be a non-empty list")
    _need(isinstance(cfg.threads, int) and cfg.threads >= 1, "threads must be an integer >= 1")
    _need(isinstance(cfg.seed, int), "seed must be an integer")
    from .presets import PRESETS

    _need(cfg.preset is None or cfg.preset in PRESETS, f"preset must be one of {sorted(PRESETS)}")
    _need(cfg.components is None or (isinstance(cfg.components, list) and all(
        isinstance(c, list) and len(c) == 4 and all(isinstance(i, int) and i >= 0 for i in c)
        for c in cfg.components)), "components must be a list of [mu, nu, j, jprime] index lists")
    _need(cfg.corrupt in (None, "dirac-algebra"), "corrupt supports only 'dirac-algebra'")
    try:
        cfg.model_spec()
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
