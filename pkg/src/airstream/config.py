"""INI scenario files for the simulator and the analytic solver.

A scenario file has up to five sections::

    [grid]
    L = 5
    M = 2
    eta = 0.5
    cell_size = 5.0
    safety_radius = 1.0
    slot_seconds = 2.5
    segment_start = 0, 0
    segment_end = 0, 110          ; cell units; length/S gives the level count
    x_extent = 5
    no_fly =                      ; optional: x0,y0,x1,y1 [; x0,y0,x1,y1 ...]

    [arrivals]
    lambda = 0.2
    lambda_e = 0.0

    [exogenous]                   ; only read when lambda_e > 0
    level = 2
    offset = 0
    in_plane = true

    [stop]
    uas = 1200                    ; either (or both) of uas / slots
    slots =

    [run]
    seed = 1
    warmup =                      ; slots excluded from averages (default Ye*S)
    record_events = false

    [schedule]                    ; optional per-level M overrides
    2 = 4

Anything omitted falls back to the defaults above.  ``load_config`` reads a
file, ``apply_overrides`` folds in command-line overrides, and
``simulation_scenario`` / ``analytic_scenario`` build runnable objects.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .engine import Scenario
from .analytics import AnalyticScenario
from .grid import DesignParams, Grid, GridSpec, build_grid


class ConfigError(ValueError):
    """Raised when a scenario file or an override is invalid."""


#: Shipped baseline scenario file (moderate load, 10 levels, M=3).
BASELINE_SCENARIO = os.path.join(os.path.dirname(__file__),
                                 "scenarios", "baseline.ini")


@dataclass
class RunConfig:
    """Parsed scenario file plus any command-line overrides."""

    L: int = 5
    M: int = 3
    eta: float = 0.5
    cell_size: float = 5.0
    safety_radius: float = 1.0
    slot_seconds: float = 2.5
    segment_start: Tuple[float, float] = (0.0, 0.0)
    segment_end: Tuple[float, float] = (0.0, 110.0)
    x_extent: int = 5
    no_fly: Tuple[Tuple[float, float, float, float], ...] = ()
    lam: float = 0.2
    lam_e: float = 0.0
    exo_level: int = 2
    exo_offset: int = 0
    exo_in_plane: bool = True
    max_uas: Optional[int] = 1200
    max_slots: Optional[int] = None
    seed: int = 1
    warmup: Optional[int] = None
    record_events: bool = False
    M_schedule: Dict[int, int] = field(default_factory=dict)

    def build_grid(self) -> Grid:
        params = DesignParams(
            L=self.L, M=self.M, eta=self.eta, cell_size=self.cell_size,
            safety_radius=self.safety_radius, slot_seconds=self.slot_seconds,
        )
        return build_grid(GridSpec(
            segment_start=self.segment_start, segment_end=self.segment_end,
            params=params, x_extent=self.x_extent, no_fly_rects=self.no_fly,
        ))


def _pair(text: str) -> Tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected 'x, y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _rects(text: str) -> Tuple[Tuple[float, float, float, float], ...]:
    rects = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [float(p) for p in chunk.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"no-fly rect needs 4 numbers, got {chunk!r}")
        rects.append(tuple(parts))
    return tuple(rects)


def _opt_int(section, key) -> Optional[int]:
    raw = section.get(key, "").strip()
    return int(raw) if raw else None


def load_config(path: Optional[str] = None) -> RunConfig:
    """Read an INI scenario file; with no path, return the defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read scenario file {path!r}")
    try:
        if parser.has_section("grid"):
            g = parser["grid"]
            cfg.L = g.getint("L", cfg.L)
            cfg.M = g.getint("M", cfg.M)
            cfg.eta = g.getfloat("eta", cfg.eta)
            cfg.cell_size = g.getfloat("cell_size", cfg.cell_size)
            cfg.safety_radius = g.getfloat("safety_radius", cfg.safety_radius)
            cfg.slot_seconds = g.getfloat("slot_seconds", cfg.slot_seconds)
            if "segment_start" in g:
                cfg.segment_start = _pair(g["segment_start"])
            if "segment_end" in g:
                cfg.segment_end = _pair(g["segment_end"])
            cfg.x_extent = g.getint("x_extent", cfg.x_extent)
            if "no_fly" in g:
                cfg.no_fly = _rects(g["no_fly"])
        if parser.has_section("arrivals"):
            a = parser["arrivals"]
            cfg.lam = a.getfloat("lambda", cfg.lam)
            cfg.lam_e = a.getfloat("lambda_e", cfg.lam_e)
        if parser.has_section("exogenous"):
            e = parser["exogenous"]
            cfg.exo_level = e.getint("level", cfg.exo_level)
            cfg.exo_offset = e.getint("offset", cfg.exo_offset)
            cfg.exo_in_plane = e.getboolean("in_plane", cfg.exo_in_plane)
        if parser.has_section("stop"):
            s = parser["stop"]
            cfg.max_uas = _opt_int(s, "uas") if "uas" in s else cfg.max_uas
            cfg.max_slots = _opt_int(s, "slots") if "slots" in s else cfg.max_slots
        if parser.has_section("run"):
            r = parser["run"]
            cfg.seed = r.getint("seed", cfg.seed)
            if "warmup" in r:
                cfg.warmup = _opt_int(r, "warmup")
            cfg.record_events = r.getboolean("record_events", cfg.record_events)
        if parser.has_section("schedule"):
            cfg.M_schedule = {
                int(k): int(v) for k, v in parser["schedule"].items()
            }
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value in {path!r}: {exc}") from exc
    return cfg


_OVERRIDE_FIELDS = {
    "lam": float, "lam_e": float, "M": int, "eta": float, "L": int,
    "seed": int, "max_slots": int, "max_uas": int,
}


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Fold non-None command-line overrides into a config, with validation."""
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in _OVERRIDE_FIELDS:
            raise ConfigError(f"unknown override {name!r}")
        setattr(cfg, name, _OVERRIDE_FIELDS[name](value))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not 0.0 <= cfg.lam <= 1.0:
        raise ConfigError(f"lambda must be in [0,1], got {cfg.lam}")
    if not 0.0 <= cfg.lam_e <= 1.0:
        raise ConfigError(f"lambda_e must be in [0,1], got {cfg.lam_e}")
    if not 0.0 <= cfg.eta <= 1.0:
        raise ConfigError(f"eta must be in [0,1], got {cfg.eta}")
    if cfg.L < 1:
        raise ConfigError(f"L must be >= 1, got {cfg.L}")
    S = 2 * cfg.L + 1
    if not 2 <= cfg.M <= S:
        raise ConfigError(f"M must be in [2, S={S}], got {cfg.M}")
    for level, m in cfg.M_schedule.items():
        if not 2 <= m <= S:
            raise ConfigError(f"schedule M for level {level} out of [2, {S}]")
    if cfg.max_uas is None and cfg.max_slots is None:
        raise ConfigError("need a stop criterion ([stop] uas or slots)")


def simulation_scenario(cfg: RunConfig) -> Scenario:
    validate(cfg)
    grid = cfg.build_grid()
    exo = cfg.lam_e > 0
    return Scenario(
        grid=grid, lam=cfg.lam, lam_e=cfg.lam_e,
        exo_level=cfg.exo_level if exo else None,
        exo_offset=cfg.exo_offset if exo else 0,
        max_uas=cfg.max_uas, max_slots=cfg.max_slots,
        seed=cfg.seed, warmup=cfg.warmup,
        record_events=cfg.record_events,
        M_schedule=dict(cfg.M_schedule),
    )


def analytic_scenario(cfg: RunConfig) -> AnalyticScenario:
    validate(cfg)
    grid = cfg.build_grid()
    exo = cfg.lam_e > 0
    return AnalyticScenario(
        grid=grid, lam=cfg.lam, lam_e=cfg.lam_e,
        exo_level=cfg.exo_level if exo else None,
        exo_in_plane=cfg.exo_in_plane,
        M_schedule=dict(cfg.M_schedule),
    )
