"""Congestion-aware re-routing for dense low-altitude traffic corridors.

The package pairs a slotted-time agent simulator of the lateral re-routing
strategy with a discrete-time queueing model of the same system, so that the
two can be validated against each other zone by zone.
"""
from .grid import (
    Cell,
    DesignParams,
    Grid,
    GridConfigError,
    GridSpec,
    PathKind,
    PathRef,
    Zone,
    build_grid,
    min_cell_edge,
)
from .pgf import Pgf, lincomb
from .engine import InvariantError, Metrics, Scenario, Simulation
from .engine import run as simulate
from .analytics import (
    AnalyticScenario,
    GridModelResult,
    ZoneModelOutputs,
    analyze_grid,
    expected_spread,
    solve_zone,
)
from .config import RunConfig, ConfigError, load_config, BASELINE_SCENARIO

__all__ = [
    "AnalyticScenario",
    "BASELINE_SCENARIO",
    "ConfigError",
    "GridModelResult",
    "InvariantError",
    "Metrics",
    "RunConfig",
    "Scenario",
    "Simulation",
    "ZoneModelOutputs",
    "analyze_grid",
    "expected_spread",
    "load_config",
    "simulate",
    "solve_zone",
    "Cell",
    "DesignParams",
    "Grid",
    "GridConfigError",
    "GridSpec",
    "PathKind",
    "PathRef",
    "Zone",
    "build_grid",
    "min_cell_edge",
    "Pgf",
    "lincomb",
]

__version__ = "0.1.0"
