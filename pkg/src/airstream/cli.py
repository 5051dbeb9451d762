"""Command-line harness: simulate, analyze, compare, and sweep.

Exit codes: 0 success, 1 runtime or tolerance failure, 2 configuration error.

Outputs (under ``--out``, default ``.``):

- ``metrics.json``  simulate/compare: aggregate simulation metrics
- ``zones.csv``     simulate/analyze/sweep: one row per zone (per grid point)
- ``spread.json``   simulate/analyze: per-level traffic spread
- ``compare_report.json``  compare: per-zone sim-vs-analytic deltas
- ``events.log``    simulate with event recording: ``slot uas_id x y tag``
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from . import analytics, config, engine

DEFAULT_TOLERANCE = 0.05
SOLVER_RESIDUAL_TOL = 1e-8


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def splitmix64(seed: int, index: int) -> int:
    """Derived per-point seed: independent and reproducible."""
    x = (seed ^ (index * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0x7FFFFFFFFFFFFFFF


def _write_json(path: str, payload) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _write_csv(path: str, header: Sequence[str], rows: List[Sequence]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _zone_key(item):
    (x, y), _ = item
    return (y, x)


def _spread_payload(spread: Dict[int, Tuple[int, int]]) -> Dict[str, List[int]]:
    return {str(level): list(bounds) for level, bounds in sorted(spread.items())}


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

SIM_HEADER = ["stream", "level", "busy_fraction", "mean_in_service",
              "mean_in_queue", "overflow_rate", "conflicts", "intrusions"]


def _sim_rows(metrics: engine.Metrics) -> List[Sequence]:
    rows = []
    for (x, y), st in sorted(metrics.zone_stats.items(), key=_zone_key):
        rows.append([x, y, repr(st["busy_fraction"]), repr(st["mean_in_service"]),
                     repr(st["mean_in_queue"]), repr(st["overflow_rate"]),
                     int(st["conflicts"]), int(st["intrusions"])])
    return rows


def cmd_simulate(cfg: config.RunConfig, out: str) -> int:
    scn = config.simulation_scenario(cfg)
    scn.record_events = True
    sim = engine.Simulation(scn)
    metrics = sim.run()
    _write_csv(os.path.join(out, "zones.csv"), SIM_HEADER, _sim_rows(metrics))
    _write_json(os.path.join(out, "spread.json"), _spread_payload(metrics.spread))
    _write_json(os.path.join(out, "metrics.json"), {
        "slots_measured": metrics.slots_measured,
        "deployed": metrics.deployed,
        "delivered": metrics.delivered,
        "mean_delay": metrics.mean_delay,
        "internal_conflicts": metrics.internal_conflicts,
        "exogenous_conflicts": metrics.exogenous_conflicts,
        "transitions": metrics.transitions,
        "p_intrusion_window": metrics.p_intrusion_window,
        "spread": _spread_payload(metrics.spread),
        "seed": scn.seed,
    })
    if scn.record_events:
        with open(os.path.join(out, "events.log"), "w") as fh:
            for slot, uid, (cx, cy), tag in sim.events:
                fh.write(f"{slot} {uid} {cx} {cy} {tag}\n")
    return 0


ANALYTIC_HEADER = ["stream", "level", "theta0", "theta0_star", "w1_star_0",
                   "mean_in_service", "mean_in_queue", "overflow", "residual"]


def cmd_analyze(cfg: config.RunConfig, out: str,
                tolerance: Optional[float]) -> int:
    scn = config.analytic_scenario(cfg)
    result = analytics.analyze_grid(scn)
    rows = []
    for (x, y), z in sorted(result.zones.items(), key=_zone_key):
        rows.append([x, y, repr(z.theta0), repr(z.theta0_star),
                     repr(z.w1_star_0), repr(z.mean_in_service),
                     repr(z.mean_in_queue), repr(z.phi), repr(z.residual)])
    _write_csv(os.path.join(out, "zones.csv"), ANALYTIC_HEADER, rows)
    _write_json(os.path.join(out, "spread.json"), _spread_payload(result.spread))
    limit = SOLVER_RESIDUAL_TOL if tolerance is None else tolerance
    if result.max_residual() > limit:
        print(f"solver residual {result.max_residual():.3g} exceeds {limit:.3g}",
              file=sys.stderr)
        return 1
    return 0


def cmd_compare(cfg: config.RunConfig, out: str, replications: int,
                tolerance: Optional[float]) -> int:
    tol = DEFAULT_TOLERANCE if tolerance is None else tolerance
    analytic = analytics.analyze_grid(config.analytic_scenario(cfg))

    acc: Dict[Tuple[int, int], Dict[str, float]] = {}
    for rep in range(replications):
        rep_cfg = config.RunConfig(**{**cfg.__dict__,
                                      "seed": splitmix64(cfg.seed, rep)})
        metrics = engine.run(config.simulation_scenario(rep_cfg))
        for zone, st in metrics.zone_stats.items():
            slot = acc.setdefault(zone, {"busy": 0.0, "svc": 0.0, "ovf": 0.0})
            slot["busy"] += st["busy_fraction"] / replications
            slot["svc"] += st["mean_in_service"] / replications
            slot["ovf"] += st["overflow_rate"] / replications
        sim_spread = metrics.spread

    table = []
    worst = 0.0
    for zone, z in sorted(analytic.zones.items(), key=_zone_key):
        sim = acc.get(zone, {"busy": 0.0, "svc": 0.0, "ovf": 0.0})
        d_busy = abs(sim["busy"] - z.theta0_star)
        table.append({
            "stream": zone[0], "level": zone[1],
            "sim_busy": sim["busy"], "analytic_busy": z.theta0_star,
            "delta_busy": d_busy,
            "sim_mean_in_service": sim["svc"],
            "analytic_mean_in_service": z.mean_in_service,
            "delta_mean_in_service": abs(sim["svc"] - z.mean_in_service),
            "sim_overflow": sim["ovf"], "analytic_overflow": z.phi,
            "delta_overflow": abs(sim["ovf"] - z.phi),
        })
        worst = max(worst, d_busy)

    # The gated quantities are the validated ones: congestion of the source
    # zone (0,1) and the per-level spread (within one stream per side).  The
    # full per-zone delta table is reported but not gated; the analytic model
    # assumes iid arrivals above level 1 and is known to relax there.
    source_delta = abs(acc.get((0, 1), {"busy": 0.0})["busy"]
                       - analytic.zones[(0, 1)].theta0_star)
    spread_delta = 0
    for level, (alo, ahi) in analytic.spread.items():
        slo, shi = sim_spread.get(level, (0, 0))
        spread_delta = max(spread_delta, abs(slo - alo), abs(shi - ahi))
    ok = source_delta <= tol and spread_delta <= 1
    report = {
        "tolerance": tol,
        "replications": replications,
        "source_zone_delta_busy": source_delta,
        "max_spread_delta": spread_delta,
        "max_delta_busy_all_zones": worst,
        "pass": ok,
        "sim_spread": _spread_payload(sim_spread),
        "analytic_spread": _spread_payload(analytic.spread),
        "zones": table,
    }
    _write_json(os.path.join(out, "compare_report.json"), report)
    return 0 if ok else 1


def _parse_grid_values(raw: Optional[str], cast, fallback) -> List:
    if raw is None:
        return [fallback]
    return [cast(tok) for tok in raw.split(",") if tok.strip()]


def _sweep_point(args):
    cfg_dict, lam, m, eta, seed, tolerance = args
    cfg = config.RunConfig(**cfg_dict)
    cfg.lam, cfg.M, cfg.eta, cfg.seed = lam, m, eta, seed
    try:
        config.validate(cfg)
        result = analytics.analyze_grid(config.analytic_scenario(cfg))
    except Exception as exc:  # recorded per point; the sweep keeps going
        return (lam, m, eta, seed, None, str(exc))
    limit = SOLVER_RESIDUAL_TOL if tolerance is None else tolerance
    if result.max_residual() > limit:
        return (lam, m, eta, seed, None, "residual above tolerance")
    rows = []
    for (x, y), z in sorted(result.zones.items(), key=_zone_key):
        rows.append([repr(lam), m, repr(eta), seed, x, y,
                     repr(z.theta0), repr(z.theta0_star),
                     repr(z.mean_in_service), repr(z.mean_in_queue),
                     repr(z.phi)])
    return (lam, m, eta, seed, rows, None)


SWEEP_HEADER = ["lambda", "M", "eta", "seed", "stream", "level", "theta0",
                "theta0_star", "mean_in_service", "mean_in_queue", "overflow"]


def cmd_sweep(cfg: config.RunConfig, out: str,
              lams: List[float], Ms: List[int], etas: List[float],
              tolerance: Optional[float]) -> int:
    points = [(lam, m, eta) for lam in lams for m in Ms for eta in etas]
    jobs = [(cfg.__dict__.copy(), lam, m, eta, splitmix64(cfg.seed, i), tolerance)
            for i, (lam, m, eta) in enumerate(points)]
    rows: List[Sequence] = []
    failures = []
    workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    for lam, m, eta, seed, point_rows, err in results:
        if err is not None:
            failures.append({"lambda": lam, "M": m, "eta": eta, "error": err})
        else:
            rows.extend(point_rows)
    _write_csv(os.path.join(out, "zones.csv"), SWEEP_HEADER, rows)
    if failures:
        _write_json(os.path.join(out, "sweep_failures.json"), failures)
        return 1
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="airstream",
        description="Congestion-aware corridor traffic: simulator and "
                    "queueing analytics.")
    p.add_argument("--config", help="INI scenario file")
    p.add_argument("--mode", choices=["simulate", "analyze", "compare", "sweep"],
                   default="simulate")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam",
                   help="deployment probability; comma list in sweep mode")
    p.add_argument("--lambda-e", dest="lam_e", type=float)
    p.add_argument("--M", help="congestion threshold; comma list in sweep mode")
    p.add_argument("--eta", help="branch bias; comma list in sweep mode")
    p.add_argument("--L", type=int)
    p.add_argument("--slots", type=int, help="stop after this many slots")
    p.add_argument("--uas", type=int, help="stop after this many deployments")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--replications", type=int, default=3)
    p.add_argument("--tolerance", type=float)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load_config(args.config)
        sweep = args.mode == "sweep"
        lams = _parse_grid_values(args.lam, float, cfg.lam)
        Ms = _parse_grid_values(args.M, int, cfg.M)
        etas = _parse_grid_values(args.eta, float, cfg.eta)
        if not sweep and (len(lams) > 1 or len(Ms) > 1 or len(etas) > 1):
            raise config.ConfigError("value lists are only valid in sweep mode")
        cfg = config.apply_overrides(
            cfg, lam=lams[0] if args.lam is not None else None,
            lam_e=args.lam_e, M=Ms[0] if args.M is not None else None,
            eta=etas[0] if args.eta is not None else None,
            L=args.L, seed=args.seed, max_slots=args.slots, max_uas=args.uas)
        if sweep:
            for lam in lams:
                if not 0.0 <= lam <= 1.0:
                    raise config.ConfigError(f"lambda {lam} out of [0,1]")
            for eta in etas:
                if not 0.0 <= eta <= 1.0:
                    raise config.ConfigError(f"eta {eta} out of [0,1]")
        os.makedirs(args.out, exist_ok=True)
    except (config.ConfigError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.mode == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.mode == "analyze":
            return cmd_analyze(cfg, args.out, args.tolerance)
        if args.mode == "compare":
            return cmd_compare(cfg, args.out, args.replications, args.tolerance)
        return cmd_sweep(cfg, args.out, lams, Ms, etas, args.tolerance)
    except engine.InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
