"""Slotted-time simulation of the congestion-aware re-routing strategy.

The world advances in discrete slots.  Each slot the engine: samples source
and exogenous arrivals, builds the look-ahead predictions, classifies zone
congestion, takes one decision per queuing system in deterministic (level,
stream) order, applies every movement synchronously, and then collects
metrics.  A single seeded PRNG with a documented draw order (arrival,
exogenous, then zone-ordered decision draws) makes runs bit-reproducible.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from .grid import Grid
from . import rules

Cell = Tuple[int, int]
ZoneKey = Tuple[int, int]


class InvariantError(RuntimeError):
    """The world reached a state the rule set forbids; aborting the run."""


@dataclass
class Scenario:
    """One simulation configuration."""

    grid: Grid
    lam: float                         # per-slot deployment probability
    lam_e: float = 0.0                 # per-slot exogenous entry probability
    exo_level: Optional[int] = None    # grid level crossed by the exogenous line
    exo_offset: int = 0                # row inside the level block (must avoid L)
    max_uas: Optional[int] = None      # stop after this many deployments
    max_slots: Optional[int] = None    # or after this many slots
    seed: int = 0
    M_schedule: Dict[int, int] = field(default_factory=dict)
    warmup: Optional[int] = None       # slots excluded from averages
    drain_cap: Optional[int] = None    # extra slots allowed to empty the world
    record_events: bool = False

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0 and 0.0 <= self.lam_e <= 1.0):
            raise ValueError("arrival probabilities must lie in [0, 1]")
        if self.max_uas is None and self.max_slots is None:
            raise ValueError("need a stop criterion (max_uas and/or max_slots)")
        if self.lam_e > 0.0:
            if self.exo_level is None:
                raise ValueError("exogenous traffic needs exo_level")
            if not (1 <= self.exo_level <= self.grid.y_extent):
                raise ValueError("exo_level outside the grid")
            if self.exo_offset % self.grid.S == self.grid.L:
                raise ValueError("exogenous line must avoid the lateral rows")

    def M_for_level(self, level: int) -> int:
        return self.M_schedule.get(level, self.grid.params.M)


class Uas:
    """Mutable per-vehicle record (kept lean; this is the hot object)."""

    __slots__ = ("id", "cell", "origin", "plan", "queued", "queue_zone",
                 "queue_side", "heading", "deploy_slot", "source_slot",
                 "in_service", "n_upstream", "n_diagonal", "n_lateral",
                 "counting")

    def __init__(self, uid: int, cell: Cell, origin: str = "managed",
                 heading: int = 0):
        self.id = uid
        self.cell = cell
        self.origin = origin
        self.plan: List[Cell] = []
        self.queued = False
        self.queue_zone: Optional[ZoneKey] = None
        self.queue_side = 0
        self.heading = heading
        self.deploy_slot = -1
        self.source_slot: Optional[int] = None
        self.in_service: Optional[ZoneKey] = None
        self.n_upstream = 0
        self.n_diagonal = 0
        self.n_lateral = 0
        self.counting = False  # transition counters start at the source node


@dataclass
class ZoneStats:
    busy_slots: int = 0
    service_sum: int = 0
    queue_sum: int = 0
    overflow_events: int = 0
    conflicts: int = 0
    intrusions: int = 0


@dataclass
class Metrics:
    slots_measured: int
    deployed: int
    delivered: int
    zone_stats: Dict[ZoneKey, Dict[str, float]]
    spread: Dict[int, Tuple[int, int]]
    internal_conflicts: int
    exogenous_conflicts: int
    mean_delay: float
    delays: List[int]
    transitions: Dict[str, int]
    p_intrusion_window: float
    exo_counts: Dict[ZoneKey, Dict[int, int]]


class Simulation:
    def __init__(self, scn: Scenario):
        self.scn = scn
        self.grid = scn.grid
        self.rng = np.random.Generator(np.random.PCG64(scn.seed))
        self.slot = 0
        self.uas: Dict[int, Uas] = {}
        self._next_id = itertools.count()
        self.deployed = 0
        self.delivered = 0
        self.delays: List[int] = []
        self.transitions = {"upstream": 0, "diagonal": 0, "lateral": 0}
        self.events: List[Tuple[int, int, Cell, str]] = []
        self.stats: Dict[ZoneKey, ZoneStats] = {
            z: ZoneStats() for z in self.grid.zones
        }
        self.internal_conflicts = 0
        self.exogenous_conflicts = 0
        self.intrusion_slots = 0
        self.measured = 0
        self.exo_counts: Dict[ZoneKey, Dict[int, int]] = {}
        self._blocked_up = {
            z for z in self.grid.zones
            if (z[0], z[1] + 1) in self.grid.zones
            and self.grid.zones[(z[0], z[1] + 1)].no_fly
        }
        g = self.grid
        self._x_edge = g.x_extent * g.S + g.L
        self.warmup = scn.warmup if scn.warmup is not None else g.y_extent * g.S
        self.measuring = True

    # -- logging ------------------------------------------------------------
    def _log(self, uid: int, cell: Cell, tag: str) -> None:
        if self.scn.record_events:
            self.events.append((self.slot, uid, cell, tag))

    # -- congestion view ----------------------------------------------------
    def _congested(self, zone: ZoneKey, preds: List[Cell]) -> bool:
        M = self.scn.M_for_level(zone[1])
        return rules.zone_congested(preds, zone, self.grid, M)

    def _perceived_up_congested(self, system: ZoneKey,
                                cong: Dict[ZoneKey, bool]) -> bool:
        """Congestion of the zone above as perceived by the system's queue.

        A system whose outward neighbour is missing or no-fly never sees
        congestion: its vehicles have nowhere lawful to shift, so the grid
        edge behaves as an always-open stream (the lattice is sized so the
        real spread never reaches it).
        """
        X, Y = system
        g = self.grid
        if X == 0:
            open_sides = [s for s in (1, -1)
                          if (s, Y) in g.zones and not g.zones[(s, Y)].no_fly]
            if not open_sides:
                return False
        else:
            o = 1 if X > 0 else -1
            zon = (X + o, Y)
            if zon not in g.zones or g.zones[zon].no_fly:
                return False
        return cong[(X, Y + 1)]

    # -- one slot -----------------------------------------------------------
    def step(self, deploying: bool) -> None:
        g = self.grid
        scn = self.scn
        eta = g.params.eta

        # 1. arrival draws (fixed order for reproducibility)
        deploy = deploying and scn.lam > 0 and self.rng.random() < scn.lam
        exo_enter = scn.lam_e > 0 and self.rng.random() < scn.lam_e

        # 2. look-ahead predictions and zone congestion flags
        pred = rules.predict_positions(self.uas.values(), g, self._blocked_up)
        pred_cells = list(pred.values())
        cong: Dict[ZoneKey, bool] = {}
        for (X, Y) in g.zones:
            cong[(X, Y)] = self._congested((X, Y), pred_cells)
        for X in range(-g.x_extent, g.x_extent + 1):
            cong[(X, g.y_extent + 1)] = False  # virtual zones above the top

        # 3. index queue members and nodal arrivals
        queued: Dict[ZoneKey, List[Tuple[int, int, int]]] = {}
        nodal: Dict[ZoneKey, List[int]] = {}
        cells_now: Set[Cell] = set()
        for u in self.uas.values():
            cells_now.add(u.cell)
            if u.origin == "exogenous":
                continue
            if u.queued:
                j, _ = g.lateral_position(u.queue_zone, u.cell)
                queued.setdefault(u.queue_zone, []).append(
                    (u.id, j, u.queue_side))
            elif not u.plan:
                z = g.cell_to_zone(u.cell)
                if z is None or u.cell != g.node(z):
                    raise InvariantError(
                        f"idle vehicle {u.id} off-node at {u.cell}")
                nodal.setdefault(z, []).append(u.id)
        for z, occ in queued.items():
            js = [j for (_, j, _) in occ]
            if len(js) != len(set(js)):
                raise InvariantError(f"duplicate queue positions in {z}: {js}")

        # 4. descend eligibility, then the Rule 9 tie-break per level
        descend_ok: Dict[ZoneKey, bool] = {}
        for z, ids in nodal.items():
            X, Y = z
            if X == 0 or Y >= g.y_extent or not ids:
                continue
            z_id = g.neighbors(z)["inward_diag"]
            idc = cong[z_id] if z_id is not None else True
            descend_ok[z] = rules.descend_condition(z, g, idc, cells_now)
        for Y in range(1, g.y_extent + 1):
            if descend_ok.get((1, Y)) and descend_ok.get((-1, Y)):
                if self.rng.random() < eta:
                    descend_ok[(-1, Y)] = False
                else:
                    descend_ok[(1, Y)] = False

        # 5. per-system decisions in (level, stream) lexicographic order
        plans: Dict[int, Tuple[List[Cell], str, Optional[ZoneKey]]] = {}
        outward: Dict[int, int] = {}   # uid -> side for a one-cell shift
        for Y in range(1, g.y_extent + 1):
            for X in range(-g.x_extent, g.x_extent + 1):
                z = (X, Y)
                if z not in g.zones or g.zones[z].no_fly:
                    continue
                occ = sorted(queued.get(z, []), key=lambda t: t[1])
                a_ids = sorted(nodal.get(z, []))
                c_node = [t for t in occ if t[1] == g.L + 1]
                busy_up = self._perceived_up_congested(z, cong)

                if c_node and a_ids:
                    # node conflict (Rule 6): lateral walker takes the full
                    # upstream route, the nodal arrival descends or shifts out
                    self.stats[z].conflicts += 1
                    self.internal_conflicts += 1
                    c_id = c_node[0][0]
                    a_id = a_ids[0]
                    if len(a_ids) > 1:
                        self._log(a_ids[1], g.node(z), "multi-nodal-arrival")
                    ok = descend_ok.get(z, False)
                    c_plan, a_plan, a_out = rules.resolve_node_conflict(
                        c_id, a_id, z, g, ok)
                    plans[c_id] = (c_plan, "service", z)
                    self._log(c_id, g.node(z), "conflict-service")
                    if a_plan is not None:
                        plans[a_id] = (a_plan, "descend", z)
                        self._log(a_id, g.node(z), "conflict-descend")
                    else:
                        outward[a_id] = 1 if X > 0 else -1
                        self._log(a_id, g.node(z), "conflict-outward")
                    for (uid, j, side) in occ:
                        if uid != c_id and uid not in plans:
                            outward[uid] = side
                    for uid in a_ids[1:]:
                        outward[uid] = 1 if X > 0 else -1
                    continue

                # Rule 5 descend for the nodal arrival
                cand = list(occ)
                for uid in a_ids:
                    side = 0 if X == 0 else (1 if X > 0 else -1)
                    if descend_ok.get(z, False) and uid == a_ids[0]:
                        plans[uid] = (g.descend_cells(z), "descend", z)
                        self._log(uid, g.node(z), "descend")
                    else:
                        cand.append((uid, g.L + 1, side))

                if not cand:
                    continue
                if busy_up:
                    for (uid, j, side) in cand:
                        if side == 0:
                            side = 1 if self.rng.random() < eta else -1
                        outward[uid] = side
                else:
                    win, route = rules.select_entrant(cand, z, g)
                    plans[win] = (route, "service", z)
                    self._log(win, self.uas[win].cell, "enter-service")
                    for (uid, j, side) in cand:
                        if uid == win:
                            continue
                        if side == 0:
                            side = 1 if self.rng.random() < eta else -1
                        outward[uid] = side

        # 6. synchronous apply
        self._apply(plans, outward)

        # 7. spawns appear at the end of the slot
        if deploy:
            uid = next(self._next_id)
            u = Uas(uid, (0, 0))
            u.deploy_slot = self.slot
            u.plan = [(0, yy) for yy in range(1, g.L + 1)]
            self.uas[uid] = u
            self.deployed += 1
            self._log(uid, u.cell, "deploy")
        if exo_enter:
            uid = next(self._next_id)
            y = (scn.exo_level - 1) * g.S + scn.exo_offset
            u = Uas(uid, (-self._x_edge, y), origin="exogenous", heading=1)
            u.deploy_slot = self.slot
            self.uas[uid] = u
            self._log(uid, u.cell, "exo-enter")

        # 8. intrusion detection and measurement
        self._measure()
        self.slot += 1

    def _apply(self, plans, outward) -> None:
        g = self.grid
        for uid, (route, tag, system) in plans.items():
            u = self.uas[uid]
            u.plan = list(route)
            u.queued = False
            u.queue_zone = None
            u.queue_side = 0
            if tag == "service":
                u.in_service = system
            else:  # descend: progresses toward the inward-up node
                X, Y = system
                o = 1 if X > 0 else -1
                u.in_service = (X - o, Y)
            # first service transition happens in the entry slot itself
            nxt = u.plan.pop(0)
            kind = rules.classify_transition(u.cell, nxt)
            u.cell = nxt
            if u.counting:
                if kind == "upstream":
                    u.n_upstream += 1
                elif kind == "diagonal":
                    u.n_diagonal += 1
                else:
                    u.n_lateral += 1

        removed: List[int] = []
        # resolve outward shifts outer-first so edge/no-fly holds cascade
        # inward instead of stacking two vehicles on one cell
        held_cells: Set[Cell] = set()
        for uid in sorted(outward,
                          key=lambda i: -abs(self.uas[i].cell[0])):
            u = self.uas[uid]
            side = outward[uid]
            x, y = u.cell
            target = (x + side, y)
            tz = g.cell_to_zone(target)
            held = (abs(target[0]) > self._x_edge
                    or (tz is not None and g.zones[tz].no_fly)
                    or target in held_cells)
            if held:
                u.queued = True
                u.queue_side = side
                held_cells.add(u.cell)
                self._log(uid, u.cell, "edge-hold")
                continue
            old_zone = u.queue_zone
            u.cell = target
            if u.counting:
                u.n_lateral += 1
            u.queued = True
            u.queue_side = side
            u.queue_zone = tz
            if old_zone is not None and tz != old_zone:
                self.stats[old_zone].overflow_events += 1
                self._log(uid, target, "spill")

        for uid, u in list(self.uas.items()):
            if u.origin == "exogenous":
                u.cell = (u.cell[0] + u.heading, u.cell[1])
                if abs(u.cell[0]) > self._x_edge:
                    removed.append(uid)
                    self._log(uid, u.cell, "exo-exit")
                continue
            if uid in plans or uid in outward:
                continue
            if u.plan:
                nxt = u.plan.pop(0)
                kind = rules.classify_transition(u.cell, nxt)
                u.cell = nxt
                if u.counting:
                    if kind == "upstream":
                        u.n_upstream += 1
                    elif kind == "diagonal":
                        u.n_diagonal += 1
                    elif kind == "lateral":
                        u.n_lateral += 1
                if not u.plan:
                    u.in_service = None
                    if u.cell[1] >= g.y_extent * g.S:
                        removed.append(uid)
                        self.delivered += 1
                        base = g.L + g.y_extent * g.S
                        self.delays.append(
                            (self.slot - u.deploy_slot) - base)
                        self.transitions["upstream"] += u.n_upstream
                        self.transitions["diagonal"] += u.n_diagonal
                        self.transitions["lateral"] += u.n_lateral
                        self._log(uid, u.cell, "deliver")
                    else:
                        if u.source_slot is None and u.cell == g.source_node():
                            u.source_slot = self.slot
                            u.counting = True
                        self._log(uid, u.cell, "node-arrival")
        for uid in removed:
            del self.uas[uid]

        n_managed = sum(1 for u in self.uas.values() if u.origin == "managed")
        if self.deployed != self.delivered + n_managed:
            raise InvariantError("conservation violated: "
                                 f"{self.deployed} deployed, {self.delivered} "
                                 f"delivered, {n_managed} in flight")

    def _measure(self) -> None:
        g = self.grid
        in_window = self.measuring and self.warmup <= self.slot
        occupancy: Dict[Cell, List[Uas]] = {}
        service_count: Dict[ZoneKey, int] = {}
        queue_count: Dict[ZoneKey, int] = {}
        exo_in_zone: Dict[ZoneKey, int] = {}
        for u in self.uas.values():
            occupancy.setdefault(u.cell, []).append(u)
            if u.origin == "exogenous":
                z = g.cell_to_zone(u.cell)
                if z is not None:
                    exo_in_zone[z] = exo_in_zone.get(z, 0) + 1
            elif u.in_service is not None and u.plan:
                service_count[u.in_service] = (
                    service_count.get(u.in_service, 0) + 1)
            elif u.queued and u.queue_zone is not None:
                j, _ = g.lateral_position(u.queue_zone, u.cell)
                if j != g.L + 1:
                    queue_count[u.queue_zone] = (
                        queue_count.get(u.queue_zone, 0) + 1)

        saw_intrusion = False
        for cell, us in occupancy.items():
            if len(us) < 2:
                continue
            n_m = sum(1 for u in us if u.origin == "managed")
            n_e = len(us) - n_m
            pairs_internal = n_m * (n_m - 1) // 2
            pairs_mixed = n_m * n_e
            if pairs_internal or pairs_mixed:
                saw_intrusion = True
                z = g.cell_to_zone(cell)
                if z is not None:
                    self.stats[z].intrusions += pairs_internal + pairs_mixed
                self.exogenous_conflicts += pairs_mixed
                for u in us:
                    self._log(u.id, cell, "intrusion")

        if not in_window:
            return
        self.measured += 1
        if saw_intrusion:
            self.intrusion_slots += 1
        for z in g.zones:
            st = self.stats[z]
            svc = service_count.get(z, 0)
            exo_above = exo_in_zone.get((z[0], z[1] + 1), 0)
            st.service_sum += svc
            st.queue_sum += queue_count.get(z, 0)
            if svc + exo_above >= self.scn.M_for_level(z[1] + 1):
                st.busy_slots += 1
        for z, n in exo_in_zone.items():
            hist = self.exo_counts.setdefault(z, {})
            hist[n] = hist.get(n, 0) + 1
        for z in self.exo_counts:
            if z not in exo_in_zone:
                self.exo_counts[z][0] = self.exo_counts[z].get(0, 0) + 1

    # -- full run -----------------------------------------------------------
    def run(self) -> Metrics:
        scn = self.scn
        g = self.grid
        while True:
            if scn.max_uas is not None and self.deployed >= scn.max_uas:
                break
            if scn.max_slots is not None and self.slot >= scn.max_slots:
                break
            self.step(deploying=True)
        main_end = self.slot
        self.measuring = False  # averages cover the loaded phase only
        cap = scn.drain_cap if scn.drain_cap is not None else (
            6 * g.y_extent * g.S + 200)
        while any(u.origin == "managed" for u in self.uas.values()):
            if self.slot - main_end > cap:
                raise InvariantError("drain cap exceeded; vehicles stuck")
            self.step(deploying=False)
        return self._metrics()

    def _metrics(self) -> Metrics:
        n = max(1, self.measured)
        zone_stats = {}
        for z, st in self.stats.items():
            zone_stats[z] = {
                "busy_fraction": st.busy_slots / n,
                "mean_in_service": st.service_sum / n,
                "mean_in_queue": st.queue_sum / n,
                "overflow_rate": st.overflow_events / n,
                "conflicts": st.conflicts,
                "intrusions": st.intrusions,
            }
        spread = {}
        for Y in range(1, self.grid.y_extent + 1):
            active = [X for (X, YY) in zone_stats if YY == Y
                      and zone_stats[(X, YY)]["mean_in_service"] >= 1.0]
            lo = min([0] + active)
            hi = max([0] + active)
            spread[Y] = (lo, hi)
        delays = self.delays
        return Metrics(
            slots_measured=self.measured,
            deployed=self.deployed,
            delivered=self.delivered,
            zone_stats=zone_stats,
            spread=spread,
            internal_conflicts=self.internal_conflicts,
            exogenous_conflicts=self.exogenous_conflicts,
            mean_delay=float(np.mean(delays)) if delays else 0.0,
            delays=list(delays),
            transitions=dict(self.transitions),
            p_intrusion_window=self.intrusion_slots / n,
            exo_counts={z: dict(h) for z, h in self.exo_counts.items()},
        )


def run(scn: Scenario) -> Metrics:
    """Run one scenario to completion and return its metrics."""
    return Simulation(scn).run()
