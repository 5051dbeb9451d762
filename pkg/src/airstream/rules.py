"""Per-vehicle decision logic for the congestion-aware re-routing strategy.

These are pure functions over slot snapshots: look-ahead position prediction,
congestion classification, descend checks, service-entrant selection and node
conflict resolution.  The simulation engine orchestrates them per zone; they
are kept free of engine state so they can be tested in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .grid import Grid

Cell = Tuple[int, int]


@dataclass(frozen=True)
class TransitionCommand:
    """One slot's movement order for a vehicle."""

    uas_id: int
    target: Cell
    tag: str  # upstream | outward | inward-diag | outward-diag | enter-service
    #          | descend | hold | hold-exogenous


class RuleError(ValueError):
    pass


def predict_positions(world: Iterable, grid: Grid,
                      blocked_up: Optional[set] = None) -> Dict[int, Cell]:
    """L-slot look-ahead positions for every vehicle on a deterministic path.

    ``world`` items need ``id``, ``cell``, ``origin``, ``queued``,
    ``queue_zone``, ``queue_side`` and ``plan`` attributes.  Vehicles on a
    committed plan are advanced ``L`` cells along it (clamped at the plan
    end); exogenous vehicles continue straight, so they are advanced ``L``
    cells along their heading.  Queued vehicles have no
    deterministic future and are skipped -- unless the zone above their queue
    is a no-fly zone (``blocked_up``), in which case they are certain to keep
    walking outward and are predicted L cells further out.
    """
    L = grid.L
    blocked_up = blocked_up or set()
    out: Dict[int, Cell] = {}
    for u in world:
        if u.origin == "exogenous":
            x, y = u.cell
            out[u.id] = (x + u.heading * L, y)
            continue
        if u.queued:
            if u.queue_zone in blocked_up and u.queue_side != 0:
                x, y = u.cell
                out[u.id] = (x + u.queue_side * L, y)
            continue
        if u.plan:
            out[u.id] = u.plan[L - 1] if len(u.plan) >= L else u.plan[-1]
    return out


def zone_congested(predictions: Iterable[Cell], zone: Tuple[int, int],
                   grid: Grid, M: int) -> bool:
    """Congestion test for a zone in its Z_UP / Z_ID role.

    A no-fly zone is always congested; a zone above the grid top is never
    congested (the lattice is sized well beyond the traffic spread); otherwise
    the zone is congested when at least ``M`` predicted positions fall in it.
    """
    if zone not in grid.zones:
        X, Y = zone
        if abs(X) <= grid.x_extent and Y > grid.y_extent:
            return False  # virtual zone above the delivery level
        return True  # outside the usable lattice: treat as closed
    if grid.zones[zone].no_fly:
        return True
    (x0, y0), (x1, y1) = grid.zone_bounds(zone)
    n = sum(1 for (x, y) in predictions if x0 <= x <= x1 and y0 <= y <= y1)
    return n >= M


def descend_condition(zone: Tuple[int, int], grid: Grid,
                      id_congested: bool, occupied_cells: Iterable[Cell]) -> bool:
    """Whether a nodal arrival at ``zone``'s node may descend inward.

    Requires stream != 0, an uncongested inward-diagonal zone, and an empty
    lateral path in the inward zone; a no-fly inward or inward-diagonal zone
    vetoes the descend outright.
    """
    X, Y = zone
    if X == 0:
        return False
    nb = grid.neighbors(zone)
    z_in, z_id = nb["inward"], nb["inward_diag"]
    if z_in is None or z_id is None:
        return False
    if grid.zones[z_in].no_fly or grid.zones[z_id].no_fly:
        return False
    if id_congested:
        return False
    lateral = set(grid.lateral_cells(z_in))
    return not any(c in lateral for c in occupied_cells)


def select_entrant(occupants: Sequence[Tuple[int, int, int]],
                   zone: Tuple[int, int], grid: Grid) -> Tuple[int, List[Cell]]:
    """Pick the service entrant among one zone's lateral occupants.

    ``occupants`` are ``(uas_id, j, side)`` tuples; the winner is the one
    with the highest re-route preference ``psi = L + 1 - j`` (j values are
    pairwise distinct, so the winner is unique).  Returns the winner id and
    its full S-transition re-route path.
    """
    if not occupants:
        raise RuleError("select_entrant needs at least one occupant")
    uid, j, side = min(occupants, key=lambda t: t[1])
    psi = grid.preference(j)
    return uid, grid.reroute_cells(zone, psi, side)


def resolve_node_conflict(c_id: int, a_id: int, zone: Tuple[int, int],
                          grid: Grid, descend_ok: bool
                          ) -> Tuple[List[Cell], Optional[List[Cell]], Optional[Cell]]:
    """Resolve two vehicles meeting at a node in the same slot.

    The vehicle that arrived through the lateral path (``c``) takes the full
    upstream route; the nodal arrival (``a``) descends inward when allowed,
    otherwise it takes a single outward step onto the outward lateral cells.
    Returns ``(c_plan, a_plan_or_None, a_outward_cell_or_None)``.
    """
    X, _ = zone
    if X == 0:
        raise RuleError("node conflicts need a lateral path, absent at stream 0")
    c_plan = grid.reroute_cells(zone, 0, 0)
    if descend_ok:
        return c_plan, grid.descend_cells(zone), None
    nx, ny = grid.node(zone)
    o = 1 if X > 0 else -1
    return c_plan, None, (nx + o, ny)


def outward_step(cell: Cell, side: int) -> Cell:
    x, y = cell
    return (x + side, y)


def classify_transition(src: Cell, dst: Cell) -> str:
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    if dy == 1 and dx == 0:
        return "upstream"
    if dy == 1 and abs(dx) == 1:
        return "diagonal"
    if dy == 0 and abs(dx) == 1:
        return "lateral"
    if (dx, dy) == (0, 0):
        return "hold"
    raise RuleError(f"non-adjacent transition {src} -> {dst}")


def step_decision(uas, congested_up: bool, grid: Grid,
                  rng_draw: float, eta: float = 0.5) -> TransitionCommand:
    """Single-vehicle movement order outside the per-zone entrant selection.

    Committed vehicles follow their plan; queued vehicles that did not win
    service walk one cell outward regardless of congestion (while blocked the
    whole queue shifts, while clear the losers age one position).  A stream-0
    node occupant picks the right branch with probability ``eta`` using
    ``rng_draw``.  Exogenous vehicles continue straight.
    """
    if uas.origin == "exogenous":
        x, y = uas.cell
        return TransitionCommand(uas.id, (x + uas.heading, y), "hold-exogenous")
    if uas.plan:
        nxt = uas.plan[0]
        return TransitionCommand(uas.id, nxt, classify_transition(uas.cell, nxt))
    if not uas.queued:
        raise RuleError("idle vehicle without plan must be a nodal arrival; "
                        "nodal decisions are taken per zone")
    side = uas.queue_side
    if side == 0:
        side = 1 if rng_draw < eta else -1
    return TransitionCommand(uas.id, outward_step(uas.cell, side), "outward")
