"""Corridor geometry: the cell lattice, zones, nodes and intra-zone paths.

Internally everything lives in a *grid frame*: the lateral axis is ``x``
(positive to the right when facing upstream), the along-corridor axis is ``y``
(positive upstream), and the corridor start cell sits at the origin.  World
coordinates from a config are mapped into this frame with one rigid transform.

A zone is indexed by ``(stream, level)``: stream ``X`` in ``[-x_extent,
x_extent]`` counts lateral offsets from the nominal stream 0, level ``Y`` in
``[1, y_extent]`` counts blocks along the corridor.  Each zone is an S-by-S
block of cells (``S = 2L + 1``) whose centre cell is the zone *node*.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

Cell = Tuple[int, int]


class GridConfigError(ValueError):
    """Raised when the grid description is geometrically invalid."""


def min_cell_edge(safety_radius: float) -> float:
    """Smallest admissible cell edge so diagonal hand-offs keep separation.

    Two vehicles moving through diagonally adjacent cells approach within
    ``d / (2*sqrt(5))`` of each other at the worst instant, so the edge must be
    at least ``2*sqrt(5)`` times the safety radius.
    """
    return 2.0 * math.sqrt(5.0) * safety_radius


class PathKind(enum.Enum):
    ALPHA = "alpha"          # node -> node of the zone above, straight upstream
    BETA = "beta"            # inward boundary -> node, lateral (absent at stream 0)
    GAMMA = "gamma"          # node -> outward boundary, lateral
    BETA_HAT = "beta_hat"    # diagonal from a beta cell up onto the alpha path
    GAMMA_HAT = "gamma_hat"  # diagonal from a gamma cell in onto the alpha path
    DELTA_HAT = "delta_hat"  # node -> node of the inward-diagonal zone (absent at stream 0)


@dataclass(frozen=True)
class PathRef:
    """A concrete path of a zone.

    ``index`` selects one of the L parallel diagonals for the hat kinds (the
    lateral-path position it starts from, counted from the relevant end).
    ``side`` is +1 (right) or -1 (left) and only meaningful for the two
    gamma branches of a stream-0 zone; elsewhere the stream sign fixes it.
    """

    kind: PathKind
    index: Optional[int] = None
    side: Optional[int] = None


@dataclass(frozen=True)
class DesignParams:
    """Static design constants of the corridor layout."""

    L: int
    M: int
    eta: float
    cell_size: float = 5.0
    safety_radius: float = 1.0
    slot_seconds: float = 2.5

    def __post_init__(self):
        if self.L < 1:
            raise GridConfigError("L must be >= 1")
        if not (2 <= self.M <= self.S):
            raise GridConfigError(f"M must satisfy 2 <= M <= S (S={self.S})")
        if not (0.0 <= self.eta <= 1.0):
            raise GridConfigError("eta must lie in [0, 1]")
        if self.cell_size < min_cell_edge(self.safety_radius) - 1e-9:
            raise GridConfigError(
                f"cell edge {self.cell_size} below safe minimum "
                f"{min_cell_edge(self.safety_radius):.4f}"
            )

    @property
    def S(self) -> int:
        return 2 * self.L + 1


@dataclass
class Zone:
    stream: int
    level: int
    no_fly: bool = False


@dataclass(frozen=True)
class RigidTransform:
    """World -> grid frame map (translation plus axis-aligned rotation)."""

    origin: Tuple[float, float]
    upstream: Tuple[int, int]   # world unit vector of the +y grid axis
    right: Tuple[int, int]      # world unit vector of the +x grid axis

    def to_grid(self, world_xy: Tuple[float, float]) -> Tuple[float, float]:
        dx = world_xy[0] - self.origin[0]
        dy = world_xy[1] - self.origin[1]
        return (
            dx * self.right[0] + dy * self.right[1],
            dx * self.upstream[0] + dy * self.upstream[1],
        )


@dataclass(frozen=True)
class GridSpec:
    """Raw grid description as it appears in a config file."""

    segment_start: Tuple[float, float]
    segment_end: Tuple[float, float]
    params: DesignParams
    x_extent: int
    no_fly_rects: Tuple[Tuple[float, float, float, float], ...] = ()
    workspace: Optional[Tuple[float, float, float, float]] = None


class Grid:
    """The zone lattice plus all geometric queries used by the rules engine."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.params = spec.params
        self.L = spec.params.L
        self.S = spec.params.S
        self.x_extent = spec.x_extent
        if self.x_extent < 1:
            raise GridConfigError("x_extent must be >= 1")

        sx, sy = spec.segment_start
        ex, ey = spec.segment_end
        dx, dy = ex - sx, ey - sy
        if (dx != 0) == (dy != 0):
            raise GridConfigError("nominal segment must be axis aligned and non-degenerate")
        length = abs(dx) + abs(dy)
        if length % self.S != 0:
            raise GridConfigError(
                f"segment length {length} is not a multiple of S={self.S}"
            )
        self.y_extent = int(length) // self.S
        up = (int(math.copysign(1, dx)) if dx else 0, int(math.copysign(1, dy)) if dy else 0)
        right = (up[1], -up[0])  # right-hand side when facing upstream
        self.transform = RigidTransform(origin=(sx, sy), upstream=up, right=right)

        self.zones: Dict[Tuple[int, int], Zone] = {}
        for X in range(-self.x_extent, self.x_extent + 1):
            for Y in range(1, self.y_extent + 1):
                self.zones[(X, Y)] = Zone(X, Y)
        self._apply_no_fly(spec)

    # -- construction helpers ------------------------------------------------
    def _apply_no_fly(self, spec: GridSpec) -> None:
        if spec.workspace is not None:
            wx0, wy0, wx1, wy1 = self._rect_to_grid(spec.workspace)
            for z in self.zones.values():
                (cx0, cy0), (cx1, cy1) = self.zone_bounds((z.stream, z.level))
                if cx0 < wx0 or cy0 < wy0 or cx1 > wx1 or cy1 > wy1:
                    z.no_fly = True  # partially outside the workspace
        for rect in spec.no_fly_rects:
            rx0, ry0, rx1, ry1 = self._rect_to_grid(rect)
            for z in self.zones.values():
                (cx0, cy0), (cx1, cy1) = self.zone_bounds((z.stream, z.level))
                if cx0 <= rx1 and rx0 <= cx1 and cy0 <= ry1 and ry0 <= cy1:
                    z.no_fly = True

    def _rect_to_grid(self, rect) -> Tuple[float, float, float, float]:
        (ax, ay) = self.transform.to_grid((rect[0], rect[1]))
        (bx, by) = self.transform.to_grid((rect[2], rect[3]))
        return min(ax, bx), min(ay, by), max(ax, bx), max(ay, by)

    # -- zone geometry -------------------------------------------------------
    def node(self, zone: Tuple[int, int]) -> Cell:
        X, Y = zone
        return (X * self.S, (Y - 1) * self.S + self.L)

    def zone_bounds(self, zone: Tuple[int, int]) -> Tuple[Cell, Cell]:
        """Inclusive (min, max) cell corners of the zone block."""
        X, Y = zone
        return (
            (X * self.S - self.L, (Y - 1) * self.S),
            (X * self.S + self.L, Y * self.S - 1),
        )

    def cell_to_zone(self, cell: Cell) -> Optional[Tuple[int, int]]:
        x, y = cell
        if not (0 <= y < self.y_extent * self.S):
            return None
        X = (x + self.L) // self.S
        if abs(X) > self.x_extent:
            return None
        return (X, y // self.S + 1)

    def in_grid(self, zone: Tuple[int, int]) -> bool:
        return zone in self.zones

    def source_node(self) -> Cell:
        return self.node((0, 1))

    def neighbors(self, zone: Tuple[int, int]) -> Dict[str, Optional[Tuple[int, int]]]:
        """up / inward / inward_diag / outward neighbours (None when absent).

        ``inward`` moves |stream| down by one, ``outward`` up by one; both are
        undefined for stream 0 (its two outward neighbours are ``(+/-1, Y)``).
        """
        X, Y = zone
        sgn = 0 if X == 0 else (1 if X > 0 else -1)
        out: Dict[str, Optional[Tuple[int, int]]] = {
            "up": (X, Y + 1) if (X, Y + 1) in self.zones else None,
            "inward": None,
            "inward_diag": None,
            "outward": None,
        }
        if sgn != 0:
            inw = (X - sgn, Y)
            ind = (X - sgn, Y + 1)
            outw = (X + sgn, Y)
            out["inward"] = inw if inw in self.zones else None
            out["inward_diag"] = ind if ind in self.zones else None
            out["outward"] = outw if outw in self.zones else None
        return out

    # -- lateral path bookkeeping -------------------------------------------
    def lateral_position(self, zone: Tuple[int, int], cell: Cell) -> Optional[Tuple[int, int]]:
        """Return (j, side) if ``cell`` lies on the zone's lateral path.

        ``j`` runs 1..S with the node at ``j = L + 1``; for stream != 0, beta
        cells are j <= L (inward of the node) and gamma cells are j > L + 1.
        For stream 0 there is no beta: j counts L+1 at the node plus the
        outward offset, and ``side`` tells which gamma branch (+1 right,
        -1 left; side 0 at the node).
        """
        X, _ = zone
        nx, ny = self.node(zone)
        x, y = cell
        if y != ny:
            return None
        dx = x - nx
        if abs(dx) > self.L:
            return None
        if X == 0:
            side = 0 if dx == 0 else (1 if dx > 0 else -1)
            return (self.L + 1 + abs(dx), side)
        o = 1 if X > 0 else -1
        j = self.L + 1 + o * dx
        if not (1 <= j <= self.S):
            return None
        return (j, o)

    def relative_position(self, zone: Tuple[int, int], cell: Cell) -> int:
        pos = self.lateral_position(zone, cell)
        if pos is None:
            raise ValueError(f"cell {cell} is not on the lateral path of zone {zone}")
        return pos[0]

    def preference(self, j: int) -> int:
        """Re-route preference of lateral position j (node = 0, beta > 0)."""
        return self.L + 1 - j

    def lateral_cells(self, zone: Tuple[int, int]) -> List[Cell]:
        """All S cells of the zone's lateral (node) row, j = 1..S order for
        stream != 0 and inward-to-outward order either side for stream 0."""
        nx, ny = self.node(zone)
        return [(nx + d, ny) for d in range(-self.L, self.L + 1)]

    # -- paths ---------------------------------------------------------------
    def path_cells(self, zone: Tuple[int, int], path: PathRef) -> List[Cell]:
        X, _ = zone
        nx, ny = self.node(zone)
        L, S = self.L, self.S
        o = 1 if X > 0 else (-1 if X < 0 else None)

        if path.kind is PathKind.ALPHA:
            return [(nx, ny + i) for i in range(1, S + 1)]

        if path.kind is PathKind.DELTA_HAT:
            if o is None:
                raise ValueError("stream-0 zones have no delta-hat path")
            return [(nx - o * i, ny + i) for i in range(1, S + 1)]

        if path.kind is PathKind.BETA:
            if o is None:
                raise ValueError("stream-0 zones have no beta path")
            return [(nx - o * (L + 1 - j), ny) for j in range(1, L + 1)]

        if path.kind is PathKind.GAMMA:
            s = o if o is not None else path.side
            if s not in (-1, 1):
                raise ValueError("stream-0 gamma needs side=+1 or side=-1")
            return [(nx + s * d, ny) for d in range(1, L + 1)]

        if path.kind is PathKind.BETA_HAT:
            if o is None:
                raise ValueError("stream-0 zones have no beta-hat paths")
            i = path.index
            if not (i is not None and 1 <= i <= L):
                raise ValueError("beta-hat index must be in [1, L]")
            psi = L + 1 - i
            return [(nx - o * (psi - t), ny + t) for t in range(1, psi + 1)]

        if path.kind is PathKind.GAMMA_HAT:
            s = o if o is not None else path.side
            if s not in (-1, 1):
                raise ValueError("stream-0 gamma-hat needs side=+1 or side=-1")
            i = path.index
            if not (i is not None and 1 <= i <= L):
                raise ValueError("gamma-hat index must be in [1, L]")
            return [(nx + s * (i - t), ny + t) for t in range(1, i + 1)]

        raise ValueError(f"unknown path kind {path.kind}")

    def reroute_cells(self, zone: Tuple[int, int], psi: int, side: int) -> List[Cell]:
        """Full S-transition service route from lateral position with
        preference ``psi`` up to the node of the zone above.

        ``psi > 0``: |psi| outward-diagonal then S-|psi| upstream (beta side).
        ``psi < 0``: |psi| inward-diagonal then S-|psi| upstream (gamma side,
        ``side`` picks the branch for stream 0).
        ``psi == 0``: S straight upstream transitions (the alpha path).
        """
        X, _ = zone
        nx, ny = self.node(zone)
        S = self.S
        if abs(psi) > self.L:
            raise ValueError("|psi| cannot exceed L")
        cells: List[Cell] = []
        if psi > 0:
            o = 1 if X > 0 else -1
            if X == 0:
                raise ValueError("stream-0 zones have no beta side (psi > 0)")
            cells += [(nx - o * (psi - t), ny + t) for t in range(1, psi + 1)]
        elif psi < 0:
            d = -psi
            s = side if X == 0 else (1 if X > 0 else -1)
            cells += [(nx + s * (d - t), ny + t) for t in range(1, d + 1)]
        cells += [(nx, ny + u) for u in range(len(cells) + 1, S + 1)]
        assert len(cells) == S and cells[-1] == (nx, ny + S)
        return cells

    def descend_cells(self, zone: Tuple[int, int]) -> List[Cell]:
        """The delta-hat route: S inward-diagonal transitions from the node."""
        return self.path_cells(zone, PathRef(PathKind.DELTA_HAT))


def build_grid(spec: GridSpec) -> Grid:
    """Validate a grid description and materialise the zone lattice."""
    return Grid(spec)
