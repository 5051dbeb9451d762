import math

import pytest

from airstream.grid import (
    DesignParams, GridConfigError, GridSpec, build_grid, min_cell_edge,
)
from conftest import make_grid


def test_design_params_basics():
    p = DesignParams(L=5, M=2, eta=0.5)
    assert p.S == 11
    with pytest.raises(GridConfigError):
        DesignParams(L=0, M=2, eta=0.5)
    with pytest.raises(GridConfigError):
        DesignParams(L=5, M=1, eta=0.5)
    with pytest.raises(GridConfigError):
        DesignParams(L=5, M=2, eta=1.5)


def test_min_cell_edge_covers_disk():
    # a vehicle disk of radius r anywhere in its cell must stay inside the
    # 3x3 neighbourhood during a diagonal maneuver; edge >= 2r is the bound
    assert min_cell_edge(1.0) >= 2.0
    assert min_cell_edge(2.5) >= 5.0


def test_grid_extents(grid10):
    assert grid10.S == 11 and grid10.L == 5
    assert grid10.y_extent == 10 and grid10.x_extent == 5
    assert len(grid10.zones) == 10 * 11


def test_node_positions(grid10):
    assert grid10.node((0, 1)) == (0, 5)
    assert grid10.node((2, 4)) == (22, 38)
    assert grid10.source_node() == (0, 5)


def test_cell_to_zone_roundtrip(grid10):
    for zone in [(0, 1), (3, 2), (-5, 10)]:
        (x0, y0), (x1, y1) = grid10.zone_bounds(zone)
        assert grid10.cell_to_zone((x0, y0)) == zone
        assert grid10.cell_to_zone((x1, y1)) == zone
        assert grid10.cell_to_zone(grid10.node(zone)) == zone
    assert grid10.cell_to_zone((1000, 0)) is None


def test_lateral_positions_and_preference(grid10):
    zone = (0, 1)
    node = grid10.node(zone)
    j, side = grid10.lateral_position(zone, node)
    assert j == grid10.L + 1 and side == 0
    assert grid10.preference(grid10.L + 1) == 0
    assert grid10.preference(1) == grid10.L
    left = (node[0] - 2, node[1])
    j, side = grid10.lateral_position(zone, left)
    assert grid10.preference(j) in range(-grid10.L, grid10.L + 1)


def test_lateral_cells_row(grid10):
    cells = grid10.lateral_cells((1, 2))
    assert len(cells) == grid10.S
    node = grid10.node((1, 2))
    assert node in cells
    assert all(c[1] == node[1] for c in cells)


def test_reroute_is_exactly_S_transitions(grid10):
    S = grid10.S
    for zone in [(0, 1), (2, 3), (-4, 7)]:
        node = grid10.node(zone)
        # stream 0 has no beta side, so psi > 0 is invalid there
        psis = range(-grid10.L, 1) if zone[0] == 0 else range(-grid10.L, grid10.L + 1)
        for psi in psis:
            for side in ((0, 1, -1) if zone[0] == 0 else (0,)):
                cells = grid10.reroute_cells(zone, psi, side)
                assert len(cells) == S
                # ends at the node of the zone above
                assert cells[-1] == (node[0], node[1] + S)
                # every transition climbs one row
                prev_y = None
                for (_, y) in cells:
                    if prev_y is not None:
                        assert y == prev_y + 1
                    prev_y = y


def test_descend_ends_at_inward_upper_node(grid10):
    cells = grid10.descend_cells((2, 3))
    assert len(cells) == grid10.S
    assert cells[-1] == grid10.node((1, 4))
    cells = grid10.descend_cells((-1, 1))
    assert cells[-1] == grid10.node((0, 2))


def test_neighbors(grid10):
    n = grid10.neighbors((2, 3))
    assert n["up"] == (2, 4)
    assert n["inward"] == (1, 3)
    assert n["inward_diag"] == (1, 4)
    assert n["outward"] == (3, 3)
    top = grid10.neighbors((0, 10))
    assert top["up"] is None


def test_no_fly_marks_zones():
    g = make_grid(no_fly=((10.0, 10.0, 14.0, 14.0),))
    flagged = [z for z, zn in g.zones.items() if zn.no_fly]
    assert flagged and all(g.zones[z].no_fly for z in flagged)


def test_short_segment_rejected():
    params = DesignParams(L=5, M=2, eta=0.5)
    with pytest.raises(GridConfigError):
        build_grid(GridSpec(segment_start=(0.0, 0.0), segment_end=(0.0, 3.0),
                            params=params, x_extent=2))
