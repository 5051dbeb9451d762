from collections import defaultdict

import numpy as np
import pytest

from airstream import engine
from conftest import make_grid


class CheckedSimulation(engine.Simulation):
    """Simulation with per-slot invariant auditing.

    After every slot it verifies:

    - per-system in-service count never exceeds M outside node-conflict
      episodes (an extra vehicle admitted by a conflict persists for the
      rest of its S-slot climb);
    - every completed service episode spanned exactly S slots;
    - no vehicle outlived its lateral-queue deadline inside one stream
      (interior streams only; edge holds are the closed-airspace exception);
    - every queue spill lands in the adjacent outward stream at the same
      level;
    - delivered vehicles made exactly Ye*S climbing transitions from the
      source node.
    """

    def __init__(self, scn):
        super().__init__(scn)
        self.occupancy_violations = []
        self.episode_violations = []
        self.deadline_violations = []
        self.spill_violations = []
        self.transition_violations = []
        self._episode = {}        # uid -> (system, slots_in_service)
        self._queue_run = {}      # uid -> (zone, consecutive slots)
        self._conflict_slot = {}  # system -> slot of last conflict

    def step(self, deploying):
        pre = dict(self.uas)
        pre_conflicts = {z: st.conflicts for z, st in self.stats.items()}
        pre_state = {uid: (u.cell, u.queued, u.queue_side)
                     for uid, u in pre.items() if u.origin == "managed"}
        super().step(deploying)
        g = self.grid
        S, M_of = g.S, self.scn.M_for_level

        for z, st in self.stats.items():
            if st.conflicts > pre_conflicts[z]:
                self._conflict_slot[z] = self.slot

        svc = defaultdict(int)
        for u in self.uas.values():
            if u.origin == "managed" and u.in_service is not None and u.plan:
                svc[u.in_service] += 1
        for z, n in svc.items():
            if n > M_of(z[1] + 1):
                recent = self._conflict_slot.get(z, -10 * S)
                if self.slot - recent >= S:
                    self.occupancy_violations.append((self.slot, z, n))

        # service episode lengths: S transitions = entry slot + S-1 more
        live = {}
        for uid, u in self.uas.items():
            if u.origin != "managed":
                continue
            if u.in_service is not None:
                z, n = self._episode.get(uid, (u.in_service, 0))
                if z != u.in_service:
                    self.episode_violations.append((self.slot, uid, "switch"))
                live[uid] = (u.in_service, n + 1)
        for uid, (z, n) in self._episode.items():
            still = self.uas.get(uid)
            if uid not in live and n != S - 1:
                self.episode_violations.append((self.slot, uid, n))
        self._episode = live

        # queue deadlines and spill targets: an interior walker crosses one
        # cell per slot, so it can spend at most S slots inside one stream
        # (beta side, node, gamma side) before spilling outward, and it may
        # never stall on a cell
        runs = {}
        for uid, u in self.uas.items():
            if u.origin != "managed" or not u.queued or u.queue_zone is None:
                continue
            old_zone, n = self._queue_run.get(uid, (u.queue_zone, 0))
            if old_zone != u.queue_zone:
                ox, oy = old_zone
                side = pre_state.get(uid, (None, None, u.queue_side))[2]
                if u.queue_zone != (ox + side, oy):
                    self.spill_violations.append((self.slot, uid, old_zone,
                                                  u.queue_zone))
                n = 0
            runs[uid] = (u.queue_zone, n + 1)
            interior = abs(u.queue_zone[0]) < g.x_extent
            if interior and n + 1 > S:
                self.deadline_violations.append((self.slot, uid, u.queue_zone))
            prev = pre_state.get(uid)
            if (interior and prev is not None and prev[1]
                    and prev[0] == u.cell):
                self.deadline_violations.append((self.slot, uid, "stall"))
        self._queue_run = runs

        # delivered vehicles: Ye*S climbing transitions from the source node
        for uid, u in pre.items():
            if uid not in self.uas and u.origin == "managed":
                climbs = u.n_upstream + u.n_diagonal
                if climbs != g.y_extent * S:
                    self.transition_violations.append((self.slot, uid, climbs))

    def assert_clean(self):
        assert not self.occupancy_violations, self.occupancy_violations[:5]
        assert not self.episode_violations, self.episode_violations[:5]
        assert not self.deadline_violations, self.deadline_violations[:5]
        assert not self.spill_violations, self.spill_violations[:5]
        assert not self.transition_violations, self.transition_violations[:5]


def run_checked(lam, M, uas=400, eta=0.5, seed=3, levels=10, **kw):
    g = make_grid(M=M, eta=eta, levels=levels)
    scn = engine.Scenario(grid=g, lam=lam, max_uas=uas, seed=seed, **kw)
    sim = CheckedSimulation(scn)
    metrics = sim.run()
    sim.assert_clean()
    return sim, metrics


def test_scenario_validation(grid10):
    with pytest.raises(ValueError):
        engine.Scenario(grid=grid10, lam=1.2, max_uas=10)
    with pytest.raises(ValueError):
        engine.Scenario(grid=grid10, lam=0.5)  # no stop criterion
    with pytest.raises(ValueError):
        engine.Scenario(grid=grid10, lam=0.5, lam_e=0.2, max_uas=10)


def test_low_traffic_is_undelayed():
    _, m = run_checked(lam=0.05, M=2, uas=150)
    assert m.delivered == m.deployed == 150
    assert m.mean_delay < 0.5
    assert m.spread[1] == (0, 0)


def test_saturation_cycle_busy_fraction():
    # deterministic pairing at full load: busy (S-M)/S in the source zone
    _, m = run_checked(lam=1.0, M=2, uas=1200)
    busy = m.zone_stats[(0, 1)]["busy_fraction"]
    assert abs(busy - 9.0 / 11.0) < 0.03
    assert abs(m.zone_stats[(0, 1)]["mean_in_service"] - 20.0 / 11.0) < 0.05


@pytest.mark.parametrize("lam,M", [(0.4, 2), (0.8, 2), (0.8, 3), (1.0, 4)])
def test_invariants_across_loads(lam, M):
    sim, m = run_checked(lam=lam, M=M, uas=400)
    assert m.delivered == m.deployed


def test_determinism():
    _, m1 = run_checked(lam=0.7, M=2, uas=300, seed=42)
    _, m2 = run_checked(lam=0.7, M=2, uas=300, seed=42)
    assert m1.zone_stats == m2.zone_stats
    assert m1.delays == m2.delays
    _, m3 = run_checked(lam=0.7, M=2, uas=300, seed=43)
    assert m1.delays != m3.delays


def test_spread_widens_with_load():
    _, low = run_checked(lam=0.2, M=2, uas=300)
    _, high = run_checked(lam=0.9, M=2, uas=300)
    lo_w = low.spread[1][1] - low.spread[1][0]
    hi_w = high.spread[1][1] - high.spread[1][0]
    assert hi_w >= lo_w


def test_eta_biases_spread_side():
    _, m = run_checked(lam=0.8, M=2, uas=600, eta=0.1, seed=5)
    lo, hi = m.spread[1]
    assert -lo > hi  # spill pushed to the minus side


def test_exogenous_crossing_counts():
    g = make_grid(M=4)
    scn = engine.Scenario(grid=g, lam=0.1, lam_e=0.2, exo_level=2,
                          exo_offset=2, max_slots=4000, seed=9)
    m = engine.run(scn)
    hist = m.exo_counts.get((0, 2), {})
    total = sum(hist.values())
    assert total > 0
    mean = sum(k * v for k, v in hist.items()) / total
    assert abs(mean - g.S * 0.2) < 0.3


def test_event_log_tags():
    g = make_grid(M=2)
    scn = engine.Scenario(grid=g, lam=0.9, max_uas=120, seed=2,
                          record_events=True)
    sim = engine.Simulation(scn)
    sim.run()
    tags = {t for (_, _, _, t) in sim.events}
    assert {"deploy", "enter-service", "deliver"} <= tags
