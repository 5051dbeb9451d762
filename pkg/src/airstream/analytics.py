"""Discrete-time queueing model of one corridor grid.

Each zone ``(X, Y)`` owns a queueing system: nodal arrivals show up at the
zone's node, at most one vehicle per slot enters service (an S-slot climb to
the node of the zone above), and a zone is *blocked* (congested) whenever at
least M vehicles are in service, counting any exogenous crossers in the zone
above.  Vehicles that find the system blocked wait on the lateral path under a
last-come-first-served discipline with a hard deadline, after which they spill
outward and become lateral (non-nodal) arrivals of the next stream.

Everything is expressed through finite PGFs (:mod:`airstream.pgf`).  Scalar
relations accept numpy arrays so that the fixed-point solver can sweep a whole
grid of candidate blocking probabilities in one vectorised evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .grid import Grid
from .pgf import Pgf, lincomb

_EPS = 1e-12


def _clip01(x):
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------------------
# elemental relations
# ---------------------------------------------------------------------------

def forward_congestion(w1_0, e0_0, S: int, M: int, exo_window: Optional[int] = None):
    """Probability the system is blocked next slot, given this slot's entry
    probability ``1 - w1_0`` and exogenous cell-occupancy ``1 - e0_0``.

    The blocked probability is one minus the mass of states with fewer than M
    vehicles, split into the empty state, managed-only counts 1..M-1 and
    exogenous-only counts 1..M-1 (mixed low counts are neglected in the same
    way throughout the model).
    """
    We = S if exo_window is None else exo_window
    w = np.asarray(w1_0, dtype=float)
    e = np.asarray(e0_0, dtype=float)
    idle = w ** (S - 1) * e ** We
    managed = sum(
        comb(S - 1, n) * (1.0 - w) ** n * w ** (S - 1 - n) * e ** We
        for n in range(1, M)
    )
    exo = sum(
        comb(We, n) * w ** (S - 1) * e ** (We - n) * (1.0 - e) ** n
        for n in range(1, min(M, We + 1))
    )
    return _clip01(1.0 - idle - managed - exo)


def stream0_queue_recursion(a: Pgf, theta0, L: int) -> List[Pgf]:
    """LCFS lateral-queue occupancy PGFs ``V_1 .. V_L`` for a stream-0 zone.

    ``theta0`` is the per-slot probability that the zone above *is* blocked
    (scalar or array).  While blocked the queue grows by the arrival count;
    when it clears, the newest waiting vehicle (or the fresh arrival) enters
    service, which is the exact shift-divide ``(V(z) - V(0)) / z``.
    """
    th = np.asarray(theta0, dtype=float)
    unit = Pgf.unit()
    v = lincomb([(th, a), (1.0 - th, unit)])
    out = [v]
    for _ in range(1, L):
        stay = (a * v).scale(th)
        served = lincomb([(np.ones_like(th), unit.scale(v.at0())),
                          (np.ones_like(th), v.shift_div() * a)]).scale(1.0 - th)
        v = stay + served
        out.append(v)
    return out


def availability0(a0, vL0, aO0):
    """(sigma, pi) for a stream-0 system.

    ``sigma`` is the chance the system is empty of candidates so that a
    vehicle waiting at the outward neighbour's node may descend in; ``pi`` is
    the chance *some* vehicle is available to start service in a clear slot.
    """
    a0 = np.asarray(a0, dtype=float)
    sigma = a0 * np.asarray(vL0, dtype=float)
    pi = (1.0 - sigma) + sigma * (1.0 - np.asarray(aO0, dtype=float))
    return sigma, pi


def correction_factor(x, M: int, eta: float, S: int):
    """Second-order spill correction; peaks for mid-range loads and fades for
    either empty or saturated queues."""
    zeta = 2.0 * eta if eta <= 0.5 else 2.0 * (1.0 - eta)
    s = np.asarray(x, dtype=float) / (M - 1 + zeta)
    return 0.15 * s * np.exp(-S * s ** 3)


def mmrp_modulate(theta0, pi_e, S: int, M: int):
    """Markov-modulated refinement of the blocking probability.

    Returns ``(theta00, theta10, theta0_star)`` where ``theta00`` is the
    clear-to-clear slot transition probability, ``theta10`` the blocked-to-
    clear one, and ``theta0_star`` the refined stationary clear probability.
    """
    th = np.asarray(theta0, dtype=float)
    pe = _clip01(np.asarray(pi_e, dtype=float))
    theta00 = max(0.0, (S - M - 1) / (S - 1))

    def _theta10(p):
        if p <= _EPS:
            return 0.0
        if p >= 1.0 - _EPS:
            return (S - M) / (S - 1)
        num = comb(S - 2, M - 1) * p ** M * (1.0 - p) ** (S - M)
        den = sum(comb(S - 1, n) * p ** n * (1.0 - p) ** (S - 1 - n) for n in range(M))
        return min(1.0, num / den)

    theta10 = (np.vectorize(_theta10)(pe) if pe.ndim else float(_theta10(float(pe))))
    theta0_star = _clip01(theta00 * th + theta10 * (1.0 - th))
    return theta00, theta10, theta0_star


def mmbp_modulate(theta0_star, theta00, theta10, pi):
    """Bernoulli-process refinement of the service-entry probability.

    Returns ``w1_star_0``; ``1 - w1_star_0`` is the refined per-slot
    probability that a vehicle occupies the first service position.
    """
    theta01 = 1.0 - theta00
    theta11 = 1.0 - np.asarray(theta10, dtype=float)
    ts = np.asarray(theta0_star, dtype=float)
    entry = (theta11 * (1.0 - ts) + theta01 * ts) * np.asarray(pi, dtype=float)
    return 1.0 - _clip01(entry)


def overflow0(a: Pgf, v_list: List[Pgf], theta0_star, w1_star_0, M: int, eta: float, S: int):
    """Per-slot probability that a stream-0 queue loses a vehicle outward."""
    a0 = a.at0()
    vL0 = v_list[-1].at0()
    vprev0 = v_list[-2].at0() if len(v_list) >= 2 else np.ones_like(np.asarray(vL0))
    pq = np.where(vprev0 > _EPS, (vprev0 - vL0) / np.where(vprev0 > _EPS, vprev0, 1.0), 0.0)
    ts = np.asarray(theta0_star, dtype=float)
    phi = (
        (1.0 - ts) * (1.0 - a0 * vprev0) * pq
        + ts * (1.0 - a0) * (1.0 - vL0) * np.asarray(w1_star_0, dtype=float)
        + correction_factor(1.0 - a0, M, eta, S)
    )
    return _clip01(phi)


def overflow_split(phi, eta: float):
    """Stream-0 spill routed by the branch bias: (to +1, to -1)."""
    phi = np.asarray(phi, dtype=float)
    return eta * phi, (1.0 - eta) * phi


def conflict_arrival_estimate(a: Pgf, a_i: Pgf, L: int, M: int, S: int, eta: float):
    """Estimate the node-conflict arrival PGF ``C`` and conflict rate ``Omega``.

    The inward lateral queue is approximated by a *standalone* stream-0-shaped
    system fed by ``a_i`` alone: its own blocking fixed point is solved and
    modulated, and its spill rate gives the per-slot probability that a
    lateral walker reaches the node.  A conflict additionally needs a
    simultaneous nodal arrival.
    """
    ai0 = float(a_i.at0())
    if 1.0 - ai0 <= _EPS:
        c = Pgf.bernoulli(0.0)
        return c, 0.0

    def _th_next(th):
        v = stream0_queue_recursion(a_i, th, L)
        _, pi = availability0(ai0, v[-1].at0(), 1.0)
        w1_0 = 1.0 - (1.0 - np.asarray(th, dtype=float)) * pi
        return forward_congestion(w1_0, 1.0, S, M)

    res = solve_theta0(_th_next)
    v = stream0_queue_recursion(a_i, np.array([res.theta0]), L)
    _, pi = availability0(ai0, v[-1].at0(), 1.0)
    pi = float(np.asarray(pi).reshape(-1)[0])
    th00, th10, th_star = mmrp_modulate(res.theta0, pi, S, M)
    th_star = float(th_star)
    w1s = float(mmbp_modulate(th_star, th00, th10, pi))
    vq = [x.take(0) for x in stream0_queue_recursion(a_i, np.array([th_star]), L)]
    pc = float(overflow0(a_i, vq, th_star, w1s, M, eta, S))
    c = Pgf.bernoulli(pc)
    omega = pc * (1.0 - float(a.at0()))
    return c, omega


def streamX_beta_recursion(a_i: Pgf, theta0, omega, L: int) -> List[Pgf]:
    """Inward lateral queue PGFs ``bV_1 .. bV_{L-1}`` for a stream-X zone.

    The queue only drains when the zone above is clear *and* no node conflict
    is being resolved, so the clear probability is damped by ``omega``.
    """
    th = np.asarray(theta0, dtype=float)
    om = np.asarray(omega, dtype=float)
    blocked = th * 0.0 + (th + om - th * om)
    free = (1.0 - th) * (1.0 - om)
    unit = Pgf.unit()
    v = lincomb([(blocked, a_i), (free, unit)])
    out = [v]
    for _ in range(1, max(1, L - 1)):
        stay = (a_i * v).scale(blocked)
        served = lincomb([(np.ones_like(free), unit.scale(v.at0())),
                          (np.ones_like(free), v.shift_div() * a_i)]).scale(free)
        v = stay + served
        out.append(v)
    return out


def streamX_gamma_recursion(a: Pgf, c: Pgf, b0, theta0, omega, rho, L: int) -> List[Pgf]:
    """Outward lateral queue PGFs ``gV_1 .. gV_L`` for a stream-X zone.

    Six slot scenarios drive the update: a node conflict (weight Omega) with
    the nodal arrival descending or not; no conflict but the system busy or a
    higher-preference vehicle present (weight rho), again split by descend;
    and a genuinely serviceable slot where the newest candidate leaves the
    queue (exact shift-divide).
    """
    th = np.asarray(theta0, dtype=float)
    om = np.asarray(omega, dtype=float)
    rho_ = np.asarray(rho, dtype=float)
    b0_ = np.asarray(b0, dtype=float)
    ones = np.ones(np.broadcast_shapes(th.shape, om.shape, rho_.shape, b0_.shape))
    unit = Pgf.unit()

    w_conf_desc = om * (1.0 - b0_) * ones          # conflict, nodal arrival descends
    w_conf_stay = om * b0_ * ones                  # conflict, nodal arrival joins queue
    w_busy_desc = rho_ * (1.0 - b0_) * (1.0 - om)  # held, descend: conflict walker joins
    w_busy_stay = rho_ * b0_ * (1.0 - om)          # held, arrivals join the queue
    w_free_desc = (1.0 - rho_) * (1.0 - b0_) * (1.0 - om)
    w_free_stay = (1.0 - rho_) * b0_ * (1.0 - om)

    ac = a * c

    def _step(v: Pgf) -> Pgf:
        served_c = unit.scale(v.at0()) + v.shift_div() * c
        served_ac = unit.scale(v.at0()) + v.shift_div() * ac
        return lincomb([
            (w_conf_desc, v),
            (w_conf_stay, a * v),
            (w_busy_desc, v * c),
            (w_busy_stay, v * ac),
            (w_free_desc, served_c),
            (w_free_stay, served_ac),
        ])

    v = lincomb([
        (w_conf_desc, unit),
        (w_conf_stay, a),
        (w_busy_desc, c),
        (w_busy_stay, ac),
        (w_free_desc + w_free_stay, unit),
    ])
    out = [v]
    for _ in range(1, L):
        v = _step(v)
        out.append(v)
    return out


def availabilityX(ai0, bv_last0, c0, b0, a0, gvL0, aO0):
    """(sigma, pi) for a stream-X system, accounting for lateral feeds,
    conflict walkers and nodal arrivals that descend away."""
    sigma = (
        np.asarray(ai0, dtype=float)
        * np.asarray(bv_last0, dtype=float)
        * np.asarray(c0, dtype=float)
        * (1.0 - np.asarray(b0, dtype=float) * (1.0 - np.asarray(a0, dtype=float)))
        * np.asarray(gvL0, dtype=float)
    )
    pi = (1.0 - sigma) + sigma * (1.0 - np.asarray(aO0, dtype=float))
    return sigma, pi


def feedbackX(omega, theta0, pi):
    """First-service-slot vacancy probability ``W1(0)`` for a stream-X system."""
    th = np.asarray(theta0, dtype=float)
    om = np.asarray(omega, dtype=float)
    return 1.0 - _clip01(om + (1.0 - om) * (1.0 - th) * np.asarray(pi, dtype=float))


def overflowX(a: Pgf, a_i: Pgf, c: Pgf, b0, gv_list: List[Pgf],
              theta0_star, w1_star_0, M: int, eta: float, S: int):
    """Per-slot probability a stream-X outward queue loses a vehicle."""
    gvL0 = gv_list[-1].at0()
    gvprev0 = gv_list[-2].at0() if len(gv_list) >= 2 else np.ones_like(np.asarray(gvL0))
    pq = np.where(gvprev0 > _EPS, (gvprev0 - gvL0) / np.where(gvprev0 > _EPS, gvprev0, 1.0), 0.0)
    ts = np.asarray(theta0_star, dtype=float)
    w1s = np.asarray(w1_star_0, dtype=float)
    a0, ai0, c0 = a.at0(), a_i.at0(), c.at0()
    phi = (
        (1.0 - ts) * (1.0 - w1s) * pq
        + ts * (1.0 - ai0 + (1.0 - a0) * np.asarray(b0, dtype=float)) * (1.0 - gvL0) * w1s
        + correction_factor(1.0 - c0, M, eta, S)
    )
    return _clip01(phi)


# ---------------------------------------------------------------------------
# fixed-point solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveResult:
    theta0: float
    residual: float
    bracketed: bool


def solve_theta0(h: Callable[[np.ndarray], np.ndarray],
                 grid_step: float = 1e-3, tol: float = 1e-10) -> SolveResult:
    """Smallest fixed point of ``h`` on [0, 1].

    Scans ``g = h(t) - t`` on a uniform grid, brackets the first sign change
    from ``t = 0`` and bisects it down to ``|g| <= tol``.  If no sign change
    is found the grid argmin of ``|g|`` is returned with ``bracketed=False``.
    """
    ts = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    g = np.asarray(h(ts), dtype=float) - ts

    zero = np.flatnonzero(np.abs(g) <= tol)
    sign_change = np.flatnonzero(np.signbit(g[:-1]) != np.signbit(g[1:]))
    first_zero = zero[0] if zero.size else None
    first_flip = sign_change[0] if sign_change.size else None

    if first_zero is not None and (first_flip is None or first_zero <= first_flip):
        return SolveResult(float(ts[first_zero]), float(abs(g[first_zero])), True)
    if first_flip is None:
        k = int(np.argmin(np.abs(g)))
        return SolveResult(float(ts[k]), float(abs(g[k])), False)

    lo, hi = float(ts[first_flip]), float(ts[first_flip + 1])
    glo = float(g[first_flip])

    def _g(t: float) -> float:
        return float(np.asarray(h(np.array([t])))[0]) - t

    best_t, best_r = lo, abs(glo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = _g(mid)
        if abs(gm) < best_r:
            best_t, best_r = mid, abs(gm)
        if abs(gm) <= tol or hi - lo < 1e-16:
            break
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return SolveResult(best_t, best_r, True)


# ---------------------------------------------------------------------------
# per-zone solve
# ---------------------------------------------------------------------------

@dataclass
class ZoneInputs:
    """Arrival processes and design constants feeding one zone's system."""

    stream: int
    level: int
    S: int
    L: int
    M: int
    eta: float
    a: Pgf                      # nodal arrivals at this zone's node
    a_i: Pgf = None             # inward lateral (spill) arrivals; stream != 0 only
    a_o: Pgf = None             # nodal arrivals at the outward neighbour's node
    e0: Pgf = None              # exogenous cell occupancy in the zone above
    sigma_in: float = 0.0       # descend probability offered by the inward system
    exo_window: Optional[int] = None

    def __post_init__(self):
        unit = Pgf.unit()
        if self.a_i is None:
            self.a_i = unit
        if self.a_o is None:
            self.a_o = unit
        if self.e0 is None:
            self.e0 = unit


@dataclass
class ZoneModelOutputs:
    stream: int
    level: int
    theta0: float
    theta0_star: float
    residual: float
    bracketed: bool
    w1_0: float
    w1_star_0: float
    sigma: float
    pi: float
    phi: float
    mean_in_service: float
    mean_in_queue: float
    mean_exogenous: float
    departures: Pgf

    @property
    def busy_star(self) -> float:
        """Refined blocking probability (what a long run should observe)."""
        return self.theta0_star


def _core0(inp: ZoneInputs, th):
    v = stream0_queue_recursion(inp.a, th, inp.L)
    sigma, pi = availability0(inp.a.at0(), v[-1].at0(), inp.a_o.at0())
    w1_0 = 1.0 - (1.0 - np.asarray(th, dtype=float)) * pi
    th_next = forward_congestion(w1_0, inp.e0.at0(), inp.S, inp.M, inp.exo_window)
    return {"v": v, "sigma": sigma, "pi": pi, "w1_0": w1_0, "theta_next": th_next}


def _coreX(inp: ZoneInputs, th, c: Pgf, omega: float):
    b0 = 1.0 - inp.sigma_in
    bv = streamX_beta_recursion(inp.a_i, th, omega, inp.L)
    rho = 1.0 - (1.0 - np.asarray(th, dtype=float)) * inp.a_i.at0() * bv[-1].at0()
    gv = streamX_gamma_recursion(inp.a, c, b0, th, omega, rho, inp.L)
    sigma, pi = availabilityX(inp.a_i.at0(), bv[-1].at0(), c.at0(), b0,
                              inp.a.at0(), gv[-1].at0(), inp.a_o.at0())
    w1_0 = feedbackX(omega, th, pi)
    th_next = forward_congestion(w1_0, inp.e0.at0(), inp.S, inp.M, inp.exo_window)
    return {"c": c, "omega": omega, "bv": bv, "rho": rho, "gv": gv,
            "sigma": sigma, "pi": pi, "w1_0": w1_0, "theta_next": th_next}


def _make_core(inp: ZoneInputs) -> Callable:
    """Bind a zone's theta-independent pieces into a single-argument core."""
    if inp.stream == 0:
        return lambda t: _core0(inp, t)
    c, omega = conflict_arrival_estimate(inp.a, inp.a_i, inp.L, inp.M, inp.S, inp.eta)
    return lambda t: _coreX(inp, t, c, omega)


def solve_zone(inp: ZoneInputs, grid_step: float = 1e-3, tol: float = 1e-10) -> ZoneModelOutputs:
    """Solve one zone's system: fixed point, modulation, queue stats, spill."""
    core = _make_core(inp)

    res = solve_theta0(lambda t: core(t)["theta_next"], grid_step, tol)
    th0 = res.theta0
    base = core(np.array([th0]))
    sigma = float(np.asarray(base["sigma"]).reshape(-1)[0])
    pi = float(np.asarray(base["pi"]).reshape(-1)[0])
    w1_0 = float(np.asarray(base["w1_0"]).reshape(-1)[0])

    lam_e = float(1.0 - inp.e0.at0())
    pi_e = pi + lam_e - pi * lam_e
    th00, th10, th_star = mmrp_modulate(th0, pi_e, inp.S, inp.M)
    th_star = float(th_star)
    w1s = float(mmbp_modulate(th_star, th00, th10, pi))

    mod = core(np.array([th_star]))
    if inp.stream == 0:
        vq = [v.take(0) for v in mod["v"]]
        phi = float(overflow0(inp.a, vq, th_star, w1s, inp.M, inp.eta, inp.S))
        mean_q = float(vq[-1].mean())
    else:
        bvq = [v.take(0) for v in mod["bv"]]
        gvq = [v.take(0) for v in mod["gv"]]
        cq = mod["c"]
        phi = float(overflowX(inp.a, inp.a_i, cq, 1.0 - inp.sigma_in, gvq,
                              th_star, w1s, inp.M, inp.eta, inp.S))
        mean_q = float(bvq[-1].mean() + gvq[-1].mean())

    We = inp.S if inp.exo_window is None else inp.exo_window
    return ZoneModelOutputs(
        stream=inp.stream, level=inp.level,
        theta0=th0, theta0_star=th_star,
        residual=res.residual, bracketed=res.bracketed,
        w1_0=w1_0, w1_star_0=w1s, sigma=sigma, pi=pi, phi=phi,
        mean_in_service=(inp.S - 1) * (1.0 - w1s),
        mean_in_queue=mean_q,
        mean_exogenous=We * lam_e,
        departures=Pgf.bernoulli(1.0 - w1s),
    )


def _blocked_up_outputs(inp: ZoneInputs) -> ZoneModelOutputs:
    """Zone above is no-fly: nothing enters service, all traffic shifts out."""
    inflow = 1.0 - float(inp.a.at0()) * float(inp.a_i.at0())
    v = stream0_queue_recursion(inp.a, 1.0, inp.L)
    return ZoneModelOutputs(
        stream=inp.stream, level=inp.level,
        theta0=1.0, theta0_star=1.0, residual=0.0, bracketed=True,
        w1_0=1.0, w1_star_0=1.0, sigma=0.0, pi=0.0,
        phi=_clip01(inflow),
        mean_in_service=0.0,
        mean_in_queue=float(v[-1].mean()),
        mean_exogenous=0.0,
        departures=Pgf.bernoulli(0.0),
    )


def _forced_clear_outputs(inp: ZoneInputs) -> ZoneModelOutputs:
    """Inward or inward-diagonal zone is no-fly: treat the system as never
    blocked, so every arrival enters service and nothing queues."""
    base = _make_core(inp)(np.array([0.0]))
    pi = float(np.asarray(base["pi"]).reshape(-1)[0])
    w1 = float(np.asarray(base["w1_0"]).reshape(-1)[0])
    return ZoneModelOutputs(
        stream=inp.stream, level=inp.level,
        theta0=0.0, theta0_star=0.0, residual=0.0, bracketed=True,
        w1_0=w1, w1_star_0=w1, sigma=float(np.asarray(base["sigma"]).reshape(-1)[0]),
        pi=pi, phi=0.0,
        mean_in_service=(inp.S - 1) * (1.0 - w1),
        mean_in_queue=0.0,
        mean_exogenous=float(inp.S * (1.0 - inp.e0.at0())),
        departures=Pgf.bernoulli(1.0 - w1),
    )


# ---------------------------------------------------------------------------
# whole-grid sweep
# ---------------------------------------------------------------------------

@dataclass
class AnalyticScenario:
    grid: Grid
    lam: float
    lam_e: float = 0.0
    exo_level: Optional[int] = None   # physical level crossed by exogenous traffic
    exo_in_plane: bool = True
    M_schedule: Dict[int, int] = field(default_factory=dict)

    def M_for_level(self, level: int) -> int:
        return self.M_schedule.get(level, self.grid.params.M)


@dataclass
class GridModelResult:
    zones: Dict[Tuple[int, int], ZoneModelOutputs]
    spread: Dict[int, Tuple[int, int]]

    def max_residual(self) -> float:
        return max(z.residual for z in self.zones.values())


def analyze_grid(scn: AnalyticScenario, grid_step: float = 1e-3, tol: float = 1e-10) -> GridModelResult:
    """Level-by-level sweep of the whole grid.

    Arrivals cascade upward (a zone's departures are the nodal arrivals of
    the zone above), spills cascade outward within a level, and descend
    opportunities couple each zone to its inward neighbour of the same level.
    """
    g = scn.grid
    Xe, Ye, S, L = g.x_extent, g.y_extent, g.S, g.L
    eta = g.params.eta
    unit = Pgf.unit()

    A: Dict[Tuple[int, int], Pgf] = {(X, 1): unit for X in range(-Xe, Xe + 1)}
    A[(0, 1)] = Pgf.bernoulli(scn.lam)
    AO: Dict[Tuple[int, int], Pgf] = {(X, 1): unit for X in range(-Xe, Xe + 1)}
    AI: Dict[Tuple[int, int], Pgf] = {}
    sigma_of: Dict[Tuple[int, int], float] = {}

    zones: Dict[Tuple[int, int], ZoneModelOutputs] = {}
    spread: Dict[int, Tuple[int, int]] = {}

    for Y in range(1, Ye + 1):
        M = scn.M_for_level(Y)
        exo_here = scn.exo_level is not None and scn.exo_level == Y + 1
        e0 = Pgf.bernoulli(scn.lam_e) if exo_here else unit
        We = (S if scn.exo_in_plane else 1) if exo_here else None

        order = [0] + [s * Xa for Xa in range(1, Xe + 1) for s in (1, -1)]
        for X in order:
            sgn = 0 if X == 0 else (1 if X > 0 else -1)
            inp = ZoneInputs(
                stream=X, level=Y, S=S, L=L, M=M, eta=eta,
                a=A.get((X, Y), unit),
                a_i=AI.get((X, Y), unit),
                a_o=AO.get((X, Y), unit),
                e0=e0, exo_window=We,
                sigma_in=sigma_of.get((X - sgn, Y), 0.0) if sgn else 0.0,
            )
            up = g.zones.get((X, Y + 1))
            zin = g.zones.get((X - sgn, Y)) if sgn else None
            zid = g.zones.get((X - sgn, Y + 1)) if sgn else None
            if up is not None and up.no_fly:
                out = _blocked_up_outputs(inp)
            elif sgn and ((zin is not None and zin.no_fly) or (zid is not None and zid.no_fly)):
                out = _forced_clear_outputs(inp)
            else:
                out = solve_zone(inp, grid_step, tol)
            zones[(X, Y)] = out
            sigma_of[(X, Y)] = out.sigma

            if X == 0:
                plus, minus = overflow_split(out.phi, eta)
                if Xe >= 1:
                    AI[(1, Y)] = Pgf.bernoulli(float(plus))
                    AI[(-1, Y)] = Pgf.bernoulli(float(minus))
            else:
                nxt = (X + sgn, Y)
                if abs(nxt[0]) <= Xe:
                    AI[nxt] = Pgf.bernoulli(out.phi)

        active = [X for X in range(-Xe, Xe + 1) if zones[(X, Y)].mean_in_service >= 1.0]
        lo = min([0] + active)
        hi = max([0] + active)
        spread[Y] = (lo, hi)

        for X in range(-Xe, Xe + 1):
            A[(X, Y + 1)] = zones[(X, Y)].departures
        for X in range(-Xe, Xe + 1):
            if X == 0:
                pp = 1.0 - float(A.get((1, Y + 1), unit).at0()) if Xe >= 1 else 0.0
                pm = 1.0 - float(A.get((-1, Y + 1), unit).at0()) if Xe >= 1 else 0.0
                AO[(X, Y + 1)] = Pgf.bernoulli(pp + pm - pp * pm)
            else:
                s = 1 if X > 0 else -1
                nb = (X + s, Y + 1)
                AO[(X, Y + 1)] = A.get(nb, unit)

    return GridModelResult(zones=zones, spread=spread)


def expected_spread(scn: AnalyticScenario, **kw) -> Dict[int, Tuple[int, int]]:
    """Per-level (leftmost, rightmost) streams expected to carry at least one
    vehicle in service on average; stream 0 is always included."""
    return analyze_grid(scn, **kw).spread
