"""Brute-force baseline for tiny instances.

Exhaustively enumerates every subcarrier/user/protocol assignment and
grid-searches the powers on each one, entirely independent of the
solver's closed forms.  Exists to certify, not to scale: the power
grids are log-spaced (water-filling optima span decades) with local
refinement rounds recovering near-continuous precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import LN2, Af, Allocation, Direct, compute_metrics
from .solver import Solution, SolverTrace

_P_FLOOR_REL = 1e-6     # grid floor relative to the budget
_REFINE_POINTS = 21     # per-dimension points in refinement rounds
_COARSE_BETA_CAP = 21   # beta grid cap when >= 2 AF subcarriers share the product
_PRODUCT_CAP = 4 * 10**8  # combo guard per assignment
_CHUNK = 1 << 22


@dataclass
class GridSpec:
    power_points: int = 200  # log-spaced levels per power dimension
    beta_points: int = 101   # uniform AF split grid
    refine_rounds: int = 2   # each round shrinks the bracket ~10x

    def validate(self) -> None:
        if min(self.power_points, self.beta_points) < 2 or self.refine_rounds < 0:
            raise ValueError("grid counts must be >= 2 and refine_rounds >= 0")


def enumerate_assignments(n_users: int, n_subcarriers: int, n_relays: int):
    """Yield every map subcarrier -> Idle | (user, 'direct') | (user, 'af')."""
    options = [None]
    for k in range(n_users):
        options.append((k, "direct"))
        if n_relays > 0:
            options.append((k, "af"))
    total = len(options) ** n_subcarriers
    if total > 10**6:
        raise ValueError(
            f"instance too large for exhaustive enumeration ({total} assignments)")
    return itertools.product(options, repeat=n_subcarriers)


@dataclass
class _Menu:
    """Per-subcarrier candidate points: parallel arrays over the grid."""

    rate: np.ndarray
    tx: np.ndarray
    cons: np.ndarray
    p_bs: np.ndarray   # == p for direct entries
    p_rn: np.ndarray   # zeros for direct entries
    beta: Optional[np.ndarray]


def _menu_direct(gain, ngap, xi_bs, p_lo, p_hi, points) -> _Menu:
    p = np.geomspace(p_lo, p_hi, points)
    rate = np.log1p(p * gain / ngap) / LN2
    return _Menu(rate=rate, tx=p, cons=xi_bs * p, p_bs=p, p_rn=np.zeros_like(p),
                 beta=None)


def _menu_af(g1, g2, ngap, xi_bs, xi_rn, p_lo, p_hi, p_points,
             b_lo, b_hi, b_points) -> _Menu:
    p = np.geomspace(p_lo, p_hi, p_points)[:, None]
    b = np.linspace(b_lo, b_hi, b_points)[None, :]
    s1 = b * p * g1 / ngap
    s2 = (1.0 - b) * p * g2 / ngap
    tot = s1 + s2
    snr = np.where(tot > 0.0, s1 * s2 / np.where(tot > 0.0, tot, 1.0), 0.0)
    rate = 0.5 * np.log1p(snr) / LN2
    cons = 0.5 * (xi_bs * b + xi_rn * (1.0 - b)) * p
    tx = np.broadcast_to(p, rate.shape)
    bb = np.broadcast_to(b, rate.shape)
    return _Menu(rate=rate.ravel(), tx=tx.ravel(), cons=cons.ravel(),
                 p_bs=(bb * tx).ravel(), p_rn=((1.0 - bb) * tx).ravel(),
                 beta=bb.ravel())


@dataclass
class _Best:
    score: float = -math.inf
    idx: Optional[tuple] = None

    def offer(self, score: float, idx: tuple) -> None:
        if score > self.score:
            self.score = score
            self.idx = idx


def _scan_product(menus, p_max, p_fixed):
    """Max-EE and max-rate feasible combos over the menu product."""
    best_ee, best_rate = _Best(), _Best()
    sizes = [len(m.rate) for m in menus]
    total = math.prod(sizes)
    if total > _PRODUCT_CAP:
        raise ValueError("assignment power grid too large; reduce grid points")

    def offer_block(rate, tx, cons, mapper):
        feas = tx <= p_max * (1.0 + 1e-12)
        if not np.any(feas):
            return
        rate = np.where(feas, rate, -1.0)
        ee = rate / (p_fixed + cons)
        j = int(np.argmax(ee))
        if rate.flat[j] >= 0.0:
            best_ee.offer(float(ee.flat[j]), mapper(j))
        j = int(np.argmax(rate))
        if rate.flat[j] >= 0.0:
            best_rate.offer(float(rate.flat[j]), mapper(j))

    if len(menus) == 1:
        m0 = menus[0]
        offer_block(m0.rate, m0.tx, m0.cons, lambda j: (j,))
    elif len(menus) == 2:
        m0, m1 = menus
        step = max(1, _CHUNK // sizes[1])
        for i0 in range(0, sizes[0], step):
            sl = slice(i0, min(i0 + step, sizes[0]))
            rate = m0.rate[sl, None] + m1.rate[None, :]
            tx = m0.tx[sl, None] + m1.tx[None, :]
            cons = m0.cons[sl, None] + m1.cons[None, :]

            def mapper(j, base=i0):
                return (base + j // sizes[1], j % sizes[1])

            offer_block(rate, tx, cons, mapper)
    elif len(menus) == 3:
        m0, m1, m2 = menus
        for i0 in range(sizes[0]):
            rate = m0.rate[i0] + m1.rate[:, None] + m2.rate[None, :]
            tx = m0.tx[i0] + m1.tx[:, None] + m2.tx[None, :]
            cons = m0.cons[i0] + m1.cons[:, None] + m2.cons[None, :]

            def mapper(j, base=i0):
                return (base, j // sizes[2], j % sizes[2])

            offer_block(rate, tx, cons, mapper)
    else:
        raise ValueError(
            "budget coupling is searched exactly only up to 3 active subcarriers")
    return best_ee, best_rate


def _build_menus(active, chan, pm, brackets):
    menus = []
    for i, (n, k, proto) in enumerate(active):
        p_lo, p_hi, b_lo, b_hi, p_pts, b_pts = brackets[i]
        if proto == "direct":
            menus.append(_menu_direct(chan.g_bs_ue[k, n], chan.noise_gap,
                                      pm.xi_bs, p_lo, p_hi, p_pts))
        else:
            m = chan.sector_of_ue[k]
            menus.append(_menu_af(chan.g_bs_rn[m, n], chan.g_rn_ue[k, n],
                                  chan.noise_gap, pm.xi_bs, pm.xi_rn,
                                  p_lo, p_hi, p_pts, b_lo, b_hi, b_pts))
    return menus


def _combo_point(menus, idx):
    """Extract (p_bs, p_rn, beta) per active subcarrier from a combo index."""
    out = []
    for m, j in zip(menus, idx):
        beta = None if m.beta is None else float(m.beta[j])
        out.append((float(m.p_bs[j]), float(m.p_rn[j]), beta))
    return out


def _scan_assignment(active, chan, cfg, pm, grid):
    """Grid-optimize one assignment; returns (ee, ee_point, rate, rate_point)."""
    p_fixed = pm.p_c_bs + cfg.n_relays * pm.p_c_rn
    if not active:
        return 0.0, [], 0.0, []

    p_max = pm.p_max
    n_af = sum(1 for _, _, proto in active if proto == "af")
    b_pts = grid.beta_points if n_af < 2 else min(grid.beta_points, _COARSE_BETA_CAP)
    p_lo_g = p_max * _P_FLOOR_REL

    coarse = [(p_lo_g, p_max, 0.0, 1.0, grid.power_points, b_pts)] * len(active)
    menus = _build_menus(active, chan, pm, coarse)
    best_ee, best_rate = _scan_product(menus, p_max, p_fixed)

    results = {}
    for name, best in (("ee", best_ee), ("rate", best_rate)):
        if best.idx is None:
            results[name] = (-math.inf, [])
            continue
        point = _combo_point(menus, best.idx)
        score = best.score
        # local refinement: re-grid +-1 coarse step around the incumbent,
        # shrinking the bracket ~10x per round
        p_ratio = (p_max / p_lo_g) ** (1.0 / (grid.power_points - 1))
        b_halfw = 1.0 / (b_pts - 1)
        for _ in range(grid.refine_rounds):
            brackets = []
            for (pb, pr, beta) in point:
                p = max(pb + pr, p_lo_g)
                lo = max(p / p_ratio, p_lo_g)
                hi = min(p * p_ratio, p_max)
                if beta is None:
                    brackets.append((lo, hi, 0.0, 1.0, _REFINE_POINTS, 2))
                else:
                    b_lo = max(beta - b_halfw, 0.0)
                    b_hi = min(beta + b_halfw, 1.0)
                    brackets.append((lo, hi, b_lo, b_hi, _REFINE_POINTS,
                                     _REFINE_POINTS))
            local = _build_menus(active, chan, pm, brackets)
            loc_ee, loc_rate = _scan_product(local, p_max, p_fixed)
            cand = loc_ee if name == "ee" else loc_rate
            if cand.idx is not None and cand.score > score:
                score = cand.score
                point = _combo_point(local, cand.idx)
            p_ratio = p_ratio ** (2.0 / (_REFINE_POINTS - 1))
            b_halfw = 2.0 * b_halfw / (_REFINE_POINTS - 1)
        results[name] = (score, point)

    (ee, ee_point), (rate, rate_point) = results["ee"], results["rate"]
    return ee, ee_point, rate, rate_point


def _point_to_allocation(active, point, cfg) -> Allocation:
    entries = {}
    for (n, k, proto), (p_bs, p_rn, beta) in zip(active, point):
        if proto == "direct":
            entries[(k, n)] = Direct(p_bs)
        else:
            entries[(k, n)] = Af(p_bs, p_rn)
    return Allocation(cfg.n_users, cfg.n_subcarriers, entries)


def optimize_powers_on_grid(assignment, chan, cfg, grid: Optional[GridSpec] = None):
    """Best feasible powers for one fixed assignment; returns (Allocation, ee)."""
    grid = grid if grid is not None else GridSpec()
    grid.validate()
    pm = cfg.power_model()
    active = [(n, slot[0], slot[1]) for n, slot in enumerate(assignment)
              if slot is not None]
    seen = [n for n, _, _ in active]
    if len(seen) != len(set(seen)):
        raise ValueError("assignment uses a subcarrier twice")
    ee, point, _, _ = _scan_assignment(active, chan, cfg, pm, grid)
    if not active:
        return Allocation(cfg.n_users, cfg.n_subcarriers, {}), 0.0
    return _point_to_allocation(active, point, cfg), ee


def _solution_from(alloc, chan, cfg, pm) -> Solution:
    metrics = compute_metrics(alloc, chan, cfg.radio(), pm)
    trace = SolverTrace(q_sequence=[metrics.ee], termination="converged",
                        f_residual=0.0)
    return Solution(alloc, metrics, trace)


def _brute_force(chan, cfg, grid: Optional[GridSpec] = None):
    grid = grid if grid is not None else GridSpec()
    grid.validate()
    pm = cfg.power_model()
    best = (-math.inf, None, None)   # ee, active, point
    best_r = (-math.inf, None, None)
    for assignment in enumerate_assignments(cfg.n_users, cfg.n_subcarriers,
                                            cfg.n_relays):
        active = [(n, slot[0], slot[1]) for n, slot in enumerate(assignment)
                  if slot is not None]
        ee, ee_point, rate, rate_point = _scan_assignment(active, chan, cfg, pm, grid)
        # strict > keeps the first (lexicographically smallest) assignment on ties
        if ee > best[0]:
            best = (ee, active, ee_point)
        if rate > best_r[0]:
            best_r = (rate, active, rate_point)
    eem = _solution_from(_point_to_allocation(best[1], best[2], cfg), chan, cfg, pm)
    sem = _solution_from(_point_to_allocation(best_r[1], best_r[2], cfg), chan, cfg, pm)
    return eem, sem


def brute_force_eem(chan, cfg, grid: Optional[GridSpec] = None) -> Solution:
    """Exhaustive max-EE Solution (grid-limited lower bound on the optimum)."""
    eem, _ = _brute_force(chan, cfg, grid)
    return eem


def brute_force_sem(chan, cfg, grid: Optional[GridSpec] = None) -> Solution:
    """Exhaustive max-rate Solution under the same budget."""
    _, sem = _brute_force(chan, cfg, grid)
    return sem
