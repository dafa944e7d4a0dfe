"""Energy-efficient power/subcarrier allocation solver.

Outer loop: Dinkelbach iteration on the rate/power ratio — repeatedly
maximize F(q) = R - q*P and update q until the ratio stops improving.
Inner loop: Lagrangian dual decomposition of the budget constraint;
for a given multiplier every subcarrier solves a closed-form
water-filling subproblem per (user, protocol) candidate and the best
marginal wins the subcarrier.  The multiplier is found either by
bisection on the (monotone) allocated-power curve (default) or by the
constant-step projected subgradient update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, TYPE_CHECKING

import numpy as np

from .model import (
    LN2,
    Af,
    Allocation,
    Direct,
    Metrics,
    compute_metrics,
)

if TYPE_CHECKING:
    from .channel import ChannelRealization
    from .config import SystemConfig

_FEAS_SLACK = 1e-12  # relative slack when classifying an iterate as feasible


@dataclass
class SolverParams:
    i_outer_max: int = 10
    i_inner_max: int = 100
    eps_outer: float = 1e-8
    eps_inner: float = 1e-8
    lambda_mode: str = "bisection"   # "bisection" | "subgradient"
    lambda_step: float = 0.0         # subgradient step; 0 -> 0.05 / p_max
    lambda_init: float = 1.0
    tie_break: str = "lowest-index"  # "lowest-index" | "seeded-random"
    tie_seed: int = 0

    def validate(self) -> None:
        if self.i_outer_max < 1 or self.i_inner_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.eps_outer <= 0.0 or self.eps_inner <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.lambda_mode not in ("bisection", "subgradient"):
            raise ValueError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.tie_break not in ("lowest-index", "seeded-random"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")
        if self.lambda_init <= 0.0:
            raise ValueError("lambda_init must be positive")
        if self.lambda_step < 0.0:
            raise ValueError("lambda_step must be >= 0")


@dataclass
class Candidate:
    """Per-(user, subcarrier, protocol) closed-form subproblem solution."""

    user: int
    protocol: str         # "direct" | "af"
    marginal: float       # objective gain if this candidate wins the subcarrier
    effective_gain: float  # alpha, 1/W
    p_d: float = 0.0
    p_bs: float = 0.0
    p_rn: float = 0.0
    beta: Optional[float] = None

    @property
    def tx_power(self) -> float:
        return self.p_d if self.protocol == "direct" else self.p_bs + self.p_rn


@dataclass
class SolverTrace:
    q_sequence: list = field(default_factory=list)       # q after each outer iteration
    inner_iterations_per_outer: list = field(default_factory=list)
    lambda_final: list = field(default_factory=list)     # multiplier per outer iteration
    termination: str = "converged"                       # converged | outer-limit | inner-limit
    f_residual: float = 0.0                              # F at the last solved q parameter
    f_sequence: list = field(default_factory=list)       # F per outer iteration
    q_params: list = field(default_factory=list)         # q parameter fed to each inner solve


@dataclass
class InnerTrace:
    iterations: int
    converged: bool
    p_used: float
    f_value: float


@dataclass
class Solution:
    allocation: Allocation
    metrics: Metrics
    trace: SolverTrace


def _check_q_lambda(q: float, lam: float) -> None:
    if q < 0.0 or lam < 0.0:
        raise ValueError("q and lambda must be >= 0")
    if q == 0.0 and lam == 0.0:
        raise ValueError("q = lambda = 0 gives an unbounded water level")


def _marginal(x):
    """Objective increase of a winning candidate: log2(1+x) - x/(ln2*(1+x))."""
    return (np.log1p(x) - x / (1.0 + x)) / LN2


def direct_candidate(q: float, lam: float, gain: float, noise_gap: float,
                     xi_bs: float) -> Candidate:
    """Water-filling solution of the single-hop subproblem at price q*xi + lam."""
    _check_q_lambda(q, lam)
    if gain <= 0.0 or noise_gap <= 0.0:
        raise ValueError("gain and noise_gap must be positive")
    alpha = gain / noise_gap
    level = 1.0 / (LN2 * (q * xi_bs + lam))
    p = max(0.0, level - 1.0 / alpha)
    marg = float(_marginal(alpha * p)) if p > 0.0 else 0.0
    return Candidate(user=-1, protocol="direct", marginal=marg,
                     effective_gain=alpha, p_d=p)


def af_beta(q: float, lam: float, g1: float, g2: float,
            xi_bs: float, xi_rn: float) -> float:
    """Optimal first-hop share of an AF pair's total power.

    Algebraically equal to the textbook quotient
    (-g2*b + sqrt(g1*g2*a*b)) / (g1*a - g2*b) but free of its 0/0 at
    g1*a = g2*b: with x = sqrt(g1*a), y = sqrt(g2*b) the quotient
    collapses to y/(x+y).
    """
    _check_q_lambda(q, lam)
    if g1 <= 0.0 or g2 <= 0.0:
        raise ValueError("hop gains must be positive")
    a = q * xi_bs + 2.0 * lam
    b = q * xi_rn + 2.0 * lam
    x = math.sqrt(g1 * a)
    y = math.sqrt(g2 * b)
    return y / (x + y)


def af_candidate(q: float, lam: float, g1: float, g2: float, noise_gap: float,
                 xi_bs: float, xi_rn: float) -> Candidate:
    """Closed-form AF subproblem: split beta, then water-fill the total power."""
    beta = af_beta(q, lam, g1, g2, xi_bs, xi_rn)
    if noise_gap <= 0.0:
        raise ValueError("noise_gap must be positive")
    a = q * xi_bs + 2.0 * lam
    b = q * xi_rn + 2.0 * lam
    alpha = beta * (1.0 - beta) * g1 * g2 / ((beta * g1 + (1.0 - beta) * g2) * noise_gap)
    level = 1.0 / (LN2 * (beta * a + (1.0 - beta) * b))
    p = max(0.0, level - 1.0 / alpha)
    marg = 0.5 * float(_marginal(alpha * p)) if p > 0.0 else 0.0
    return Candidate(user=-1, protocol="af", marginal=marg, effective_gain=alpha,
                     p_bs=beta * p, p_rn=(1.0 - beta) * p, beta=beta)


def assign_subcarriers(candidates, tie_break: str = "lowest-index",
                       rng: Optional[np.random.Generator] = None):
    """Winner-take-all over one subcarrier's candidate list.

    Returns the candidate with the largest marginal, or None if every
    marginal is negative (the subcarrier idles).  Ties go to the first
    candidate in list order, or to a random maximal candidate when
    tie_break == "seeded-random".
    """
    if not candidates:
        return None
    best = max(c.marginal for c in candidates)
    if best < 0.0:
        return None
    winners = [c for c in candidates if c.marginal == best]
    if tie_break == "seeded-random" and len(winners) > 1:
        rng = rng or np.random.default_rng(0)
        return winners[int(rng.integers(len(winners)))]
    return winners[0]


def update_lambda_subgradient(lam: float, step: float, p_max: float,
                              p_used: float) -> float:
    """Projected subgradient step on the budget multiplier."""
    return max(0.0, lam - step * (p_max - p_used))


class _Problem:
    """Per-instance constants, precomputed once per solve."""

    def __init__(self, chan: "ChannelRealization", cfg: "SystemConfig"):
        self.chan = chan
        self.cfg = cfg
        pm = cfg.power_model()
        self.pm = pm
        self.radio = cfg.radio()
        self.p_max = pm.p_max
        self.p_fixed = pm.p_c_bs + cfg.n_relays * pm.p_c_rn
        self.xi_bs = pm.xi_bs
        self.xi_rn = pm.xi_rn
        self.ngap = chan.noise_gap
        self.n_users = cfg.n_users
        self.n_subcarriers = cfg.n_subcarriers
        self.has_af = cfg.n_relays > 0 and chan.g_rn_ue is not None

        self.alpha_d = chan.g_bs_ue / self.ngap  # (K, N)
        if self.has_af:
            g1 = chan.g_bs_rn[chan.sector_of_ue]  # (K, N) feeder gain per user
            g2 = chan.g_rn_ue
            self.sqrt_g1 = np.sqrt(g1)
            self.sqrt_g2 = np.sqrt(g2)
            self.g1 = g1
            self.g2 = g2


@dataclass
class _SweepResult:
    """One full candidate sweep at fixed (q, lambda)."""

    lam: float
    winner_user: np.ndarray     # (N,)
    winner_af: np.ndarray       # (N,) bool
    p_d: np.ndarray             # (N,) direct power of the winner (0 if AF)
    p_bs: np.ndarray            # (N,)
    p_rn: np.ndarray            # (N,)
    rate_sum: float
    cons_sum: float             # amplifier drain, W
    p_used: float               # radiated power against the budget, W
    def f_value(self, q: float, p_fixed: float) -> float:
        return self.rate_sum - q * (p_fixed + self.cons_sum)


def _sweep(prob: _Problem, q: float, lam: float,
           params: SolverParams) -> _SweepResult:
    """Build all 2NK candidates and pick each subcarrier's winner."""
    # direct candidates, all (k, n) at once
    wl_d = 1.0 / (LN2 * (q * prob.xi_bs + lam))
    p_d = np.maximum(0.0, wl_d - 1.0 / prob.alpha_d)
    x_d = prob.alpha_d * p_d
    marg_d = _marginal(x_d)
    rate_d = np.log1p(x_d) / LN2
    cons_d = prob.xi_bs * p_d

    if prob.has_af:
        a = q * prob.xi_bs + 2.0 * lam
        b = q * prob.xi_rn + 2.0 * lam
        x = prob.sqrt_g1 * math.sqrt(a)
        y = prob.sqrt_g2 * math.sqrt(b)
        beta = y / (x + y)
        alpha_a = beta * (1.0 - beta) * prob.g1 * prob.g2 / (
            (beta * prob.g1 + (1.0 - beta) * prob.g2) * prob.ngap)
        wl_a = 1.0 / (LN2 * (beta * a + (1.0 - beta) * b))
        p_a = np.maximum(0.0, wl_a - 1.0 / alpha_a)
        x_a = alpha_a * p_a
        marg_a = 0.5 * _marginal(x_a)
        rate_a = 0.5 * np.log1p(x_a) / LN2
        cons_a = 0.5 * p_a * (beta * prob.xi_bs + (1.0 - beta) * prob.xi_rn)

        # candidate order (user-major, direct before AF) fixes the
        # deterministic tie-break
        marg = np.stack([marg_d, marg_a], axis=1).reshape(2 * prob.n_users, -1)
        flat = np.argmax(marg, axis=0)  # first max = lowest user, direct first
        if params.tie_break == "seeded-random":
            flat = _retie_random(marg, flat, params)
        winner_user = flat // 2
        winner_af = (flat % 2).astype(bool)
    else:
        marg = marg_d
        flat = np.argmax(marg, axis=0)
        if params.tie_break == "seeded-random":
            flat = _retie_random(marg, flat, params)
        winner_user = flat
        winner_af = np.zeros(prob.n_subcarriers, dtype=bool)

    cols = np.arange(prob.n_subcarriers)
    wp_d = np.where(winner_af, 0.0, p_d[winner_user, cols])
    if prob.has_af:
        wp_tot = np.where(winner_af, p_a[winner_user, cols], 0.0)
        wbeta = beta[winner_user, cols]
        wp_bs = wp_tot * wbeta
        wp_rn = wp_tot * (1.0 - wbeta)
        rate = np.where(winner_af, rate_a[winner_user, cols], rate_d[winner_user, cols])
        cons = np.where(winner_af, cons_a[winner_user, cols], cons_d[winner_user, cols])
    else:
        wp_bs = np.zeros(prob.n_subcarriers)
        wp_rn = np.zeros(prob.n_subcarriers)
        rate = rate_d[winner_user, cols]
        cons = cons_d[winner_user, cols]

    return _SweepResult(
        lam=lam,
        winner_user=winner_user,
        winner_af=winner_af,
        p_d=wp_d,
        p_bs=wp_bs,
        p_rn=wp_rn,
        rate_sum=float(np.sum(rate)),
        cons_sum=float(np.sum(cons)),
        p_used=float(np.sum(wp_d) + np.sum(wp_bs) + np.sum(wp_rn)),
    )


def _retie_random(marg: np.ndarray, flat: np.ndarray,
                  params: SolverParams) -> np.ndarray:
    """Replace first-index argmax by a seeded random choice on exact ties."""
    best = marg[flat, np.arange(marg.shape[1])]
    tied = (marg == best).sum(axis=0) > 1
    if not np.any(tied):
        return flat
    rng = np.random.default_rng(params.tie_seed)
    flat = flat.copy()
    for n in np.nonzero(tied)[0]:
        pool = np.nonzero(marg[:, n] == best[n])[0]
        flat[n] = pool[rng.integers(len(pool))]
    return flat


def _to_allocation(prob: _Problem, sweep: _SweepResult) -> Allocation:
    """Materialize the winners with positive power; the rest idle."""
    entries = {}
    for n in range(prob.n_subcarriers):
        k = int(sweep.winner_user[n])
        if sweep.winner_af[n]:
            if sweep.p_bs[n] + sweep.p_rn[n] > 0.0:
                entries[(k, n)] = Af(float(sweep.p_bs[n]), float(sweep.p_rn[n]))
        elif sweep.p_d[n] > 0.0:
            entries[(k, n)] = Direct(float(sweep.p_d[n]))
    return Allocation(prob.n_users, prob.n_subcarriers, entries)


def _search_bisection(prob: _Problem, q: float, params: SolverParams):
    """Find the budget multiplier by bisection on p_used(lambda).

    p_used is non-increasing in lambda (it is the negated subgradient of
    the convex dual), so a bracket [lo, hi] with p_used(lo) > p_max >=
    p_used(hi) always closes.  Where p_used jumps across p_max (an
    assignment switch) the bracket collapses instead and the best
    feasible iterate seen wins.
    """
    p_max = prob.p_max
    # Budget slack at exit.  Kept near float resolution so that rates
    # reported for different q parameters differ through the objective,
    # not through leftover line-search slack (the rate error of an
    # iterate is ~lambda * (p_max - p_used)).
    tol_p = 1e-12 * p_max
    evals = 0

    def ev(lam):
        nonlocal evals
        evals += 1
        return _sweep(prob, q, lam, params)

    if q > 0.0:
        r = ev(0.0)
        if r.p_used <= p_max * (1.0 + _FEAS_SLACK):
            return r, evals, True  # budget slack at zero price: interior optimum
    # else: p_used(0+) is unbounded at q=0, never evaluate lambda=0

    lo = 0.0
    hi = params.lambda_init
    r_hi = ev(hi)
    while r_hi.p_used > p_max * (1.0 + _FEAS_SLACK):
        lo = hi
        hi *= 2.0
        r_hi = ev(hi)
        if hi > 1e300:  # unreachable: p_used -> 0 as lambda grows
            raise RuntimeError("lambda bracket failed to close")
    bracket_ok = evals <= params.i_inner_max

    best = r_hi
    converged = False
    while True:
        if p_max - r_hi.p_used <= tol_p:
            converged = True
            break
        if hi - lo <= 1e-15 * max(1.0, hi):
            converged = True  # multiplier pinned to float resolution; jump point
            break
        if evals >= params.i_inner_max:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            converged = True  # bracket no longer splits in float
            break
        r = ev(mid)
        if r.p_used > p_max * (1.0 + _FEAS_SLACK):
            lo = mid
        else:
            hi, r_hi = mid, r
            if r.f_value(q, prob.p_fixed) > best.f_value(q, prob.p_fixed):
                best = r
    return best, evals, converged and bracket_ok


def _search_subgradient(prob: _Problem, q: float, params: SolverParams):
    """Constant-step projected subgradient on the budget multiplier."""
    p_max = prob.p_max
    step = params.lambda_step if params.lambda_step > 0.0 else 0.05 / p_max
    lam_floor = 1e-18 if q == 0.0 else 0.0  # zero price at q=0 is undefined
    lam = max(params.lambda_init, lam_floor)
    best = None
    evals = 0
    converged = False
    for _ in range(params.i_inner_max):
        r = _sweep(prob, q, lam, params)
        evals += 1
        if r.p_used <= p_max * (1.0 + _FEAS_SLACK):
            if best is None or r.f_value(q, prob.p_fixed) > best.f_value(q, prob.p_fixed):
                best = r
        new_lam = update_lambda_subgradient(lam, step, p_max, r.p_used)
        new_lam = max(new_lam, lam_floor)
        if abs(new_lam - lam) <= params.eps_inner:
            lam = new_lam
            converged = True
            break
        lam = new_lam
    if best is None:
        # no feasible iterate seen; raise the price until one appears
        lam = max(lam, 1e-12)
        while True:
            r = _sweep(prob, q, lam, params)
            evals += 1
            if r.p_used <= p_max * (1.0 + _FEAS_SLACK):
                best = r
                break
            lam *= 2.0
        converged = False
    return best, evals, converged


def _search_lambda(prob: _Problem, q: float, params: SolverParams):
    if params.lambda_mode == "bisection":
        return _search_bisection(prob, q, params)
    return _search_subgradient(prob, q, params)


def solve_inner(q: float, chan: "ChannelRealization", cfg: "SystemConfig",
                params: Optional[SolverParams] = None):
    """Maximize F(q) = R - q*P over assignments and powers at fixed q.

    Returns (Allocation, lambda*, InnerTrace).  The returned allocation
    is integral and feasible; non-convergence of the multiplier search
    is reported in the trace, not raised.
    """
    if q < 0.0:
        raise ValueError("q must be >= 0")
    params = params if params is not None else cfg.solver_params()
    params.validate()
    prob = _Problem(chan, cfg)
    sweep, evals, converged = _search_lambda(prob, q, params)
    alloc = _to_allocation(prob, sweep)
    trace = InnerTrace(iterations=evals, converged=converged,
                       p_used=sweep.p_used,
                       f_value=sweep.f_value(q, prob.p_fixed))
    return alloc, sweep.lam, trace


@dataclass
class _OuterStep:
    """One outer (Dinkelbach) iteration's inner solve, before acceptance."""

    q: float                # ratio parameter the sweep was solved at
    sweep: _SweepResult
    evals: int
    inner_ok: bool
    f_val: float            # F(q) of the sweep
    q_new: float            # rate/power ratio of the sweep
    accepted: bool          # False for the safeguard-rejected final solve


def _dinkelbach_steps(prob: _Problem, params: SolverParams):
    """Run the Dinkelbach outer loop, recording every inner solve.

    Returns (steps, termination).  A step with accepted=False is the
    safeguard case: the inexact inner solve at the updated q came back
    with F < 0, i.e. worse than the incumbent allocation (whose F at
    that q is 0 by construction), so the ratio cannot improve further.
    """
    steps = []
    q = 0.0
    termination = "outer-limit"
    for _ in range(params.i_outer_max):
        sweep, evals, inner_ok = _search_lambda(prob, q, params)
        f_val = sweep.f_value(q, prob.p_fixed)
        p_total = prob.p_fixed + sweep.cons_sum
        q_new = sweep.rate_sum / p_total if p_total > 0.0 else 0.0
        if steps and f_val < 0.0:
            steps.append(_OuterStep(q, sweep, evals, inner_ok, f_val,
                                    q_new, accepted=False))
            termination = "converged"
            break
        steps.append(_OuterStep(q, sweep, evals, inner_ok, f_val,
                                q_new, accepted=True))
        delta = q_new - q
        q = q_new
        if delta <= params.eps_outer:
            termination = "converged" if inner_ok else "inner-limit"
            break
    return steps, termination


def solve_eem(chan: "ChannelRealization", cfg: "SystemConfig",
              params: Optional[SolverParams] = None) -> Solution:
    """Energy-efficiency maximization via the Dinkelbach outer loop."""
    params = params if params is not None else cfg.solver_params()
    params.validate()
    prob = _Problem(chan, cfg)
    steps, termination = _dinkelbach_steps(prob, params)

    trace = SolverTrace()
    for s in steps:
        if not s.accepted:
            trace.f_residual = 0.0
            break
        trace.q_params.append(s.q)
        trace.q_sequence.append(s.q_new)
        trace.inner_iterations_per_outer.append(s.evals)
        trace.lambda_final.append(s.sweep.lam)
        trace.f_sequence.append(s.f_val)
        trace.f_residual = s.f_val
    trace.termination = termination

    incumbent = [s for s in steps if s.accepted][-1]
    alloc = _to_allocation(prob, incumbent.sweep)
    metrics = compute_metrics(alloc, chan, prob.radio, prob.pm)
    return Solution(alloc, metrics, trace)


def solve_sem(chan: "ChannelRealization", cfg: "SystemConfig",
              params: Optional[SolverParams] = None) -> Solution:
    """Spectral-efficiency maximization.

    Runs the same outer trajectory as the energy-efficiency solve and
    returns the highest-rate feasible iterate.  The q=0 solve alone is
    the textbook answer, but at a budget-crossing assignment switch its
    dual search cannot exhaust the budget, and an iterate solved at
    q > 0 (whose water levels tilt slightly toward the cheap hops) can
    land closer to the budget and carry more rate; taking the best
    iterate keeps the returned rate a true upper envelope.  Ties pick
    the earliest iterate, so away from those switch points this is
    exactly the q=0 solution.  The trace describes the chosen iterate:
    q_params holds the ratio parameter it was solved at, f_residual its
    plain rate (F at q=0).
    """
    params = params if params is not None else cfg.solver_params()
    params.validate()
    prob = _Problem(chan, cfg)
    steps, _ = _dinkelbach_steps(prob, params)

    best = None
    best_alloc = None
    best_metrics = None
    for s in steps:
        alloc = _to_allocation(prob, s.sweep)
        metrics = compute_metrics(alloc, chan, prob.radio, prob.pm)
        if best is None or metrics.rate_total > best_metrics.rate_total:
            best, best_alloc, best_metrics = s, alloc, metrics

    trace = SolverTrace(
        q_sequence=[best_metrics.ee],
        inner_iterations_per_outer=[best.evals],
        lambda_final=[best.sweep.lam],
        termination="converged" if best.inner_ok else "inner-limit",
        f_residual=best.sweep.f_value(0.0, prob.p_fixed),  # F(0): the rate
        f_sequence=[best.sweep.f_value(0.0, prob.p_fixed)],
        q_params=[best.q],
    )
    return Solution(best_alloc, best_metrics, trace)
