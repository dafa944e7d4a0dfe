"""Shared independent re-implementations used to cross-check the solver.

Everything here is deliberately scalar and naive: the point is to agree
with the vectorized production code without sharing its code paths.
"""

import math

from relayopt.model import LN2, Direct
from relayopt.solver import af_candidate, assign_subcarriers, direct_candidate


def beta_quotient(q, lam, g1, g2, xi_bs, xi_rn):
    """Textbook closed form for the AF power split; 0/0 at g1*a == g2*b."""
    a = q * xi_bs + 2.0 * lam
    b = q * xi_rn + 2.0 * lam
    num = -g2 * b + math.sqrt(g1 * g2 * a * b)
    den = g1 * a - g2 * b
    return num / den


def candidates_on(chan, cfg, n, q, lam):
    """Every (user, protocol) candidate for subcarrier n at fixed prices."""
    ngap = chan.noise_gap
    out = []
    for k in range(cfg.n_users):
        c = direct_candidate(q, lam, float(chan.g_bs_ue[k, n]), ngap, cfg.xi_bs)
        out.append((k, "direct", c))
        if cfg.n_relays > 0 and chan.g_rn_ue is not None:
            m = int(chan.sector_of_ue[k])
            c = af_candidate(q, lam, float(chan.g_bs_rn[m, n]),
                             float(chan.g_rn_ue[k, n]), ngap,
                             cfg.xi_bs, cfg.xi_rn)
            out.append((k, "af", c))
    return out


def sweep_at(chan, cfg, q, lam):
    """Scalar winner-take-all sweep: (rate, tx_power, amp_consumption)."""
    rate = 0.0
    tx = 0.0
    cons = 0.0
    for n in range(cfg.n_subcarriers):
        cands = [c for _, _, c in candidates_on(chan, cfg, n, q, lam)]
        win = assign_subcarriers(cands)
        if win is None or win.tx_power <= 0.0:
            continue
        x = win.effective_gain * win.tx_power
        if win.protocol == "direct":
            rate += math.log1p(x) / LN2
            cons += cfg.xi_bs * win.p_d
        else:
            rate += 0.5 * math.log1p(x) / LN2
            cons += 0.5 * (cfg.xi_bs * win.p_bs + cfg.xi_rn * win.p_rn)
        tx += win.tx_power
    return rate, tx, cons


def best_feasible_f_on_grid(chan, cfg, q, lams):
    """max over a multiplier grid of F(q) among budget-feasible sweeps."""
    p_fixed = cfg.p_c_bs_w + cfg.n_relays * cfg.p_c_rn_w
    best = -math.inf
    for lam in lams:
        rate, tx, cons = sweep_at(chan, cfg, q, lam)
        if tx <= cfg.p_max_w * (1.0 + 1e-12):
            best = max(best, rate - q * (p_fixed + cons))
    return best


def kkt_residuals(sol, chan, cfg):
    """Relative stationarity residuals of every powered subcarrier."""
    q = sol.trace.q_params[-1]
    lam = sol.trace.lambda_final[-1]
    ngap = chan.noise_gap
    out = []
    for (k, n), e in sol.allocation.entries.items():
        if isinstance(e, Direct):
            alpha = chan.g_bs_ue[k, n] / ngap
            price = q * cfg.xi_bs + lam
            lhs = alpha / (LN2 * (1.0 + alpha * e.p_d))
        else:
            m = int(chan.sector_of_ue[k])
            g1 = chan.g_bs_rn[m, n]
            g2 = chan.g_rn_ue[k, n]
            p = e.p_bs + e.p_rn
            beta = e.p_bs / p
            a = q * cfg.xi_bs + 2.0 * lam
            b = q * cfg.xi_rn + 2.0 * lam
            alpha = beta * (1.0 - beta) * g1 * g2 / (
                (beta * g1 + (1.0 - beta) * g2) * ngap)
            price = beta * a + (1.0 - beta) * b
            lhs = alpha / (LN2 * (1.0 + alpha * p))
        out.append(abs(lhs - price) / price)
    return out


def dominance_holds(sol, chan, cfg, rel=1e-9):
    """Winner-take-all optimality of the final allocation, re-derived."""
    q = sol.trace.q_params[-1]
    lam = sol.trace.lambda_final[-1]
    chosen = {}
    for (k, n), e in sol.allocation.entries.items():
        chosen[n] = (k, "direct" if isinstance(e, Direct) else "af")
    for n in range(cfg.n_subcarriers):
        cands = candidates_on(chan, cfg, n, q, lam)
        top = max(c.marginal for _, _, c in cands)
        if n not in chosen:
            if top > 1e-12:
                return False
            continue
        k, proto = chosen[n]
        mine = next(c.marginal for kk, pp, c in cands
                    if kk == k and pp == proto)
        if mine < top - rel * max(1.0, abs(top)):
            return False
    return True
