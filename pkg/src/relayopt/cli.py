"""Command-line front end.

Subcommands:
    solve        one instance -> JSON {allocation, metrics, trace}
    sweep        scenario Monte-Carlo -> CSV (plus optional JSON mirror)
    oracle       solver vs. exhaustive grid search on tiny instances
    convergence  outer-loop trace as JSON lines
    scenarios    list the built-in sweep specs

Exit status: 0 success, 1 bad input/validation, 2 non-convergence under
--strict (solve only).  RELAYOPT_CONFIG names a default config file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Optional

import numpy as np

from .channel import generate_instance
from .config import ConfigError, SystemConfig, load_config
from .experiments import (CSV_COLUMNS, builtin_scenarios, run_sweep,
                          write_csv, write_json)
from .model import Direct, compute_metrics
from .oracle import GridSpec, brute_force_eem
from .solver import Solution, solve_eem, solve_sem

ENV_CONFIG = "RELAYOPT_CONFIG"

_OVERRIDE_FIELDS = ("n_users", "n_subcarriers", "n_relays", "p_max_dbm",
                    "cell_radius_km", "d_r", "master_seed")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit status 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None,
                   help=f"config file (default: ${ENV_CONFIG})")
    p.add_argument("--set", dest="sets", action="append", default=[],
                   metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--k", type=int, dest="n_users", help="number of users")
    p.add_argument("--n", type=int, dest="n_subcarriers",
                   help="number of subcarriers")
    p.add_argument("--m", type=int, dest="n_relays", help="number of relays")
    p.add_argument("--p-max-dbm", type=float, dest="p_max_dbm")
    p.add_argument("--radius-km", type=float, dest="cell_radius_km")
    p.add_argument("--d-r", type=float, dest="d_r")
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--strict", action="store_true",
                   help="fail (exit 2) on non-converged solves")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap for sweeps")


def _build_parser() -> _Parser:
    parser = _Parser(prog="relayopt")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one channel instance")
    _add_common(p)
    p.add_argument("--algorithm", choices=("eem", "sem"), default="eem")
    p.add_argument("--sem", action="store_true",
                   help="shorthand for --algorithm sem")
    p.add_argument("--exact-snr", action="store_true",
                   help="also report metrics under the exact AF SNR")

    p = sub.add_parser("sweep", help="run a Monte-Carlo scenario sweep")
    _add_common(p)
    p.add_argument("--scenario", required=True,
                   help="built-in scenario name (see `scenarios`)")
    p.add_argument("--out", default=None,
                   help="CSV output path (default: stdout)")
    p.add_argument("--json", dest="json_out", default=None,
                   help="also write a JSON mirror here")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--algorithms", default=None,
                   help="comma list, e.g. EEM,SEM")

    p = sub.add_parser("oracle", help="certify the solver against brute force")
    _add_common(p)
    p.add_argument("--seeds", type=int, default=20,
                   help="number of instances to certify")
    p.add_argument("--power-points", type=int, default=200)
    p.add_argument("--beta-points", type=int, default=101)
    p.add_argument("--refine-rounds", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=0.01,
                   help="allowed relative EE shortfall vs the oracle")

    p = sub.add_parser("convergence", help="outer-loop trace as JSON lines")
    _add_common(p)
    p.add_argument("--out", default=None,
                   help="output path (default: stdout)")

    sub.add_parser("scenarios", help="list built-in sweep scenarios")
    return parser


def _json_safe(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _dump(obj, stream) -> None:
    json.dump(obj, stream, indent=2, default=_json_safe)
    stream.write("\n")


def _collect_overrides(args) -> dict:
    overrides = {}
    for item in args.sets:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return overrides


def _config_path(args):
    return args.config or os.environ.get(ENV_CONFIG) or None


def _load_cfg(args, base: Optional[SystemConfig] = None) -> SystemConfig:
    return load_config(_config_path(args), _collect_overrides(args), base=base)


def _allocation_doc(alloc) -> dict:
    entries = []
    for (k, n) in sorted(alloc.entries, key=lambda kn: (kn[1], kn[0])):
        entry = alloc.entries[(k, n)]
        if isinstance(entry, Direct):
            entries.append({"user": k, "subcarrier": n, "protocol": "direct",
                            "p": float(entry.p_d)})
        else:
            entries.append({"user": k, "subcarrier": n, "protocol": "af",
                            "p_bs": float(entry.p_bs),
                            "p_rn": float(entry.p_rn)})
    return {"n_users": alloc.n_users, "n_subcarriers": alloc.n_subcarriers,
            "entries": entries}


def _solution_doc(sol: Solution) -> dict:
    return {"allocation": _allocation_doc(sol.allocation),
            "metrics": dataclasses.asdict(sol.metrics),
            "trace": dataclasses.asdict(sol.trace)}


def _cmd_solve(args) -> int:
    cfg = _load_cfg(args)
    _, chan = generate_instance(cfg, cfg.master_seed)
    algorithm = "sem" if args.sem else args.algorithm
    sol = solve_sem(chan, cfg) if algorithm == "sem" else solve_eem(chan, cfg)
    doc = _solution_doc(sol)
    doc["algorithm"] = algorithm.upper()
    doc["seed"] = cfg.master_seed
    if args.exact_snr:
        exact = compute_metrics(sol.allocation, chan, cfg.radio(),
                                cfg.power_model(), exact_snr=True)
        doc["metrics_exact"] = dataclasses.asdict(exact)
    _dump(doc, sys.stdout)
    if args.strict and sol.trace.termination != "converged":
        print(f"solver did not converge ({sol.trace.termination})",
              file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args) -> int:
    scenarios = builtin_scenarios()
    if args.scenario not in scenarios:
        raise ConfigError(f"unknown scenario {args.scenario!r}; "
                          f"choose from {', '.join(scenarios)}")
    spec = scenarios[args.scenario]
    # the common flags re-shape the scenario's base configuration
    spec = dataclasses.replace(spec, base=_load_cfg(args, base=spec.base))
    if args.samples is not None:
        spec = dataclasses.replace(spec, samples=args.samples)
    if args.algorithms:
        algs = tuple(a.strip().upper() for a in args.algorithms.split(","))
        spec = dataclasses.replace(spec, algorithms=algs)
    if args.master_seed is not None:
        spec = dataclasses.replace(spec, master_seed=args.master_seed)

    records = run_sweep(spec, threads=max(1, args.threads))
    if args.out and args.out != "-":
        write_csv(records, args.out)
    else:
        import csv as _csv
        w = _csv.writer(sys.stdout)
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([getattr(rec, col) for col in CSV_COLUMNS])
    if args.json_out:
        write_json(records, args.json_out)
    return 0


def _assignment_key(alloc):
    out = {}
    for (k, n), entry in alloc.entries.items():
        out[n] = (k, "direct" if isinstance(entry, Direct) else "af")
    return out


def _cmd_oracle(args) -> int:
    cfg = _load_cfg(args)
    grid = GridSpec(power_points=args.power_points,
                    beta_points=args.beta_points,
                    refine_rounds=args.refine_rounds)
    grid.validate()
    results = []
    for i in range(args.seeds):
        seed = cfg.master_seed + i
        _, chan = generate_instance(cfg, seed)
        sol = solve_eem(chan, cfg)
        ora = brute_force_eem(chan, cfg, grid)
        gap = ((sol.metrics.ee - ora.metrics.ee) / ora.metrics.ee
               if ora.metrics.ee > 0.0 else 0.0)
        results.append({
            "seed": seed,
            "solver_ee": sol.metrics.ee,
            "oracle_ee": ora.metrics.ee,
            "relative_gap": gap,
            "assignment_match":
                _assignment_key(sol.allocation) ==
                _assignment_key(ora.allocation),
        })
    gaps = [r["relative_gap"] for r in results]
    report = {
        "n_users": cfg.n_users, "n_subcarriers": cfg.n_subcarriers,
        "n_relays": cfg.n_relays, "p_max_dbm": cfg.p_max_dbm,
        "seeds": args.seeds,
        "grid": {"power_points": grid.power_points,
                 "beta_points": grid.beta_points,
                 "refine_rounds": grid.refine_rounds},
        "results": results,
        "summary": {
            "min_relative_gap": min(gaps),
            "mean_relative_gap": sum(gaps) / len(gaps),
            "max_relative_gap": max(gaps),
            "assignment_matches": sum(r["assignment_match"] for r in results),
            "all_within_tolerance": min(gaps) >= -args.tolerance,
        },
    }
    _dump(report, sys.stdout)
    return 0 if report["summary"]["all_within_tolerance"] else 1


def _cmd_convergence(args) -> int:
    cfg = _load_cfg(args)
    _, chan = generate_instance(cfg, cfg.master_seed)
    sol = solve_eem(chan, cfg)
    t = sol.trace
    stream = open(args.out, "w") if args.out else sys.stdout
    try:
        cumulative = 0
        for i, q in enumerate(t.q_sequence):
            cumulative += t.inner_iterations_per_outer[i]
            row = {"iteration": i + 1, "q": q,
                   "inner_iters": t.inner_iterations_per_outer[i],
                   "cumulative_inner_iters": cumulative,
                   "lambda": t.lambda_final[i],
                   "f_residual": t.f_sequence[i]}
            stream.write(json.dumps(row, default=_json_safe) + "\n")
    finally:
        if args.out:
            stream.close()
    return 0


def _cmd_scenarios(_args) -> int:
    for name, spec in builtin_scenarios().items():
        axes = "; ".join(f"{k}={v}" for k, v in spec.axes.items()) or "single point"
        print(f"{name}: {axes} | samples={spec.samples} "
              f"| algorithms={','.join(spec.algorithms)}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
    "convergence": _cmd_convergence,
    "scenarios": _cmd_scenarios,
}


def dispatch(subcommand: str, args) -> int:
    """Run one subcommand with its argument list; returns the exit status."""
    return main([subcommand, *list(args)])


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        return _COMMANDS[ns.command](ns)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
