"""Command-line entry points.

    flexbeam run       execute a Monte-Carlo experiment from a config file
    flexbeam calibrate print the calibrated carrier power for a scenario
    flexbeam oracle    cross-check fast paths against brute-force references
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness
from .geometry import distance, smallest_enclosing_circle
from .link_budget import calibrate_carrier_power
from .oracles import brute_force_enclosing_circle, qp_first_order_oracle_batch


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="flexbeam", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte-Carlo experiment")
    p_run.add_argument("--config", help="INI config file; defaults are the HT scenario")
    p_run.add_argument("--seed", type=int, help="master seed override")
    p_run.add_argument("--runs", type=int, help="realization count override")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--strategies", help="comma-separated strategy labels")
    p_run.add_argument("--jobs", type=int, help="parallel worker count")
    p_run.add_argument("--scenario", choices=["HT", "WHS", "RT"], help="scenario override")

    p_cal = sub.add_parser("calibrate", help="print the calibrated carrier power")
    p_cal.add_argument("--config", help="INI config file")
    p_cal.add_argument("--scenario", choices=["HT", "WHS", "RT"])

    p_or = sub.add_parser("oracle", help="run brute-force cross-checks")
    p_or.add_argument("kind", choices=["sec", "qp"], help="which oracle to run")
    p_or.add_argument("--instances", type=int, default=100)
    p_or.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "calibrate":
        return _cmd_calibrate(args)
    return _cmd_oracle(args)


def _load(args, **extra):
    overrides = dict(extra)
    for key in ("seed", "runs", "jobs", "scenario"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "strategies", None):
        overrides["strategies"] = tuple(
            tok.strip() for tok in args.strategies.split(",") if tok.strip())
    return harness.load_config(args.config, **overrides)


def _cmd_run(args) -> int:
    try:
        config = _load(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    def progress(done, total):
        print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    try:
        result = harness.run_experiment(config, progress=progress)
    except OSError as exc:
        print(f"\noutput error: {exc}", file=sys.stderr)
        return 2
    print("", file=sys.stderr)

    summary = result["summary"]
    print(f"scenario {config.scenario}, {config.runs} runs, seed {config.seed}")
    header = f"{'strategy':9s} {'NQU':>9s} {'NU':>9s} {'offered':>10s} {'min rate':>9s} {'iters':>6s}"
    print(header)
    any_ok = False
    for name in config.strategies:
        s = summary[name]
        if s["runs"] == 0:
            print(f"{name:9s} {'all runs failed':>45s}")
            continue
        any_ok = True
        print(f"{name:9s} {s['nqu']:9.4f} {s['nu']:9.4f} {s['total_offered_mbps']:10.1f} "
              f"{s['min_user_rate_mbps']:9.2f} {s['iterations']:6.2f}")
    print(f"results in {result['out_dir']}")
    return 0 if any_ok else 1


def _cmd_calibrate(args) -> int:
    try:
        config = _load(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    scenario, _ = harness.build_scenario(config)
    params = harness.build_system_params(config, scenario)
    power, snr_ref = calibrate_carrier_power(
        scenario.total_demand_mbps, scenario.n_beams, config.carriers_per_color,
        params.antenna, params.link)
    print(f"scenario {config.scenario}: beams={scenario.n_beams} "
          f"aggregate demand={scenario.total_demand_mbps:.0f} Mbps")
    print(f"carrier power:  {power:.6f} W")
    print(f"reference SNR:  {snr_ref:.6f} ({10*np.log10(snr_ref):.3f} dB) at beam center")
    return 0


def _cmd_oracle(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "sec":
        worst = 0.0
        for _ in range(args.instances):
            n = int(rng.integers(1, 201))
            pts = rng.uniform(-500, 500, (n, 2))
            fast = smallest_enclosing_circle(pts, seed=1)
            slow = brute_force_enclosing_circle(pts)
            worst = max(worst, abs(fast.radius - slow.radius),
                        distance(fast.center, slow.center))
        print(f"smallest enclosing circle: {args.instances} instances, "
              f"max |fast - brute force| = {worst:.3e} km")
        return 0 if worst <= 1e-6 else 1

    from .allocation import solve_bandwidth_qp

    sys.path.insert(0, "")
    insts, oracle_inputs = [], []
    for _ in range(args.instances):
        n_beams = 2 * int(rng.integers(1, 3))
        n_users = int(rng.integers(1, 13))
        demands = rng.uniform(5.0, 60.0, n_users)
        cand = np.full((n_users, 2), -1, dtype=int)
        eff = np.zeros((n_users, 2))
        for n in range(n_users):
            beams = rng.choice(n_beams, size=min(int(rng.integers(1, 3)), n_beams),
                               replace=False)
            for c, b in enumerate(beams):
                cand[n, c] = b
                eff[n, c] = rng.uniform(0.3, 4.5)
        mode = "paired" if rng.uniform() < 0.5 else "per_beam"
        limit = float(rng.uniform(60, 500)) if mode == "paired" else float(rng.uniform(30, 250))
        cap = float(rng.uniform(20, 62.5))
        insts.append(dict(demands=demands, cand_eff=eff, cand_beams=cand,
                          n_beams=n_beams, mode=mode, total_bandwidth_mhz=limit,
                          user_cap_mhz=cap, per_beam_cap_mhz=limit))
        group = np.where(cand >= 0, cand // 2 if mode == "paired" else cand, -1)
        n_groups = n_beams // 2 if mode == "paired" else n_beams
        oracle_inputs.append(dict(demands=demands, eff=eff, slot_group=group,
                                  group_limits=np.full(n_groups, limit), user_cap=cap))
    _, oracle_objs = qp_first_order_oracle_batch(oracle_inputs)
    worst = 0.0
    for inst, ref in zip(insts, oracle_objs):
        sol = solve_bandwidth_qp(**inst)
        scale = max(sol.objective_value, ref, 1e-6 * float((inst["demands"] ** 2).sum()))
        worst = max(worst, abs(sol.objective_value - ref) / scale)
    print(f"bandwidth program: {args.instances} instances, "
          f"max relative objective gap vs first-order oracle = {worst:.3e}")
    return 0 if worst <= 1e-4 else 1


if __name__ == "__main__":
    raise SystemExit(main())
