"""Simulate a handful of wealth trajectories and inspect the bookkeeping.

Each path records the wealth grid, the default indicator, the default time
(if any) and every claim arrival.  The defaultable-bond price is exact in
closed form: it accrues at r + delta toward par, drops by the loss rate at
default, then accrues at r.

Run:  python demos/04_paths_and_bond.py
"""

import pathlib

import numpy as np

from alphamv import (bond_price_path, build_measure, dump_paths_csv,
                     load_config, simulate_wealth, solve_equilibrium)

HERE = pathlib.Path(__file__).parent

params, claims, numerics = load_config(HERE / "configs" / "base.cfg")
measure = build_measure(claims, numerics.quad_nodes)
solution = solve_equilibrium(params, measure, numerics)

# a default within ten years has probability ~2%, so force plenty of paths
paths = simulate_wealth(solution, None, params, measure,
                        n_paths=200, dt=0.01, seed=7, h0=0)

n_defaulted = sum(path.default_time is not None for path in paths)
claims_per_path = np.mean([len(path.claim_log) for path in paths])
print(f"{len(paths)} paths: {n_defaulted} defaulted, "
      f"{claims_per_path:.2f} claims per path on average")

sample = next((p for p in paths if p.default_time is not None), paths[0])
print(f"\none path: X(0) = {sample.wealth[0]:.3f}, X(T) = {sample.wealth[-1]:.3f}, "
      f"default at tau = {sample.default_time}")
print("first claims (time, size):", [(round(t, 3), round(z, 3)) for t, z in sample.claim_log[:4]])

if sample.default_time is not None:
    tau = sample.default_time
    ts = np.array([0.0, tau - 1e-9, tau, params.T, params.T1])
    prices = bond_price_path(ts, tau, params)
    print(f"\nbond price: p(0) = {prices[0]:.4f}, just before default {prices[1]:.4f}, "
          f"at default {prices[2]:.4f} (drop = {prices[2] / prices[1] - 1.0:+.3f}), "
          f"at T {prices[3]:.4f}")

out = HERE / "output"
out.mkdir(exist_ok=True)
dump_paths_csv(paths[:10], out / "paths.csv")
print(f"\nfirst ten trajectories dumped to {out / 'paths.csv'}")
