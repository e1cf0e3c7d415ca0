#!/usr/bin/env python3
"""Benchmark the sampler kernels: compiled path vs pure-Python fallback.

Runs the single-kernel chain and the coupled meeting-time sampler on the
4x4 margin lattice under the active path, then re-executes itself in a
subprocess with LATTICE_DP_NO_JIT=1 to time the fallback, and prints a
comparison.  The two paths produce identical trajectories for a given
seed (the test suite asserts this), so this is a pure speed comparison.

Usage: python benchmarks/bench_kernels.py [--sweeps N] [--inner]
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time

from latticedp import _kernels
from latticedp.constraints import table_margin_constraints
from latticedp.coupling import sample_meeting_time
from latticedp.mechanism import compile_constraints
from latticedp.noise import NoiseKind, NoiseTarget
from latticedp.sampler import ChainConfig, ProposalSpec, run_chain


def time_kernels(sweeps):
    ctx = compile_constraints(table_margin_constraints(4, 4))
    target = NoiseTarget(kind=NoiseKind.LAPLACE_L1, epsilon=0.25)
    ps = ProposalSpec.uniform(math.exp(-1.0), ctx.lattice_dim)

    warm = ChainConfig(nsim=200, burn_in=0, thin=200, seed=0)
    run_chain(warm, target, ps, ctx.chain)
    sample_meeting_time(1, ChainConfig(nsim=1, seed=0), target, ps, ctx.chain)

    cfg = ChainConfig(nsim=sweeps, burn_in=0, thin=sweeps, seed=1)
    t0 = time.perf_counter()
    run_chain(cfg, target, ps, ctx.chain)
    chain_secs = time.perf_counter() - t0

    t0 = time.perf_counter()
    total_tau = 0
    reps = 20
    for i in range(reps):
        total_tau += sample_meeting_time(
            1, ChainConfig(nsim=1, seed=100 + i), target, ps, ctx.chain
        ).tau
    couple_secs = time.perf_counter() - t0

    return {
        "jit": _kernels.jit_enabled(),
        "sweeps": sweeps,
        "chain_secs": chain_secs,
        "chain_rate": sweeps / chain_secs,
        "coupled_sweeps": total_tau,
        "couple_secs": couple_secs,
        "couple_rate": total_tau / couple_secs,
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sweeps", type=int, default=None)
    parser.add_argument("--inner", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    jit = _kernels.jit_enabled()
    sweeps = args.sweeps or (2_000_000 if jit else 50_000)
    stats = time_kernels(sweeps)

    if args.inner:
        print(json.dumps(stats))
        return

    label = "numba @njit" if jit else "pure numpy/python"
    print(f"active path: {label}")
    print(f"  chain:    {stats['sweeps']:>9d} sweeps in {stats['chain_secs']:6.2f}s "
          f"({stats['chain_rate']:,.0f} sweeps/s)")
    print(f"  coupling: {stats['coupled_sweeps']:>9d} sweeps in {stats['couple_secs']:6.2f}s "
          f"({stats['couple_rate']:,.0f} sweeps/s)")

    if jit:
        env = dict(os.environ, LATTICE_DP_NO_JIT="1")
        out = subprocess.run(
            [sys.executable, __file__, "--inner", "--sweeps", "50000"],
            capture_output=True, text=True, env=env, check=True,
        )
        other = json.loads(out.stdout)
        print("fallback path: pure numpy/python (LATTICE_DP_NO_JIT=1)")
        print(f"  chain:    {other['sweeps']:>9d} sweeps in {other['chain_secs']:6.2f}s "
              f"({other['chain_rate']:,.0f} sweeps/s)")
        print(f"  coupling: {other['coupled_sweeps']:>9d} sweeps in {other['couple_secs']:6.2f}s "
              f"({other['couple_rate']:,.0f} sweeps/s)")
        print(f"speedup: chain x{stats['chain_rate'] / other['chain_rate']:.0f}, "
              f"coupling x{stats['couple_rate'] / other['couple_rate']:.0f}")


if __name__ == "__main__":
    main()
