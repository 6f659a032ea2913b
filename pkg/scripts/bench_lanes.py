#!/usr/bin/env python3
"""Benchmark the jitted episode kernel against the pure-numpy lane.

Runs the same batch of training episodes through both implementations and
reports episodes/second plus the accumulator agreement.

    python3 scripts/bench_lanes.py [--episodes 50] [--batch 32]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from emport import actor_critic as ac
from emport import rngstreams
from emport.backend import NUMBA_ENABLED
from emport.market import MarketParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes", type=int, default=50)
    ap.add_argument("--batch", type=int, default=32)
    args = ap.parse_args()

    p = MarketParams()
    psi0, theta0 = ac.default_initialization(p)
    K, N = p.n_steps, args.batch
    ct = ac._critic_tables(psi0.as_array(), p, K)
    at = ac._actor_tables(theta0.as_array(), p, K)
    noise = [(rngstreams.batch_normals(1, rngstreams.TAG_TRAIN, j, N, K, 3),
              rngstreams.batch_uniforms(1, rngstreams.TAG_TRAIN, j, N, K))
             for j in range(1, args.episodes + 1)]

    from emport._train_numpy import episode_numpy

    lanes = [("numpy", episode_numpy)]
    if NUMBA_ENABLED:
        from emport._train_numba import episode_numba

        episode_numba(p, psi0.as_array(), theta0.as_array(), ct, at,
                      noise[0][0], noise[0][1], True)  # compile
        lanes.insert(0, ("numba", episode_numba))

    results = {}
    for name, fn in lanes:
        t0 = time.perf_counter()
        acc = np.zeros(6)
        for z, u in noise:
            h_psi, _, _ = fn(p, psi0.as_array(), theta0.as_array(), ct, at,
                             z, u, True)
            acc += h_psi
        dt = time.perf_counter() - t0
        results[name] = (acc, dt)
        print(f"{name:6s}: {args.episodes / dt:8.1f} episodes/s "
              f"({1000 * dt / args.episodes:.2f} ms/episode)")

    if len(results) == 2:
        a, b = results["numba"][0], results["numpy"][0]
        rel = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12))
        speedup = results["numpy"][1] / results["numba"][1]
        print(f"speedup: {speedup:.1f}x   accumulator agreement: {rel:.2e} rel")


if __name__ == "__main__":
    main()
