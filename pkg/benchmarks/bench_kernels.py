#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure NumPy fallback.

Times the three hot calls of the optimizer loop plus one full beam
optimization on the 3-cell reference topology (4 antennas, 6 users per BS).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from noma_forge._kernels import HAVE_COMPILED, pure
from noma_forge._model import RateModel
from noma_forge.beamforming import OptimizerConfig, optimize_beams, zf_init_all
from noma_forge.channel import ChannelGenConfig, generate_multi_cell
from noma_forge.sic import scheme_bb_noma


def _time(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled backend not available; nothing to compare")
        return

    from noma_forge._kernels import _core

    inst = generate_multi_cell(3, 6, 4, ChannelGenConfig(corr_target=0.5, seed=1))
    sic = scheme_bb_noma(inst)
    model = RateModel(inst, sic.d)
    W = np.ascontiguousarray(zf_init_all(inst).w)
    ord_idx = model.orders_csr(W)
    beta = 50.0

    calls = {
        "smoothed_objective": lambda m: m.smoothed_objective(
            model.Heff, W, model.noise, beta, ord_idx, model.ord_ptr
        ),
        "objective_grad": lambda m: m.smoothed_objective_grad(
            model.Heff, W, model.noise, beta, ord_idx, model.ord_ptr
        ),
        "achievable_sum_rate": lambda m: m.achievable_sum_rate(
            model.Heff, W, model.noise, model.dec_idx, model.dec_ptr
        ),
    }

    print(f"{'kernel':<22}{'compiled':>12}{'pure':>12}{'speedup':>10}")
    for name, call in calls.items():
        tc = _time(lambda: call(_core), args.repeats)
        tp = _time(lambda: call(pure), max(args.repeats // 10, 10))
        print(f"{name:<22}{tc * 1e6:>10.1f}us{tp * 1e6:>10.1f}us{tp / tc:>9.1f}x")

    # end-to-end: one inner-budget optimization per backend
    import noma_forge._kernels as kernels

    cfg = OptimizerConfig(max_iters=100)

    def run_opt():
        optimize_beams(inst, sic, zf_init_all(inst), cfg)

    tc = _time(run_opt, 20)
    saved = {
        n: getattr(kernels, n)
        for n in ("smoothed_objective", "smoothed_objective_grad",
                  "achievable_sum_rate", "decode_rates", "gain_products")
    }
    try:
        for n in saved:
            setattr(kernels, n, getattr(pure, n))
        tp = _time(run_opt, 5)
    finally:
        for n, fn in saved.items():
            setattr(kernels, n, fn)
    print(f"{'optimize_beams(100)':<22}{tc * 1e3:>10.2f}ms{tp * 1e3:>10.2f}ms{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
