"""Benchmark: compiled interpreter kernel vs the pure-Python fallback.

Measures single-input forward passes and ball-enumeration sweeps on randomly
generated dense networks. Run directly:

    python3 benchmarks/bench_interpreter.py
"""

from __future__ import annotations

import random
import time

from qnnverify._dispatch import FastEvaluator, kernel_available
from qnnverify.model import FixedPointLayer, QuantizedNetwork


def random_network(rng: random.Random, dims: list[int], input_bits: int = 6,
                   weight_bits: int = 4) -> QuantizedNetwork:
    top = (1 << (weight_bits - 1)) - 1
    layers = []
    for n_in, n_out in zip(dims, dims[1:]):
        layers.append(
            FixedPointLayer(
                weights=[[rng.randint(-top, top) for _ in range(n_in)] for _ in range(n_out)],
                bias=[rng.randint(-top, top) for _ in range(n_out)],
                bit_shift=[rng.randint(0, 4) for _ in range(n_out)],
                clamp_bits=[input_bits for _ in range(n_out)],
            )
        )
    return QuantizedNetwork(input_bits=input_bits, weight_bits=weight_bits, layers=layers)


def time_forward(evaluator: FastEvaluator, inputs: list[list[int]], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for x in inputs:
            evaluator.forward(x)
        best = min(best, time.perf_counter() - start)
    return best


def time_ball(evaluator: FastEvaluator, lo: list[int], hi: list[int], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        evaluator.find_ball_cex(lo, hi, label=0, limit=1 << 22)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    rng = random.Random(20240901)
    print(f"compiled kernel available: {kernel_available()}")

    print("\n== forward passes (1000 inputs, best of 5) ==")
    for dims in ([784, 64, 32, 10], [784, 16, 10], [32, 32, 32, 32, 10]):
        net = random_network(rng, dims)
        top = (1 << net.input_bits) - 1
        inputs = [[rng.randint(0, top) for _ in range(dims[0])] for _ in range(1000)]
        fast = FastEvaluator(net)
        pure = FastEvaluator(net, force_pure=True)
        t_fast = time_forward(fast, inputs, 5)
        t_pure = time_forward(pure, inputs, 5)
        ratio = t_pure / t_fast if t_fast > 0 else float("inf")
        print(
            f"dims={dims}: {fast.backend}={t_fast * 1e3:8.2f} ms"
            f"  pure={t_pure * 1e3:8.2f} ms  speedup={ratio:6.1f}x"
        )

    print("\n== exhaustive ball enumeration (best of 3) ==")
    # constant-output network: every point classifies 0, so the sweep never
    # exits early and we time the full 3^12 = 531441-point scan
    net = random_network(rng, [12, 16, 10])
    first = net.layers[-1]
    bias = [40] + [0] * (first.n_out - 1)
    net.layers[-1] = FixedPointLayer(
        weights=[[0] * first.n_in for _ in range(first.n_out)],
        bias=bias,
        bit_shift=[0] * first.n_out,
        clamp_bits=first.clamp_bits,
    )
    center = [rng.randint(1, 62) for _ in range(12)]
    lo = [max(0, v - 1) for v in center]
    hi = [min(63, v + 1) for v in center]
    fast = FastEvaluator(net)
    pure = FastEvaluator(net, force_pure=True)
    t_fast = time_ball(fast, lo, hi, 3)
    t_pure = time_ball(pure, lo, hi, 3)
    ratio = t_pure / t_fast if t_fast > 0 else float("inf")
    print(
        f"12-d radius-1 ball (531441 pts): {fast.backend}={t_fast:7.3f} s"
        f"  pure={t_pure:7.3f} s  speedup={ratio:6.1f}x"
    )

    print("\n== per-call latency, small net (10000 calls) ==")
    net = random_network(rng, [16, 8, 4])
    xs = [[rng.randint(0, 63) for _ in range(16)] for _ in range(10000)]
    for name, ev in (("fast", FastEvaluator(net)), ("pure", FastEvaluator(net, force_pure=True))):
        start = time.perf_counter()
        for x in xs:
            ev.classify(x)
        total = time.perf_counter() - start
        print(f"{name} ({ev.backend}): {total / len(xs) * 1e6:8.2f} us/call")


if __name__ == "__main__":
    main()
