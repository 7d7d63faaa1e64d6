"""Compiled kernel vs pure-Python interpreter: bit-exact agreement."""

from __future__ import annotations

import itertools
import random

import pytest

from conftest import all_inputs, rand_net
from qnnverify._dispatch import FastEvaluator, kernel_available
from qnnverify.model import FixedPointLayer, QuantizedNetwork, eval_network

needs_kernel = pytest.mark.skipif(not kernel_available(), reason="compiled kernel not built")


@needs_kernel
class TestBackendAgreement:
    def test_forward_exhaustive(self):
        rng = random.Random(101)
        for _ in range(15):
            net = rand_net(rng, max_neurons=3, input_bits=3)
            fast = FastEvaluator(net)
            pure = FastEvaluator(net, force_pure=True)
            assert fast.backend == "compiled"
            assert pure.backend == "pure"
            for x in all_inputs(net):
                xs = list(x)
                assert fast.forward(xs) == pure.forward(xs) == eval_network(net, xs)
                assert fast.classify(xs) == pure.classify(xs)

    def test_forward_large_random(self):
        rng = random.Random(102)
        net = rand_net(
            rng, n_inputs=40, max_layers=2, max_neurons=12, input_bits=6, weight_bits=5,
            max_clamp=6,
        )
        fast = FastEvaluator(net)
        pure = FastEvaluator(net, force_pure=True)
        assert fast.backend == "compiled"
        top = 2**net.input_bits - 1
        for _ in range(200):
            x = [rng.randint(0, top) for _ in range(net.n_inputs)]
            assert fast.forward(x) == pure.forward(x)

    def test_ball_scan_identical(self):
        rng = random.Random(103)
        for _ in range(10):
            net = rand_net(rng, n_inputs=3, max_layers=1, max_neurons=3, input_bits=3)
            fast = FastEvaluator(net)
            pure = FastEvaluator(net, force_pure=True)
            lo = [rng.randint(0, 3) for _ in range(3)]
            hi = [min(7, v + rng.randint(0, 3)) for v in lo]
            for label in range(net.n_outputs):
                assert fast.find_ball_cex(lo, hi, label) == pure.find_ball_cex(lo, hi, label)

    def test_scan_order_is_odometer(self):
        # the first hit must be the first point in last-coordinate-fastest order
        rng = random.Random(104)
        for _ in range(10):
            net = rand_net(rng, n_inputs=2, max_layers=1, max_neurons=3, input_bits=3)
            ev = FastEvaluator(net)
            lo, hi = [0, 0], [7, 7]
            got = ev.find_ball_cex(lo, hi, label=0)
            expect = None
            for xs in itertools.product(range(8), range(8)):
                if ev.classify(list(xs)) != 0:
                    expect = list(xs)
                    break
            assert got == expect


class TestRouting:
    def test_env_forces_pure(self, monkeypatch):
        monkeypatch.setenv("QNNV_PURE", "1")
        net = rand_net(random.Random(105))
        assert FastEvaluator(net).backend == "pure"
        monkeypatch.setenv("QNNV_PURE", "")
        # explicit constructor argument wins over the env default
        assert FastEvaluator(net, force_pure=True).backend == "pure"

    def test_edge_shift_routes_pure(self):
        net = QuantizedNetwork(
            input_bits=3,
            weight_bits=2,
            layers=[
                FixedPointLayer(
                    weights=[[1]],
                    bias=[0],
                    bit_shift=[0],
                    clamp_bits=[3],
                    edge_shift=[[1]],
                    edge_shift_dir="left",
                )
            ],
        )
        ev = FastEvaluator(net)
        assert ev.backend == "pure"
        assert ev.forward([3]) == [6]

    def test_wide_clamp_routes_pure(self):
        net = QuantizedNetwork(
            input_bits=3,
            weight_bits=2,
            layers=[FixedPointLayer(weights=[[1]], bias=[0], bit_shift=[0], clamp_bits=[70])],
        )
        assert FastEvaluator(net).backend == "pure"

    def test_huge_bias_routes_pure(self):
        net = QuantizedNetwork(
            input_bits=3,
            weight_bits=2,
            layers=[
                FixedPointLayer(weights=[[1]], bias=[1 << 62], bit_shift=[0], clamp_bits=[3])
            ],
        )
        ev = FastEvaluator(net)
        assert ev.backend == "pure"
        assert ev.forward([0]) == [7]


class TestLimits:
    def test_point_limit_enforced(self):
        net = rand_net(random.Random(106), n_inputs=3, input_bits=3)
        ev = FastEvaluator(net)
        with pytest.raises(OverflowError):
            ev.find_ball_cex([0, 0, 0], [7, 7, 7], label=0, limit=100)

    def test_empty_range_rejected(self):
        net = rand_net(random.Random(107), n_inputs=1, input_bits=3)
        with pytest.raises(ValueError):
            FastEvaluator(net).find_ball_cex([3], [2], label=0)

    def test_exhausted_box_returns_none(self):
        # constant network classifies everything as 0
        net = QuantizedNetwork(
            input_bits=2,
            weight_bits=2,
            layers=[
                FixedPointLayer(
                    weights=[[0], [0]], bias=[3, 0], bit_shift=[0, 0], clamp_bits=[2, 2]
                )
            ],
        )
        for force in (False, True):
            ev = FastEvaluator(net, force_pure=force)
            assert ev.find_ball_cex([0], [3], label=0) is None
            assert ev.find_ball_cex([0], [3], label=1) == [0]
