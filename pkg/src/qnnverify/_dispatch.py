"""Backend selection: compiled interpreter kernel with pure-Python fallback.

The compiled kernel works on int64 and is only used when a static bound on
every intermediate value fits comfortably below 2**63 (checked here with
unbounded integer arithmetic). Networks with edge shifts, huge biases, or
clamp widths beyond 62 bits take the pure path. Setting QNNV_PURE=1 in the
environment forces the pure path everywhere.
"""

from __future__ import annotations

import itertools
import os
from typing import Sequence

from . import model as _model
from .model import QuantizedNetwork

try:  # pragma: no cover - exercised via the compiled wheel
    from . import _kernel
except ImportError:  # pragma: no cover
    _kernel = None

_LIMIT_BITS = 62


def _kernel_safe(net: QuantizedNetwork) -> bool:
    if any(layer.edge_shift is not None for layer in net.layers):
        return False
    in_tops = [(1 << net.input_bits) - 1] * net.n_inputs
    for layer in net.layers:
        if any(n > _LIMIT_BITS for n in layer.clamp_bits):
            return False
        worst = 0
        for i, row in enumerate(layer.weights):
            mag = abs(layer.bias[i]) + sum(abs(w) * t for w, t in zip(row, in_tops))
            worst = max(worst, mag)
        if worst >= (1 << _LIMIT_BITS):
            return False
        in_tops = [(1 << n) - 1 for n in layer.clamp_bits]
    return True


def _pack(net: QuantizedNetwork):
    import numpy as np

    weights, bias, shift, top = [], [], [], []
    w_off, n_off = [], []
    dims = [net.n_inputs]
    wpos = npos = 0
    for layer in net.layers:
        w_off.append(wpos)
        n_off.append(npos)
        for row in layer.weights:
            weights.extend(row)
        bias.extend(layer.bias)
        shift.extend(layer.bit_shift)
        top.extend((1 << n) - 1 for n in layer.clamp_bits)
        wpos += layer.n_out * layer.n_in
        npos += layer.n_out
        dims.append(layer.n_out)
    return _kernel.PackedNet(
        np.asarray(weights, dtype=np.int64),
        np.asarray(bias, dtype=np.int64),
        np.asarray(shift, dtype=np.int32),
        np.asarray(top, dtype=np.int64),
        np.asarray(w_off, dtype=np.int64),
        np.asarray(n_off, dtype=np.int64),
        np.asarray(dims, dtype=np.int64),
    )


class FastEvaluator:
    """Per-network evaluator choosing the fastest bit-exact backend."""

    def __init__(self, net: QuantizedNetwork, force_pure: bool | None = None):
        self.net = net
        if force_pure is None:
            force_pure = os.environ.get("QNNV_PURE", "") == "1"
        use_kernel = (
            not force_pure
            and _kernel is not None
            and _kernel_safe(net)
        )
        self._packed = _pack(net) if use_kernel else None
        self.backend = "compiled" if use_kernel else "pure"

    def forward(self, x: Sequence[int]) -> list[int]:
        _model.check_input_range(self.net, x)
        if self._packed is None:
            return _model.eval_network(self.net, x)
        import numpy as np

        return [int(v) for v in self._packed.forward(np.asarray(x, dtype=np.int64))]

    def classify(self, x: Sequence[int]) -> int:
        _model.check_input_range(self.net, x)
        if self._packed is None:
            return _model.classify(self.net, x)
        import numpy as np

        return int(self._packed.classify(np.asarray(x, dtype=np.int64)))

    def find_ball_cex(
        self,
        lo: Sequence[int],
        hi: Sequence[int],
        label: int,
        limit: int = 1 << 20,
    ) -> list[int] | None:
        """First point of the box (odometer order, last coordinate fastest)
        classified differently from `label`; None when the box is exhausted.

        Raises OverflowError when more than `limit` points would be visited.
        """
        if len(lo) != len(hi) or len(lo) != self.net.n_inputs:
            raise ValueError("bounds length mismatch")
        size = 1
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"empty range [{a}, {b}]")
            size *= b - a + 1
        if size > limit:
            raise OverflowError("ball enumeration exceeded the point limit")
        if self._packed is not None:
            import numpy as np

            out = self._packed.find_ball_cex(
                np.asarray(lo, dtype=np.int64),
                np.asarray(hi, dtype=np.int64),
                label,
                limit,
            )
            return None if out is None else [int(v) for v in out]
        for xs in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
            if _model.classify(self.net, xs) != label:
                return list(xs)
        return None


def kernel_available() -> bool:
    return _kernel is not None
