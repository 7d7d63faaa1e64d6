"""Quantization-aware training and golden-trace export for fixed-point networks.

This package trains tiny fully-connected networks whose deployed form is pure
integer arithmetic (affine sum, power-of-two right shift, saturating clamp),
writes them in the verifier's model JSON format, and emits trace bundles with
every intermediate integer so the verifier's interpreter can be checked
bit-for-bit. It deliberately shares no code with the verifier: the model file
format is the only contract.
"""

from .qat import TrainResult, train_qat
from .synth import make_dataset
from .trace import export_bundle, forward_trace, make_traces

__all__ = [
    "TrainResult",
    "train_qat",
    "make_dataset",
    "export_bundle",
    "forward_trace",
    "make_traces",
]
