"""qnnverify: bit-exact SMT-based verification for quantized neural networks."""

__version__ = "0.1.0"
