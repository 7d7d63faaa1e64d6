"""Quantization-aware training of fixed-point fully-connected networks.

The deployed semantics per layer are integer-only:

    pre = W x + b      (integer weights, |w| <= 2**bits - 1)
    mid = floor(pre / 2**k)
    out = min(max(mid, 0), 2**bits - 1)

Training keeps float master copies of W and b, runs the forward pass through
fake-quantization (round/clip on weights, floor/clamp on activations), and
backpropagates with the straight-through estimator. Per-layer shifts k are
calibrated from observed accumulator magnitudes on a fixed slice of the
training data and then frozen, so the exported model is exactly the network
that was being trained. All scales are powers of two by construction — there
is no separate float scale to fold away at export time.

Recipe (recorded in the exported metadata): SGD with momentum 0.9, per-layer
learning rates base_lr * 2**k to undo the shift's gradient attenuation,
cross-entropy on temperature-scaled pre-clamp logits, shift recalibration at
the first two epoch boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .synth import Dataset

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainResult:
    doc: dict  # model document (integer-only, ready to serialize)
    accuracy: float  # integer-semantics accuracy on the held-out split
    diverged: bool
    loss_history: list[float] = field(default_factory=list)


def _quant_weights(w: np.ndarray, wmax: int) -> np.ndarray:
    return np.clip(np.rint(w), -wmax, wmax)


def _calibrate_shift(pre: np.ndarray, amax: int) -> int:
    """Smallest k with the 99.9th percentile of floor(pre / 2**k) inside range."""
    peak = float(np.percentile(pre, 99.9))
    k = 0
    while peak / (1 << k) > amax:
        k += 1
    return k


def _int_forward(
    x: np.ndarray, layers: list[dict], return_logits: bool = False
) -> np.ndarray:
    """Exact integer batch forward pass (int64 is ample for these sizes)."""
    vec = x.astype(np.int64)
    mid = vec
    for layer in layers:
        pre = vec @ np.asarray(layer["weights"], dtype=np.int64).T + np.asarray(
            layer["bias"], dtype=np.int64
        )
        mid = np.right_shift(pre, np.asarray(layer["bit_shift"], dtype=np.int64))
        top = (np.int64(1) << np.asarray(layer["clamp_bits"], dtype=np.int64)) - 1
        vec = np.clip(mid, 0, top)
    return mid if return_logits else vec


def _doc_from_params(
    weights: list[np.ndarray], biases: list[np.ndarray], shifts: list[int], bits: int
) -> dict:
    layers = []
    for w, b, k in zip(weights, biases, shifts):
        layers.append(
            {
                "weights": [[int(v) for v in row] for row in w],
                "bias": [int(v) for v in b],
                "bit_shift": [int(k)] * len(b),
                "clamp_bits": [bits] * len(b),
            }
        )
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "input_bits": bits,
        "weight_bits": bits,
        "layers": layers,
    }


def train_qat(
    arch: tuple[int, ...],
    dataset: Dataset,
    bits: int,
    seed: int,
    epochs: int = 8,
    batch_size: int = 32,
    base_lr: float = 0.3,
    momentum: float = 0.9,
    temperature: float = 4.0,
) -> TrainResult:
    """Train a network with layer sizes `arch` on quantized `dataset` pixels."""
    if not (2 <= bits <= 8):
        raise ValueError(f"bits must be in [2, 8], got {bits}")
    if len(arch) < 2:
        raise ValueError("arch needs at least an input and an output size")
    if dataset.input_bits != bits:
        raise ValueError(
            f"dataset quantized to {dataset.input_bits} bits but training at {bits}"
        )
    x_train = dataset.x_train.astype(np.float64)
    y_train = dataset.y_train
    if arch[0] != x_train.shape[1]:
        raise ValueError(f"arch expects {arch[0]} inputs, dataset has {x_train.shape[1]}")

    rng = np.random.default_rng(seed)
    wmax = (1 << bits) - 1
    amax = (1 << bits) - 1
    n_layers = len(arch) - 1
    weights = [
        rng.normal(0.0, wmax / 4.0, size=(arch[t + 1], arch[t])) for t in range(n_layers)
    ]
    biases = [np.zeros(arch[t + 1]) for t in range(n_layers)]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    shifts = [0] * n_layers

    calib = x_train[: min(512, len(x_train))]

    def recalibrate() -> None:
        vec = calib
        for t in range(n_layers):
            wq = _quant_weights(weights[t], wmax)
            bq = np.rint(biases[t])
            pre = vec @ wq.T + bq
            shifts[t] = _calibrate_shift(pre, amax)
            vec = np.clip(np.floor(pre / (1 << shifts[t])), 0.0, amax)

    recalibrate()

    n = len(x_train)
    loss_history: list[float] = []
    diverged = False
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x_train[idx], y_train[idx]

            # forward with fake quantization, keeping STE masks per layer
            acts = [xb]
            mids = []
            wqs = []
            for t in range(n_layers):
                wq = _quant_weights(weights[t], wmax)
                bq = np.rint(biases[t])
                pre = acts[-1] @ wq.T + bq
                mid = np.floor(pre / (1 << shifts[t]))
                acts.append(np.clip(mid, 0.0, amax))
                mids.append(mid)
                wqs.append(wq)

            logits = mids[-1] / temperature
            logits -= logits.max(axis=1, keepdims=True)
            expl = np.exp(logits)
            probs = expl / expl.sum(axis=1, keepdims=True)
            batch = len(idx)
            epoch_loss -= float(
                np.log(probs[np.arange(batch), yb] + 1e-12).sum()
            )

            delta = probs.copy()
            delta[np.arange(batch), yb] -= 1.0
            delta /= batch * temperature  # d loss / d mid of the last layer
            for t in reversed(range(n_layers)):
                if t != n_layers - 1:
                    # clamp passes gradient only inside the linear region
                    delta = delta * ((mids[t] >= 0.0) & (mids[t] <= amax))
                dpre = delta / (1 << shifts[t])
                lr = base_lr * (1 << shifts[t])
                grad_w = dpre.T @ acts[t]
                grad_b = dpre.sum(axis=0)
                # clip region of the weight quantizer: outside it, rounding
                # is saturated and the gradient is dropped
                grad_w *= np.abs(weights[t]) <= wmax + 0.5
                vel_w[t] = momentum * vel_w[t] - lr * grad_w
                vel_b[t] = momentum * vel_b[t] - lr * grad_b
                weights[t] = weights[t] + vel_w[t]
                biases[t] = biases[t] + vel_b[t]
                if t:
                    delta = dpre @ wqs[t]

        loss_history.append(epoch_loss / n)
        if not np.isfinite(epoch_loss):
            diverged = True
            break
        if epoch < 2:
            recalibrate()

    wq = [_quant_weights(w, wmax) for w in weights]
    bq = [np.rint(b) for b in biases]
    doc = _doc_from_params(wq, bq, shifts, bits)
    correct = _int_forward(dataset.x_test, doc["layers"]).argmax(axis=1) == dataset.y_test
    accuracy = float(correct.mean()) if len(correct) else 0.0
    doc["metadata"] = {
        "origin": "qnnexport",
        "seed": int(seed),
        "epochs": int(epochs),
        "bits": int(bits),
        "arch": [int(a) for a in arch],
        "train_samples": int(n),
        "test_accuracy_bp": int(round(accuracy * 10000)),
        "diverged": diverged,
    }
    return TrainResult(doc=doc, accuracy=accuracy, diverged=diverged, loss_history=loss_history)
