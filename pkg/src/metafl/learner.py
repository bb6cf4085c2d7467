"""Local model: a small feedforward classifier with hand-rolled
forward/backward passes, trained by plain mini-batch SGD.

Parameters live as one flat float64 vector so aggregation code never
needs to know the layer structure. Layout per layer: weight matrix
(fan_in x fan_out, row-major) followed by the bias row.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .datagen import ClientShard, Sample, TriggerSpec, embed_trigger
from .linalg import ParameterVector, as_vector


@dataclass(frozen=True)
class ModelSpec:
    d_in: int
    hidden: Tuple[int, ...] = (32,)
    n_classes: int = 4
    activation: str = "relu"

    def __post_init__(self):
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation: {self.activation}")

    @property
    def layer_dims(self) -> List[Tuple[int, int]]:
        widths = [self.d_in, *self.hidden, self.n_classes]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def n_params(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_dims)


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 5
    batch_size: int = 64
    lr: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr < 0:
            raise ValueError("epochs/batch_size must be positive and lr non-negative")


@dataclass(frozen=True)
class ModelUpdate:
    delta: ParameterVector
    client_id: int


def _unpack(params: ParameterVector, spec: ModelSpec):
    """View the flat vector as per-layer (W, b) arrays without copying."""
    mats = []
    off = 0
    for fi, fo in spec.layer_dims:
        W = params[off:off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = params[off:off + fo]
        off += fo
        mats.append((W, b))
    return mats


def init_model(spec: ModelSpec, seed: int) -> ParameterVector:
    """Scaled-uniform weight init (Glorot-style bounds), zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fi, fo in spec.layer_dims:
        bound = np.sqrt(6.0 / (fi + fo))
        chunks.append(rng.uniform(-bound, bound, size=fi * fo))
        chunks.append(np.zeros(fo))
    return np.concatenate(chunks)


def _forward(params: ParameterVector, X: np.ndarray, spec: ModelSpec):
    """Returns logits plus per-layer pre/post activations for backprop."""
    layers = _unpack(params, spec)
    acts = [X]
    a = X
    for li, (W, b) in enumerate(layers):
        z = a @ W + b
        if li < len(layers) - 1:
            a = np.maximum(z, 0.0)
        else:
            a = z
        acts.append(a)
    return a, acts


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(params: ParameterVector, X: np.ndarray, y: np.ndarray,
                  spec: ModelSpec) -> Tuple[float, ParameterVector]:
    """Mean cross-entropy over the batch and its gradient w.r.t. params."""
    n = X.shape[0]
    logits, acts = _forward(params, X, spec)
    probs = _softmax(logits)
    eps = 1e-12
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))

    layers = _unpack(params, spec)
    grad = np.zeros_like(params)
    grad_layers = _unpack(grad, spec)
    dz = probs.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        gW, gb = grad_layers[li]
        a_prev = acts[li]
        gW[...] = a_prev.T @ dz
        gb[...] = dz.sum(axis=0)
        if li > 0:
            da = dz @ W.T
            dz = da * (acts[li] > 0)
    return loss, grad


def _shard_arrays(samples: List[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    X = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.intp)
    return X, y


def local_train(global_params: ParameterVector, shard: ClientShard,
                spec: ModelSpec, h: TrainHyper) -> ModelUpdate:
    """E epochs of mini-batch SGD on cross-entropy; returns trained - global.

    The shuffle for epoch e is seeded with h.seed + e, so an E-epoch run
    is reproducible as E single-epoch runs with consecutive seeds.
    """
    if len(shard) == 0:
        raise ValueError("cannot train on an empty shard")
    X, y = _shard_arrays(shard.samples)
    params = as_vector(global_params).copy()
    for epoch in range(h.epochs):
        perm = np.random.default_rng(h.seed + epoch).permutation(len(X))
        for start in range(0, len(X), h.batch_size):
            idx = perm[start:start + h.batch_size]
            loss, grad = loss_and_grad(params, X[idx], y[idx], spec)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch} (client {shard.client_id})")
            params -= h.lr * grad
    return ModelUpdate(delta=params - global_params, client_id=shard.client_id)


def predict(params: ParameterVector, X: np.ndarray, spec: ModelSpec) -> np.ndarray:
    logits, _ = _forward(params, X, spec)
    return np.argmax(logits, axis=1)  # argmax ties break to lowest index


def evaluate(params: ParameterVector, data: List[Sample], spec: ModelSpec) -> float:
    """Fraction of argmax-correct predictions."""
    if not data:
        raise ValueError("cannot evaluate on empty data")
    X, y = _shard_arrays(data)
    return float(np.mean(predict(params, X, spec) == y))


def attack_success_rate(params: ParameterVector, base_samples: List[Sample],
                        t: TriggerSpec, target_label: int, spec: ModelSpec) -> float:
    """Fraction of triggered base-class samples predicted as the target label."""
    if not base_samples:
        raise ValueError("cannot measure attack success on empty data")
    triggered = [embed_trigger(s, t) for s in base_samples]
    X, _ = _shard_arrays(triggered)
    return float(np.mean(predict(params, X, spec) == target_label))
