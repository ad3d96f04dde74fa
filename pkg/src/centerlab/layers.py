"""Encoders, predictor heads, EMA parameter twins and prototype banks.

Everything is a thin composition over the autodiff primitives: an encoder is
a list of (weight, bias, activation) triples with optional unit-sphere output
normalization. Teacher-side forwards (``forward_array``) run in plain numpy
and never join the computation graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterError, ShapeError, Tensor

__all__ = [
    "Param",
    "EncoderStack",
    "PredictorHead",
    "EmaTwin",
    "PrototypeBank",
    "init_encoder",
    "init_predictor",
    "init_prototypes",
    "sgd_step",
    "save_checkpoint",
    "load_checkpoint",
]

_ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "tanh": (ad.tanh, np.tanh),
    "relu": (ad.relu, lambda v: np.maximum(v, 0.0)),
    "identity": (lambda t: t, lambda v: v),
}


@dataclass(frozen=True)
class Param:
    """Named parameter with its learning-rate group (encoder/predictor/prototypes)."""
    name: str
    tensor: Tensor
    group: str


class EncoderStack:
    """MLP mapping inputs to (optionally unit-norm) embedding rows."""

    def __init__(self, weights: list[Tensor], biases: list[Tensor],
                 activations: list[str], output_normalize: bool = True):
        if len(weights) != len(biases) or len(weights) != len(activations):
            raise ParameterError("layer lists must have equal length")
        for act in activations:
            if act not in _ACTIVATIONS:
                raise ParameterError(f"unknown activation {act!r}")
        self.weights = weights
        self.biases = biases
        self.activations = activations
        self.output_normalize = output_normalize

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, x: Tensor) -> Tensor:
        """Differentiable forward pass; rows come out unit-norm when configured."""
        if x.shape[1] != self.input_dim:
            raise ShapeError(
                f"input dim {x.shape[1]} does not match encoder dim {self.input_dim}")
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = ad.matmul(h, w) + b
            h = _ACTIVATIONS[act][0](h)
        if self.output_normalize:
            h = ad.l2_normalize_rows(h)
        return h

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        """Numpy-only forward; used by EMA teachers and diagnostics (off-graph)."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = _ACTIVATIONS[act][1](h @ w.values + b.values)
        if self.output_normalize:
            h = h / np.sqrt((h * h).sum(axis=1, keepdims=True) + 1e-24)
        return h

    def parameters(self, group: str = "encoder") -> list[Param]:
        params = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params.append(Param(f"{group}.w{i}", w, group))
            params.append(Param(f"{group}.b{i}", b, group))
        return params

    def copy(self) -> "EncoderStack":
        return EncoderStack(
            [Tensor(w.values.copy(), requires_grad=False) for w in self.weights],
            [Tensor(b.values.copy(), requires_grad=False) for b in self.biases],
            list(self.activations), self.output_normalize)


class PredictorHead(EncoderStack):
    """Encoder-shaped head with matching in/out dimension and its own lr scale."""

    def __init__(self, weights, biases, activations, output_normalize=True,
                 learning_rate_multiplier: float = 1.0):
        super().__init__(weights, biases, activations, output_normalize)
        if self.input_dim != self.output_dim:
            raise ShapeError("predictor input and output dims must match")
        if learning_rate_multiplier <= 0:
            raise ParameterError("learning_rate_multiplier must be positive")
        self.learning_rate_multiplier = float(learning_rate_multiplier)

    def parameters(self, group: str = "predictor") -> list[Param]:
        return super().parameters(group)


def init_encoder(dims: list[int], seed: int, scheme: str = "uniform",
                 activation: str = "tanh", output_normalize: bool = True,
                 cls=EncoderStack, **kwargs):
    """Build an MLP with fan-in-scaled uniform weights.

    ``scheme="biased"`` adds a constant positive offset to every weight so the
    initial embedding cloud sits off-center on the sphere (non-uniform
    initialization study); default is the symmetric scheme.
    """
    if len(dims) < 2:
        raise ParameterError("need at least input and output dims")
    if any(d <= 0 for d in dims):
        raise ParameterError(f"dims must be positive, got {dims}")
    if scheme not in ("uniform", "biased"):
        raise ParameterError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    weights, biases, acts = [], [], []
    n_layers = len(dims) - 1
    for i in range(n_layers):
        fan_in = dims[i]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
        b = np.zeros((1, dims[i + 1]))
        if scheme == "biased":
            w = w + 0.75 * bound
            b = b + 0.25
        weights.append(Tensor(w, requires_grad=True))
        biases.append(Tensor(b, requires_grad=True))
        acts.append(activation if i < n_layers - 1 else "identity")
    return cls(weights, biases, acts, output_normalize=output_normalize, **kwargs)


def init_predictor(dim: int, seed: int, hidden_multiple: int = 4,
                   activation: str = "tanh",
                   learning_rate_multiplier: float = 1.0) -> PredictorHead:
    """Predictor head D -> hidden_multiple*D -> D (linear map when 0).

    The linear variant starts at identity plus a small random perturbation so
    an untrained (or frozen) head begins as a near-identity map.
    """
    if hidden_multiple < 0:
        raise ParameterError("hidden_multiple must be >= 0")
    if hidden_multiple == 0:
        head = init_encoder([dim, dim], seed,
                            activation=activation, cls=PredictorHead,
                            learning_rate_multiplier=learning_rate_multiplier)
        head.weights[0].values *= 0.1
        head.weights[0].values += np.eye(dim)
        return head
    return init_encoder([dim, hidden_multiple * dim, dim], seed,
                        activation=activation, cls=PredictorHead,
                        learning_rate_multiplier=learning_rate_multiplier)


class EmaTwin:
    """Shadow copy of an encoder updated as an exponential moving average."""

    def __init__(self, source: EncoderStack, momentum: float):
        if not (0.0 <= momentum < 1.0):
            raise ParameterError(f"momentum must be in [0, 1), got {momentum}")
        self.momentum = float(momentum)
        self.shadow = source.copy()

    def update(self, source: EncoderStack) -> None:
        """shadow <- (1 - momentum) * source + momentum * shadow, in place."""
        eps = self.momentum
        pairs = list(zip(self.shadow.weights + self.shadow.biases,
                         source.weights + source.biases))
        for sh, src in pairs:
            if sh.shape != src.shape:
                raise ShapeError("EMA twin shape drifted from source")
        for sh, src in pairs:
            sh.values *= eps
            sh.values += (1.0 - eps) * src.values

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        return self.shadow.forward_array(x)


class PrototypeBank:
    """K x D bank of prototype vectors; frozen banks stay bit-identical."""

    def __init__(self, matrix: Tensor, trainable: bool):
        self.matrix = matrix
        self.trainable = bool(trainable)

    @property
    def num_prototypes(self) -> int:
        return self.matrix.shape[0]

    def parameters(self) -> list[Param]:
        if not self.trainable:
            return []
        return [Param("prototypes.matrix", self.matrix, "prototypes")]


def init_prototypes(num_prototypes: int, dim: int, seed: int,
                    trainable: bool = True) -> PrototypeBank:
    """Rows drawn as normalized standard Gaussians: uniform on the unit sphere."""
    if num_prototypes < 2 or dim < 2:
        raise ParameterError("need num_prototypes >= 2 and dim >= 2")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((num_prototypes, dim))
    raw /= np.sqrt((raw * raw).sum(axis=1, keepdims=True))
    return PrototypeBank(Tensor(raw, requires_grad=trainable), trainable)


def sgd_step(params: Iterable[Param], lr: float,
             per_group_multipliers: dict[str, float] | None = None) -> None:
    """p <- p - lr * multiplier(group) * grad(p); zeroes grads afterwards."""
    multipliers = per_group_multipliers or {}
    params = list(params)
    for p in params:
        if p.tensor.grad is None:
            raise ValueError(f"parameter {p.name} has no gradient; run backward first")
    for p in params:
        scale = lr * multipliers.get(p.group, 1.0)
        p.tensor.values -= scale * p.tensor.grad
        p.tensor.grad = None


def save_checkpoint(path, params: Iterable[Param]) -> None:
    """Dump named parameter arrays; float64 round-trip is bit-exact (npz)."""
    arrays = {p.name: p.tensor.values for p in params}
    np.savez(path, **arrays)


def load_checkpoint(path, params: Iterable[Param]) -> None:
    with np.load(path) as data:
        for p in params:
            if p.name not in data.files:
                raise KeyError(f"checkpoint missing parameter {p.name}")
            arr = data[p.name]
            if arr.shape != p.tensor.shape:
                raise ShapeError(
                    f"checkpoint shape {arr.shape} != parameter shape {p.tensor.shape}")
            p.tensor.values[...] = arr
