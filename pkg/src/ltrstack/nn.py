"""Dense feed-forward networks with exact backpropagation.

Every scorer in the package is assembled from :class:`FeedForwardNet`.
Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
row vectors maps to ``X @ W + b``.  Hidden layers use ReLU (or tanh); the
output layer is always linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericError, ParseError, ShapeError

NET_FORMAT = "ltrstack.net"
NET_FORMAT_VERSION = 1
ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetConfig:
    layer_widths: tuple[int, ...]
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ConfigurationError(f"need at least input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ConfigurationError(f"layer widths must be positive, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if not 0 <= int(self.init_seed) < 2**64:
            raise ConfigurationError("init_seed must be a 64-bit unsigned integer")

    @property
    def parameter_count(self) -> int:
        w = self.layer_widths
        return sum(a * b + b for a, b in zip(w[:-1], w[1:]))


@dataclass
class GradientSet:
    """Per-layer gradients, shape-congruent with the owning net."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


class FeedForwardNet:
    def __init__(self, config: NetConfig, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.config = config
        self.weights = weights
        self.biases = biases

    @property
    def relu(self) -> bool:
        return self.config.activation == "relu"

    @property
    def in_width(self) -> int:
        return self.config.layer_widths[0]

    @property
    def out_width(self) -> int:
        return self.config.layer_widths[-1]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in layer order (weight, bias, weight, bias, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.parameter_count:
            raise ShapeError(f"expected {self.parameter_count} parameters, got {flat.size}")
        pos = 0
        for p in self.parameters():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size

    def copy(self) -> FeedForwardNet:
        return FeedForwardNet(
            self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )

    def zero_output_layer(self) -> None:
        self.weights[-1][...] = 0.0
        self.biases[-1][...] = 0.0

    def _batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_width:
            raise ShapeError(f"input width {x.shape[-1]} != net input width {self.in_width}")
        return np.ascontiguousarray(x)

    def activations(self, x) -> list[np.ndarray]:
        """Forward pass over a batch, keeping every layer's output for backprop."""
        return kernels.mlp_forward(self.weights, self.biases, self._batch(x), self.relu)

    def forward(self, x) -> np.ndarray:
        """Output for a single vector (1-D result) or a batch of rows (2-D)."""
        single = np.ndim(x) == 1
        out = self.activations(x)[-1]
        return out[0] if single else out

    def backward_from(self, acts: list[np.ndarray], upstream) -> tuple[GradientSet, np.ndarray]:
        """Gradients of ``sum(upstream * output)`` given cached activations.

        Returns the parameter gradients and the gradient with respect to the
        input batch.
        """
        up = np.asarray(upstream, dtype=np.float64)
        if up.ndim == 1:
            up = up[None, :]
        if up.shape != acts[-1].shape:
            raise ShapeError(f"upstream shape {up.shape} != output shape {acts[-1].shape}")
        dws, dbs, dx = kernels.mlp_backward(
            self.weights, acts, np.ascontiguousarray(up), self.relu
        )
        return GradientSet(list(dws), list(dbs)), dx

    def to_dict(self) -> dict:
        return {
            "format": NET_FORMAT,
            "version": NET_FORMAT_VERSION,
            "config": {
                "layer_widths": list(self.config.layer_widths),
                "activation": self.config.activation,
                "init_seed": int(self.config.init_seed),
            },
            "params": [float(v).hex() for v in self.get_flat()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> FeedForwardNet:
        if data.get("format") != NET_FORMAT:
            raise ParseError(f"not a serialized net: format={data.get('format')!r}")
        if data.get("version") != NET_FORMAT_VERSION:
            raise ParseError(f"unsupported net format version {data.get('version')!r}")
        cfg = data["config"]
        net = net_init(NetConfig(tuple(cfg["layer_widths"]), cfg["activation"], cfg["init_seed"]))
        net.set_flat(np.array([float.fromhex(v) for v in data["params"]]))
        return net


def net_init(config: NetConfig) -> FeedForwardNet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(config.init_seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_widths[:-1], config.layer_widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FeedForwardNet(config, weights, biases)


def forward(net: FeedForwardNet, x) -> np.ndarray:
    return net.forward(x)


def backward(net: FeedForwardNet, x, upstream) -> GradientSet:
    """Exact gradients of ``upstream . forward(net, x)`` w.r.t. every parameter."""
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape[-1] != net.out_width:
        raise ShapeError(f"upstream width {up.shape[-1]} != output width {net.out_width}")
    return net.backward_from(net.activations(x), up)[0]


def save_net(net: FeedForwardNet, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()))


def load_net(path) -> FeedForwardNet:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno) from exc
    return FeedForwardNet.from_dict(data)


# --- scalar / vector helpers -------------------------------------------------


def _check_finite(x) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input")


def sigmoid(x):
    """Logistic function, stable for large |x|; accepts scalars or arrays."""
    _check_finite(x)
    if np.ndim(x) == 0:
        x = float(x)
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    return kernels._kernels_py._sigmoid(np.asarray(x, dtype=np.float64))


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    _check_finite(x)
    if np.ndim(x) == 0:
        x = float(x)
        return max(x, 0.0) + math.log1p(math.exp(-abs(x)))
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softmax(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ShapeError("softmax of an empty vector")
    _check_finite(v)
    e = np.exp(v - v.max())
    return e / e.sum()


# --- optimisation -------------------------------------------------------------


@dataclass
class OptimizerState:
    algorithm: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.algorithm not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.algorithm!r}")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")


def _param_list(target) -> list[np.ndarray]:
    if isinstance(target, FeedForwardNet):
        return target.parameters()
    return list(target)


def _grad_list(grads) -> list[np.ndarray]:
    if isinstance(grads, GradientSet):
        return grads.arrays()
    return list(grads)


def optimizer_step(target, grads, state: OptimizerState):
    """Apply one SGD or Adam update in place.

    ``target`` is a net or a list of parameter arrays; ``grads`` is a
    :class:`GradientSet` or an equally shaped list.  Returns ``(target, state)``.
    """
    params = _param_list(target)
    gs = _grad_list(grads)
    if len(params) != len(gs) or any(p.shape != g.shape for p, g in zip(params, gs)):
        raise ShapeError("gradients are not shape-congruent with parameters")
    if state.algorithm == "sgd":
        for p, g in zip(params, gs):
            p -= state.learning_rate * g
        state.step += 1
        return target, state
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    if not all(p.flags.c_contiguous for p in params):
        raise ShapeError("parameters must be C-contiguous")
    kernels.adam_update(params, gs, state.first_moment, state.second_moment,
                        state.learning_rate, b1, b2, c1, c2, state.eps)
    return target, state


# --- finite differences -------------------------------------------------------


def finite_difference_gradient(loss_fn, params: Sequence[np.ndarray], eps: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn()`` w.r.t. each entry of ``params``.

    The arrays are perturbed in place and restored.
    """
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = loss_fn()
            flat[k] = orig - eps
            down = loss_fn()
            flat[k] = orig
            gf[k] = (up - down) / (2.0 * eps)
        out.append(g)
    return out


def max_relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray]) -> float:
    """``max|a - n| / max(max|n|, 1e-12)`` over the concatenated gradient."""
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    return float(np.abs(a - n).max() / max(np.abs(n).max(), 1e-12))
