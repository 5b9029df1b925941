"""Minimal differentiable-network toolkit: dense and 1-D convolution layers
with reverse-mode gradients, the Adam optimizer, and a bit-exact checkpoint
container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_FORMAT = "simsec-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Raised when a checkpoint file is malformed or incompatible."""


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description used by config-driven network builds."""

    kind: str  # dense | conv1d | activation | flatten
    in_dim: int = 0
    out_dim: int = 0
    kernel_size: int = 3
    stride: int = 1
    activation: str = "identity"  # relu | tanh | identity

    def __post_init__(self):
        if self.kind not in ("dense", "conv1d", "activation", "flatten"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv1d":
            if self.kernel_size < 1 or self.kernel_size % 2 == 0:
                raise ValueError("conv kernel size must be a positive odd integer")
            if self.stride < 1:
                raise ValueError("conv stride must be >= 1")
        if self.kind == "activation" and self.activation not in (
            "relu", "tanh", "identity"
        ):
            raise ValueError(f"unknown activation {self.activation!r}")


def _fan_in_uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Dense:
    """Affine map y = x @ W.T + b with W of shape (out, in)."""

    def __init__(self, in_dim, out_dim, rng):
        self.weight = _fan_in_uniform(rng, (out_dim, in_dim), in_dim)
        self.bias = np.zeros(out_dim)

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        if x.ndim == 3:  # flatten channel x length inputs transparently
            cache_shape = x.shape
            x = x.reshape(x.shape[0], -1)
        else:
            cache_shape = None
        y = x @ self.weight.T + self.bias
        return y, (x, cache_shape)

    def backward(self, cache, gy):
        x, cache_shape = cache
        gw = gy.T @ x
        gb = np.sum(gy, axis=0)
        gx = gy @ self.weight
        if cache_shape is not None:
            gx = gx.reshape(cache_shape)
        return [gw, gb], gx


class Conv1d:
    """Same-padded 1-D convolution over (batch, channels, length) inputs.

    Output length is ceil(length / stride); padding is asymmetric when the
    required total is odd, with the extra sample on the right.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride, rng):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError("kernel size must be a positive odd integer")
        self.kernel_size = kernel_size
        self.stride = stride
        self.weight = _fan_in_uniform(
            rng, (out_channels, in_channels, kernel_size), in_channels * kernel_size
        )
        self.bias = np.zeros(out_channels)

    def params(self):
        return [self.weight, self.bias]

    def _padding(self, length):
        out_len = -(-length // self.stride)
        total = max((out_len - 1) * self.stride + self.kernel_size - length, 0)
        return out_len, total // 2, total - total // 2

    def forward(self, x):
        if x.ndim != 3:
            raise ValueError("conv1d expects (batch, channels, length) input")
        batch, _, length = x.shape
        out_len, left, right = self._padding(length)
        xp = np.pad(x, ((0, 0), (0, 0), (left, right)))
        idx = self.stride * np.arange(out_len)[:, None] + np.arange(self.kernel_size)
        patches = xp[:, :, idx]  # (B, C_in, out_len, k)
        y = np.einsum("ock,bcik->boi", self.weight, patches) + self.bias[None, :, None]
        return y, (patches, x.shape, left)

    def backward(self, cache, gy):
        patches, x_shape, left = cache
        gw = np.einsum("boi,bcik->ock", gy, patches)
        gb = np.sum(gy, axis=(0, 2))
        g_patches = np.einsum("boi,ock->bcik", gy, self.weight)
        batch, channels, length = x_shape
        out_len = gy.shape[2]
        _, total_left, total_right = self._padding(length)
        gxp = np.zeros((batch, channels, length + total_left + total_right))
        starts = self.stride * np.arange(out_len)
        for t in range(self.kernel_size):
            gxp[:, :, starts + t] += g_patches[:, :, :, t]
        return [gw, gb], gxp[:, :, left:left + length]


class Activation:
    """Elementwise nonlinearity; relu uses subgradient 0 at the kink."""

    def __init__(self, name):
        if name not in ("relu", "tanh", "identity"):
            raise ValueError(f"unknown activation {name!r}")
        self.name = name

    def params(self):
        return []

    def forward(self, x):
        if self.name == "relu":
            return np.maximum(x, 0.0), x
        if self.name == "tanh":
            y = np.tanh(x)
            return y, y
        return x, None

    def backward(self, cache, gy):
        if self.name == "relu":
            return [], gy * (cache > 0.0)
        if self.name == "tanh":
            return [], gy * (1.0 - cache**2)
        return [], gy


class Flatten:
    def params(self):
        return []

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, gy):
        return [], gy.reshape(cache)


class Network:
    """A fixed sequence of layers with explicit forward caches."""

    def __init__(self, layers):
        self.layers = list(layers)

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        return x, caches

    def backward(self, caches, gy):
        """Gradients for every parameter (aligned with parameters()) and
        the gradient with respect to the network input."""
        if len(caches) != len(self.layers):
            raise ValueError("forward cache missing or mismatched")
        grads = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            layer_grads, gy = layer.backward(cache, gy)
            grads = layer_grads + grads
        return grads, gy


def build_network(specs, rng) -> Network:
    """Instantiate a Network from LayerSpecs, checking dimension chaining."""
    layers = []
    for spec in specs:
        if spec.kind == "dense":
            layers.append(Dense(spec.in_dim, spec.out_dim, rng))
        elif spec.kind == "conv1d":
            layers.append(
                Conv1d(spec.in_dim, spec.out_dim, spec.kernel_size, spec.stride, rng)
            )
        elif spec.kind == "activation":
            layers.append(Activation(spec.activation))
        else:
            layers.append(Flatten())
    return Network(layers)


@dataclass
class AdamState:
    """Adaptive-moment optimizer state for a fixed parameter list."""

    lr: float
    first_moment: list
    second_moment: list
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr) -> "AdamState":
        return cls(
            lr=lr,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state: AdamState):
    """One bias-corrected adaptive-moment update, applied in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("parameter, gradient, and state lengths differ")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ValueError("gradient shape does not match parameter")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def clip_global_norm(grads, max_norm: float) -> float:
    """Scale the whole gradient list so its joint L2 norm is at most
    max_norm; returns the pre-clip norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total


def save_checkpoint(path, arrays: dict, meta: dict):
    """Write a versioned npz container; round-trips bit-exactly."""
    header = dict(meta)
    header["format"] = CHECKPOINT_FORMAT
    header["version"] = CHECKPOINT_VERSION
    payload = {key: np.asarray(val) for key, val in arrays.items()}
    payload["__meta__"] = np.array(json.dumps(header, sort_keys=True))
    np.savez(path, **payload)


def load_checkpoint(path):
    """Read a container written by save_checkpoint; returns (arrays, meta)."""
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "__meta__" not in data:
        raise CheckpointError("missing checkpoint header")
    meta = json.loads(str(data["__meta__"]))
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unrecognized checkpoint format in {path}")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    arrays = {k: data[k] for k in data.files if k != "__meta__"}
    return arrays, meta
