"""Dense sine-activated MLPs with hand-written reverse-mode gradients.

Everything is plain float32 numpy. A tensor is a C-contiguous 2D array; layer
weights are stored ``(out_dim, in_dim)`` so a forward pass is ``x @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when tensor dimensions do not line up."""


class ConfigError(ValueError):
    """Raised for invalid network or data configuration."""


@dataclass
class LinearLayer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"weight {self.weight.shape} inconsistent with bias {self.bias.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int) -> "LinearLayer":
        return cls(np.zeros((out_dim, in_dim), DTYPE), np.zeros(out_dim, DTYPE))

    def copy(self) -> "LinearLayer":
        return LinearLayer(self.weight.copy(), self.bias.copy())


@dataclass
class BatchLinearLayer:
    """``n_heads`` independent linear maps applied to one shared input."""

    weight: np.ndarray  # (n_heads, out_dim, in_dim)
    bias: np.ndarray  # (n_heads, out_dim)

    def __post_init__(self):
        if self.weight.ndim != 3 or self.bias.shape != self.weight.shape[:2]:
            raise ShapeError(
                f"head weight {self.weight.shape} inconsistent with bias {self.bias.shape}"
            )

    @property
    def n_heads(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[2]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def zeros(cls, n_heads: int, in_dim: int, out_dim: int) -> "BatchLinearLayer":
        return cls(
            np.zeros((n_heads, out_dim, in_dim), DTYPE),
            np.zeros((n_heads, out_dim), DTYPE),
        )

    def head(self, i: int) -> LinearLayer:
        return LinearLayer(self.weight[i], self.bias[i])

    def copy(self) -> "BatchLinearLayer":
        return BatchLinearLayer(self.weight.copy(), self.bias.copy())


@dataclass
class Mlp:
    """Stack of linear layers, each followed by ``sin(omega * .)``.

    With ``linear_last`` the final layer skips the sine. Encoder and decoder
    trunks keep it off because their outputs feed further sine layers; the
    per-frame heads carry the linear output layer instead.
    """

    layers: list[LinearLayer]
    omega: float = 30.0
    linear_last: bool = True

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("an Mlp needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"layer widths {prev.out_dim} -> {nxt.in_dim} do not chain")

    @classmethod
    def zeros(cls, dims: list[int], omega: float = 30.0, linear_last: bool = True) -> "Mlp":
        layers = [LinearLayer.zeros(a, b) for a, b in zip(dims, dims[1:])]
        return cls(layers, omega, linear_last)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def hidden_layers(self) -> int:
        return len(self.layers) - 1

    def is_sine(self, i: int) -> bool:
        return not (self.linear_last and i == len(self.layers) - 1)

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "Mlp":
        return Mlp([l.copy() for l in self.layers], self.omega, self.linear_last)


@dataclass
class GradTape:
    """Forward cache for one pass through an :class:`Mlp`."""

    mlp: Mlp
    inputs: list[np.ndarray] = field(default_factory=list)
    preacts: list[np.ndarray] = field(default_factory=list)


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, *stream])


def _uniform(rng: np.random.Generator, bound: float, shape) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def sine_bound(fan_in: int, omega: float) -> float:
    return float(np.sqrt(6.0 / fan_in) / omega)


def siren_init(mlp: Mlp, seed: int, first: bool = True, stream: int = 0) -> Mlp:
    """Initialize ``mlp`` in place with the sine-network scheme and return it.

    The first layer of the whole network (``first=True``) draws from
    U(-1/fan_in, 1/fan_in); every other layer from U(-sqrt(6/fan_in)/omega, ...).
    Biases start at zero.
    """
    rng = _rng(seed, stream)
    for i, layer in enumerate(mlp.layers):
        fan_in = layer.in_dim
        if fan_in == 0:
            raise ConfigError("cannot initialize a layer with zero fan-in")
        bound = 1.0 / fan_in if (first and i == 0) else sine_bound(fan_in, mlp.omega)
        layer.weight[...] = _uniform(rng, bound, layer.weight.shape)
        layer.bias[...] = 0.0
    return mlp


def siren_init_heads(heads: BatchLinearLayer, omega: float, seed: int, stream: int = 0) -> BatchLinearLayer:
    rng = _rng(seed, stream)
    if heads.in_dim == 0:
        raise ConfigError("cannot initialize a layer with zero fan-in")
    heads.weight[...] = _uniform(rng, sine_bound(heads.in_dim, omega), heads.weight.shape)
    heads.bias[...] = 0.0
    return heads


def linear_forward(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"input {x.shape} does not match layer in_dim {layer.in_dim}")
    return x @ layer.weight.T + layer.bias


def mlp_forward(mlp: Mlp, x: np.ndarray, tape: GradTape | None = None) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != mlp.in_dim:
        raise ShapeError(f"input {x.shape} does not match mlp in_dim {mlp.in_dim}")
    if tape is not None:
        tape.mlp = mlp
        tape.inputs.clear()
        tape.preacts.clear()
    h = x
    for i, layer in enumerate(mlp.layers):
        a = linear_forward(layer, h)
        if tape is not None:
            tape.inputs.append(h)
            tape.preacts.append(a)
        h = np.sin(mlp.omega * a) if mlp.is_sine(i) else a
    return h


def mlp_backward(tape: GradTape, d_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate ``d_out`` through a taped forward pass.

    Returns gradients in :meth:`Mlp.params` order and the gradient w.r.t. the input.
    """
    mlp = tape.mlp
    if len(tape.inputs) != len(mlp.layers):
        raise ShapeError("tape does not come from a forward pass of this network")
    batch = tape.inputs[0].shape[0]
    if d_out.shape != (batch, mlp.out_dim):
        raise ShapeError(f"d_out {d_out.shape} does not match output ({batch}, {mlp.out_dim})")
    grads: list[np.ndarray] = [None] * (2 * len(mlp.layers))  # type: ignore[list-item]
    g = d_out
    for i in reversed(range(len(mlp.layers))):
        if mlp.is_sine(i):
            g = g * (mlp.omega * np.cos(mlp.omega * tape.preacts[i]))
        grads[2 * i] = g.T @ tape.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ mlp.layers[i].weight
    return grads, g


def batch_linear_forward(heads: BatchLinearLayer, z: np.ndarray) -> np.ndarray:
    """Apply every head to the shared input; output is ``(batch, n_heads, out_dim)``."""
    if z.ndim != 2 or z.shape[1] != heads.in_dim:
        raise ShapeError(f"input {z.shape} does not match head in_dim {heads.in_dim}")
    out = np.empty((z.shape[0], heads.n_heads, heads.out_dim), DTYPE)
    # one GEMM per head keeps each head bitwise equal to a standalone linear layer
    for i in range(heads.n_heads):
        out[:, i, :] = z @ heads.weight[i].T + heads.bias[i]
    return out


def batch_linear_backward(
    heads: BatchLinearLayer, z: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(d_weight, d_bias, d_z)`` for :func:`batch_linear_forward`."""
    if d_out.shape != (z.shape[0], heads.n_heads, heads.out_dim):
        raise ShapeError(f"d_out {d_out.shape} does not match head output")
    d_w = np.einsum("bho,bi->hoi", d_out, z, optimize=True).astype(DTYPE, copy=False)
    d_b = d_out.sum(axis=0)
    d_z = d_out.reshape(z.shape[0], -1) @ heads.weight.reshape(-1, heads.in_dim)
    return d_w, d_b, d_z
