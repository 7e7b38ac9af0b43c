"""Small dense-network substrate: layers, backprop, L1 gradient and Adam.

Everything is float64 numpy. Inputs may be a single vector ``(in,)`` or a
batch ``(B, in)``; batch gradients are summed over rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class Identity:
    def __call__(self, z: np.ndarray) -> np.ndarray:
        return z

    def derivative(self, z: np.ndarray) -> np.ndarray:
        return np.ones_like(z)


@dataclass(frozen=True)
class LeakyReLU:
    alpha: float = 0.2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"LeakyReLU alpha must be > 0, got {self.alpha}")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return leaky_relu(z, self.alpha)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        return leaky_relu_derivative(z, self.alpha)


def leaky_relu(x, alpha: float):
    """``x`` where positive, ``alpha * x`` elsewhere."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, x, alpha * x)
    return float(out) if out.ndim == 0 else out


def leaky_relu_derivative(x, alpha: float):
    # derivative at exactly 0 is alpha
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, 1.0, alpha)
    return float(out) if out.ndim == 0 else out


@dataclass
class DenseLayer:
    """``activation(weights @ x + bias)`` with weights shaped (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Identity | LeakyReLU = field(default_factory=Identity)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2:
            raise ShapeError("weights must be a 2-d matrix")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


def glorot_layer(n_in: int, n_out: int, rng: np.random.Generator, activation=None) -> DenseLayer:
    """Glorot-uniform weights, zero bias."""
    limit = np.sqrt(6.0 / (n_in + n_out))
    weights = rng.uniform(-limit, limit, size=(n_out, n_in))
    return DenseLayer(weights, np.zeros(n_out), activation or Identity())


def _as_input(layer: DenseLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != layer.n_in:
        raise ShapeError(f"layer expects input width {layer.n_in}, got shape {x.shape}")
    return x


def dense_forward(layer: DenseLayer, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(pre_activation, output)`` for a vector or a batch of rows."""
    x = _as_input(layer, x)
    pre = x @ layer.weights.T + layer.bias
    return pre, layer.activation(pre)


@dataclass
class GradientTape:
    """Per-layer inputs, pre-activations and outputs of one forward pass."""

    inputs: list = field(default_factory=list)
    pre_activations: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.outputs[-1]


def forward(layers: list[DenseLayer], x) -> GradientTape:
    tape = GradientTape()
    h = np.asarray(x, dtype=np.float64)
    for layer in layers:
        pre, out = dense_forward(layer, h)
        tape.inputs.append(h)
        tape.pre_activations.append(pre)
        tape.outputs.append(out)
        h = out
    return tape


def backward(layers: list[DenseLayer], tape: GradientTape, output_grad) -> list[tuple[np.ndarray, np.ndarray]]:
    """Reverse-mode gradients ``[(dW, db), ...]`` in layer order.

    ``output_grad`` is d(loss)/d(final output), same shape as ``tape.output``.
    """
    if len(tape.outputs) != len(layers):
        raise ShapeError("tape does not match layer list")
    grad = np.asarray(output_grad, dtype=np.float64)
    if grad.shape != tape.output.shape:
        raise ShapeError(f"output_grad shape {grad.shape} != output shape {tape.output.shape}")

    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        pre = tape.pre_activations[k]
        inp = tape.inputs[k]
        if pre.shape[-1] != layer.n_out or inp.shape[-1] != layer.n_in:
            raise ShapeError(f"tape shapes do not match layer {k}")
        delta = grad * layer.activation.derivative(pre)
        if delta.ndim == 1:
            dW = np.outer(delta, inp)
            db = delta.copy()
        else:
            dW = delta.T @ inp
            db = delta.sum(axis=0)
        grads[k] = (dW, db)
        grad = delta @ layer.weights
    return grads


def l1_gradient(weights, lam: float) -> np.ndarray:
    """Subgradient of ``lam * sum|w|`` with sign(0) = 0."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return lam * np.sign(np.asarray(weights, dtype=np.float64))


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_update(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam step. ``params`` arrays are updated in place."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"param shape {np.shape(p)} != grad shape {np.shape(g)}")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p, dtype=np.float64) for p in params]
        state.second_moment = [np.zeros_like(p, dtype=np.float64) for p in params]

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params
