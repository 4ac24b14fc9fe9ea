"""One-hidden-layer perceptrons with hand-rolled backprop and Adam.

Batches are row-major (batch, features). Weights follow the convention
W1: (hidden, input), W2: (output, hidden), so a forward pass is
relu(x W1' + b1) W2' + b2. The ReLU subgradient at exactly 0 is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ensure_finite
from .rng import SeededRng


@dataclass
class MlpParams:
    """Parameter (or gradient) blocks of a one-hidden-layer network."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden, inp = self.W1.shape
        out, hidden2 = self.W2.shape
        if hidden2 != hidden or self.b1.shape != (hidden,) or self.b2.shape != (out,):
            raise ValueError(
                f"inconsistent shapes: W1 {self.W1.shape}, b1 {self.b1.shape}, "
                f"W2 {self.W2.shape}, b2 {self.b2.shape}"
            )
        for name in ("W1", "b1", "W2", "b2"):
            ensure_finite(getattr(self, name), name)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[0]

    def blocks(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


def init_mlp(input_dim: int, hidden_dim: int, output_dim: int, rng: SeededRng) -> MlpParams:
    """Uniform(-s, s) weights with s = sqrt(6/(fan_in+fan_out)); zero biases."""
    if min(input_dim, hidden_dim, output_dim) < 1:
        raise ValueError("all layer dimensions must be at least 1")

    def layer(fan_out, fan_in):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return (2.0 * rng.uniform(fan_out * fan_in) - 1.0).reshape(fan_out, fan_in) * s

    return MlpParams(
        W1=layer(hidden_dim, input_dim),
        b1=np.zeros(hidden_dim),
        W2=layer(output_dim, hidden_dim),
        b2=np.zeros(output_dim),
    )


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    hidden = np.maximum(x @ params.W1.T + params.b1, 0.0)
    return hidden @ params.W2.T + params.b2


def mlp_forward_cache(params: MlpParams, x: np.ndarray):
    """Forward pass keeping what backprop needs: the input and hidden layer."""
    x = np.asarray(x, dtype=np.float64)
    pre = x @ params.W1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ params.W2.T + params.b2
    return out, (x, pre, hidden)


def mlp_backward(params: MlpParams, cache, d_out: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradients of sum(d_out * output) w.r.t. params and the input batch."""
    x, pre, hidden = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    dW2 = d_out.T @ hidden
    db2 = d_out.sum(axis=0)
    d_hidden = d_out @ params.W2
    d_pre = np.where(pre > 0.0, d_hidden, 0.0)
    dW1 = d_pre.T @ x
    db1 = d_pre.sum(axis=0)
    dx = d_pre @ params.W1
    return MlpParams(dW1, db1, dW2, db2), dx


def add_grads(a: MlpParams, b: MlpParams) -> MlpParams:
    return MlpParams(a.W1 + b.W1, a.b1 + b.b1, a.W2 + b.W2, a.b2 + b.b2)


def zero_grads(params: MlpParams) -> MlpParams:
    return MlpParams(
        np.zeros_like(params.W1),
        np.zeros_like(params.b1),
        np.zeros_like(params.W2),
        np.zeros_like(params.b2),
    )


@dataclass
class AdamState:
    """Moment accumulators for a fixed list of parameter blocks."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(blocks: list[np.ndarray], learning_rate: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(b) for b in blocks],
        v=[np.zeros_like(b) for b in blocks],
        step=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(blocks: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new blocks and new state."""
    if len(blocks) != len(grads) or len(blocks) != len(state.m):
        raise ValueError("block / gradient / state counts do not match")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_blocks, new_m, new_v = [], [], []
    for p, g, m, v in zip(blocks, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_blocks.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(
        m=new_m, v=new_v, step=t,
        learning_rate=state.learning_rate, beta1=state.beta1,
        beta2=state.beta2, epsilon=state.epsilon,
    )
    return new_blocks, new_state
