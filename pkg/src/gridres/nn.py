"""Minimal dense networks with hand-written backprop, in float64 numpy.

Nothing here is framework-backed on purpose: checkpoints must round-trip
bit-exactly and the PPO gradients are validated against central finite
differences, which is simplest when the whole computation is plain numpy.
"""

from __future__ import annotations

import numpy as np


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    """Orthogonal weight init (QR of a Gaussian, sign-corrected), scaled."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """Fully connected tanh network with a linear head.

    Weights W have shape (fan_out, fan_in); forward keeps the activation
    stack so backward can run without recomputation.
    """

    def __init__(self, sizes, rng: np.random.Generator, out_gain: float = 0.01):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = out_gain if i == last else np.sqrt(2.0)
            self.weights.append(orthogonal(rng, (fan_out, fan_in), gain))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, activations); activations[i] feeds layer i."""
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acts = [a]
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if i == n - 1 else np.tanh(z)
            acts.append(a)
        return a, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. every W and b, given dL/d(output).

        Returned flat list matches parameter_arrays() ordering.
        """
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = np.atleast_2d(grad_out)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = delta.T @ acts[i]
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (1.0 - acts[i] ** 2)
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.append(gw)
            out.append(gb)
        return out

    def parameter_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def load_arrays(self, arrays) -> None:
        expected = self.parameter_arrays()
        if len(arrays) != len(expected):
            raise ValueError(f"expected {len(expected)} arrays, got {len(arrays)}")
        for target, src in zip(expected, arrays):
            src = np.asarray(src, dtype=np.float64)
            if src.shape != target.shape:
                raise ValueError(f"shape mismatch: {src.shape} vs {target.shape}")
        for i in range(len(self.weights)):
            self.weights[i] = np.array(arrays[2 * i], dtype=np.float64)
            self.biases[i] = np.array(arrays[2 * i + 1], dtype=np.float64)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameter_arrays()])

    def set_flat(self, flat: np.ndarray) -> None:
        arrays = []
        offset = 0
        for p in self.parameter_arrays():
            arrays.append(flat[offset : offset + p.size].reshape(p.shape))
            offset += p.size
        if offset != flat.size:
            raise ValueError("flat vector size mismatch")
        self.load_arrays(arrays)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameter_arrays())


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Rescale the whole gradient list when its global L2 norm exceeds max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        return [g * scale for g in grads]
    return grads


class Adam:
    """Adaptive-moment optimizer over a fixed parameter list."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
