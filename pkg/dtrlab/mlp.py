"""
Fully connected ReLU network with a scalar output and manual backpropagation.

Parameters live in one flat vector, laid out layer by layer as W (out x in,
row-major) followed by b. The forward pass keeps the activations it needs in a
cache; backward consumes that cache and an upstream vector d(loss)/d(output_i)
and returns the flat gradient summed over the batch.
"""
from dataclasses import dataclass

import numpy as np


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def relu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, 0.0)


@dataclass(frozen=True)
class MlpNetwork:
    """Architecture only; weights are passed in as a flat vector."""
    n_in: int
    hidden: tuple[int, ...] = (128, 64)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.n_in, *self.hidden, 1)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        w = self.widths
        return [(w[i + 1], w[i]) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum(rows * cols + rows for rows, cols in self.shapes)

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        layers = []
        start = 0
        for rows, cols in self.shapes:
            W = params[start:start + rows * cols].reshape(rows, cols)
            start += rows * cols
            b = params[start:start + rows]
            start += rows
            layers.append((W, b))
        return layers

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Glorot-uniform weights, zero biases."""
        chunks = []
        for rows, cols in self.shapes:
            limit = np.sqrt(6.0 / (rows + cols))
            chunks.append(rng.uniform(-limit, limit, size=rows * cols))
            chunks.append(np.zeros(rows))
        return np.concatenate(chunks)

    def dropout_masks(self, rng: np.random.Generator, n: int, rate: float) -> list[np.ndarray] | None:
        """Inverted-dropout masks for every hidden layer (values 0 or 1/(1-rate))."""
        if rate <= 0:
            return None
        keep = 1.0 - rate
        return [(rng.random((n, width)) < keep) / keep for width in self.hidden]

    def forward(self, params: np.ndarray, X: np.ndarray, masks: list[np.ndarray] | None = None):
        """
        Returns (outputs of shape (n,), cache). masks=None is evaluation mode.
        """
        layers = self.unpack(params)
        a = np.atleast_2d(X)
        cache = [a]
        for i, (W, b) in enumerate(layers[:-1]):
            z = a @ W.T + b
            a = relu(z)
            if masks is not None:
                a = a * masks[i]
            cache.append((z, a))
        W, b = layers[-1]
        out = a @ W.T + b
        return out[:, 0], (cache, masks)

    def backward(self, params: np.ndarray, cache, upstream: np.ndarray) -> np.ndarray:
        """Flat gradient of sum_i upstream_i * output_i."""
        layers = self.unpack(params)
        activations, masks = cache
        dout = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)
        grads: list[np.ndarray] = [None] * (2 * len(layers))

        a_prev = activations[-1][1] if len(layers) > 1 else activations[0]
        W, _ = layers[-1]
        grads[-2] = (dout.T @ a_prev).ravel()
        grads[-1] = dout.sum(axis=0)
        da = dout @ W

        for i in range(len(layers) - 2, -1, -1):
            z, _ = activations[i + 1]
            if masks is not None:
                da = da * masks[i]
            dz = da * relu_grad(z)
            a_prev = activations[i][1] if i > 0 else activations[0]
            W, _ = layers[i]
            grads[2 * i] = (dz.T @ a_prev).ravel()
            grads[2 * i + 1] = dz.sum(axis=0)
            da = dz @ W
        return np.concatenate(grads)
