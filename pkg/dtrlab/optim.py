"""
RMSprop with named parameter slots, shared by the surrogate trainer and the MLP Q-model.
"""
import numpy as np


class RMSprop:
    """
    v <- decay * v + (1 - decay) * g^2
    theta <- theta + sign * lr * g / (sqrt(v) + eps), sign = +1 to ascend, -1 to descend.
    """

    def __init__(self, learning_rate: float = 1e-3, decay: float = 0.9, epsilon: float = 1e-8, ascend: bool = True):
        self._lr = learning_rate
        self._decay = decay
        self._eps = epsilon
        self._sign = 1.0 if ascend else -1.0
        self._mean_squares: dict[str, np.ndarray] = {}

    def apply_gradient(self, var: np.ndarray, gradient: np.ndarray, var_name: str) -> np.ndarray:
        r = self._mean_squares.get(var_name, np.zeros_like(gradient))
        r = self._decay * r + (1.0 - self._decay) * gradient * gradient
        self._mean_squares[var_name] = r
        return var + self._sign * self._lr * gradient / (np.sqrt(r) + self._eps)


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Scale all gradients jointly so their concatenated L2 norm is at most max_norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return grads, norm
