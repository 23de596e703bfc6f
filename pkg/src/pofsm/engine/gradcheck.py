"""
Central finite-difference gradient checking.

Used by the test-suite for every layer type and loss variant, and usable on
any custom layer: wrap the scalar objective in a closure and compare.
"""

from typing import Callable, Dict

import numpy as np

from .layers import Layer
from .network import Network

DEFAULT_EPS = 1e-4


def numerical_gradient(f: Callable[[], float], x: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """
    Central differences of scalar `f()` w.r.t. every entry of `x`.

    `x` is perturbed in place and restored; `f` must read it.
    """
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        plus = f()
        flat[index] = original - eps
        minus = f()
        flat[index] = original
        grad.reshape(-1)[index] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise |a - n| / max(|a|, |n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_layer(layer: Layer, x: np.ndarray, seed: int = 0, eps: float = DEFAULT_EPS) -> Dict[str, float]:
    """
    Compare a layer's analytic gradients with finite differences.

    The scalar objective is sum(r * layer(x)) for a fixed random `r`.
    Parameters should be float64 for a meaningful check.

    Returns:
        Relative error per checked tensor: 'input' plus each parameter key
    """
    x = np.array(x, dtype=np.float64)
    y, cache = layer.forward(x)
    projection = np.random.default_rng(seed).normal(size=y.shape)
    dx, grads = layer.backward(projection, cache)

    def objective() -> float:
        return float(np.sum(projection * layer.forward(x)[0]))

    errors = {"input": relative_error(dx, numerical_gradient(objective, x, eps))}
    for key, grad in grads.items():
        errors[key] = relative_error(grad, numerical_gradient(objective, layer.params[key], eps))
    return errors


def check_network(network: Network, x: np.ndarray, seed: int = 0, eps: float = DEFAULT_EPS) -> Dict[str, float]:
    """
    Compare every parameter gradient of `network` with finite differences.

    Returns:
        Relative error keyed by "<layer>.<param>"
    """
    x = np.array(x, dtype=np.float64)
    y = network.forward(x, keep_cache=True)
    projection = np.random.default_rng(seed).normal(size=y.shape)
    grads = network.backward(projection)

    def objective() -> float:
        return float(np.sum(projection * network.forward(x)))

    errors = {}
    for name, params in network.parameters().items():
        for key, value in params.items():
            numeric = numerical_gradient(objective, value, eps)
            errors[f"{name}.{key}"] = relative_error(grads[name][key], numeric)
    return errors
