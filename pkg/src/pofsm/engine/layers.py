"""
Layer implementations.

Tensors are NHWC float64 arrays (batch, rows, cols, channels); FC and SOFTMAX
work on (batch, features). Parameters may be stored in float32 but every
forward/backward computation runs in float64.

Layers are stateless apart from their parameters: `forward` returns the
output together with a cache object, and `backward` consumes that cache. This
keeps inference on a shared network safe from several threads.
"""

from typing import Any, Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .specs import Dims, LayerKind, LayerSpec

Grads = Dict[str, np.ndarray]


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis`."""
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y: np.ndarray, dy: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vector-Jacobian product of softmax given its output `y`."""
    return y * (dy - np.sum(dy * y, axis=axis, keepdims=True))


class Layer:
    """Base layer: a spec, its input/output extents and (optionally) parameters."""

    def __init__(self, spec: LayerSpec, input_dims: Dims, param_dtype=np.float32):
        self.spec = spec
        self.name = spec.name
        self.kind = spec.kind
        self.input_dims = tuple(input_dims)
        self.output_dims = spec.output_dims(self.input_dims)
        self.params: Dict[str, np.ndarray] = {
            key: np.zeros(shape, dtype=param_dtype)
            for key, shape in spec.param_shapes(self.input_dims).items()
        }

    def _p(self, key: str) -> np.ndarray:
        return self.params[key].astype(np.float64, copy=False)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache: Any) -> Tuple[np.ndarray, Grads]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name}: {self.input_dims} -> {self.output_dims})"


class Conv2D(Layer):
    """Strided, zero-padded convolution via im2col."""

    def _windows(self, x: np.ndarray) -> np.ndarray:
        k, s, p = self.spec.size, self.spec.stride, self.spec.padding
        if p:
            x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        # (B, Ho, Wo, C, k, k) -> (B, Ho, Wo, k, k, C)
        windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
        return windows.transpose(0, 1, 2, 4, 5, 3)

    def forward(self, x):
        weights = self._p("W")
        windows = self._windows(x)
        batch, out_rows, out_cols = windows.shape[:3]
        cols = windows.reshape(batch * out_rows * out_cols, -1)
        y = cols @ weights.reshape(-1, weights.shape[-1]) + self._p("b")
        return y.reshape(batch, out_rows, out_cols, -1), (x.shape, cols)

    def backward(self, dy, cache):
        x_shape, cols = cache
        batch, rows, cols_in, channels = x_shape
        k, s, p = self.spec.size, self.spec.stride, self.spec.padding
        weights = self._p("W")
        out_rows, out_cols, out_channels = dy.shape[1:]

        dy2 = dy.reshape(-1, out_channels)
        grads = {
            "W": (cols.T @ dy2).reshape(weights.shape),
            "b": dy2.sum(axis=0),
        }

        dcols = (dy2 @ weights.reshape(-1, out_channels).T).reshape(
            batch, out_rows, out_cols, k, k, channels
        )
        dxp = np.zeros((batch, rows + 2 * p, cols_in + 2 * p, channels))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + s * out_rows:s, j:j + s * out_cols:s, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p:p + rows, p:p + cols_in, :], grads


class LocalResponseNorm(Layer):
    """
    Cross-channel LRN: y = x / (bias + alpha * sum_{window} x^2) ** beta.

    The window spans `lrn_size` adjacent channels centred on each channel,
    zero-padded at the channel ends.
    """

    def _window_sum(self, a: np.ndarray) -> np.ndarray:
        half = self.spec.lrn_size // 2
        padded = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(half, half)])
        return sliding_window_view(padded, self.spec.lrn_size, axis=-1).sum(axis=-1)

    def forward(self, x):
        scale = self.spec.lrn_bias + self.spec.lrn_alpha * self._window_sum(x * x)
        return x * scale ** (-self.spec.lrn_beta), (x, scale)

    def backward(self, dy, cache):
        x, scale = cache
        beta, alpha = self.spec.lrn_beta, self.spec.lrn_alpha
        cross = self._window_sum(dy * x * scale ** (-beta - 1.0))
        dx = dy * scale ** (-beta) - 2.0 * alpha * beta * x * cross
        return dx, {}


class MaxPool2D(Layer):
    """Overlapping max pooling; ties resolve to the first window position."""

    def forward(self, x):
        k, s = self.spec.size, self.spec.stride
        windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
        flat = windows.reshape(windows.shape[:4] + (k * k,))
        arg = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        return y, (x.shape, arg)

    def backward(self, dy, cache):
        x_shape, arg = cache
        k, s = self.spec.size, self.spec.stride
        out_rows, out_cols = dy.shape[1:3]
        dx = np.zeros(x_shape)
        for offset in range(k * k):
            i, j = divmod(offset, k)
            dx[:, i:i + s * out_rows:s, j:j + s * out_cols:s, :] += np.where(arg == offset, dy, 0.0)
        return dx, {}


class FullyConnected(Layer):
    """Y = X W + B on the flattened input."""

    def forward(self, x):
        flat = x.reshape(x.shape[0], -1)
        return flat @ self._p("W") + self._p("b"), (x.shape, flat)

    def backward(self, dy, cache):
        x_shape, flat = cache
        grads = {"W": flat.T @ dy, "b": dy.sum(axis=0)}
        return (dy @ self._p("W").T).reshape(x_shape), grads


class ReLU(Layer):
    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, dy, cache):
        return dy * cache, {}


class Softmax(Layer):
    """Softmax over the last axis (per sample for SOFTMAX, per pixel for SPATIAL_SOFTMAX)."""

    def forward(self, x):
        y = softmax(x, axis=-1)
        return y, y

    def backward(self, dy, cache):
        return softmax_backward(cache, dy, axis=-1), {}


LAYER_TYPES = {
    LayerKind.CONV: Conv2D,
    LayerKind.LRN: LocalResponseNorm,
    LayerKind.MAXPOOL: MaxPool2D,
    LayerKind.FC: FullyConnected,
    LayerKind.RELU: ReLU,
    LayerKind.SOFTMAX: Softmax,
    LayerKind.SPATIAL_SOFTMAX: Softmax,
}


def build_layer(spec: LayerSpec, input_dims: Dims, param_dtype=np.float32) -> Layer:
    """Instantiate the layer class for `spec.kind`."""
    return LAYER_TYPES[spec.kind](spec, input_dims, param_dtype=param_dtype)
