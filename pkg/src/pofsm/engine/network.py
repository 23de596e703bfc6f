"""
Network: a NetworkSpec plus parameters, with forward and backward passes.
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from ..errors import ConfigError, ShapeError, StateError
from .layers import Layer, build_layer
from .specs import NetworkSpec

logger = logging.getLogger(__name__)

Params = Dict[str, Dict[str, np.ndarray]]


class Network:
    """
    Parameterised network built from a NetworkSpec.

    Parameters are created in `param_dtype` (float32 by default, which is the
    weights-file precision) and initialised from a seeded Gaussian with each
    layer's `init_std`; biases start at zero.

    `forward(x)` without `keep_cache` does not touch instance state, so an
    immutable network can serve concurrent inference. Training calls
    `forward(..., keep_cache=True)` followed by `backward`.
    """

    def __init__(
        self,
        spec: NetworkSpec,
        seed: int = 0,
        param_dtype=np.float32,
        params: Optional[Params] = None,
    ):
        self.spec = spec
        self.param_dtype = np.dtype(param_dtype)
        self.layers: List[Layer] = []
        inputs = spec.input_dims_by_layer()
        for layer_spec in spec.layers:
            self.layers.append(build_layer(layer_spec, inputs[layer_spec.name], self.param_dtype))
        self._caches: Optional[list] = None
        self.input_grad: Optional[np.ndarray] = None

        if params is None:
            self.initialize(seed)
        else:
            self.set_parameters(params)

    @classmethod
    def zeros(cls, spec: NetworkSpec, param_dtype=np.float32) -> "Network":
        """Network with every weight and bias equal to zero."""
        network = cls(spec, param_dtype=param_dtype)
        for layer in network.layers:
            for value in layer.params.values():
                value[...] = 0
        return network

    @property
    def head_name(self) -> str:
        return self.spec.head_name

    def layer(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ConfigError(f"No layer named '{name}'")

    def initialize(self, seed: int) -> None:
        """Seeded Gaussian init of all parametric layers in declared order."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if layer.params:
                self.init_layer(layer.name, rng)

    def init_layer(self, name: str, rng: np.random.Generator) -> None:
        layer = self.layer(name)
        weights = layer.params["W"]
        weights[...] = rng.normal(0.0, layer.spec.init_std, size=weights.shape)
        layer.params["b"][...] = 0

    def parameters(self) -> Params:
        """Live references to parameter arrays, keyed by layer name."""
        return {layer.name: layer.params for layer in self.layers if layer.params}

    def state_dict(self) -> Params:
        """Deep copy of all parameters."""
        return {
            name: {key: value.copy() for key, value in params.items()}
            for name, params in self.parameters().items()
        }

    def set_parameters(self, params: Params) -> None:
        current = self.parameters()
        for name, layer_params in current.items():
            if name not in params:
                raise ConfigError(f"Missing parameters for layer '{name}'")
            for key, target in layer_params.items():
                source = np.asarray(params[name][key])
                if source.shape != target.shape:
                    raise ShapeError(name, target.shape, source.shape)
                target[...] = source

    def copy(self) -> "Network":
        return Network(self.spec, param_dtype=self.param_dtype, params=self.state_dict())

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or tuple(x.shape[1:]) != self.spec.input_dims:
            raise ShapeError("input", ("batch",) + self.spec.input_dims, tuple(x.shape))
        return x

    def _run(self, x, layers, keep_cache: bool) -> np.ndarray:
        caches = []
        for layer in layers:
            try:
                x, cache = layer.forward(x)
            except ValueError as e:
                raise ShapeError(layer.name, layer.input_dims, tuple(x.shape[1:])) from e
            caches.append(cache)
        if keep_cache:
            self._caches = caches
        return x

    def forward(self, x, keep_cache: bool = False) -> np.ndarray:
        """
        Run the whole network.

        Args:
            x: (batch, rows, cols, channels) array; a single (rows, cols, channels)
               image is promoted to a batch of one
            keep_cache: Keep activations for a following `backward` call

        Returns:
            Class probabilities (batch, num_classes) or a spatial probability
            map (batch, M, N, C)
        """
        return self._run(self._check_input(x), self.layers, keep_cache)

    def forward_logits(self, x, keep_cache: bool = False) -> np.ndarray:
        """Run every layer except the terminal softmax."""
        return self._run(self._check_input(x), self.layers[:-1], keep_cache)

    def backward(self, dout: np.ndarray, from_logits: bool = False) -> Params:
        """
        Backpropagate an upstream gradient through the cached forward pass.

        Args:
            dout: Gradient of the loss w.r.t. the network output (or w.r.t. the
                  logits when `from_logits` is set and the forward pass was
                  `forward_logits`)
            from_logits: Start below the terminal softmax layer

        Returns:
            Gradients keyed like `parameters()`

        Raises:
            StateError: If no forward pass has been cached
        """
        if self._caches is None:
            raise StateError("backward() called before a cached forward pass")

        layers = self.layers[:-1] if from_logits else self.layers
        if len(layers) != len(self._caches):
            raise StateError("Cached forward pass does not match the requested backward pass")

        grads: Params = {}
        grad = np.asarray(dout, dtype=np.float64)
        for layer, cache in zip(reversed(layers), reversed(self._caches)):
            grad, layer_grads = layer.backward(grad, cache)
            if layer_grads:
                grads[layer.name] = layer_grads
        self.input_grad = grad
        return grads

    def clear_cache(self) -> None:
        self._caches = None


def replace_head(network: Network, new_num_classes: int, init_seed: int) -> Network:
    """
    Swap the classifier head for a freshly initialised one.

    Every non-head parameter is copied bit-for-bit; the head is initialised
    from its own seeded generator, so the same seed always gives the same head.

    Raises:
        ConfigError: If the network has no FC head (flow networks)
    """
    if network.spec.mode != "classifier":
        raise ConfigError("replace_head needs a classifier network with an FC head")

    new_spec = network.spec.with_num_classes(new_num_classes)
    replaced = Network(new_spec, param_dtype=network.param_dtype)
    head = new_spec.head_name
    old_params = network.parameters()
    for name, params in replaced.parameters().items():
        if name == head:
            continue
        for key, value in params.items():
            value[...] = old_params[name][key]
    replaced.init_layer(head, np.random.default_rng(init_seed))
    logger.debug(f"Replaced head '{head}' with {new_num_classes} outputs (seed {init_seed})")
    return replaced
