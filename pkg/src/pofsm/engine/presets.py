"""
Network presets.

`full` is the seven-layer layout (five convolutions, two FC(4096), new
class head) with the stride/padding schedule that gives the 55 -> 27 -> 13 -> 6
trace on 227x227x3 input. `desk` keeps the same layer sequence at 32x32 with
far fewer channels. `desk-flow` is a small fully convolutional network ending
in a per-pixel softmax over flow clusters.
"""

import math
from typing import Callable, Dict, List, Tuple

from ..errors import ConfigError
from ..utils.constants import DEFAULT_CLUSTERS
from .specs import LayerKind, LayerSpec, NetworkSpec


def _he_std(fan_in: int) -> float:
    return math.sqrt(2.0 / fan_in)


def _alexnet_layers(
    channels: Tuple[int, int, int, int, int],
    kernel_sizes: Tuple[int, int, int],
    first_stride: int,
    paddings: Tuple[int, int, int, int, int],
    pool_size: int,
    pool_stride: int,
    input_channels: int,
    he_init: bool,
) -> List[LayerSpec]:
    c1, c2, c3, c4, c5 = channels
    k1, k2, k3 = kernel_sizes
    p1, p2, p3, p4, p5 = paddings

    def conv(name, kernels, size, padding, fan_in_channels, stride=1):
        std = _he_std(size * size * fan_in_channels) if he_init else 0.01
        return LayerSpec(LayerKind.CONV, name, kernels=kernels, size=size, stride=stride,
                         padding=padding, init_std=std)

    def pool(name):
        return LayerSpec(LayerKind.MAXPOOL, name, size=pool_size, stride=pool_stride)

    def relu(name):
        return LayerSpec(LayerKind.RELU, name)

    def lrn(name):
        return LayerSpec(LayerKind.LRN, name, lrn_size=5, lrn_alpha=1e-4, lrn_beta=0.75,
                         lrn_bias=2.0)

    return [
        conv("C1", c1, k1, p1, input_channels, stride=first_stride), relu("R1"), lrn("LRN1"),
        pool("MP1"),
        conv("C2", c2, k2, p2, c1), relu("R2"), lrn("LRN2"), pool("MP2"),
        conv("C3", c3, k3, p3, c2), relu("R3"),
        conv("C4", c4, k3, p4, c3), relu("R4"),
        conv("C5", c5, k3, p5, c4), relu("R5"), lrn("LRN5"), pool("MP5"),
    ]


def _with_fc_tail(spec_layers, input_dims, fc_neurons, num_classes, he_init, name):
    # FC fan-in depends on the pooled map, so trace the conv trunk first.
    dims = tuple(input_dims)
    for layer in spec_layers:
        dims = layer.output_dims(dims)
    flat = dims[0] * dims[1] * dims[2]

    def fc(layer_name, neurons, fan_in, head=False):
        if he_init:
            std = math.sqrt(1.0 / fan_in) if head else _he_std(fan_in)
        else:
            std = 0.01
        return LayerSpec(LayerKind.FC, layer_name, neurons=neurons, init_std=std)

    layers = list(spec_layers) + [
        fc("FC6", fc_neurons, flat), LayerSpec(LayerKind.RELU, "R6"),
        fc("FC7", fc_neurons, fc_neurons), LayerSpec(LayerKind.RELU, "R7"),
        fc("FC8", num_classes, fc_neurons, head=True),
        LayerSpec(LayerKind.SOFTMAX, "PROB"),
    ]
    return NetworkSpec(tuple(input_dims), tuple(layers), num_classes, name=name)


def full_preset(
    num_classes: int = 101,
    input_dims: Tuple[int, int, int] = (227, 227, 3),
    pool_size: int = 3,
    pool_stride: int = 2,
) -> NetworkSpec:
    """
    CON(96,11)/4 -> LRN -> MP -> CON(256,5) -> LRN -> MP -> CON(384,3) -> CON(384,3)
    -> CON(256,3) -> LRN -> MP -> FC(4096) -> FC(4096) -> FC(num_classes) -> softmax.

    Each convolution is followed by ReLU. Paddings are (0, 2, 1, 1, 1).
    """
    trunk = _alexnet_layers(
        channels=(96, 256, 384, 384, 256),
        kernel_sizes=(11, 5, 3),
        first_stride=4,
        paddings=(0, 2, 1, 1, 1),
        pool_size=pool_size,
        pool_stride=pool_stride,
        input_channels=input_dims[2],
        he_init=False,
    )
    return _with_fc_tail(trunk, input_dims, 4096, num_classes, he_init=False, name="full")


def desk_preset(
    num_classes: int = 5,
    input_dims: Tuple[int, int, int] = (32, 32, 3),
    pool_size: int = 3,
    pool_stride: int = 2,
) -> NetworkSpec:
    """Same layer sequence as `full_preset`, scaled for 32x32 inputs."""
    trunk = _alexnet_layers(
        channels=(12, 24, 32, 32, 24),
        kernel_sizes=(5, 5, 3),
        first_stride=1,
        paddings=(2, 2, 1, 1, 1),
        pool_size=pool_size,
        pool_stride=pool_stride,
        input_channels=input_dims[2],
        he_init=True,
    )
    return _with_fc_tail(trunk, input_dims, 64, num_classes, he_init=True, name="desk")


def desk_flow_preset(
    num_clusters: int = DEFAULT_CLUSTERS,
    input_dims: Tuple[int, int, int] = (32, 32, 3),
    width: int = 16,
) -> NetworkSpec:
    """Fully convolutional flow predictor with an M x N x C spatial softmax."""
    channels = input_dims[2]
    layers = []
    for index in range(3):
        layers.append(LayerSpec(LayerKind.CONV, f"F{index + 1}", kernels=width, size=5,
                                padding=2, init_std=_he_std(25 * channels)))
        layers.append(LayerSpec(LayerKind.RELU, f"FR{index + 1}"))
        channels = width
    layers.append(LayerSpec(LayerKind.CONV, "F4", kernels=num_clusters, size=1,
                            init_std=math.sqrt(1.0 / channels)))
    layers.append(LayerSpec(LayerKind.SPATIAL_SOFTMAX, "FLOWPROB"))
    return NetworkSpec(tuple(input_dims), tuple(layers), num_clusters, name="desk-flow")


CLASSIFIER_PRESETS: Dict[str, Callable[..., NetworkSpec]] = {
    "full": full_preset,
    "desk": desk_preset,
}

FLOW_PRESETS: Dict[str, Callable[..., NetworkSpec]] = {
    "desk-flow": desk_flow_preset,
}


def build_classifier_spec(preset: str, num_classes: int, **kwargs) -> NetworkSpec:
    """Look up a classifier preset by name."""
    if preset not in CLASSIFIER_PRESETS:
        raise ConfigError(
            f"Unknown classifier preset '{preset}' (choose from {sorted(CLASSIFIER_PRESETS)})"
        )
    return CLASSIFIER_PRESETS[preset](num_classes=num_classes, **kwargs)


def build_flow_spec(preset: str, num_clusters: int, **kwargs) -> NetworkSpec:
    """Look up a flow-network preset by name."""
    if preset not in FLOW_PRESETS:
        raise ConfigError(f"Unknown flow preset '{preset}' (choose from {sorted(FLOW_PRESETS)})")
    return FLOW_PRESETS[preset](num_clusters=num_clusters, **kwargs)
