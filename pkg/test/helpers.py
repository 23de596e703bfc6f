"""
Builders shared by several test modules.
"""

from src.pofsm.engine import LayerKind, LayerSpec, NetworkSpec


def tiny_classifier_spec(num_classes: int = 3, input_dims=(8, 8, 3)) -> NetworkSpec:
    """Four convolutions (one LRN, one max-pool) then FC-RELU-FC-SOFTMAX on 8x8 input."""
    layers = (
        LayerSpec(LayerKind.CONV, "C1", kernels=4, size=3, padding=1, init_std=0.3),
        LayerSpec(LayerKind.RELU, "R1"),
        LayerSpec(LayerKind.LRN, "LRN1", lrn_size=3),
        LayerSpec(LayerKind.CONV, "C2", kernels=4, size=3, padding=1, init_std=0.3),
        LayerSpec(LayerKind.RELU, "R2"),
        LayerSpec(LayerKind.CONV, "C3", kernels=4, size=3, padding=1, init_std=0.3),
        LayerSpec(LayerKind.RELU, "R3"),
        LayerSpec(LayerKind.MAXPOOL, "MP3", size=2, stride=2),
        LayerSpec(LayerKind.CONV, "C4", kernels=4, size=3, padding=1, init_std=0.3),
        LayerSpec(LayerKind.RELU, "R4"),
        LayerSpec(LayerKind.FC, "FC5", neurons=6, init_std=0.3),
        LayerSpec(LayerKind.RELU, "R5"),
        LayerSpec(LayerKind.FC, "FC6", neurons=num_classes, init_std=0.3),
        LayerSpec(LayerKind.SOFTMAX, "PROB"),
    )
    return NetworkSpec(tuple(input_dims), layers, num_classes, name="tiny")
