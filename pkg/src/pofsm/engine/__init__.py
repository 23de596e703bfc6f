"""Dense-tensor neural-network engine (NHWC numpy tensors)."""

from .network import Network, replace_head
from .optim import FineTunePolicy, Scenario, TrainState, sgd_step
from .presets import build_classifier_spec, build_flow_spec, desk_flow_preset, desk_preset, full_preset
from .specs import LayerKind, LayerSpec, NetworkSpec
from .weights import load_weights, read_network, save_weights

__all__ = [
    "FineTunePolicy",
    "LayerKind",
    "LayerSpec",
    "Network",
    "NetworkSpec",
    "Scenario",
    "TrainState",
    "build_classifier_spec",
    "build_flow_spec",
    "desk_flow_preset",
    "desk_preset",
    "load_weights",
    "full_preset",
    "read_network",
    "replace_head",
    "save_weights",
    "sgd_step",
]
