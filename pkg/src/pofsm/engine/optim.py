"""
Plain SGD with step learning-rate decay and per-layer multipliers.

A FineTunePolicy assigns every parametric layer a learning-rate multiplier:
0 freezes the layer, the classifier head gets `head_multiplier` unless it is
listed explicitly. Scenarios build the standard transfer-learning policies.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

import numpy as np

from ..errors import ConfigError, ShapeError
from ..utils.constants import (
    DEFAULT_BASE_LR,
    DEFAULT_HEAD_MULTIPLIER,
    DEFAULT_LR_GAMMA,
    DEFAULT_LR_STEP,
    FROZEN_CONV_LAYERS,
)
from .network import Network, Params
from .specs import NetworkSpec

logger = logging.getLogger(__name__)


class Scenario(str, Enum):
    """Transfer-learning scenarios."""

    ALL_LAYERS = "ALL_LAYERS"
    TOP5_LAYERS = "TOP5_LAYERS"
    HEAD_ONLY = "HEAD_ONLY"
    SCRATCH = "SCRATCH"

    @property
    def label(self) -> str:
        return {
            Scenario.ALL_LAYERS: "Fine-tune all layers",
            Scenario.TOP5_LAYERS: "Fine-tune top 5 layers",
            Scenario.HEAD_ONLY: "Fixed feature extractor",
            Scenario.SCRATCH: "Train from scratch",
        }[self]

    @classmethod
    def parse(cls, value) -> "Scenario":
        """Accept enum members, names in any case and dashed spellings."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(
                f"Unknown scenario '{value}' (choose from {[s.value for s in cls]})"
            )


@dataclass
class FineTunePolicy:
    """Learning-rate schedule plus per-layer multipliers."""

    multipliers: Dict[str, float] = field(default_factory=dict)
    base_lr: float = DEFAULT_BASE_LR
    lr_step_iters: int = DEFAULT_LR_STEP
    lr_gamma: float = DEFAULT_LR_GAMMA
    head_multiplier: float = DEFAULT_HEAD_MULTIPLIER
    default_multiplier: float = 1.0
    head_name: Optional[str] = None

    def __post_init__(self):
        for name, value in self.multipliers.items():
            if value < 0:
                raise ConfigError(f"Negative learning-rate multiplier for layer '{name}': {value}")
        if self.head_multiplier < 0 or self.default_multiplier < 0:
            raise ConfigError("Learning-rate multipliers must be >= 0")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if self.lr_step_iters < 1:
            raise ConfigError(f"lr_step_iters must be >= 1, got {self.lr_step_iters}")
        if self.lr_gamma <= 0:
            raise ConfigError(f"lr_gamma must be > 0, got {self.lr_gamma}")

    def learning_rate(self, iteration: int) -> float:
        """base_lr * gamma ** floor(iteration / step)."""
        return self.base_lr * self.lr_gamma ** (iteration // self.lr_step_iters)

    def multiplier(self, layer_name: str) -> float:
        if layer_name in self.multipliers:
            value = self.multipliers[layer_name]
        elif layer_name == self.head_name:
            value = self.head_multiplier
        else:
            value = self.default_multiplier
        if value < 0:
            raise ConfigError(f"Negative learning-rate multiplier for layer '{layer_name}': {value}")
        return value

    @classmethod
    def for_scenario(cls, scenario, spec: NetworkSpec, **schedule) -> "FineTunePolicy":
        """
        Build the policy of a transfer scenario.

        ALL_LAYERS: every layer 1, head `head_multiplier`.
        TOP5_LAYERS: first three convolutions frozen, the rest 1, head `head_multiplier`.
        HEAD_ONLY: everything frozen except the head.
        SCRATCH: every layer including the head at 1.
        """
        scenario = Scenario.parse(scenario)
        head = spec.head_name
        head_multiplier = schedule.pop("head_multiplier", DEFAULT_HEAD_MULTIPLIER)

        if scenario == Scenario.ALL_LAYERS:
            return cls(head_name=head, head_multiplier=head_multiplier, **schedule)
        if scenario == Scenario.TOP5_LAYERS:
            frozen = spec.conv_layer_names()[:FROZEN_CONV_LAYERS]
            return cls(multipliers={name: 0.0 for name in frozen}, head_name=head,
                       head_multiplier=head_multiplier, **schedule)
        if scenario == Scenario.HEAD_ONLY:
            return cls(default_multiplier=0.0, head_name=head,
                       head_multiplier=head_multiplier, **schedule)
        return cls(head_name=head, head_multiplier=1.0, **schedule)


@dataclass
class TrainState:
    """A network under training; single writer."""

    network: Network
    iteration: int = 0
    rng_seed: int = 0


def sgd_step(state: TrainState, grads: Params, policy: FineTunePolicy) -> TrainState:
    """
    Apply one SGD update in place and advance the iteration counter.

    param <- param - lr(iteration) * multiplier(layer) * grad. Layers with
    multiplier 0 are skipped entirely, so their parameters stay bit-identical.

    Raises:
        ConfigError: On a negative multiplier
        ShapeError: If a gradient does not match its parameter
    """
    lr = policy.learning_rate(state.iteration)
    params = state.network.parameters()

    for layer_name, layer_grads in grads.items():
        multiplier = policy.multiplier(layer_name)
        if multiplier == 0.0:
            continue
        step = lr * multiplier
        for key, grad in layer_grads.items():
            target = params[layer_name][key]
            if grad.shape != target.shape:
                raise ShapeError(layer_name, target.shape, grad.shape)
            target[...] = (target.astype(np.float64) - step * grad).astype(target.dtype)

    state.iteration += 1
    return state
