"""
Architecture descriptions for the network engine.

A NetworkSpec is a pure description (no parameters): an input shape, an
ordered list of LayerSpec entries and a class count. Shape tracing, parameter
counting and the architecture digest used by the weights file all work on the
spec alone, so the full-size preset can be inspected without allocating it.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from ..errors import ConfigError


class LayerKind(str, Enum):
    """Layer types supported by the engine."""

    CONV = "CONV"
    LRN = "LRN"
    MAXPOOL = "MAXPOOL"
    FC = "FC"
    RELU = "RELU"
    SOFTMAX = "SOFTMAX"
    SPATIAL_SOFTMAX = "SPATIAL_SOFTMAX"


PARAMETRIC_KINDS = frozenset({LayerKind.CONV, LayerKind.FC})
TERMINAL_KINDS = frozenset({LayerKind.SOFTMAX, LayerKind.SPATIAL_SOFTMAX})

Dims = Tuple[int, ...]


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a network.

    `kernels`/`size`/`stride`/`padding` apply to CONV (and size/stride to
    MAXPOOL), `neurons` to FC, the `lrn_*` fields to LRN. `init_std` is the
    standard deviation of the seeded Gaussian weight init; it is not part of
    the architecture digest.
    """

    kind: LayerKind
    name: str = ""
    kernels: int = 0
    size: int = 1
    stride: int = 1
    padding: int = 0
    neurons: int = 0
    lrn_size: int = 5
    lrn_alpha: float = 1e-4
    lrn_beta: float = 0.75
    lrn_bias: float = 2.0
    init_std: float = 0.01

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", LayerKind(self.kind))
        except ValueError:
            raise ConfigError(f"Unknown layer kind: {self.kind!r}")

        label = self.name or self.kind.value
        if self.stride < 1:
            raise ConfigError(f"Layer '{label}': stride must be >= 1 (got {self.stride})")
        if self.size < 1:
            raise ConfigError(f"Layer '{label}': size must be >= 1 (got {self.size})")
        if self.padding < 0:
            raise ConfigError(f"Layer '{label}': padding must be >= 0 (got {self.padding})")
        if self.kind == LayerKind.CONV and self.kernels < 1:
            raise ConfigError(f"Layer '{label}': CONV needs at least one kernel")
        if self.kind == LayerKind.FC and self.neurons < 1:
            raise ConfigError(f"Layer '{label}': FC needs at least one neuron")
        if self.kind == LayerKind.LRN and (self.lrn_size < 1 or self.lrn_size % 2 == 0):
            raise ConfigError(f"Layer '{label}': LRN depth window must be odd and >= 1")
        if self.init_std < 0:
            raise ConfigError(f"Layer '{label}': init_std must be >= 0")

    @property
    def is_parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS

    def output_dims(self, dims: Dims) -> Dims:
        """
        Compute this layer's output extents (without batch axis).

        Raises:
            ConfigError: If the input is unsuitable or an extent becomes non-positive
        """
        if self.kind in (LayerKind.CONV, LayerKind.MAXPOOL):
            if len(dims) != 3:
                raise ConfigError(
                    f"Layer '{self.name}': expects (rows, cols, channels) input, got {dims}"
                )
            rows, cols, channels = dims
            pad = self.padding if self.kind == LayerKind.CONV else 0
            out_rows = (rows + 2 * pad - self.size) // self.stride + 1
            out_cols = (cols + 2 * pad - self.size) // self.stride + 1
            if rows + 2 * pad < self.size or cols + 2 * pad < self.size:
                out_rows = out_cols = 0
            out_channels = self.kernels if self.kind == LayerKind.CONV else channels
            out = (out_rows, out_cols, out_channels)
        elif self.kind == LayerKind.FC:
            out = (self.neurons,)
        elif self.kind == LayerKind.SOFTMAX:
            if len(dims) != 1:
                raise ConfigError(f"Layer '{self.name}': SOFTMAX expects a flat input, got {dims}")
            out = tuple(dims)
        elif self.kind == LayerKind.SPATIAL_SOFTMAX:
            if len(dims) != 3:
                raise ConfigError(
                    f"Layer '{self.name}': SPATIAL_SOFTMAX expects (M, N, C) input, got {dims}"
                )
            out = tuple(dims)
        else:
            out = tuple(dims)

        if any(extent <= 0 for extent in out):
            raise ConfigError(f"Layer '{self.name}': non-positive output extents {out} from {dims}")
        return out

    def param_shapes(self, dims: Dims) -> Dict[str, Dims]:
        """Weight and bias shapes for an input of the given extents."""
        if self.kind == LayerKind.CONV:
            return {"W": (self.size, self.size, dims[-1], self.kernels), "b": (self.kernels,)}
        if self.kind == LayerKind.FC:
            fan_in = 1
            for extent in dims:
                fan_in *= extent
            return {"W": (fan_in, self.neurons), "b": (self.neurons,)}
        return {}

    def to_dict(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "LayerSpec":
        return cls(**data)


@dataclass(frozen=True)
class NetworkSpec:
    """
    Full network description.

    Exactly one terminal layer is allowed and it must be last: SOFTMAX for a
    classifier (head is the last FC) or SPATIAL_SOFTMAX for a flow network
    (head is the last CONV, whose kernel count is the cluster count).
    """

    input_dims: Tuple[int, int, int]
    layers: Tuple[LayerSpec, ...]
    num_classes: int
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        if len(self.input_dims) != 3 or any(d <= 0 for d in self.input_dims):
            raise ConfigError(f"input_dims must be three positive extents, got {self.input_dims}")
        if not self.layers:
            raise ConfigError("Network needs at least one layer")

        named = []
        for index, layer in enumerate(self.layers):
            if isinstance(layer, dict):
                layer = LayerSpec.from_dict(layer)
            if not layer.name:
                layer = replace(layer, name=f"{layer.kind.value.lower()}{index}")
            named.append(layer)
        object.__setattr__(self, "layers", tuple(named))

        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ConfigError(f"Layer names must be unique: {names}")

        terminals = [layer for layer in self.layers if layer.kind in TERMINAL_KINDS]
        if len(terminals) != 1 or self.layers[-1].kind not in TERMINAL_KINDS:
            raise ConfigError(
                "Network must end with exactly one SOFTMAX or SPATIAL_SOFTMAX layer"
            )

        trace = self.shape_trace()
        head = self.head
        if head is None:
            raise ConfigError("Network has no parametric layer to act as its head")
        out_dims = trace[-1][1]
        if self.mode == "classifier":
            if head.kind != LayerKind.FC or head.neurons != self.num_classes:
                raise ConfigError(
                    f"Classifier head '{head.name}' must be FC with {self.num_classes} neurons"
                )
        else:
            if head.kind != LayerKind.CONV or out_dims[-1] != self.num_classes:
                raise ConfigError(
                    f"Flow head '{head.name}' must be CONV with {self.num_classes} kernels"
                )

    @property
    def mode(self) -> str:
        """'classifier' or 'flow', by terminal layer kind."""
        return "flow" if self.layers[-1].kind == LayerKind.SPATIAL_SOFTMAX else "classifier"

    @property
    def head(self) -> Optional[LayerSpec]:
        """The last parametric layer."""
        for layer in reversed(self.layers):
            if layer.is_parametric:
                return layer
        return None

    @property
    def head_name(self) -> str:
        return self.head.name

    @property
    def output_dims(self) -> Dims:
        return self.shape_trace()[-1][1]

    def shape_trace(self) -> List[Tuple[str, Dims]]:
        """Per-layer (name, output extents) without batch axis."""
        dims: Dims = self.input_dims
        trace = []
        for layer in self.layers:
            dims = layer.output_dims(dims)
            trace.append((layer.name, dims))
        return trace

    def input_dims_by_layer(self) -> Dict[str, Dims]:
        dims: Dims = self.input_dims
        inputs = {}
        for layer in self.layers:
            inputs[layer.name] = dims
            dims = layer.output_dims(dims)
        return inputs

    def parameter_count(self) -> int:
        total = 0
        for name, dims in self.input_dims_by_layer().items():
            layer = self.layer(name)
            for shape in layer.param_shapes(dims).values():
                count = 1
                for extent in shape:
                    count *= extent
                total += count
        return total

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ConfigError(f"No layer named '{name}'")

    def conv_layer_names(self) -> List[str]:
        return [layer.name for layer in self.layers if layer.kind == LayerKind.CONV]

    def parametric_layer_names(self) -> List[str]:
        return [layer.name for layer in self.layers if layer.is_parametric]

    def with_num_classes(self, num_classes: int) -> "NetworkSpec":
        """Copy of this spec with the head resized to `num_classes` outputs."""
        if num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {num_classes}")
        head = self.head
        if self.mode == "classifier":
            new_head = replace(head, neurons=num_classes)
        else:
            new_head = replace(head, kernels=num_classes)
        layers = tuple(new_head if layer.name == head.name else layer for layer in self.layers)
        return NetworkSpec(self.input_dims, layers, num_classes, name=self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_dims": list(self.input_dims),
            "num_classes": self.num_classes,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return cls(
            input_dims=tuple(data["input_dims"]),
            layers=tuple(LayerSpec.from_dict(layer) for layer in data["layers"]),
            num_classes=int(data["num_classes"]),
            name=data.get("name", "custom"),
        )

    def digest(self) -> bytes:
        """SHA-256 over the architecture (init settings and spec name excluded)."""
        layers = []
        for layer in self.layers:
            entry = layer.to_dict()
            entry.pop("init_std")
            layers.append(entry)
        canonical = json.dumps(
            {"input_dims": list(self.input_dims), "num_classes": self.num_classes, "layers": layers},
            sort_keys=True,
        )
        return hashlib.sha256(canonical.encode("utf-8")).digest()
