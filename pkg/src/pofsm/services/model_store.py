"""
Weights files with their JSON metadata sidecar.

Next to every `<weights>` file lives `<weights>.json` holding the network
architecture, class vocabulary, class groups and input domain, so a model can
be rebuilt from its path alone.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..engine import Network, NetworkSpec, load_weights, save_weights
from ..errors import ConfigError, CorruptFileError

logger = logging.getLogger(__name__)

SIDECAR_VERSION = 1


@dataclass
class ModelInfo:
    """Metadata stored beside a weights file."""

    spec: NetworkSpec
    classes: List[str] = field(default_factory=list)
    groups: Dict[str, str] = field(default_factory=dict)
    domain: str = "pofsm"
    extra: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": SIDECAR_VERSION,
            "spec": self.spec.to_dict(),
            "digest": self.spec.digest().hex(),
            "classes": list(self.classes),
            "groups": dict(self.groups),
            "domain": self.domain,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelInfo":
        spec = NetworkSpec.from_dict(data["spec"])
        if data.get("digest") and data["digest"] != spec.digest().hex():
            raise CorruptFileError("Model sidecar digest does not match its network spec")
        return cls(
            spec=spec,
            classes=list(data.get("classes", [])),
            groups=dict(data.get("groups", {})),
            domain=data.get("domain", "pofsm"),
            extra=dict(data.get("extra", {})),
        )


def sidecar_path(weights_path: Union[str, Path]) -> Path:
    weights_path = Path(weights_path)
    return weights_path.with_name(weights_path.name + ".json")


def save_model(network: Network, path: Union[str, Path], classes: Optional[List[str]] = None,
               groups: Optional[Dict[str, str]] = None, domain: str = "pofsm",
               extra: Optional[Dict] = None) -> Path:
    """Write weights and sidecar; returns the weights path."""
    path = Path(path)
    save_weights(network, path)
    info = ModelInfo(network.spec, list(classes or []), dict(groups or {}), domain, dict(extra or {}))
    sidecar_path(path).write_text(json.dumps(info.to_dict(), indent=2), encoding="utf-8")
    logger.info(f"Saved model to {path}")
    return path


def read_model_info(path: Union[str, Path]) -> ModelInfo:
    """
    Read the sidecar of a weights file.

    Raises:
        ConfigError: If the weights file or its sidecar is missing
        CorruptFileError: If the sidecar is not valid JSON metadata
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Weights file not found: {path}")
    meta = sidecar_path(path)
    if not meta.exists():
        raise ConfigError(f"Model metadata not found: {meta}")
    try:
        return ModelInfo.from_dict(json.loads(meta.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CorruptFileError(f"Malformed model metadata {meta}: {e}")


def load_model(path: Union[str, Path], param_dtype=np.float32) -> Tuple[Network, ModelInfo]:
    """Rebuild the network described by the sidecar and load its weights."""
    info = read_model_info(path)
    network = Network.zeros(info.spec, param_dtype=param_dtype)
    load_weights(network, path)
    return network, info
