"""
Binary weights file.

Layout (all little-endian):

    b"PSMW"          magic
    u32              format version (1)
    32 bytes         SHA-256 architecture digest of the NetworkSpec
    u32              bytes per value (4 = float32, 8 = float64)
    u64              number of values
    values           W then b of every parametric layer, in declared order

Networks store float32 parameters by default, so files carry 32-bit floats
and a save/load round trip is bit-exact.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import CorruptFileError, IncompatibleArchitectureError
from ..utils.constants import WEIGHTS_MAGIC, WEIGHTS_VERSION
from .network import Network
from .specs import NetworkSpec

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<4sI32sIQ")


def _ordered_arrays(network: Network):
    for layer in network.layers:
        for key in ("W", "b"):
            if key in layer.params:
                yield layer.name, key, layer.params[key]


def save_weights(network: Network, path: Union[str, Path]) -> Path:
    """Write `network` parameters to `path`."""
    path = Path(path)
    width = network.param_dtype.itemsize
    dtype = np.dtype(f"<f{width}")
    arrays = [np.ascontiguousarray(value, dtype=dtype) for _, _, value in _ordered_arrays(network)]
    count = sum(a.size for a in arrays)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, network.spec.digest(), width, count))
        for array in arrays:
            f.write(array.tobytes())

    logger.debug(f"Wrote {count} parameters to {path}")
    return path


def load_weights(network: Network, path: Union[str, Path]) -> Network:
    """
    Load parameters from `path` into `network` in place.

    Raises:
        CorruptFileError: Bad magic, unknown version, truncated or oversized data
        IncompatibleArchitectureError: Digest differs from the network's spec
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise CorruptFileError(f"Weights file is truncated (header): {path}")

    magic, version, digest, width, count = _HEADER.unpack_from(data)
    if magic != WEIGHTS_MAGIC:
        raise CorruptFileError(f"Not a weights file (bad magic {magic!r}): {path}")
    if version != WEIGHTS_VERSION:
        raise CorruptFileError(f"Unsupported weights format version {version}: {path}")
    if width not in (4, 8):
        raise CorruptFileError(f"Unsupported value width {width}: {path}")
    if digest != network.spec.digest():
        raise IncompatibleArchitectureError(
            f"Weights in {path} were saved for a different architecture "
            f"(digest {digest.hex()[:12]} vs {network.spec.digest().hex()[:12]})"
        )

    expected = sum(value.size for _, _, value in _ordered_arrays(network))
    body = len(data) - _HEADER.size
    if count != expected or body != count * width:
        raise CorruptFileError(
            f"Weights file {path} holds {body // width} of {expected} expected values"
        )

    values = np.frombuffer(data, dtype=np.dtype(f"<f{width}"), offset=_HEADER.size, count=count)
    offset = 0
    for _, _, target in _ordered_arrays(network):
        chunk = values[offset:offset + target.size]
        target[...] = chunk.reshape(target.shape)
        offset += target.size

    logger.debug(f"Loaded {count} parameters from {path}")
    return network


def read_network(spec: NetworkSpec, path: Union[str, Path], param_dtype=np.float32) -> Network:
    """Build a network for `spec` and fill it from a weights file."""
    return load_weights(Network.zeros(spec, param_dtype=param_dtype), path)
