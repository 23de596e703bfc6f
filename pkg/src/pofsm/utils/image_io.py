"""
Image, flow and POF-SM file I/O.

8-bit images (PPM/PGM/PNG/JPEG) go through Pillow and are exchanged as float
arrays in [0, 1]. The exact POF-SM format is a text header line
"POFSM v1 <rows> <cols>" followed by three channel planes of little-endian
float32 values.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..errors import CorruptFileError, DataError
from .constants import POFSM_HEADER

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_image(path: PathLike, grayscale: bool = False) -> np.ndarray:
    """
    Load an image as float64 in [0, 1].

    Returns:
        (rows, cols, 3) RGB array, or (rows, cols) when `grayscale`
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Image not found: {path}")
    try:
        with Image.open(path) as img:
            img = img.convert("L" if grayscale else "RGB")
            data = np.asarray(img, dtype=np.float64) / 255.0
    except OSError as e:
        raise CorruptFileError(f"Cannot read image {path}: {e}")
    return data


def to_uint8(values: np.ndarray) -> np.ndarray:
    """round(255 * v) with values clipped to [0, 1]."""
    return np.round(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path: PathLike, values: np.ndarray) -> Path:
    """
    Write a [0, 1] array as an 8-bit image; format follows the extension.

    2-D arrays become grayscale (PGM), (rows, cols, 3) arrays RGB (PPM).
    """
    path = Path(path)
    values = np.asarray(values)
    if not (values.ndim == 2 or (values.ndim == 3 and values.shape[2] == 3)):
        raise DataError(f"Cannot write array of shape {values.shape} as an image")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(values)).save(path)
    return path


def write_pofsm_planes(path: PathLike, planes: np.ndarray) -> Path:
    """Write (3, rows, cols) channel planes in the exact POF-SM format."""
    path = Path(path)
    planes = np.asarray(planes)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise DataError(f"POF-SM planes must have shape (3, rows, cols), got {planes.shape}")
    _, rows, cols = planes.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"{POFSM_HEADER} {rows} {cols}\n".encode("ascii"))
        f.write(np.ascontiguousarray(planes, dtype="<f4").tobytes())
    return path


def read_pofsm_planes(path: PathLike) -> np.ndarray:
    """
    Read the exact POF-SM format.

    Raises:
        CorruptFileError: On a bad header or a size mismatch
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"POF-SM file not found: {path}")
    data = path.read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise CorruptFileError(f"Missing POF-SM header line: {path}")
    header = data[:newline].decode("ascii", errors="replace").split()
    if len(header) != 4 or " ".join(header[:2]) != POFSM_HEADER:
        raise CorruptFileError(f"Not a POF-SM file: {path}")
    try:
        rows, cols = int(header[2]), int(header[3])
    except ValueError:
        raise CorruptFileError(f"Bad POF-SM dimensions in {path}")

    body = data[newline + 1:]
    expected = 3 * rows * cols * 4
    if len(body) != expected:
        raise CorruptFileError(f"POF-SM file {path} has {len(body)} data bytes, expected {expected}")
    return np.frombuffer(body, dtype="<f4").reshape(3, rows, cols).astype(np.float64)


def save_flow(path: PathLike, uv: np.ndarray) -> Path:
    """Store a (rows, cols, 2) flow array as .npy."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, np.asarray(uv, dtype=np.float64))
    return path


def load_flow(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Flow file not found: {path}")
    try:
        uv = np.load(path, allow_pickle=False)
    except ValueError as e:
        raise CorruptFileError(f"Cannot read flow file {path}: {e}")
    if uv.ndim != 3 or uv.shape[2] != 2:
        raise CorruptFileError(f"Flow file {path} has shape {uv.shape}, expected (rows, cols, 2)")
    return uv.astype(np.float64)
