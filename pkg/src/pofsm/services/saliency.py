"""
Bottom-up static saliency by local self-resemblance, and Otsu thresholding.

Every pixel gets a feature matrix built from the local steering kernels (LSK)
of its p x p patch. Saliency is high where that feature matrix resembles few of
the feature matrices in the surrounding (2R+1) x (2R+1) window:

    s_i = 1 / sum_j exp(-(1 - rho_ij) / h)

with rho the cosine similarity of the (mean-centred) feature matrices. The map
is min-max normalised to [0, 1]; a map with no spread is all zeros.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from ..errors import ConfigError, DataError
from ..utils.constants import (
    DEFAULT_OTSU_BINS,
    DEFAULT_PATCH_SIZE,
    DEFAULT_RADIUS,
    DEFAULT_TEMPERATURE,
    LUMA_WEIGHTS,
)

logger = logging.getLogger(__name__)

# Isotropic regulariser added to the normalised structure tensor
LSK_REGULARIZER = 0.1
ORIENTATION_BINS = 8
SPREAD_EPS = 1e-10


class Descriptor(str, Enum):
    LSK = "LSK"
    GRADIENT_HIST = "GRADIENT_HIST"

    @classmethod
    def parse(cls, value) -> "Descriptor":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper().replace("-", "_"))
        except ValueError:
            raise ConfigError(f"Unknown saliency descriptor '{value}' (lsk/gradient_hist)")


@dataclass
class SaliencyParams:
    patch_size: int = DEFAULT_PATCH_SIZE
    radius: int = DEFAULT_RADIUS
    descriptor: Descriptor = Descriptor.LSK
    temperature: float = DEFAULT_TEMPERATURE
    bins: int = DEFAULT_OTSU_BINS

    def __post_init__(self):
        self.descriptor = Descriptor.parse(self.descriptor)
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ConfigError(f"patch_size must be odd and >= 3, got {self.patch_size}")
        if self.radius < 1:
            raise ConfigError(f"radius must be >= 1, got {self.radius}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.bins < 2:
            raise ConfigError(f"bins must be >= 2, got {self.bins}")


@dataclass
class SaliencyMap:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"SaliencyMap needs shape (rows, cols), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("SaliencyMap contains non-finite values")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise DataError("SaliencyMap values must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class Threshold:
    tau: float
    bins: int
    degenerate: bool = False


def to_luminance(image) -> np.ndarray:
    """Grayscale plane of an image; RGB uses ITU-R 601 weights."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 1:
        return image[..., 0]
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ np.asarray(LUMA_WEIGHTS)
    raise DataError(f"Expected a grayscale or RGB image, got shape {image.shape}")


def _offsets(patch_size: int) -> np.ndarray:
    half = patch_size // 2
    dy, dx = np.mgrid[-half:half + 1, -half:half + 1]
    return np.stack([dx.ravel(), dy.ravel()], axis=1).astype(np.float64)


def _patch_stack(per_pixel: np.ndarray, patch_size: int) -> np.ndarray:
    """(M, N, D) -> (M, N, p*p*D): concatenate the vectors of each p x p patch."""
    half = patch_size // 2
    padded = np.pad(per_pixel, ((half, half), (half, half), (0, 0)), mode="reflect")
    windows = sliding_window_view(padded, (patch_size, patch_size), axis=(0, 1))
    rows, cols = per_pixel.shape[:2]
    # windows: (M, N, D, p, p) -> (M, N, p, p, D)
    return np.moveaxis(windows, 2, -1).reshape(rows, cols, -1)


def lsk_features(gray: np.ndarray, patch_size: int) -> np.ndarray:
    """
    Local steering kernel feature matrices, flattened to (M, N, p**4).

    The structure tensor is averaged over p x p windows and normalised by its
    mean trace over the image, which makes the features invariant to
    a * I + b for a > 0.
    """
    gx = ndimage.sobel(gray, axis=1, mode="mirror")
    gy = ndimage.sobel(gray, axis=0, mode="mirror")
    jxx = ndimage.uniform_filter(gx * gx, size=patch_size, mode="mirror")
    jxy = ndimage.uniform_filter(gx * gy, size=patch_size, mode="mirror")
    jyy = ndimage.uniform_filter(gy * gy, size=patch_size, mode="mirror")

    scale = float(np.mean(jxx + jyy))
    if scale <= 0:
        scale = 1.0
    jxx = jxx / scale + LSK_REGULARIZER
    jxy = jxy / scale
    jyy = jyy / scale + LSK_REGULARIZER

    d = _offsets(patch_size)
    quad = (jxx[..., None] * d[:, 0] ** 2
            + 2.0 * jxy[..., None] * d[:, 0] * d[:, 1]
            + jyy[..., None] * d[:, 1] ** 2)
    kernels = np.exp(-0.5 * quad)
    kernels /= kernels.sum(axis=-1, keepdims=True)
    return _patch_stack(kernels, patch_size)


def gradient_hist_features(gray: np.ndarray, patch_size: int) -> np.ndarray:
    """Magnitude-weighted orientation histograms of each p x p patch."""
    gx = ndimage.sobel(gray, axis=1, mode="mirror")
    gy = ndimage.sobel(gray, axis=0, mode="mirror")
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((orientation / np.pi * ORIENTATION_BINS).astype(int), ORIENTATION_BINS - 1)
    hist = np.zeros(gray.shape + (ORIENTATION_BINS,))
    np.put_along_axis(hist, bins[..., None], magnitude[..., None], axis=-1)
    return _patch_stack(hist, patch_size)


def _unit_features(features: np.ndarray) -> np.ndarray:
    centred = features - features.mean(axis=-1, keepdims=True)
    norms = np.linalg.norm(centred, axis=-1, keepdims=True)
    return np.divide(centred, norms, out=np.zeros_like(centred), where=norms > 1e-12)


def self_resemblance(features: np.ndarray, radius: int, temperature: float) -> np.ndarray:
    """Unnormalised saliency 1 / sum_j exp(-(1 - rho_ij) / h) over the neighbourhood."""
    rows, cols = features.shape[:2]
    padded = np.pad(features, ((radius, radius), (radius, radius), (0, 0)), mode="reflect")
    total = np.zeros((rows, cols))
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            neighbour = padded[dy:dy + rows, dx:dx + cols]
            rho = np.einsum("ijk,ijk->ij", features, neighbour)
            total += np.exp(-(1.0 - rho) / temperature)
    return 1.0 / total


def saliency_map(image, params: SaliencyParams = None) -> SaliencyMap:
    """
    Self-resemblance saliency of a grayscale or RGB image.

    Raises:
        DataError: If the image is smaller than the patch
    """
    params = params or SaliencyParams()
    gray = to_luminance(image)
    if min(gray.shape) < params.patch_size:
        raise DataError(
            f"Image {gray.shape} is smaller than the {params.patch_size}x{params.patch_size} patch"
        )

    if params.descriptor == Descriptor.LSK:
        features = lsk_features(gray, params.patch_size)
    else:
        features = gradient_hist_features(gray, params.patch_size)
    raw = self_resemblance(_unit_features(features), params.radius, params.temperature)

    low, high = float(raw.min()), float(raw.max())
    if high - low < SPREAD_EPS:
        logger.debug("Saliency map has no spread; returning all zeros")
        return SaliencyMap(np.zeros_like(raw))
    return SaliencyMap(np.clip((raw - low) / (high - low), 0.0, 1.0))


def otsu_threshold(values: Union[SaliencyMap, np.ndarray], bins: int = DEFAULT_OTSU_BINS) -> Threshold:
    """
    Otsu's threshold over a `bins`-bin histogram spanning the value range.

    Cutting before bin k puts bins [0, k) in the lower class; tau is the centre
    of bin k for the k that maximises between-class variance (lowest k on
    ties). A constant input yields tau equal to that value, flagged degenerate.
    """
    values = values.values if isinstance(values, SaliencyMap) else np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("Otsu threshold needs at least one value")
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")

    low, high = float(values.min()), float(values.max())
    if low == high:
        logger.warning(f"Otsu threshold is degenerate: every value equals {low}")
        return Threshold(low, bins, degenerate=True)

    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    centres = (edges[:-1] + edges[1:]) / 2.0
    total = counts.sum()

    w0 = np.cumsum(counts)[:-1]
    w1 = total - w0
    sum0 = np.cumsum(counts * centres)[:-1]
    sum1 = float(np.sum(counts * centres)) - sum0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, sum0 / np.maximum(w0, 1), 0.0)
        mu1 = np.where(w1 > 0, sum1 / np.maximum(w1, 1), 0.0)
    between = (w0 / total) * (w1 / total) * (mu0 - mu1) ** 2

    cut = int(np.argmax(between)) + 1
    return Threshold(float(centres[cut]), bins)


def apply_threshold(values: Union[SaliencyMap, np.ndarray], tau: float) -> SaliencyMap:
    """Zero every value strictly below tau; the rest pass through unchanged."""
    if not np.isfinite(tau):
        raise ConfigError(f"Threshold must be finite, got {tau}")
    values = values.values if isinstance(values, SaliencyMap) else np.asarray(values, dtype=np.float64)
    return SaliencyMap(np.where(values < tau, 0.0, values))


def thresholded_saliency(image, params: SaliencyParams = None) -> SaliencyMap:
    """Saliency map with Otsu-selected sub-threshold values zeroed."""
    params = params or SaliencyParams()
    smap = saliency_map(image, params)
    return apply_threshold(smap, otsu_threshold(smap, params.bins).tau)
