"""
Domain mapping: still image -> three-channel POF-SM image.

The flow network predicts per-pixel motion-cluster probabilities, which are
decoded through the codebook into horizontal and vertical flow channels; the
third channel is the Otsu-thresholded saliency map. Mirroring in the mapped
domain flips every channel and reflects the horizontal flow channel about 0.5.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from scipy import ndimage

from ..engine import Network
from ..errors import ConfigError, DataError
from ..utils.constants import CHANNEL_GRID
from ..utils.image_io import read_image, read_pofsm_planes, write_image, write_pofsm_planes
from ..utils.manifest import DatasetManifest
from .flow_codec import DecodeMode, FlowCodebook, SpatialProbMap, decode_flow, normalize_flow_channel
from .model_store import load_model
from .saliency import SaliencyParams, apply_threshold, otsu_threshold, saliency_map

logger = logging.getLogger(__name__)

CHANNEL_NAMES = ("pof_h", "pof_v", "sm")
POFSM_SUFFIX = ".pofsm"


def snap_to_grid(values: np.ndarray) -> np.ndarray:
    """Round to multiples of 2**-24; such values in [0, 1] are exact in float32."""
    return np.round(np.asarray(values, dtype=np.float64) * CHANNEL_GRID) / CHANNEL_GRID


@dataclass
class PofSmImage:
    """(rows, cols, 3) image with channels pof_h, pof_v, sm in [0, 1]."""

    channels: np.ndarray

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim != 3 or channels.shape[2] != 3 or min(channels.shape[:2]) < 1:
            raise DataError(f"PofSmImage needs shape (rows, cols, 3), got {channels.shape}")
        if not np.all(np.isfinite(channels)) or channels.min() < 0 or channels.max() > 1:
            raise DataError("PofSmImage channel values must lie in [0, 1]")
        self.channels = snap_to_grid(channels)

    @classmethod
    def from_planes(cls, pof_h, pof_v, sm) -> "PofSmImage":
        return cls(np.stack([pof_h, pof_v, sm], axis=-1))

    @property
    def rows(self) -> int:
        return self.channels.shape[0]

    @property
    def cols(self) -> int:
        return self.channels.shape[1]

    @property
    def pof_h(self) -> np.ndarray:
        return self.channels[..., 0]

    @property
    def pof_v(self) -> np.ndarray:
        return self.channels[..., 1]

    @property
    def sm(self) -> np.ndarray:
        return self.channels[..., 2]

    def save(self, path: Union[str, Path]) -> Path:
        """Exact form: header line plus channel-planar little-endian float32."""
        return write_pofsm_planes(path, np.moveaxis(self.channels, -1, 0))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PofSmImage":
        return cls(np.moveaxis(read_pofsm_planes(path), 0, -1))

    def save_ppm(self, path: Union[str, Path]) -> Path:
        """8-bit preview; lossy."""
        return write_image(path, self.channels)

    def save_channel_pgms(self, stem: Union[str, Path]) -> List[Path]:
        """One 8-bit PGM per channel: <stem>_pof_h.pgm, <stem>_pof_v.pgm, <stem>_sm.pgm."""
        stem = Path(stem)
        return [
            write_image(stem.with_name(f"{stem.name}_{name}.pgm"), self.channels[..., index])
            for index, name in enumerate(CHANNEL_NAMES)
        ]


@dataclass
class MappingConfig:
    """
    Everything `map_to_pofsm` needs; immutable once built.

    `f_max` defaults to the codebook's recorded value.
    """

    flow_net: Optional[Network]
    codebook: FlowCodebook
    decode_mode: DecodeMode = DecodeMode.EXPECTED
    saliency: SaliencyParams = field(default_factory=SaliencyParams)
    f_max: Optional[float] = None

    def __post_init__(self):
        self.decode_mode = DecodeMode.parse(self.decode_mode)
        if self.f_max is None:
            self.f_max = self.codebook.f_max
        if not self.f_max > 0:
            raise ConfigError(f"f_max must be positive, got {self.f_max}")
        if self.flow_net is not None:
            if self.flow_net.spec.mode != "flow":
                raise ConfigError("Mapping needs a flow network ending in SPATIAL_SOFTMAX")
            if self.flow_net.spec.num_classes != self.codebook.num_clusters:
                raise ConfigError(
                    f"Flow network predicts {self.flow_net.spec.num_classes} clusters, "
                    f"codebook has {self.codebook.num_clusters}"
                )

    @property
    def output_dims(self):
        return self.flow_net.spec.input_dims[:2] if self.flow_net else None

    @classmethod
    def from_files(
        cls,
        weights: Union[str, Path],
        codebook: Union[str, Path],
        decode_mode: Union[DecodeMode, str] = DecodeMode.EXPECTED,
        saliency: Optional[SaliencyParams] = None,
        f_max: Optional[float] = None,
    ) -> "MappingConfig":
        """
        Load the flow network (weights + sidecar) and the codebook file.

        Raises:
            ConfigError: If the weights are missing or do not match the codebook
        """
        network, _ = load_model(weights)
        return cls(network, FlowCodebook.load(codebook), DecodeMode.parse(decode_mode),
                   saliency or SaliencyParams(), f_max)


def resize_image(image: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Bilinear resampling of a 2-D plane or (rows, cols, channels) image."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape[:2] == (rows, cols):
        return image
    factors = (rows / image.shape[0], cols / image.shape[1]) + (1,) * (image.ndim - 2)
    resized = ndimage.zoom(image, factors, order=1, mode="nearest", grid_mode=False)
    return resized[:rows, :cols]


def _as_rgb(image: np.ndarray, channels: int) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    if image.shape[2] == channels:
        return image
    if image.shape[2] == 1:
        return np.repeat(image, channels, axis=2)
    raise DataError(f"Image has {image.shape[2]} channels, flow network expects {channels}")


def predict_flow(image: np.ndarray, flow_net: Optional[Network]) -> SpatialProbMap:
    """
    Per-pixel motion-cluster probabilities for a still image.

    The image is resized (bilinear) to the flow network's input dims.

    Raises:
        ConfigError: If no flow network weights are available
    """
    if flow_net is None:
        raise ConfigError("Flow network weights are missing; train or load a flow network first")
    rows, cols, channels = flow_net.spec.input_dims
    x = resize_image(_as_rgb(image, channels), rows, cols)
    return SpatialProbMap(flow_net.forward(x)[0])


def map_to_pofsm(image: np.ndarray, config: MappingConfig) -> PofSmImage:
    """
    Compose the POF-SM image of a still image.

    pof_h, pof_v = normalize_flow_channel(decode_flow(predict_flow(image)));
    sm = Otsu-thresholded saliency of the image, resampled to the flow dims.
    """
    probs = predict_flow(image, config.flow_net)
    flow = decode_flow(probs, config.codebook, config.decode_mode)
    pof_h, pof_v = normalize_flow_channel(flow, config.f_max)

    smap = saliency_map(image, config.saliency)
    sm = apply_threshold(smap, otsu_threshold(smap, config.saliency.bins).tau).values
    sm = np.clip(resize_image(sm, *pof_h.shape), 0.0, 1.0)
    return PofSmImage.from_planes(pof_h, pof_v, sm)


def mirror_augment(image: PofSmImage) -> PofSmImage:
    """Flip left-right; horizontal motion reverses, so pof_h becomes 1 - pof_h."""
    flipped = image.channels[:, ::-1].copy()
    flipped[..., 0] = 1.0 - flipped[..., 0]
    return PofSmImage(flipped)


def mirror_image(image: np.ndarray) -> np.ndarray:
    """Left-right flip of a raw image."""
    return np.asarray(image)[:, ::-1].copy()


def mirror_then_map(image: np.ndarray, config: MappingConfig) -> PofSmImage:
    """Mirror in the raw domain, then map."""
    return map_to_pofsm(mirror_image(image), config)


def map_batch(images: Sequence[np.ndarray], config: MappingConfig, threads: int = 1) -> List[PofSmImage]:
    """Map images concurrently; results keep the input order."""
    if threads <= 1 or len(images) <= 1:
        return [map_to_pofsm(image, config) for image in images]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda image: map_to_pofsm(image, config), images))


def map_manifest(manifest: DatasetManifest, config: MappingConfig, out_dir: Union[str, Path],
                 threads: int = 1, console: Optional[Console] = None) -> DatasetManifest:
    """
    Map every manifest image and write `<out_dir>/<relative path>.pofsm` files.

    Returns the POF-SM manifest (saved as `<out_dir>/manifest.csv`) with the
    same labels, groups and splits.
    """
    out_dir = Path(out_dir)
    console = console or Console()
    paths = manifest.resolved_paths()

    def target_for(path: Path) -> Path:
        try:
            relative = path.resolve().relative_to(manifest.root.resolve())
        except ValueError:
            relative = Path(path.name)
        return (out_dir / relative).with_suffix(POFSM_SUFFIX)

    def work(path: Path) -> Path:
        return map_to_pofsm(read_image(path), config).save(target_for(path))

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task("Mapping images to POF-SM...", total=len(paths))
        written = []
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                for result in executor.map(work, paths):
                    written.append(result)
                    progress.advance(task)
        else:
            for path in paths:
                written.append(work(path))
                progress.advance(task)

    frame = manifest.frame[["label", "group", "split"]].copy()
    frame.insert(0, "path", [p.relative_to(out_dir).as_posix() for p in written])
    mapped = DatasetManifest(frame, root=out_dir)
    mapped.save(out_dir / "manifest.csv")
    logger.info(f"Mapped {len(written)} images into {out_dir}")
    return mapped
