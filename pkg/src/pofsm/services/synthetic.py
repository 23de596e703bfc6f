"""
Synthetic still-image action dataset with ground-truth flow.

Each image shows one shape over a smooth noisy background. Moving shapes carry
a motion cue a single frame can reveal: brightness ramps up toward the
direction of motion and a fading trail lies behind. Oscillating shapes leave
ghosts on both sides of their swing. The ground-truth flow is the shape's
displacement on shape pixels and zero on the background.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table
from scipy import ndimage

from ..errors import ConfigError
from ..utils.constants import (
    MOTION_DIRECTIONS,
    MOTION_GROUPS,
    OSCILLATING_MOTIONS,
    SHAPE_KINDS,
    SOURCE_TASK,
    TARGET_TASK,
)
from ..utils.image_io import save_flow, write_image
from ..utils.manifest import DatasetManifest

logger = logging.getLogger(__name__)

TRAIL_STEPS = 3


@dataclass
class SyntheticSpec:
    """Layout of a synthetic dataset; generation is deterministic per seed."""

    image_size: int = 32
    shapes: Tuple[str, ...] = SOURCE_TASK["shapes"]
    motions: Tuple[str, ...] = SOURCE_TASK["motions"]
    samples_per_class: int = 100
    test_per_class: int = 30
    noise: float = 0.03
    speed: Tuple[float, float] = (1.5, 3.5)
    seed: int = 0
    groups: Dict[str, str] = field(default_factory=lambda: dict(MOTION_GROUPS))

    def __post_init__(self):
        self.shapes = tuple(self.shapes)
        self.motions = tuple(self.motions)
        if self.image_size < 16:
            raise ConfigError(f"image_size must be >= 16, got {self.image_size}")
        if not self.shapes or any(s not in SHAPE_KINDS for s in self.shapes):
            raise ConfigError(f"Shapes must be drawn from {SHAPE_KINDS}, got {self.shapes}")
        if not self.motions or len(set(self.motions)) != len(self.motions):
            raise ConfigError(f"Motion classes must be distinct and nonempty, got {self.motions}")
        unknown = [m for m in self.motions if m not in MOTION_DIRECTIONS]
        if unknown:
            raise ConfigError(f"Unknown motion classes: {unknown}")
        if self.samples_per_class < 0 or self.test_per_class < 0:
            raise ConfigError("Sample counts must be >= 0")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        low, high = self.speed
        if not 0 < low <= high:
            raise ConfigError(f"speed range must satisfy 0 < low <= high, got {self.speed}")

    @classmethod
    def for_task(cls, task: str, **kwargs) -> "SyntheticSpec":
        """
        'source' (pretraining task) or 'target' (fine-tuning task).

        `shapes` or `motions` in kwargs replace the task's own sets.
        """
        layouts = {"source": SOURCE_TASK, "target": TARGET_TASK}
        if task not in layouts:
            raise ConfigError(f"Unknown synthetic task '{task}' (source/target)")
        layout = {**layouts[task], **{k: kwargs.pop(k) for k in ("shapes", "motions") if k in kwargs}}
        return cls(**layout, **kwargs)


def shape_mask(kind: str, size: int, cx: float, cy: float, radius: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = np.abs(xs - cx), np.abs(ys - cy)
    if kind == "square":
        return (dx <= radius) & (dy <= radius)
    if kind == "disc":
        return dx ** 2 + dy ** 2 <= radius ** 2
    if kind == "cross":
        arm = radius / 3.0
        return ((dx <= radius) & (dy <= arm)) | ((dy <= radius) & (dx <= arm))
    if kind == "diamond":
        return dx + dy <= radius
    raise ConfigError(f"Unknown shape kind '{kind}'")


def render_sample(shape: str, motion: str, spec: SyntheticSpec,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw one image and its ground-truth flow.

    Returns:
        (image (size, size, 3) in [0, 1], flow (size, size, 2))
    """
    size = spec.image_size
    coarse = rng.normal(size=(size // 4, size // 4))
    background = 0.3 + 0.06 * ndimage.zoom(coarse, size / coarse.shape[0], order=1)[:size, :size]
    tint = rng.uniform(0.9, 1.1, size=3)
    image = np.clip(background[..., None] * tint, 0.0, 1.0)

    radius = rng.uniform(size * 0.12, size * 0.2)
    margin = radius + 2
    cx, cy = rng.uniform(margin, size - 1 - margin, size=2)
    colour = rng.uniform(0.65, 1.0, size=3)
    mask = shape_mask(shape, size, cx, cy, radius)

    du, dv = MOTION_DIRECTIONS[motion]
    speed = rng.uniform(*spec.speed) if (du, dv) != (0.0, 0.0) else 0.0
    flow = np.zeros((size, size, 2))

    if motion in OSCILLATING_MOTIONS:
        # flow is the velocity at the caught phase of the swing
        velocity = speed * np.cos(rng.uniform(0.0, 2.0 * np.pi))
        for step in range(TRAIL_STEPS, 0, -1):
            for sign in (-1.0, 1.0):
                ghost = shape_mask(shape, size, cx + sign * du * speed * step,
                                   cy + sign * dv * speed * step, radius)
                ghost &= ~mask
                alpha = 0.5 ** (step + 1)
                image[ghost] = (1 - alpha) * image[ghost] + alpha * colour
        image[mask] = colour * 0.85
        flow[mask] = (du * velocity, dv * velocity)
    elif speed > 0:
        for step in range(TRAIL_STEPS, 0, -1):
            trail = shape_mask(shape, size, cx - du * speed * step, cy - dv * speed * step, radius)
            trail &= ~mask
            alpha = 0.5 ** step
            image[trail] = (1 - alpha) * image[trail] + alpha * colour
        ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
        along = ((xs - cx) * du + (ys - cy) * dv) / radius
        ramp = 0.7 + 0.3 * np.clip((along + 1.0) / 2.0, 0.0, 1.0)
        image[mask] = colour * ramp[mask][:, None]
        flow[mask] = (du * speed, dv * speed)
    else:
        image[mask] = colour * 0.85

    if spec.noise > 0:
        image = image + rng.normal(0.0, spec.noise, size=image.shape)
    return np.clip(image, 0.0, 1.0), flow


class SyntheticGenerator:
    """Writes images, flows and a manifest for a SyntheticSpec."""

    def __init__(self, spec: SyntheticSpec, console: Console = None):
        self.spec = spec
        self.console = console or Console()

    def generate(self, out_dir: Union[str, Path]) -> DatasetManifest:
        """
        Generate the dataset under `out_dir`.

        Layout: images/<split>/<class>_<n>.ppm, flows/<split>/<class>_<n>.npy
        and manifest.csv with a flow column.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        spec = self.spec
        rng = np.random.default_rng(spec.seed)

        plan = [("train", spec.samples_per_class), ("test", spec.test_per_class)]
        total = sum(count for _, count in plan) * len(spec.motions)
        rows = []
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=self.console,
            transient=True,
        ) as progress:
            task = progress.add_task("Rendering synthetic images...", total=total)
            for split, count in plan:
                for motion in spec.motions:
                    for index in range(count):
                        shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
                        image, flow = render_sample(shape, motion, spec, rng)
                        stem = f"{motion}_{index:05d}"
                        image_path = write_image(out_dir / "images" / split / f"{stem}.ppm", image)
                        flow_path = save_flow(out_dir / "flows" / split / f"{stem}.npy", flow)
                        rows.append({
                            "path": image_path.relative_to(out_dir).as_posix(),
                            "label": motion,
                            "group": spec.groups.get(motion, motion),
                            "split": split,
                            "flow": flow_path.relative_to(out_dir).as_posix(),
                        })
                        progress.advance(task)

        manifest = DatasetManifest.from_rows(rows, root=out_dir)
        manifest.save(out_dir / "manifest.csv")
        logger.info(f"Generated {len(rows)} synthetic samples in {out_dir}")
        self._print_summary(manifest)
        return manifest

    def _print_summary(self, manifest: DatasetManifest) -> None:
        if len(manifest) == 0:
            return
        counts = manifest.frame.groupby(["label", "split"]).size().unstack(fill_value=0)
        table = Table(title="Synthetic dataset")
        table.add_column("Class", style="cyan")
        table.add_column("Group")
        for split in counts.columns:
            table.add_column(split, justify="right")
        groups = manifest.groups
        for label, row in counts.iterrows():
            table.add_row(label, groups[label], *[str(int(v)) for v in row])
        self.console.print(table)


def synth_generate(spec: SyntheticSpec, out_dir: Union[str, Path],
                   console: Optional[Console] = None) -> DatasetManifest:
    return SyntheticGenerator(spec, console).generate(out_dir)
