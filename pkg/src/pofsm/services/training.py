"""
Training: flow network on the spatial loss, classifier pretraining and
fine-tuning under transfer scenarios.

Every run is a single-writer SGD loop driven by one seeded generator (batch
order and mirror flips), so a fixed seed reproduces the parameter trajectory
bit for bit.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from scipy import ndimage

from ..engine import (
    FineTunePolicy,
    Network,
    NetworkSpec,
    Scenario,
    TrainState,
    replace_head,
    sgd_step,
)
from ..engine.layers import softmax
from ..errors import ConfigError, DataError
from ..utils.constants import (
    DEFAULT_BASE_LR,
    DEFAULT_HEAD_MULTIPLIER,
    DEFAULT_LR_GAMMA,
    DEFAULT_LR_STEP,
    LOG_EPS,
)
from ..utils.image_io import load_flow, read_image
from ..utils.manifest import DatasetManifest
from .domain_map import POFSM_SUFFIX, PofSmImage, resize_image
from .flow_codec import FlowCodebook, FlowField, collect_flow_samples, encode_flow, kmeans_fit
from .spatial_loss import LossConfig, LossKind, spatial_loss, spatial_loss_grad_logits

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """SGD run settings."""

    iterations: int = 1000
    batch_size: int = 16
    base_lr: float = DEFAULT_BASE_LR
    lr_step: int = DEFAULT_LR_STEP
    lr_gamma: float = DEFAULT_LR_GAMMA
    head_multiplier: float = DEFAULT_HEAD_MULTIPLIER
    seed: int = 0
    mirror: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def schedule(self) -> dict:
        return {
            "base_lr": self.base_lr,
            "lr_step_iters": self.lr_step,
            "lr_gamma": self.lr_gamma,
            "head_multiplier": self.head_multiplier,
        }


@dataclass
class TrainingLog:
    """Per-iteration loss; `nll` holds the unfiltered loss of the same pass."""

    iterations: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    nll: List[float] = field(default_factory=list)

    def record(self, iteration: int, loss: float, nll: float) -> None:
        self.iterations.append(iteration)
        self.losses.append(loss)
        self.nll.append(nll)

    def __len__(self) -> int:
        return len(self.losses)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"iteration": self.iterations, "loss": self.losses, "nll": self.nll})

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def window_mean(self, fraction: float = 0.1, last: bool = False) -> float:
        """Mean loss over the first (or last) `fraction` of iterations."""
        if not self.losses:
            return float("nan")
        count = max(1, int(len(self.losses) * fraction))
        values = self.losses[-count:] if last else self.losses[:count]
        return float(np.mean(values))


def batch_indices(n: int, batch_size: int, iterations: int,
                  rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Batches drawn from successive seeded permutations of range(n)."""
    if n == 0:
        raise DataError("Training set is empty")
    order = np.empty(0, dtype=np.int64)
    for _ in range(iterations):
        while len(order) < batch_size:
            order = np.concatenate([order, rng.permutation(n)])
        yield order[:batch_size]
        order = order[batch_size:]


def mirror_batch(x: np.ndarray, flips: np.ndarray, domain: str) -> np.ndarray:
    """Mirror selected samples; in the POF-SM domain channel 0 becomes 1 - v."""
    if not flips.any():
        return x
    x = x.copy()
    x[flips] = x[flips, :, ::-1]
    if domain == "pofsm":
        x[flips, ..., 0] = 1.0 - x[flips, ..., 0]
    return x


# -- data loading -------------------------------------------------------------


def _load_input(path: Path, input_dims) -> Tuple[np.ndarray, str]:
    rows, cols, channels = input_dims
    if path.suffix == POFSM_SUFFIX:
        data, domain = PofSmImage.load(path).channels, "pofsm"
    else:
        data, domain = read_image(path), "rgb"
    if data.shape[2] != channels:
        raise DataError(f"{path} has {data.shape[2]} channels, network expects {channels}")
    return resize_image(data, rows, cols), domain


def load_inputs(manifest: DatasetManifest, input_dims, threads: int = 1) -> Tuple[np.ndarray, str]:
    """
    Load every manifest row as a network input.

    `.pofsm` rows are POF-SM images, anything else a raw RGB image.

    Returns:
        (inputs (N, rows, cols, channels), domain 'pofsm' or 'rgb')

    Raises:
        DataError: If rows mix domains
    """
    paths = manifest.resolved_paths()
    if not paths:
        raise DataError("Manifest split is empty")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            loaded = list(executor.map(lambda p: _load_input(p, input_dims), paths))
    else:
        loaded = [_load_input(p, input_dims) for p in paths]
    domains = {domain for _, domain in loaded}
    if len(domains) != 1:
        raise DataError("Manifest mixes POF-SM and raw images")
    return np.stack([data for data, _ in loaded]), domains.pop()


def _resize_flow(uv: np.ndarray, rows: int, cols: int) -> np.ndarray:
    if uv.shape[:2] == (rows, cols):
        return uv
    fy, fx = rows / uv.shape[0], cols / uv.shape[1]
    resized = ndimage.zoom(uv, (fy, fx, 1), order=0, grid_mode=False)[:rows, :cols]
    return resized * np.array([fx, fy])


def _training_flows(manifest: DatasetManifest) -> List[Tuple[Path, Path]]:
    train = manifest.split("train")
    pairs = list(zip(train.resolved_paths(), train.flow_paths()))
    missing = [str(image) for image, flow in pairs if flow is None]
    if missing:
        raise DataError(f"Manifest rows lack ground-truth flow (first: {missing[0]})")
    if not pairs:
        raise DataError("Manifest has no training rows")
    return pairs


def fit_codebook(manifest: DatasetManifest, num_clusters: int, seed: int = 0,
                 max_iters: int = 100, n_init: int = 10,
                 samples_per_image: Optional[int] = None) -> FlowCodebook:
    """k-means codebook over the ground-truth flow of the training split."""
    flows = [FlowField(load_flow(flow)) for _, flow in _training_flows(manifest)]
    samples = collect_flow_samples(flows, samples_per_image, seed=seed)
    return kmeans_fit(samples, num_clusters, max_iters=max_iters, seed=seed, n_init=n_init)


def load_flow_targets(manifest: DatasetManifest, codebook: FlowCodebook,
                      input_dims) -> Tuple[np.ndarray, np.ndarray]:
    """
    Training images and their per-pixel cluster labels.

    Returns:
        (images (N, rows, cols, 3), labels (N, rows, cols))
    """
    rows, cols, _ = input_dims
    images, labels = [], []
    for image_path, flow_path in _training_flows(manifest):
        images.append(resize_image(read_image(image_path), rows, cols))
        flow = FlowField(_resize_flow(load_flow(flow_path), rows, cols))
        labels.append(encode_flow(flow, codebook).labels)
    return np.stack(images), np.stack(labels)


# -- training loops -----------------------------------------------------------


class Trainer:
    """Runs SGD loops and reports progress on a rich console."""

    def __init__(self, config: TrainConfig, console: Console = None):
        self.config = config
        self.console = console or Console()

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TextColumn("{task.fields[loss]}"),
            console=self.console,
            transient=True,
        )

    def fit_flow(self, network: Network, images: np.ndarray, labels: np.ndarray,
                 kind: Union[LossKind, str] = LossKind.V2,
                 loss_config: Optional[LossConfig] = None) -> TrainingLog:
        """
        Train a flow network on per-pixel cluster labels.

        The SGD objective and the logged loss are both the spatial loss summed
        over the pixels of each image and averaged over the batch.
        """
        if network.spec.mode != "flow":
            raise ConfigError("fit_flow needs a flow network")
        kind = LossKind.parse(kind)
        loss_config = loss_config or LossConfig()
        if labels.shape[1:] != network.spec.output_dims[:2]:
            raise DataError(
                f"Label maps {labels.shape[1:]} do not match flow output {network.spec.output_dims[:2]}"
            )
        if labels.size and labels.max() >= network.spec.num_classes:
            raise ConfigError(
                f"Labels reach cluster {labels.max()}, network predicts {network.spec.num_classes}"
            )

        cfg = self.config
        policy = FineTunePolicy.for_scenario(Scenario.SCRATCH, network.spec, **cfg.schedule())
        state = TrainState(network, rng_seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        log = TrainingLog()
        logger.info(f"Training flow network: {cfg.iterations} iterations, loss {kind.value}")

        with self._progress() as progress:
            task = progress.add_task("Training flow network...", total=cfg.iterations, loss="")
            for batch in batch_indices(len(images), cfg.batch_size, cfg.iterations, rng):
                x, y = images[batch], labels[batch]
                logits = network.forward_logits(x, keep_cache=True)
                probs = softmax(logits, axis=-1)
                value = spatial_loss(probs, y, kind, loss_config).value / len(batch)
                nll = spatial_loss(probs, y, LossKind.V1).value / len(batch)

                grad = spatial_loss_grad_logits(logits, y, kind, loss_config)
                grad /= len(batch)
                grads = network.backward(grad, from_logits=True)
                log.record(state.iteration, value, nll)
                sgd_step(state, grads, policy)

                logger.debug(f"flow iter {state.iteration}: loss {value:.6f}")
                progress.update(task, advance=1, loss=f"loss {value:.4f}")

        network.clear_cache()
        if len(log):
            logger.info(f"Flow training done: loss {log.losses[0]:.4f} -> {log.losses[-1]:.4f}")
        return log

    def fit_classifier(self, network: Network, inputs: np.ndarray, targets: np.ndarray,
                       policy: FineTunePolicy, domain: str = "pofsm",
                       description: str = "Training classifier...") -> TrainingLog:
        """
        Cross-entropy SGD on class indices; optional seeded mirror flips.

        The SGD objective is the cross-entropy summed over the batch, so each
        sample moves the parameters by base_lr times its own gradient. The
        logged loss is the batch mean.
        """
        if network.spec.mode != "classifier":
            raise ConfigError("fit_classifier needs a classifier network")
        num_classes = network.spec.num_classes
        if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
            raise DataError(f"Class index out of range for a {num_classes}-class head")

        cfg = self.config
        state = TrainState(network, rng_seed=cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        log = TrainingLog()
        logger.info(f"{description.rstrip('.')}: {cfg.iterations} iterations, {len(inputs)} samples")

        with self._progress() as progress:
            task = progress.add_task(description, total=cfg.iterations, loss="")
            for batch in batch_indices(len(inputs), cfg.batch_size, cfg.iterations, rng):
                x, y = inputs[batch], targets[batch]
                if cfg.mirror:
                    x = mirror_batch(x, rng.random(len(batch)) < 0.5, domain)
                logits = network.forward_logits(x, keep_cache=True)
                probs = softmax(logits, axis=-1)
                picked = probs[np.arange(len(y)), y]
                value = float(-np.mean(np.log(np.maximum(picked, LOG_EPS))))

                grad = probs.copy()
                grad[np.arange(len(y)), y] -= 1.0
                grads = network.backward(grad, from_logits=True)
                log.record(state.iteration, value, value)
                sgd_step(state, grads, policy)

                logger.debug(f"classifier iter {state.iteration}: loss {value:.6f}")
                progress.update(task, advance=1, loss=f"loss {value:.4f}")

        network.clear_cache()
        return log


def train_flownet(
    manifest: DatasetManifest,
    codebook: FlowCodebook,
    spec: NetworkSpec,
    loss: Union[LossKind, str] = LossKind.V2,
    loss_config: Optional[LossConfig] = None,
    train_config: Optional[TrainConfig] = None,
    init_seed: int = 0,
    console: Optional[Console] = None,
) -> Tuple[Network, TrainingLog]:
    """
    Train a flow network on the manifest's ground-truth flow.

    Raises:
        ConfigError: If the codebook and the network disagree on the cluster count
    """
    if spec.num_classes != codebook.num_clusters:
        raise ConfigError(
            f"Flow network predicts {spec.num_classes} clusters, codebook has {codebook.num_clusters}"
        )
    images, labels = load_flow_targets(manifest, codebook, spec.input_dims)
    network = Network(spec, seed=init_seed)
    log = Trainer(train_config or TrainConfig(), console).fit_flow(network, images, labels, loss, loss_config)
    return network, log


def pretrain_classifier(
    manifest: DatasetManifest,
    spec: NetworkSpec,
    train_config: Optional[TrainConfig] = None,
    init_seed: int = 0,
    threads: int = 1,
    console: Optional[Console] = None,
) -> Tuple[Network, List[str], TrainingLog]:
    """
    Supervised training from scratch on the manifest's train split.

    Returns:
        (network, class vocabulary, training log)
    """
    train = manifest.split("train")
    classes = train.classes
    if spec.num_classes != len(classes):
        spec = spec.with_num_classes(len(classes))
    inputs, domain = load_inputs(train, spec.input_dims, threads)
    network = Network(spec, seed=init_seed)
    config = train_config or TrainConfig()
    policy = FineTunePolicy.for_scenario(Scenario.SCRATCH, spec, **config.schedule())
    log = Trainer(config, console).fit_classifier(
        network, inputs, train.class_indices(classes), policy, domain, "Pretraining classifier..."
    )
    return network, classes, log


def finetune_classifier(
    network: Network,
    manifest: DatasetManifest,
    scenario: Union[Scenario, str],
    train_config: Optional[TrainConfig] = None,
    source_classes: Optional[Sequence[str]] = None,
    new_head: bool = False,
    head_seed: int = 0,
    threads: int = 1,
    console: Optional[Console] = None,
) -> Tuple[Network, List[str], TrainingLog]:
    """
    Transfer a trained classifier to the manifest's task.

    The head is replaced when the class count differs, when the target classes
    differ from `source_classes`, or when `new_head` is set. The input network
    is never modified.

    Returns:
        (fine-tuned network, class vocabulary, training log)
    """
    scenario = Scenario.parse(scenario)
    train = manifest.split("train")
    classes = train.classes
    replace = (
        new_head
        or network.spec.num_classes != len(classes)
        or (source_classes is not None and list(source_classes) != classes)
    )
    tuned = replace_head(network, len(classes), head_seed) if replace else network.copy()

    inputs, domain = load_inputs(train, tuned.spec.input_dims, threads)
    config = train_config or TrainConfig()
    policy = FineTunePolicy.for_scenario(scenario, tuned.spec, **config.schedule())
    log = Trainer(config, console).fit_classifier(
        tuned, inputs, train.class_indices(classes), policy, domain,
        f"{scenario.label}...",
    )
    return tuned, classes, log
