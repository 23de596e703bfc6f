"""
Flow codec: k-means quantisation of flow vectors into motion clusters.

Flow fields are encoded as per-pixel cluster labels (the ground truth of the
spatial loss) and the flow network's per-pixel cluster probabilities are
decoded back into flow fields for the two POF channels.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ConfigError, CorruptFileError, DataError
from ..utils.constants import CODEBOOK_HEADER, DEFAULT_CLUSTERS, F_MAX_PERCENTILE

logger = logging.getLogger(__name__)


class DecodeMode(str, Enum):
    EXPECTED = "EXPECTED"
    ARGMAX = "ARGMAX"

    @classmethod
    def parse(cls, value) -> "DecodeMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"Unknown decode mode '{value}' (expected/argmax)")


@dataclass
class FlowField:
    """Per-pixel (u, v) displacement in pixels/frame; u right, v down."""

    uv: np.ndarray

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64)
        if self.uv.ndim != 3 or self.uv.shape[2] != 2 or min(self.uv.shape[:2]) < 1:
            raise DataError(f"FlowField needs shape (M, N, 2), got {self.uv.shape}")
        if not np.all(np.isfinite(self.uv)):
            raise DataError("FlowField contains non-finite values")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "FlowField":
        return cls(np.zeros((rows, cols, 2)))

    @property
    def rows(self) -> int:
        return self.uv.shape[0]

    @property
    def cols(self) -> int:
        return self.uv.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]


@dataclass
class FlowCodebook:
    """
    C flow centroids. Row order is the cluster index everywhere downstream.

    `f_max` is the flow magnitude mapped to the ends of the POF channel range.
    """

    centroids: np.ndarray
    f_max: float = 1.0

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64).reshape(-1, 2)
        if len(self.centroids) < 1:
            raise ConfigError("FlowCodebook needs at least one centroid")
        if not np.all(np.isfinite(self.centroids)):
            raise ConfigError("FlowCodebook centroids must be finite")
        if not (np.isfinite(self.f_max) and self.f_max > 0):
            raise ConfigError(f"f_max must be positive, got {self.f_max}")
        self.f_max = float(self.f_max)

    @property
    def num_clusters(self) -> int:
        return len(self.centroids)

    def save(self, path: Union[str, Path]) -> Path:
        """Write the text codebook: header, 'C f_max', then one 'u v' line per centroid."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [CODEBOOK_HEADER, f"{self.num_clusters} {self.f_max!r}"]
        lines += [f"{u!r} {v!r}" for u, v in self.centroids.tolist()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FlowCodebook":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Flow codebook not found: {path}")
        lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if not lines or lines[0] != CODEBOOK_HEADER:
            raise CorruptFileError(f"Not a flow codebook (missing '{CODEBOOK_HEADER}'): {path}")
        try:
            count_str, f_max_str = lines[1].split()
            count = int(count_str)
            rows = [tuple(float(x) for x in line.split()) for line in lines[2:]]
        except (IndexError, ValueError) as e:
            raise CorruptFileError(f"Malformed flow codebook {path}: {e}")
        if len(rows) != count or any(len(row) != 2 for row in rows):
            raise CorruptFileError(f"Flow codebook {path} declares {count} centroids, has {len(rows)}")
        return cls(np.array(rows), f_max=float(f_max_str))


@dataclass
class ClusterLabelMap:
    """Per-pixel cluster labels in [0, C)."""

    labels: np.ndarray
    num_clusters: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2:
            raise DataError(f"ClusterLabelMap needs shape (M, N), got {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_clusters):
            raise DataError(f"Cluster labels must lie in [0, {self.num_clusters})")


@dataclass
class SpatialProbMap:
    """M x N x C per-pixel cluster probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 3:
            raise DataError(f"SpatialProbMap needs shape (M, N, C), got {self.probs.shape}")
        if np.any(self.probs < 0) or not np.allclose(self.probs.sum(axis=-1), 1.0, atol=1e-6, rtol=0):
            raise DataError("SpatialProbMap pixels must be probability vectors")

    @property
    def num_clusters(self) -> int:
        return self.probs.shape[-1]

    @classmethod
    def one_hot(cls, labels: ClusterLabelMap) -> "SpatialProbMap":
        return cls(np.eye(labels.num_clusters)[labels.labels])


def _sse(samples: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    return float(np.sum((samples - centroids[assignment]) ** 2))


@dataclass
class FlowQuantizer:
    """
    Lloyd's k-means with seeded k-means++ init and restarts.

    Empty clusters are re-seeded at the sample farthest from its centroid
    (lowest sample index on ties). Final centroids are sorted by (u, then v).
    """

    num_clusters: int = DEFAULT_CLUSTERS
    max_iters: int = 100
    n_init: int = 10
    seed: int = 0
    sse_history_: List[float] = field(default_factory=list, init=False)
    n_iter_: int = field(default=0, init=False)

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ConfigError(f"Cluster count must be >= 1, got {self.num_clusters}")
        if self.max_iters < 1 or self.n_init < 1:
            raise ConfigError("max_iters and n_init must be >= 1")

    def _init_centroids(self, samples: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        chosen = [int(rng.integers(len(samples)))]
        closest = np.sum((samples - samples[chosen[0]]) ** 2, axis=1)
        for _ in range(1, self.num_clusters):
            total = closest.sum()
            index = int(rng.choice(len(samples), p=closest / total))
            chosen.append(index)
            closest = np.minimum(closest, np.sum((samples - samples[index]) ** 2, axis=1))
        return samples[chosen].copy()

    def _lloyd(self, samples: np.ndarray, centroids: np.ndarray):
        history = []
        assignment = None
        for iteration in range(1, self.max_iters + 1):
            distances = cdist(samples, centroids, "sqeuclidean")
            new_assignment = distances.argmin(axis=1)
            history.append(_sse(samples, centroids, new_assignment))
            if assignment is not None and np.array_equal(new_assignment, assignment):
                return centroids, assignment, history, iteration
            assignment = new_assignment

            residual = distances[np.arange(len(samples)), assignment]
            for cluster in range(self.num_clusters):
                members = assignment == cluster
                if members.any():
                    centroids[cluster] = samples[members].mean(axis=0)
                else:
                    farthest = int(np.argmax(residual))
                    logger.warning(f"k-means cluster {cluster} empty; re-seeding at sample {farthest}")
                    centroids[cluster] = samples[farthest]
                    assignment[farthest] = cluster
                    residual[farthest] = 0.0
        distances = cdist(samples, centroids, "sqeuclidean")
        assignment = distances.argmin(axis=1)
        history.append(_sse(samples, centroids, assignment))
        return centroids, assignment, history, self.max_iters

    def fit(self, samples) -> FlowCodebook:
        """
        Fit centroids to (u, v) samples.

        Raises:
            ConfigError: If there are fewer distinct samples than clusters
        """
        samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
        if len(samples) == 0:
            raise DataError("k-means needs at least one sample")
        distinct = len(np.unique(samples, axis=0))
        if self.num_clusters > distinct:
            raise ConfigError(
                f"Cannot fit {self.num_clusters} clusters to {distinct} distinct flow vectors"
            )

        rng = np.random.default_rng(self.seed)
        best = None
        for _ in range(self.n_init):
            centroids = self._init_centroids(samples, rng)
            centroids, assignment, history, iterations = self._lloyd(samples, centroids)
            if best is None or history[-1] < best[2][-1]:
                best = (centroids, assignment, history, iterations)

        centroids, _, history, iterations = best
        self.sse_history_ = history
        self.n_iter_ = iterations
        order = np.lexsort((centroids[:, 1], centroids[:, 0]))
        logger.info(
            f"Fitted {self.num_clusters} flow clusters on {len(samples)} vectors "
            f"(SSE {history[-1]:.4g}, {iterations} iterations)"
        )
        return FlowCodebook(centroids[order])


def kmeans_fit(
    samples,
    num_clusters: int = DEFAULT_CLUSTERS,
    max_iters: int = 100,
    seed: int = 0,
    n_init: int = 10,
    f_max: Optional[float] = None,
) -> FlowCodebook:
    """
    Quantise flow vectors into `num_clusters` motion clusters.

    Deterministic for a given (samples, seed). `f_max` defaults to the
    99th percentile of |component| over the samples.
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    codebook = FlowQuantizer(num_clusters, max_iters, n_init, seed).fit(samples)
    codebook.f_max = f_max if f_max is not None else estimate_f_max(samples)
    return codebook


def estimate_f_max(samples) -> float:
    """99th percentile of |u|, |v| over samples; 1.0 when all flow is zero."""
    magnitudes = np.abs(np.asarray(samples, dtype=np.float64)).reshape(-1)
    if magnitudes.size == 0:
        return 1.0
    value = float(np.percentile(magnitudes, F_MAX_PERCENTILE))
    return value if value > 0 else 1.0


def encode_flow(flow: FlowField, codebook: FlowCodebook) -> ClusterLabelMap:
    """Label each pixel with its nearest centroid; ties go to the lowest index."""
    diff = flow.uv[:, :, None, :] - codebook.centroids[None, None, :, :]
    distances = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return ClusterLabelMap(distances.argmin(axis=-1), codebook.num_clusters)


def decode_flow(
    probs: SpatialProbMap,
    codebook: FlowCodebook,
    mode: Union[DecodeMode, str] = DecodeMode.EXPECTED,
) -> FlowField:
    """
    Turn per-pixel cluster probabilities back into a flow field.

    EXPECTED: sum_r F[i, r] * centroid_r. ARGMAX: centroid of the most likely
    cluster (lowest index on ties).

    Raises:
        ConfigError: If the probability map and codebook disagree on C
    """
    mode = DecodeMode.parse(mode)
    if probs.num_clusters != codebook.num_clusters:
        raise ConfigError(
            f"Probability map has {probs.num_clusters} clusters, codebook has {codebook.num_clusters}"
        )
    if mode == DecodeMode.EXPECTED:
        return FlowField(probs.probs @ codebook.centroids)
    return FlowField(codebook.centroids[probs.probs.argmax(axis=-1)])


def normalize_flow_channel(flow: FlowField, f_max: float):
    """
    Map flow components into [0, 1] channel planes.

    channel = clamp((component + f_max) / (2 f_max), 0, 1); zero motion is 0.5.

    Returns:
        (horizontal plane, vertical plane)
    """
    if not f_max > 0:
        raise ConfigError(f"f_max must be positive, got {f_max}")
    scale = 2.0 * f_max
    horizontal = np.clip((flow.u + f_max) / scale, 0.0, 1.0)
    vertical = np.clip((flow.v + f_max) / scale, 0.0, 1.0)
    return horizontal, vertical


def collect_flow_samples(flows: Sequence[FlowField], max_per_field: Optional[int] = None,
                         seed: int = 0) -> np.ndarray:
    """Stack flow vectors from several fields, optionally subsampled per field."""
    rng = np.random.default_rng(seed)
    chunks = []
    for flow in flows:
        vectors = flow.uv.reshape(-1, 2)
        if max_per_field is not None and len(vectors) > max_per_field:
            vectors = vectors[np.sort(rng.choice(len(vectors), max_per_field, replace=False))]
        chunks.append(vectors)
    if not chunks:
        raise DataError("No flow fields to sample from")
    return np.concatenate(chunks)
