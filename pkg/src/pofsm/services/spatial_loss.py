"""
Spatial softmax losses over per-pixel cluster probabilities.

V1 sums the per-pixel negative log-likelihood of the true cluster. V2 is the
order-statistic-filtered variant: clusters are ranked per pixel by predicted
probability (ties to the lowest index) and the true cluster's term is weighted
by the weight of its rank, so with the default weights a pixel contributes
-(1/K) log F only when its true cluster is among the K most likely.

All functions accept the typed maps from `flow_codec` or plain arrays with any
leading shape, `probs[..., C]` against `labels[...]`, so batches work as-is.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from ..engine.layers import softmax
from ..errors import ConfigError, DataError
from ..utils.constants import DEFAULT_TOP_K, LOG_EPS
from .flow_codec import ClusterLabelMap, SpatialProbMap

logger = logging.getLogger(__name__)

ProbsLike = Union[SpatialProbMap, np.ndarray]
LabelsLike = Union[ClusterLabelMap, np.ndarray]


class LossKind(str, Enum):
    V1 = "V1"
    V2 = "V2"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"Unknown loss '{value}' (expected v1 or v2)")


@dataclass
class LossConfig:
    """
    Rank weights of the filtered loss.

    `weights[r]` applies to the r-th most likely cluster (0-based). When unset,
    the first `top_k` ranks get 1/top_k and the rest 0. Ranks past the end of
    an explicit list get 0.
    """

    top_k: int = DEFAULT_TOP_K
    weights: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.weights is not None:
            self.weights = tuple(float(w) for w in self.weights)
            if any(w < 0 or not np.isfinite(w) for w in self.weights):
                raise ConfigError("Loss weights must be finite and >= 0")

    def rank_weights(self, num_clusters: int) -> np.ndarray:
        """Weight per rank, length `num_clusters`."""
        weights = np.zeros(num_clusters)
        if self.weights is None:
            weights[:min(self.top_k, num_clusters)] = 1.0 / self.top_k
        else:
            given = np.asarray(self.weights[:num_clusters])
            weights[:len(given)] = given
        if not weights.any():
            logger.warning("All spatial loss weights are zero; the filtered loss is identically 0")
        return weights


@dataclass
class LossResult:
    value: float
    grad_probs: np.ndarray
    per_pixel: np.ndarray


def _arrays(probs: ProbsLike, labels: LabelsLike):
    probs = probs.probs if isinstance(probs, SpatialProbMap) else np.asarray(probs, dtype=np.float64)
    labels = labels.labels if isinstance(labels, ClusterLabelMap) else np.asarray(labels)
    if probs.shape[:-1] != labels.shape:
        raise DataError(
            f"Probability map {probs.shape[:-1]} and label map {labels.shape} differ in size"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        labels = labels.astype(np.int64)
    num_clusters = probs.shape[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= num_clusters):
        raise DataError(f"Cluster label out of range [0, {num_clusters})")
    return probs, labels


def _true_probability(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]


def label_ranks(probs: ProbsLike, labels: LabelsLike) -> np.ndarray:
    """0-based rank of each pixel's true cluster in descending probability order."""
    probs, labels = _arrays(probs, labels)
    true_p = _true_probability(probs, labels)[..., None]
    index = np.arange(probs.shape[-1])
    above = probs > true_p
    tied_before = (probs == true_p) & (index < labels[..., None])
    return (above | tied_before).sum(axis=-1)


def _weighted_nll(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> LossResult:
    true_p = np.maximum(_true_probability(probs, labels), LOG_EPS)
    per_pixel = -weights * np.log(true_p)
    grad = np.zeros_like(probs)
    np.put_along_axis(grad, labels[..., None], (-weights / true_p)[..., None], axis=-1)
    return LossResult(float(per_pixel.sum()), grad, per_pixel)


def spatial_loss_v1(probs: ProbsLike, labels: LabelsLike) -> LossResult:
    """
    L = -sum_i log F[i, Y_i], with F clamped below at 1e-12.

    Raises:
        DataError: On a size mismatch or a label >= C
    """
    probs, labels = _arrays(probs, labels)
    return _weighted_nll(probs, labels, np.ones(labels.shape))


def spatial_loss_v2(probs: ProbsLike, labels: LabelsLike,
                    config: Optional[LossConfig] = None) -> LossResult:
    """
    Order-statistic-filtered loss: -sum_i w[rank_i] log F[i, Y_i].

    The ranking is treated as locally constant, so the gradient w.r.t. F is
    -w[rank_i] / F[i, Y_i] at the true cluster and zero elsewhere.
    """
    config = config or LossConfig()
    probs, labels = _arrays(probs, labels)
    weights = config.rank_weights(probs.shape[-1])[label_ranks(probs, labels)]
    return _weighted_nll(probs, labels, weights)


def spatial_loss(probs: ProbsLike, labels: LabelsLike, kind: Union[LossKind, str] = LossKind.V1,
                 config: Optional[LossConfig] = None) -> LossResult:
    if LossKind.parse(kind) == LossKind.V1:
        return spatial_loss_v1(probs, labels)
    return spatial_loss_v2(probs, labels, config)


def spatial_loss_grad_logits(
    logits: np.ndarray,
    labels: LabelsLike,
    which: Union[LossKind, str] = LossKind.V1,
    config: Optional[LossConfig] = None,
) -> np.ndarray:
    """
    Gradient of the selected loss through a per-pixel softmax.

    V1: softmax - onehot. V2: w[rank] * (softmax - onehot), rank taken from
    the softmax probabilities.
    """
    logits = np.asarray(logits, dtype=np.float64)
    probs = softmax(logits, axis=-1)
    probs, labels = _arrays(probs, labels)
    grad = probs.copy()
    np.put_along_axis(grad, labels[..., None], _true_probability(probs, labels)[..., None] - 1.0,
                      axis=-1)
    if LossKind.parse(which) == LossKind.V1:
        return grad
    config = config or LossConfig()
    weights = config.rank_weights(probs.shape[-1])[label_ranks(probs, labels)]
    return weights[..., None] * grad
