"""
Evaluation: top-k accuracy, per-class average precision and MAP by group.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..engine import Network
from ..errors import DataError
from ..utils.manifest import DatasetManifest
from .training import load_inputs

logger = logging.getLogger(__name__)

EVAL_BATCH = 64


def ranked_classes(scores: np.ndarray) -> np.ndarray:
    """Class indices per row by descending score; ties keep the lower index first."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), axis=1, kind="stable")


def top_k_accuracy(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose true label is among the k highest-scoring classes."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("Cannot compute accuracy of an empty set")
    top = ranked_classes(scores)[:, :k]
    return float(np.mean(np.any(top == labels[:, None], axis=1)))


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """
    Precision averaged over the ranks of the positives.

    Items are ranked by descending score (ties by position). NaN when there
    are no positives.
    """
    positives = np.asarray(positives, dtype=bool)
    if not positives.any():
        return float("nan")
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = positives[order]
    ranks = np.flatnonzero(hits) + 1
    precisions = np.arange(1, len(ranks) + 1) / ranks
    return float(precisions.mean())


@dataclass
class EvalReport:
    classes: List[str]
    top1: float
    top5: float
    per_class_ap: Dict[str, float]
    group_map: Dict[str, float]
    map_overall: float
    confusion: np.ndarray
    count: int = 0
    groups: Dict[str, str] = field(default_factory=dict)

    def summary(self) -> Dict[str, float]:
        summary = {"top1": self.top1, "top5": self.top5, "map": self.map_overall, "count": self.count}
        summary.update({f"map_{group}": value for group, value in self.group_map.items()})
        return summary

    def to_csv(self, path: Union[str, Path]) -> Path:
        """`class,ap` rows, a blank line, then a `metric,value` summary block."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        ap = pd.DataFrame({"class": list(self.per_class_ap), "ap": list(self.per_class_ap.values())})
        summary = pd.DataFrame({"metric": list(self.summary()), "value": list(self.summary().values())})
        with open(path, "w", encoding="utf-8", newline="") as f:
            ap.to_csv(f, index=False, lineterminator="\n", float_format="%.6f")
            f.write("\n")
            summary.to_csv(f, index=False, lineterminator="\n", float_format="%.6f")
        return path

    def print(self, console: Optional[Console] = None) -> None:
        console = console or Console()
        table = Table(title="Per-class average precision")
        table.add_column("Class", style="cyan")
        table.add_column("Group")
        table.add_column("AP", justify="right")
        for name, ap in self.per_class_ap.items():
            table.add_row(name, self.groups.get(name, ""), "n/a" if math.isnan(ap) else f"{ap:.4f}")
        console.print(table)

        summary = Table(title=f"Evaluation ({self.count} images)")
        summary.add_column("Metric", style="bold")
        summary.add_column("Value", justify="right")
        summary.add_row("Top-1 accuracy", f"{self.top1:.4f}")
        summary.add_row("Top-5 accuracy", f"{self.top5:.4f}")
        for group, value in self.group_map.items():
            summary.add_row(f"MAP [{group}]", f"{value:.4f}")
        summary.add_row("MAP overall", f"{self.map_overall:.4f}", style="green")
        console.print(summary)


def _nanmean(values: Sequence[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else float("nan")


def evaluate_scores(scores: np.ndarray, labels: np.ndarray, classes: Sequence[str],
                    groups: Optional[Dict[str, str]] = None) -> EvalReport:
    """Build an EvalReport from a score matrix (N, K) and true class indices."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    classes = list(classes)
    groups = dict(groups or {})
    if scores.ndim != 2 or scores.shape != (len(labels), len(classes)):
        raise DataError(f"Score matrix {scores.shape} does not fit {len(labels)} x {len(classes)}")

    per_class = {}
    for index, name in enumerate(classes):
        per_class[name] = average_precision(scores[:, index], labels == index)
    absent = [name for name, ap in per_class.items() if math.isnan(ap)]
    if absent:
        logger.warning(f"No test positives for classes {', '.join(absent)}; excluded from MAP")

    group_map = {}
    for group in sorted(set(groups.get(name, "") for name in classes) - {""}):
        members = [per_class[name] for name in classes if groups.get(name) == group]
        group_map[group] = _nanmean(members)

    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(confusion, (labels, ranked_classes(scores)[:, 0]), 1)

    return EvalReport(
        classes=classes,
        top1=top_k_accuracy(scores, labels, 1),
        top5=top_k_accuracy(scores, labels, 5),
        per_class_ap=per_class,
        group_map=group_map,
        map_overall=_nanmean(list(per_class.values())),
        confusion=confusion,
        count=len(labels),
        groups=groups,
    )


def predict_scores(network: Network, inputs: np.ndarray, threads: int = 1) -> np.ndarray:
    """Class probabilities in chunks; chunks may run concurrently."""
    chunks = [inputs[start:start + EVAL_BATCH] for start in range(0, len(inputs), EVAL_BATCH)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            outputs = list(executor.map(network.forward, chunks))
    else:
        outputs = [network.forward(chunk) for chunk in chunks]
    return np.concatenate(outputs)


def evaluate(network: Network, manifest: DatasetManifest, classes: Sequence[str],
             groups: Optional[Dict[str, str]] = None, threads: int = 1) -> EvalReport:
    """
    Evaluate a classifier on the manifest's test split.

    Raises:
        DataError: If the test split is empty or has classes outside `classes`
    """
    test = manifest.split("test")
    if len(test) == 0:
        raise DataError("Test split is empty")
    labels = test.class_indices(list(classes))
    inputs, _ = load_inputs(test, network.spec.input_dims, threads)
    scores = predict_scores(network, inputs, threads)
    merged = dict(manifest.groups)
    merged.update(groups or {})
    report = evaluate_scores(scores, labels, classes, merged)
    logger.info(f"Evaluated {len(labels)} images: top-1 {report.top1:.4f}, MAP {report.map_overall:.4f}")
    return report
