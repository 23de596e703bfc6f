"""
Dataset manifests: CSV with header path,label,group,split (optional flow column).

Paths in the CSV may be relative; they are resolved against the CSV's
directory on load and written relative to it on save.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from ..errors import DataError
from .constants import IMAGE_EXTENSIONS, MANIFEST_COLUMNS, SPLITS

logger = logging.getLogger(__name__)

FLOW_COLUMN = "flow"


class DatasetManifest:
    """
    Rows of (image path, class label, group label, split).

    Invariants checked by `validate`: known splits, each class in exactly one
    group, no image in both splits, and (optionally) every path exists.
    """

    def __init__(self, frame: pd.DataFrame, root: Optional[Path] = None):
        missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
        if missing:
            raise DataError(f"Manifest is missing columns: {', '.join(missing)}")
        columns = list(MANIFEST_COLUMNS) + ([FLOW_COLUMN] if FLOW_COLUMN in frame.columns else [])
        self.frame = frame[columns].reset_index(drop=True)
        for column in MANIFEST_COLUMNS:
            self.frame[column] = self.frame[column].astype(str)
        self.root = Path(root) if root else Path.cwd()

    @classmethod
    def from_rows(cls, rows: Iterable[Dict], root: Optional[Path] = None) -> "DatasetManifest":
        rows = list(rows)
        if not rows:
            return cls(pd.DataFrame(columns=list(MANIFEST_COLUMNS)), root)
        return cls(pd.DataFrame(rows), root)

    @classmethod
    def load(cls, csv_path: Union[str, Path], check_paths: bool = True) -> "DatasetManifest":
        """
        Read and validate a manifest CSV.

        Raises:
            DataError: Missing file, bad columns, unknown split, missing images,
                       overlapping splits or a class listed under two groups
        """
        csv_path = Path(csv_path)
        if not csv_path.exists():
            raise DataError(f"Manifest not found: {csv_path}")
        try:
            frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataError(f"Cannot parse manifest {csv_path}: {e}")
        manifest = cls(frame, root=csv_path.parent)
        manifest.validate(check_paths=check_paths)
        logger.debug(f"Loaded manifest {csv_path} ({len(manifest)} rows)")
        return manifest

    def save(self, csv_path: Union[str, Path]) -> Path:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.frame.copy()
        frame["path"] = [self._relative(p, csv_path.parent) for p in self.resolved_paths()]
        if FLOW_COLUMN in frame.columns:
            frame[FLOW_COLUMN] = [
                self._relative(self.resolve(p), csv_path.parent) if p else ""
                for p in self.frame[FLOW_COLUMN]
            ]
        frame.to_csv(csv_path, index=False, lineterminator="\n")
        return csv_path

    @staticmethod
    def _relative(path: Path, base: Path) -> str:
        try:
            return path.resolve().relative_to(base.resolve()).as_posix()
        except ValueError:
            return str(path)

    def __len__(self) -> int:
        return len(self.frame)

    def resolve(self, path: str) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.root / path

    def resolved_paths(self) -> List[Path]:
        return [self.resolve(p) for p in self.frame["path"]]

    def flow_paths(self) -> List[Optional[Path]]:
        if FLOW_COLUMN not in self.frame.columns:
            return [None] * len(self)
        return [self.resolve(p) if p else None for p in self.frame[FLOW_COLUMN]]

    @property
    def labels(self) -> List[str]:
        return list(self.frame["label"])

    @property
    def classes(self) -> List[str]:
        """Sorted class vocabulary."""
        return sorted(self.frame["label"].unique())

    @property
    def groups(self) -> Dict[str, str]:
        """Class label -> group label."""
        pairs = self.frame[["label", "group"]].drop_duplicates()
        return dict(zip(pairs["label"], pairs["group"]))

    def split(self, name: str) -> "DatasetManifest":
        if name not in SPLITS:
            raise DataError(f"Unknown split '{name}' (expected one of {SPLITS})")
        return DatasetManifest(self.frame[self.frame["split"] == name], self.root)

    def class_indices(self, classes: Optional[List[str]] = None) -> np.ndarray:
        """
        Integer label of every row against `classes` (default: own vocabulary).

        Raises:
            DataError: If a row's class is not in the vocabulary
        """
        classes = classes or self.classes
        lookup = {name: index for index, name in enumerate(classes)}
        unknown = sorted(set(self.labels) - set(lookup))
        if unknown:
            raise DataError(f"Classes not in the training vocabulary: {', '.join(unknown)}")
        return np.array([lookup[label] for label in self.labels], dtype=np.int64)

    def validate(self, check_paths: bool = True) -> None:
        bad_splits = sorted(set(self.frame["split"]) - set(SPLITS))
        if bad_splits:
            raise DataError(f"Unknown split values: {', '.join(bad_splits)}")

        group_counts = self.frame.groupby("label")["group"].nunique()
        conflicted = sorted(group_counts[group_counts > 1].index)
        if conflicted:
            raise DataError(f"Classes assigned to more than one group: {', '.join(conflicted)}")

        paths = [str(p) for p in self.resolved_paths()]
        splits_per_path = pd.Series(list(self.frame["split"]), index=paths).groupby(level=0).nunique()
        shared = sorted(splits_per_path[splits_per_path > 1].index)
        if shared:
            raise DataError(f"Images present in both splits: {', '.join(shared[:5])}")

        if check_paths:
            missing = [p for p in paths if not Path(p).exists()]
            if missing:
                raise DataError(f"{len(missing)} manifest paths do not exist (first: {missing[0]})")


def ingest_frames(root: Union[str, Path], test_fraction: float = 0.3, seed: int = 0,
                  frame_step: int = 1) -> DatasetManifest:
    """
    Build a manifest from a <root>/<group>/<class>/<clip>/<frame> tree.

    Clips are split per class, never frames, so frames of one clip stay on one
    side. Every `frame_step`-th frame (sorted by name) is kept.

    Raises:
        DataError: If the tree holds no frames
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Frame root is not a directory: {root}")
    if not 0.0 <= test_fraction < 1.0:
        raise DataError(f"test_fraction must be in [0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    rows = []
    for group_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for class_dir in sorted(p for p in group_dir.iterdir() if p.is_dir()):
            clips = sorted(p for p in class_dir.iterdir() if p.is_dir())
            n_test = int(round(test_fraction * len(clips))) if len(clips) > 1 else 0
            test_clips = {clips[i] for i in rng.permutation(len(clips))[:n_test]}
            for clip in clips:
                frames = sorted(p for p in clip.iterdir()
                                if p.suffix.lower() in IMAGE_EXTENSIONS)[::frame_step]
                split = "test" if clip in test_clips else "train"
                rows.extend(
                    {"path": frame.relative_to(root).as_posix(), "label": class_dir.name,
                     "group": group_dir.name, "split": split}
                    for frame in frames
                )

    if not rows:
        raise DataError(f"No frames found under {root}")
    logger.info(f"Ingested {len(rows)} frames from {root}")
    return DatasetManifest.from_rows(rows, root=root)
