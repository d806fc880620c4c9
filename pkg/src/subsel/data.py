"""Core data model: feature datasets, label partitions, selections, RNG."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDataset, MissingLabels


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """An immutable n x d feature matrix with optional dense integer labels.

    ``n_classes`` is the declared class count C. When omitted it is inferred
    as ``max(label) + 1``. ``label_names[c]`` maps the dense id back to the
    name seen at ingestion, if labels were strings.
    """

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[Sequence[str]] = None
    n_classes: Optional[int] = None
    label_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        if feats.ndim != 2:
            raise InvalidDataset([f"features must be 2-D, got shape {feats.shape}"])
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

        if self.labels is not None:
            labels = np.array(self.labels, copy=True)
            if labels.shape != (feats.shape[0],):
                raise InvalidDataset(
                    [f"labels must have length {feats.shape[0]}, got shape {labels.shape}"]
                )
            if labels.size and not np.issubdtype(labels.dtype, np.integer):
                raise InvalidDataset(["labels must be integers"])
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
            if self.n_classes is None:
                object.__setattr__(
                    self, "n_classes", int(labels.max()) + 1 if labels.size else 0
                )

        if self.ids is None:
            ids = tuple(str(i) for i in range(feats.shape[0]))
        else:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != feats.shape[0]:
                raise InvalidDataset(
                    [f"ids must have length {feats.shape[0]}, got {len(ids)}"]
                )
        object.__setattr__(self, "ids", ids)
        if self.label_names is not None:
            object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def subset(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureDataset(
            self.features[idx],
            None if self.labels is None else self.labels[idx],
            [self.ids[i] for i in idx],
            self.n_classes,
            self.label_names,
        )

    def equals(self, other: "FeatureDataset") -> bool:
        """Field-by-field equality, bitwise on features."""
        if self.features.shape != other.features.shape:
            return False
        if not np.array_equal(
            self.features.view(np.uint64), other.features.view(np.uint64)
        ):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return (
            tuple(self.ids) == tuple(other.ids)
            and self.n_classes == other.n_classes
            and self.label_names == other.label_names
        )


def validate_dataset(dataset: FeatureDataset) -> list[str]:
    """Return every invariant violation as a human-readable line.

    An empty list means the dataset is valid.
    """
    report = []
    bad_rows, bad_cols = np.nonzero(~np.isfinite(dataset.features))
    for r, c in zip(bad_rows, bad_cols):
        report.append(
            f"non-finite feature at row {r}, column {c}: {dataset.features[r, c]!r}"
        )

    seen = {}
    for i, ident in enumerate(dataset.ids):
        if ident in seen:
            report.append(f"duplicate id {ident!r} at rows {seen[ident]} and {i}")
        else:
            seen[ident] = i

    if dataset.labels is not None:
        labels = dataset.labels
        C = dataset.n_classes
        neg = np.nonzero(labels < 0)[0]
        for i in neg:
            report.append(f"negative label {labels[i]} at row {i}")
        over = np.nonzero(labels >= C)[0]
        for i in over:
            report.append(f"label {labels[i]} at row {i} exceeds declared class count {C}")
        present = set(labels.tolist())
        for c in range(C):
            if c not in present:
                report.append(f"class {c} has no members (labels must be dense 0..{C - 1})")
        if dataset.label_names is not None and len(dataset.label_names) != C:
            report.append(
                f"{len(dataset.label_names)} label names for {C} classes"
            )
    return report


def check_dataset(dataset: FeatureDataset) -> FeatureDataset:
    report = validate_dataset(dataset)
    if report:
        raise InvalidDataset(report)
    return dataset


@dataclass(frozen=True)
class ClassPartition:
    """Disjoint index sets, one per class, covering the ground set."""

    classes: tuple

    @property
    def k(self) -> int:
        return len(self.classes)

    def class_of(self) -> np.ndarray:
        n = sum(len(c) for c in self.classes)
        out = np.empty(n, dtype=np.int64)
        for c, members in enumerate(self.classes):
            out[list(members)] = c
        return out


def partition_by_label(dataset: FeatureDataset) -> ClassPartition:
    if dataset.labels is None:
        raise MissingLabels("dataset has no labels to partition by")
    C = dataset.n_classes
    classes = [[] for _ in range(C)]
    for i, lab in enumerate(dataset.labels.tolist()):
        if not 0 <= lab < C:
            raise InvalidDataset([f"label {lab} at row {i} outside 0..{C - 1}"])
        classes[lab].append(i)
    empty = [c for c, members in enumerate(classes) if not members]
    if empty:
        raise MissingLabels(f"classes {empty} have no members")
    return ClassPartition(tuple(tuple(m) for m in classes))


@dataclass
class Selection:
    order: list = field(default_factory=list)
    values: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    budget_k: int = 0
    empty_value: float = 0.0
    stats: object = None

    @property
    def value(self) -> float:
        return self.values[-1] if self.values else self.empty_value

    def __len__(self):
        return len(self.order)


# Stream tags so that independent consumers of one seed never share draws.
STREAM_SEEDING = 1
STREAM_RANDOM_ARM = 2
STREAM_SYNTH = 3
STREAM_EVAL_RANDOM = 4
STREAM_HOLDOUT = 5


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """A generator determined only by ``seed`` and the integer stream path."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, *map(int, stream)]))
