"""Dataset ingestion, one-hot targets, min/max scaling and node partitioning.

Samples are stored as columns: features are ``P x J`` and targets ``Q x J``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import SeededRng

__all__ = [
    "DataError",
    "Dataset",
    "Partition",
    "Scaling",
    "one_hot",
    "load_csv",
    "write_csv",
    "partition_uniform",
    "fit_scaling",
    "normalize_fit_apply",
]


class DataError(ValueError):
    pass


def one_hot(labels, class_count: int) -> np.ndarray:
    """``Q x J`` indicator matrix for integer labels in ``[0, class_count)``."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DataError("labels must be one-dimensional")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise DataError(f"labels must lie in [0, {class_count}), got range [{labels.min()}, {labels.max()}]")
    t = np.zeros((class_count, labels.size))
    t[labels, np.arange(labels.size)] = 1.0
    return t


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or t.ndim != 2:
            raise DataError("features and targets must be 2-D (samples as columns)")
        if x.shape[1] != t.shape[1]:
            raise DataError(f"features have {x.shape[1]} samples but targets have {t.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise DataError(f"{self.name}: features contain NaN or Inf")
        if t.size and not (np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=0) == 1)):
            raise DataError(f"{self.name}: every target column must be one-hot")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", t)

    @classmethod
    def from_labels(cls, features, labels, class_count: int, name: str = "dataset") -> "Dataset":
        return cls(np.asarray(features, dtype=np.float64), one_hot(labels, class_count), name)

    @property
    def input_dim(self) -> int:
        return self.features.shape[0]

    @property
    def class_count(self) -> int:
        return self.targets.shape[0]

    @property
    def sample_count(self) -> int:
        return self.features.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=0)

    def subset(self, columns, name: str | None = None) -> "Dataset":
        columns = np.asarray(columns, dtype=np.intp)
        return Dataset(self.features[:, columns], self.targets[:, columns], name or self.name)


def load_csv(
    path: str | Path,
    label_column: int = -1,
    class_count: int | None = None,
    *,
    header: bool | str = False,
    name: str | None = None,
) -> Dataset:
    """Load a comma-separated file with one sample per row.

    ``label_column`` may be negative (counted from the end). Labels must be
    integers in ``[0, class_count)``; when ``class_count`` is omitted it is
    inferred as ``max label + 1``. ``header`` skips the first row; ``"auto"``
    skips it only when one of its fields is not a number.
    """
    path = Path(path)
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if lineno == 1 and (header == "auto" and not _numeric(record) or header is True):
                continue
            if not record or all(not f.strip() for f in record):
                continue
            if width is None:
                width = len(record)
                if width < 2:
                    raise DataError(f"{path}:{lineno}: need at least one feature and a label")
                col = label_column if label_column >= 0 else width + label_column
                if not 0 <= col < width:
                    raise DataError(f"{path}: label column {label_column} out of range for {width} fields")
            elif len(record) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(record)}")
            try:
                values = [float(f) for f in record]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field in {record!r}") from None
            label = values.pop(col)
            if label != int(label):
                raise DataError(f"{path}:{lineno}: label {label} is not an integer")
            if class_count is not None and not 0 <= label < class_count:
                raise DataError(f"{path}:{lineno}: label {int(label)} outside [0, {class_count})")
            if label < 0:
                raise DataError(f"{path}:{lineno}: negative label {int(label)}")
            if not all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            rows.append(values)
            labels.append(int(label))
    if not rows:
        raise DataError(f"{path}: no samples")
    q = class_count if class_count is not None else max(labels) + 1
    features = np.array(rows, dtype=np.float64).T
    return Dataset.from_labels(features, labels, q, name or path.stem)


def _numeric(record: list[str]) -> bool:
    try:
        for f in record:
            float(f)
    except ValueError:
        return False
    return True


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write features followed by the integer label, one sample per line."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for x, y in zip(dataset.features.T, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


@dataclass(frozen=True)
class Partition:
    shards: tuple[Dataset, ...]
    # column indices of the source dataset held by each shard
    indices: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.shards)

    @property
    def sizes(self) -> list[int]:
        return [s.sample_count for s in self.shards]


def partition_uniform(dataset: Dataset, node_count: int, seed: int = 0, *, shuffle: bool = True) -> Partition:
    """Split samples into ``node_count`` contiguous shards of size ``floor(J/M)`` or ``ceil(J/M)``.

    Samples are shuffled first with a seeded permutation unless ``shuffle`` is
    false.
    """
    J = dataset.sample_count
    if node_count < 1:
        raise DataError(f"node count must be positive, got {node_count}")
    if node_count > J:
        raise DataError(f"cannot split {J} samples over {node_count} nodes")
    order = SeededRng(seed, (0xDA7A,)).permutation(J) if shuffle else np.arange(J)
    chunks = np.array_split(order, node_count)
    shards = tuple(dataset.subset(c, f"{dataset.name}[{m}]") for m, c in enumerate(chunks))
    return Partition(shards, tuple(chunks))


@dataclass(frozen=True)
class Scaling:
    """Per-feature affine map onto ``[-1, 1]`` fitted from training min/max."""

    low: np.ndarray
    high: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        span = self.high - self.low
        const = span == 0
        safe = np.where(const, 1.0, span)
        out = 2.0 * (features - self.low[:, None]) / safe[:, None] - 1.0
        out[const, :] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaling":
        return cls(np.asarray(d["low"], dtype=np.float64), np.asarray(d["high"], dtype=np.float64))


def fit_scaling(features: np.ndarray) -> Scaling:
    return Scaling(features.min(axis=1), features.max(axis=1))


def normalize_fit_apply(train: Dataset, test: Dataset | None = None):
    """Fit scaling on ``train`` and apply it to both sets.

    Returns ``(train_scaled, test_scaled, scaling)``; ``test_scaled`` is None
    when no test set is given.
    """
    if test is not None and test.input_dim != train.input_dim:
        raise DataError(f"train has {train.input_dim} features but test has {test.input_dim}")
    scaling = fit_scaling(train.features)
    tr = Dataset(scaling.apply(train.features), train.targets, train.name)
    te = None if test is None else Dataset(scaling.apply(test.features), test.targets, test.name)
    return tr, te, scaling
