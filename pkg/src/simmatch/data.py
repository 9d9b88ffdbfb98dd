"""Dataset ingestion, normalization, and active-learning pool setup."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

ColumnSelector = Union[str, int]


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Binary classification data over a dense feature matrix.

    ``classes`` holds the raw label values in the order they were mapped,
    so ``classes[0]`` became label 0.
    """

    features: np.ndarray
    labels: np.ndarray
    names: Optional[tuple] = None
    classes: tuple = ()

    def __post_init__(self):
        x = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if y.shape != (x.shape[0],):
            raise DataError("one label per feature row required")
        if not np.all(np.isfinite(x)):
            raise DataError("non-numeric feature: matrix contains NaN or inf")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0/1")
        if len(np.unique(y)) < 2:
            raise DataError("dataset must contain both classes")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _label_mapping(raw: Sequence[str]) -> tuple:
    values = sorted(set(raw))
    if len(values) < 2:
        raise DataError(f"fewer than 2 classes in label column: {values}")
    if len(values) > 2:
        raise DataError(
            f"more than 2 classes ({len(values)}); apply a class filter first"
        )
    return tuple(values)


def _read_table(path, label_column: ColumnSelector):
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataError(f"no data rows in {path}")
    header, body = rows[0], rows[1:]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header")
        col = header.index(label_column)
    else:
        col = int(label_column)
        if not -len(header) <= col < len(header):
            raise DataError(f"label column index {col} out of range")
        col %= len(header)
    names = tuple(h for i, h in enumerate(header) if i != col)
    raw_labels = []
    feats = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        raw_labels.append(row[col].strip())
        vals = []
        for i, cell in enumerate(row):
            if i == col:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric feature at line {lineno}: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"non-numeric feature at line {lineno}: {cell!r}")
            vals.append(v)
        feats.append(vals)
    return np.array(feats, dtype=np.float64).reshape(len(body), len(names)), raw_labels, names


def _build(features, raw_labels, names, keep=None) -> Dataset:
    raw = np.asarray(raw_labels, dtype=object)
    if keep is not None:
        mask = np.isin(raw, list(keep))
        features, raw = features[mask], raw[mask]
    classes = _label_mapping(list(raw))
    labels = (raw == classes[1]).astype(np.int64)
    return Dataset(features, labels, names, classes)


def load_csv(path, label_column: ColumnSelector = -1, keep: Optional[Sequence[str]] = None) -> Dataset:
    """Read a headered CSV; labels are mapped to {0, 1} by sorted raw value.

    ``label_column`` is a header name or a (possibly negative) column index.
    ``keep`` applies :func:`filter_classes` before the binary check, for
    multiclass files such as letter recognition.
    """
    features, raw_labels, names = _read_table(path, label_column)
    if keep is not None:
        _check_keep(raw_labels, keep)
    return _build(features, raw_labels, names, keep)


def _check_keep(raw_labels, keep):
    keep = tuple(keep)
    if len(keep) != 2:
        raise DataError("exactly two classes must be kept")
    if keep[0] == keep[1]:
        raise DataError("classes must be distinct")
    present = set(raw_labels)
    for c in keep:
        if c not in present:
            raise DataError(f"class {c!r} absent from labels")


def filter_classes(features, raw_labels, keep) -> Dataset:
    """Keep only rows whose raw label is one of the two ``keep`` values."""
    raw_labels = [str(v) for v in raw_labels]
    keep = tuple(str(k) for k in keep)
    _check_keep(raw_labels, keep)
    return _build(np.asarray(features, dtype=np.float64), raw_labels, None, keep)


def load_multiclass_csv(path, label_column: ColumnSelector = -1):
    """Return ``(features, raw_labels, names)`` without binary mapping."""
    return _read_table(path, label_column)


def write_csv(dataset: Dataset, path, label_name: str = "class") -> None:
    names = dataset.names or tuple(f"a{i + 1}" for i in range(dataset.d))
    classes = dataset.classes or ("0", "1")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [label_name])
        for x, y in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [classes[y]])


def normalize(dataset: Dataset) -> Dataset:
    """Min-max scale every attribute to [0, 1]; constant attributes become 0."""
    x = dataset.features
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (x - lo) / safe, 0.0)
    # guard against 1 + eps from the division
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(scaled, dataset.labels, dataset.names, dataset.classes)


@dataclass(frozen=True)
class Pool:
    """Partition of a dataset into labeled, unlabeled and test indices.

    ``labeled_y`` carries the labels the learner believes for ``labeled``.
    They are the true labels in real runs and sampled labels inside
    simulation, which is why they are stored here rather than read from
    the dataset.
    """

    dataset: Dataset
    labeled: np.ndarray
    labeled_y: np.ndarray
    unlabeled: np.ndarray
    test: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        for name in ("labeled", "labeled_y", "unlabeled", "test"):
            a = np.array(getattr(self, name), dtype=np.int64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.labeled.shape != self.labeled_y.shape:
            raise DataError("labeled and labeled_y differ in length")
        if set(np.unique(self.labeled_y)) != {0, 1}:
            raise DataError("labeled set must contain both classes")

    def check_partition(self) -> None:
        allidx = np.concatenate([self.labeled, self.unlabeled, self.test])
        if len(allidx) != self.dataset.n or len(np.unique(allidx)) != self.dataset.n:
            raise DataError("labeled/unlabeled/test do not partition the dataset")

    def with_labels(self, indices, labels) -> "Pool":
        """Move ``indices`` from unlabeled to labeled with the given labels."""
        indices = np.asarray(indices, dtype=np.int64).ravel()
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if len(np.unique(indices)) != len(indices):
            raise DataError("duplicate indices")
        if not np.isin(indices, self.unlabeled).all():
            raise DataError("can only label indices from the unlabeled set")
        return Pool(
            self.dataset,
            np.concatenate([self.labeled, indices]),
            np.concatenate([self.labeled_y, labels]),
            self.unlabeled[~np.isin(self.unlabeled, indices)],
            self.test,
        )

    def reveal(self, indices) -> "Pool":
        """Label ``indices`` with their true labels."""
        indices = np.asarray(indices, dtype=np.int64)
        return self.with_labels(indices, self.dataset.labels[indices])


def split_and_init(
    dataset: Dataset,
    train_frac: float = 0.7,
    seeds_per_class: int = 5,
    rng: Optional[np.random.Generator] = None,
) -> Pool:
    """Random train/test split plus ``seeds_per_class`` labeled seeds per class.

    The test set has ``floor((1 - train_frac) * n)`` examples.
    """
    if not 0.0 < train_frac <= 1.0:
        raise DataError("train_frac must be in (0, 1]")
    rng = np.random.default_rng(rng)
    n = dataset.n
    n_test = int(math.floor((1.0 - train_frac) * n + 1e-9))
    perm = rng.permutation(n)
    test = np.sort(perm[:n_test])
    train = perm[n_test:]
    labeled = []
    for c in (0, 1):
        members = train[dataset.labels[train] == c]
        if len(members) < seeds_per_class:
            raise DataError(
                f"class {c} has {len(members)} training examples, "
                f"need {seeds_per_class}"
            )
        labeled.append(np.sort(rng.choice(members, size=seeds_per_class, replace=False)))
    labeled = np.concatenate(labeled)
    unlabeled = np.sort(np.setdiff1d(train, labeled))
    pool = Pool(dataset, labeled, dataset.labels[labeled], unlabeled, test)
    pool.check_partition()
    return pool
