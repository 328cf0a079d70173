"""Datasets, synthetic tasks and client partitioning."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Shard:
    features: np.ndarray  # (n_samples, dims)
    labels: np.ndarray  # (n_samples,), float targets or integer class ids

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError(f"bad shard shapes {self.features.shape} / {self.labels.shape}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Shard":
        idx = np.asarray(idx, dtype=np.int64)
        return Shard(self.features[idx], self.labels[idx])

    def label_histogram(self, classes: int) -> np.ndarray:
        return np.bincount(self.labels.astype(np.int64), minlength=classes)


@dataclass
class Task:
    train: Shard
    test: Shard
    classes: int  # 0 for regression
    optimum: np.ndarray | None = None


def make_synthetic_task(
    kind: str,
    dims: int,
    classes: int,
    n: int,
    rng: np.random.Generator,
    n_test: int | None = None,
    margin: float = 5.0,
    noise: float = 0.1,
) -> Task:
    """Generate a ``linreg`` or ``blobs`` task.

    ``linreg`` draws ``y = x @ a + b + noise * eps`` and returns the
    least-squares fit on the training split as ``optimum``.

    ``blobs`` draws balanced unit-variance Gaussian clusters whose centres
    are rescaled so that the closest pair is ``2 * margin`` standard
    deviations apart, i.e. each pairwise bisecting hyperplane sits
    ``margin`` deviations from both centres.
    """
    if n_test is None:
        n_test = max(n // 5, 1)
    if kind == "linreg":
        a = rng.normal(size=dims)
        b = rng.normal()
        total = n + n_test
        x = rng.normal(size=(total, dims))
        y = x @ a + b + noise * rng.normal(size=total)
        train, test = Shard(x[:n], y[:n]), Shard(x[n:], y[n:])
        design = np.hstack([train.features, np.ones((n, 1))])
        optimum, *_ = np.linalg.lstsq(design, train.labels, rcond=None)
        return Task(train, test, 0, optimum)
    if kind == "blobs":
        if n < classes:
            raise ValueError(f"need at least one sample per class: n={n} < classes={classes}")
        centres = rng.normal(size=(classes, dims))
        diff = centres[:, None, :] - centres[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        closest = dist[~np.eye(classes, dtype=bool)].min() if classes > 1 else 1.0
        centres *= 2.0 * margin / closest

        def draw(count):
            labels = rng.permutation(np.arange(count) % classes)
            return Shard(centres[labels] + rng.normal(size=(count, dims)), labels)

        return Task(draw(n), draw(n_test), classes, None)
    raise ValueError(f"unknown synthetic task {kind!r}; expected linreg or blobs")


def load_csv_shard(path: str | Path, label_column: str = "label", integer_labels: bool = True) -> Shard:
    """Read a header + comma-separated numeric table.

    The column named ``label_column`` (or the last column if absent) holds
    the targets.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    col = header.index(label_column) if label_column in header else len(header) - 1
    labels = table[:, col]
    feats = np.delete(table, col, axis=1)
    if integer_labels:
        labels = labels.astype(np.int64)
    return Shard(feats, labels)


def iid_partition(dataset: Shard, num_clients: int, rng: np.random.Generator) -> list[Shard]:
    if len(dataset) < num_clients:
        raise ValueError(f"{len(dataset)} samples cannot cover {num_clients} clients")
    parts = np.array_split(rng.permutation(len(dataset)), num_clients)
    return [dataset.subset(np.sort(p)) for p in parts]


def dirichlet_indices(
    labels: np.ndarray, num_clients: int, alpha: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """Per-class Dirichlet split of sample indices over clients.

    Clients left empty take one sample from the currently largest client.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    labels = np.asarray(labels).astype(np.int64)
    if labels.shape[0] < num_clients:
        raise ValueError(f"{labels.shape[0]} samples cannot cover {num_clients} clients")
    buckets: list[list[int]] = [[] for _ in range(num_clients)]
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        props = rng.dirichlet(np.full(num_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * idx.shape[0]).astype(np.int64)
        for k, part in enumerate(np.split(idx, cuts)):
            buckets[k].extend(part.tolist())
    for k in range(num_clients):
        if not buckets[k]:
            donor = max(range(num_clients), key=lambda j: (len(buckets[j]), -j))
            buckets[k].append(buckets[donor].pop())
    return [np.sort(np.asarray(b, dtype=np.int64)) for b in buckets]


def dirichlet_partition(
    dataset: Shard, num_clients: int, alpha: float, rng: np.random.Generator
) -> list[Shard]:
    return [dataset.subset(i) for i in dirichlet_indices(dataset.labels, num_clients, alpha, rng)]
