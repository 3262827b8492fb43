"""Synthetic class-disjoint retrieval benchmarks.

generate() places class centroids uniformly on the unit sphere and draws
unit-norm samples from a vMF around each centroid.  split_classes()
holds out half of the classes for testing and a quarter of the remaining
development classes for validation.  corrupt() blends each sample toward
a random sphere direction, with the blend weight kept as the ground-truth
quality score.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .distributions import VonMisesFisher, sample_vmf
from .errors import ConfigurationError, ContractError

SPLITS = ("train", "val", "test")


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class LabeledDataset:
    """Column-wise sample store: inputs, class ids, split tags and (for
    corrupted data) per-sample quality in [0.5, 1]."""

    x: np.ndarray                 # (N, D)
    y: np.ndarray                 # (N,) int class ids, contiguous from 0
    split: np.ndarray             # (N,) strings from SPLITS
    quality: Optional[np.ndarray] = None  # (N,) in [0.5, 1], corrupted only
    classes: int = 0
    per_class: int = 0
    seed: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        self.split = np.asarray(self.split, dtype=object)
        if self.quality is not None:
            self.quality = np.asarray(self.quality, dtype=np.float64)
        if len(self.x) != len(self.y) or len(self.x) != len(self.split):
            raise ContractError("LabeledDataset: column lengths differ")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def input_dim(self) -> int:
        return self.x.shape[1]

    def subset(self, split: str) -> "LabeledDataset":
        mask = self.split == split
        return LabeledDataset(
            self.x[mask], self.y[mask], self.split[mask],
            None if self.quality is None else self.quality[mask],
            self.classes, self.per_class, self.seed)

    def class_sets(self) -> dict[str, set]:
        return {s: set(self.y[self.split == s].tolist()) for s in SPLITS}


@dataclass
class VerificationSet:
    """Sampled same/different-class pairs over one dataset split."""

    i: np.ndarray
    j: np.ndarray
    same: np.ndarray

    def __len__(self) -> int:
        return len(self.i)


def generate(classes: int, per_class: int, dim: int, kappa: float,
             seed) -> LabeledDataset:
    """classes * per_class unit-norm samples from vMF clusters around
    uniformly random unit centroids; deterministic per seed."""
    if classes < 4 or per_class < 2:
        raise ConfigurationError("generate: need classes >= 4 and per_class >= 2")
    if kappa <= 0:
        raise ConfigurationError("generate: kappa must be > 0")
    base_seed = seed if isinstance(seed, (int, np.integer)) else 0
    rng = _as_rng(seed)
    centroids = rng.standard_normal((classes, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    xs = np.empty((classes * per_class, dim))
    ys = np.repeat(np.arange(classes), per_class)
    for c in range(classes):
        d = VonMisesFisher(centroids[c], kappa)
        xs[c * per_class:(c + 1) * per_class] = sample_vmf(d, per_class, rng)
    split = np.array(["train"] * len(xs), dtype=object)
    return LabeledDataset(xs, ys, split, None, classes, per_class, int(base_seed))


def split_classes(dataset: LabeledDataset, seed) -> LabeledDataset:
    """Half of the classes (shuffled) go to test; the first quarter of the
    development half to validation, the rest to train."""
    classes = dataset.classes
    if classes % 8 != 0:
        raise ConfigurationError("split_classes: class count must be divisible by 8")
    rng = _as_rng(seed)
    perm = rng.permutation(classes)
    dev, test = perm[: classes // 2], perm[classes // 2:]
    val = set(dev[: classes // 8].tolist())
    test = set(test.tolist())
    split = np.array([
        "test" if c in test else "val" if c in val else "train"
        for c in dataset.y], dtype=object)
    return replace(dataset, split=split)


def sample_verification_pairs(dataset: LabeledDataset, seed) -> VerificationSet:
    """N positive and N negative pairs (N = dataset size), positives
    uniform over all same-class pairs, negatives over cross-class pairs."""
    rng = _as_rng(seed)
    y = dataset.y
    n = len(dataset)
    by_class: dict[int, np.ndarray] = {
        c: np.flatnonzero(y == c) for c in np.unique(y)}
    counts = {c: idx.size for c, idx in by_class.items()}
    if any(v < 2 for v in counts.values()):
        raise ConfigurationError(
            "sample_verification_pairs: every class needs >= 2 elements")
    labels = sorted(by_class)
    weights = np.array([counts[c] * (counts[c] - 1) / 2 for c in labels], dtype=float)
    weights /= weights.sum()
    pos_i = np.empty(n, dtype=int)
    pos_j = np.empty(n, dtype=int)
    pick = rng.choice(len(labels), size=n, p=weights)
    for t, ci in enumerate(pick):
        a, b = rng.choice(by_class[labels[ci]], size=2, replace=False)
        pos_i[t], pos_j[t] = a, b
    neg_i = np.empty(n, dtype=int)
    neg_j = np.empty(n, dtype=int)
    for t in range(n):
        while True:
            a, b = rng.integers(0, n, size=2)
            if y[a] != y[b]:
                neg_i[t], neg_j[t] = a, b
                break
    return VerificationSet(
        np.concatenate([pos_i, neg_i]),
        np.concatenate([pos_j, neg_j]),
        np.concatenate([np.ones(n, dtype=bool), np.zeros(n, dtype=bool)]))


def corrupt(dataset: LabeledDataset, seed,
            quality_override: float | None = None) -> LabeledDataset:
    """Blend each sample toward a fresh uniform sphere direction:
    x' = normalize(q * x + (1 - q) * noise) with q ~ Uniform[0.5, 1].

    quality_override pins q (test hook; q = 1 returns x unchanged since
    inputs are unit-norm).
    """
    if dataset.quality is not None:
        raise ContractError("corrupt: dataset is already corrupted")
    rng = _as_rng(seed)
    n, d = dataset.x.shape
    if quality_override is None:
        q = rng.uniform(0.5, 1.0, size=n)
    else:
        q = np.full(n, float(quality_override))
    noise = rng.standard_normal((n, d))
    noise /= np.linalg.norm(noise, axis=1, keepdims=True)
    mixed = q[:, None] * dataset.x + (1.0 - q)[:, None] * noise
    mixed /= np.linalg.norm(mixed, axis=1, keepdims=True)
    return replace(dataset, x=mixed, quality=q)


# serialization --------------------------------------------------------

def save_dataset(dataset: LabeledDataset, path) -> None:
    """Delimited text: header `D,C,n,seed`, then one line per sample
    `split,y,quality,x_0,...` with 17-significant-digit reals."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{dataset.input_dim},{dataset.classes},"
                f"{dataset.per_class},{dataset.seed}\n")
        for t in range(len(dataset)):
            q = "" if dataset.quality is None else format(dataset.quality[t], ".17g")
            coords = ",".join(format(v, ".17g") for v in dataset.x[t])
            f.write(f"{dataset.split[t]},{dataset.y[t]},{q},{coords}\n")


def load_dataset(path) -> LabeledDataset:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if len(header) != 4:
            raise ContractError(f"{path}: malformed dataset header")
        dim, classes, per_class, seed = (int(v) for v in header)
        xs, ys, splits, quals = [], [], [], []
        any_quality = False
        for line in f:
            parts = line.rstrip("\n").split(",")
            if len(parts) != dim + 3:
                raise ContractError(f"{path}: malformed dataset row")
            splits.append(parts[0])
            ys.append(int(parts[1]))
            if parts[2]:
                any_quality = True
                quals.append(float(parts[2]))
            else:
                quals.append(np.nan)
            xs.append([float(v) for v in parts[3:]])
    quality = np.asarray(quals) if any_quality else None
    return LabeledDataset(np.asarray(xs), np.asarray(ys),
                          np.asarray(splits, dtype=object), quality,
                          classes, per_class, seed)
