"""Dataset loading, synthetic generation, subsetting, and the concept-drift
label schedule.

The IDX loader handles the FashionMNIST/MNIST distribution format (optionally
gzip-wrapped). Images are scaled to [0, 1]. Datasets are immutable once
built.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .core import make_rng
from .errors import DataError, IdxFormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, d) float in [0, 1]
    labels: np.ndarray  # (n,) int in [0, n_classes)
    name: str = ""

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"image/label count mismatch: {self.images.shape[0]} vs "
                f"{self.labels.shape[0]}"
            )

    @property
    def n(self):
        return self.images.shape[0]

    @property
    def dim(self):
        return self.images.shape[1]

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1 if self.n else 0


def _read_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_idx(raw, expect_magic, path):
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header", offset=len(raw))
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expect_magic:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}", offset=0)
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension table", offset=len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    count = int(np.prod(dims))
    if len(raw) < header_len + count:
        raise IdxFormatError(
            f"{path}: payload truncated ({len(raw) - header_len} of {count} bytes)",
            offset=len(raw),
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_len)
    return data.reshape(dims)


def load_idx(images_path, labels_path, name="idx"):
    """Parse an IDX image/label file pair into a Dataset."""
    images = _parse_idx(_read_maybe_gzip(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_maybe_gzip(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(images=flat, labels=labels.astype(int), name=name)


def spiral_dataset(n=1000, arms=4, noise_sd=0.02, theta_max=np.pi / 2, seed=0):
    """Interleaved multi-arm spiral, binary labels by arm parity.

    Arm k places points at angle t*theta_max + k*pi/2 and radius t with
    t ~ U(0, 1), plus isotropic Gaussian noise. Features are standardized.
    """
    if n < arms:
        raise ValueError(f"need n >= arms, got n={n}, arms={arms}")
    rng = make_rng(seed, "spiral")
    per_arm = np.full(arms, n // arms)
    per_arm[: n % arms] += 1
    xs, ys = [], []
    for k in range(arms):
        t = rng.uniform(0.0, 1.0, size=per_arm[k])
        theta = t * theta_max + k * (np.pi / 2.0)
        pts = np.stack([t * np.cos(theta), t * np.sin(theta)], axis=1)
        pts += rng.normal(0.0, noise_sd, size=pts.shape)
        xs.append(pts)
        ys.append(np.full(per_arm[k], k % 2))
    X = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(n)
    X, y = X[order], y[order]
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return Dataset(images=X, labels=y.astype(int), name="spiral")


def synthetic_image_classification(
    n=2000, dim=784, n_classes=10, noise_sd=0.25, seed=0, name="synthetic"
):
    """Prototype-plus-noise stand-in task with FashionMNIST-like shapes.

    Each class owns a smooth random prototype in [0, 1]; samples are noisy
    scaled copies. Useful for protocol smoke runs and timing when the real
    IDX files are not on disk.
    """
    rng = make_rng(seed, "synthetic", dim, n_classes)
    side = int(np.sqrt(dim))
    protos = []
    for _ in range(n_classes):
        base = rng.normal(size=(side, side)) if side * side == dim else rng.normal(size=dim)
        if side * side == dim:
            # Cheap smoothing: average shifted copies for spatial structure.
            sm = base.copy()
            for _ in range(3):
                sm = 0.25 * (
                    np.roll(sm, 1, 0) + np.roll(sm, -1, 0)
                    + np.roll(sm, 1, 1) + np.roll(sm, -1, 1)
                )
            base = sm.reshape(-1)
        base = (base - base.min()) / (base.max() - base.min() + 1e-12)
        protos.append(base)
    protos = np.stack(protos)
    labels = rng.integers(0, n_classes, size=n)
    scale = rng.uniform(0.6, 1.0, size=(n, 1))
    images = protos[labels] * scale + rng.normal(0.0, noise_sd, size=(n, dim))
    images = np.clip(images, 0.0, 1.0)
    return Dataset(images=images, labels=labels, name=name)


def subset(ds, n, seed=0, stratified=True):
    """Uniform subset without replacement; class-stratified by default."""
    if n > ds.n:
        raise ValueError(f"subset size {n} exceeds dataset size {ds.n}")
    rng = make_rng(seed, "subset", n)
    if not stratified:
        idx = rng.choice(ds.n, size=n, replace=False)
    else:
        classes = np.unique(ds.labels)
        base, extra = divmod(n, len(classes))
        counts = {c: base + (1 if i < extra else 0) for i, c in enumerate(classes)}
        parts = []
        for c in classes:
            pool = np.flatnonzero(ds.labels == c)
            take = min(counts[c], pool.size)
            parts.append(rng.choice(pool, size=take, replace=False))
        idx = np.concatenate(parts)
        if idx.size < n:  # rare: a class pool ran dry
            rest = np.setdiff1d(np.arange(ds.n), idx)
            idx = np.concatenate([idx, rng.choice(rest, size=n - idx.size, replace=False)])
        rng.shuffle(idx)
    return Dataset(images=ds.images[idx], labels=ds.labels[idx], name=ds.name)


def split(ds, fraction=0.8, seed=0):
    """Random (train, test) split with the given train fraction."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = make_rng(seed, "split")
    idx = rng.permutation(ds.n)
    cut = int(round(fraction * ds.n))
    tr, te = idx[:cut], idx[cut:]
    return (
        Dataset(images=ds.images[tr], labels=ds.labels[tr], name=ds.name),
        Dataset(images=ds.images[te], labels=ds.labels[te], name=ds.name),
    )


class DriftSchedule:
    """Periodic label permutation over the mutable classes.

    Every ``period`` iterations a fresh permutation of ``permuted_classes``
    is drawn (classes outside that set always map to themselves). A
    permutation is drawn at event index 0 as well, i.e. the first drift
    happens at iteration 0 of the drift phase.
    """

    def __init__(self, period=64, n_classes=10, permuted_classes=(5, 6, 7, 8, 9), seed=0):
        self.period = int(period)
        self.n_classes = int(n_classes)
        self.permuted_classes = tuple(permuted_classes)
        self.seed = seed

    def event_index(self, iteration):
        if iteration < 0:
            raise ValueError("iteration must be >= 0")
        return iteration // self.period

    def permutation_for(self, iteration):
        """Full label mapping (length n_classes) active at this iteration."""
        event = self.event_index(iteration)
        mapping = np.arange(self.n_classes)
        rng = make_rng(self.seed, "drift", event)
        shuffled = rng.permutation(np.array(self.permuted_classes))
        mapping[list(self.permuted_classes)] = shuffled
        return mapping

    def apply(self, labels, iteration):
        return self.permutation_for(iteration)[np.asarray(labels)]


def save_dataset(ds, path):
    """Write a dataset snapshot (shared npz container, payload tag
    "dataset")."""
    np.savez_compressed(
        path,
        payload=np.array("dataset"),
        version=np.array(1),
        images=ds.images,
        labels=ds.labels,
        name=np.array(ds.name),
    )


def load_dataset(path):
    with np.load(path, allow_pickle=False) as z:
        if str(z["payload"]) != "dataset":
            raise DataError(f"{path}: not a dataset snapshot")
        return Dataset(images=z["images"], labels=z["labels"], name=str(z["name"]))
