"""Synthetic 2-D benchmark generation, embedding-file I/O, and pool batching.

The toy benchmark mirrors the classic picture: a few class-conditional
Gaussians as ID data, surrounded by many small outlier micro-clusters on a
ring well clear of the ID region. Held-out OOD test clusters sit at angles
interleaved between the training-pool clusters, so detection must generalize
around the ring rather than memorize pool locations.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError, InvalidInputError, InvalidRequestError
from .numeric import child_rng, make_rng

EMBEDDING_MAGIC = b"DOSEMB1\x00"

SPLIT_NAMES = ("id-train", "id-test", "ood-pool", "ood-test")
SPLIT_TAGS = {name: tag for tag, name in enumerate(SPLIT_NAMES)}


@dataclass
class GaussianSpec:
    """One isotropic Gaussian blob: N(mean, sigma^2 I)."""

    mean: np.ndarray
    sigma: float
    samples: int
    label: int  # class id in 1..K, or -1 for outlier blobs

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.sigma * rng.standard_normal((self.samples, self.mean.size))


@dataclass
class LabeledBatch:
    features: np.ndarray
    labels: np.ndarray  # class ids in 1..K

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class ToyConfig:
    """Geometry of the synthetic benchmark.

    ID class centers sit on a circle so that adjacent centers are 6 sigma
    apart. Outlier micro-cluster centers sit on a ring of radius ring_radius
    around the origin; the radius must exceed the ID extent (class-center
    circumradius plus 3 sigma), which leaves the outliers surrounding the ID
    region the way the training pool is meant to.
    """

    n_classes: int = 3
    id_sigma: float = 1.0
    n_train_per_class: int = 500
    n_test_per_class: int = 500
    n_pool_clusters: int = 24
    n_test_clusters: int = 24
    ood_sigma: float = 0.2
    cluster_size: int = 50
    ring_radius: float = 8.0

    @property
    def circumradius(self) -> float:
        if self.n_classes == 1:
            return 0.0
        return 3.0 * self.id_sigma / np.sin(np.pi / self.n_classes)

    @property
    def id_extent(self) -> float:
        return self.circumradius + 3.0 * self.id_sigma

    def class_centers(self) -> np.ndarray:
        angles = np.pi / 2 + 2.0 * np.pi * np.arange(self.n_classes) / self.n_classes
        return self.circumradius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def pool_centers(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.n_pool_clusters) / self.n_pool_clusters
        return self.ring_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def test_centers(self) -> np.ndarray:
        # Interleaved: offset by half the pool spacing.
        angles = 2.0 * np.pi * (np.arange(self.n_test_clusters) + 0.5) / self.n_test_clusters
        return self.ring_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def validate(self) -> None:
        if self.n_classes < 1:
            raise ConfigError(f"need >= 1 ID class, got {self.n_classes}")
        if self.id_sigma <= 0 or self.ood_sigma <= 0:
            raise ConfigError("sigmas must be > 0")
        if min(self.n_train_per_class, self.n_test_per_class) < 0:
            raise ConfigError("per-class sample counts must be >= 0")
        if min(self.n_pool_clusters, self.n_test_clusters, self.cluster_size) < 1:
            raise ConfigError("cluster counts and sizes must be >= 1")
        if self.ring_radius <= self.id_extent:
            raise ConfigError(
                f"ring_radius {self.ring_radius} must exceed the ID extent "
                f"{self.id_extent:.3f}"
            )


@dataclass
class ToyBenchmark:
    id_train: LabeledBatch
    id_test: LabeledBatch
    ood_pool: np.ndarray
    ood_test: np.ndarray
    n_classes: int
    pool_centers: np.ndarray = field(default=None)  # type: ignore
    test_centers: np.ndarray = field(default=None)  # type: ignore


def generate_toy(seed: int, config: ToyConfig | None = None) -> ToyBenchmark:
    """Deterministically generate the synthetic benchmark for one seed."""
    cfg = config or ToyConfig()
    cfg.validate()
    centers = cfg.class_centers()

    def draw_labeled(stream: int, per_class: int) -> LabeledBatch:
        feats, labels = [], []
        rng = child_rng(seed, stream)
        for c in range(cfg.n_classes):
            if per_class == 0:
                continue
            spec = GaussianSpec(centers[c], cfg.id_sigma, per_class, c + 1)
            feats.append(spec.draw(rng))
            labels.append(np.full(per_class, c + 1, dtype=np.int64))
        if not feats:
            return LabeledBatch(np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
        return LabeledBatch(np.concatenate(feats), np.concatenate(labels))

    def draw_ring(stream: int, ring_centers: np.ndarray) -> np.ndarray:
        rng = child_rng(seed, stream)
        blobs = [
            GaussianSpec(c, cfg.ood_sigma, cfg.cluster_size, -1).draw(rng)
            for c in ring_centers
        ]
        return np.concatenate(blobs)

    return ToyBenchmark(
        id_train=draw_labeled(0, cfg.n_train_per_class),
        id_test=draw_labeled(1, cfg.n_test_per_class),
        ood_pool=draw_ring(2, cfg.pool_centers()),
        ood_test=draw_ring(3, cfg.test_centers()),
        n_classes=cfg.n_classes,
        pool_centers=cfg.pool_centers(),
        test_centers=cfg.test_centers(),
    )


@dataclass
class EmbeddingDataset:
    dim: int
    id_train: LabeledBatch
    id_test: LabeledBatch
    ood_pool: np.ndarray
    ood_test: np.ndarray

    @property
    def n_classes(self) -> int:
        labels = np.concatenate([self.id_train.labels, self.id_test.labels])
        return int(labels.max()) if labels.size else 0


def toy_to_embeddings(bench: ToyBenchmark) -> EmbeddingDataset:
    return EmbeddingDataset(
        dim=2,
        id_train=bench.id_train,
        id_test=bench.id_test,
        ood_pool=bench.ood_pool,
        ood_test=bench.ood_test,
    )


def save_embeddings(dataset: EmbeddingDataset, path) -> None:
    """Binary layout: magic, u32 dim, u32 rows, then per row a u8 split tag,
    i32 label (-1 for OOD), and dim little-endian f64 features."""
    rows = []
    for name, feats, labels in (
        ("id-train", dataset.id_train.features, dataset.id_train.labels),
        ("id-test", dataset.id_test.features, dataset.id_test.labels),
        ("ood-pool", dataset.ood_pool, None),
        ("ood-test", dataset.ood_test, None),
    ):
        tag = SPLIT_TAGS[name]
        for i in range(feats.shape[0]):
            label = int(labels[i]) if labels is not None else -1
            rows.append((tag, label, feats[i]))
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<II", dataset.dim, len(rows)))
        for tag, label, feat in rows:
            fh.write(struct.pack("<Bi", tag, label))
            fh.write(np.asarray(feat, dtype="<f8").tobytes())


def save_embeddings_csv(dataset: EmbeddingDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "label"] + [f"f{i}" for i in range(dataset.dim)])
        for name, feats, labels in (
            ("id-train", dataset.id_train.features, dataset.id_train.labels),
            ("id-test", dataset.id_test.features, dataset.id_test.labels),
            ("ood-pool", dataset.ood_pool, None),
            ("ood-test", dataset.ood_test, None),
        ):
            for i in range(feats.shape[0]):
                label = int(labels[i]) if labels is not None else -1
                writer.writerow([name, label] + [repr(float(v)) for v in feats[i]])


def _assemble(dim: int, rows: list[tuple[int, int, np.ndarray]]) -> EmbeddingDataset:
    groups: dict[int, list] = {tag: [] for tag in range(4)}
    labels: dict[int, list] = {0: [], 1: []}
    for tag, label, feat in rows:
        groups[tag].append(feat)
        if tag in labels:
            labels[tag].append(label)

    def stack(tag):
        return np.stack(groups[tag]) if groups[tag] else np.zeros((0, dim))

    def batch(tag):
        return LabeledBatch(stack(tag), np.asarray(labels[tag], dtype=np.int64))

    return EmbeddingDataset(dim=dim, id_train=batch(0), id_test=batch(1),
                            ood_pool=stack(2), ood_test=stack(3))


def load_embeddings(path) -> EmbeddingDataset:
    """Load the binary format, or the CSV import format when the file does
    not carry the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(EMBEDDING_MAGIC))
    if head == EMBEDDING_MAGIC:
        return _load_binary(path)
    return _load_csv(path)


def _load_binary(path) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = len(EMBEDDING_MAGIC)
    if len(blob) < off + 8:
        raise DataFormatError("embedding file truncated in header")
    dim, n_rows = struct.unpack_from("<II", blob, off)
    off += 8
    if dim < 1:
        raise DataFormatError(f"invalid feature dim {dim}")
    row_bytes = 5 + 8 * dim
    if len(blob) != off + row_bytes * n_rows:
        raise DataFormatError(
            f"embedding file holds {len(blob) - off} row bytes, header promises "
            f"{row_bytes * n_rows} (offset {off})"
        )
    rows = []
    for r in range(n_rows):
        tag, label = struct.unpack_from("<Bi", blob, off)
        off += 5
        if tag > 3:
            raise DataFormatError(f"row {r}: unknown split tag {tag} (offset {off - 5})")
        if tag in (0, 1) and label < 1:
            raise DataFormatError(f"row {r}: ID row needs a label >= 1, got {label}")
        feat = np.frombuffer(blob, dtype="<f8", count=dim, offset=off).copy()
        off += 8 * dim
        if not np.all(np.isfinite(feat)):
            raise DataFormatError(f"row {r}: non-finite feature value")
        rows.append((tag, label, feat))
    return _assemble(dim, rows)


def _load_csv(path) -> EmbeddingDataset:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty CSV file") from None
        if header[:2] != ["split", "label"] or len(header) < 3:
            raise DataFormatError(f"bad CSV header: {header!r}")
        dim = len(header) - 2
        if header[2:] != [f"f{i}" for i in range(dim)]:
            raise DataFormatError(f"bad CSV feature columns in header: {header!r}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != dim + 2:
                raise DataFormatError(
                    f"line {lineno}: expected {dim + 2} fields, got {len(rec)}"
                )
            name = rec[0]
            if name not in SPLIT_TAGS:
                raise DataFormatError(f"line {lineno}: unknown split {name!r}")
            tag = SPLIT_TAGS[name]
            try:
                label = int(rec[1])
                feat = np.array([float(v) for v in rec[2:]])
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: {exc}") from None
            if tag in (0, 1) and label < 1:
                raise DataFormatError(f"line {lineno}: ID row needs a label >= 1")
            if not np.all(np.isfinite(feat)):
                raise DataFormatError(f"line {lineno}: non-finite feature value")
            rows.append((tag, label, feat))
    return _assemble(dim, rows)


def candidate_batches(pool, candidate_size: int, rng: np.random.Generator,
                      min_size: int | None = None) -> list[np.ndarray]:
    """Shuffle the pool and cut it into contiguous index groups of
    candidate_size; a final short group survives only if it still holds
    min_size rows (default: candidate_size, i.e. short groups are dropped)."""
    pool = np.asarray(pool)
    n = pool.shape[0]
    if candidate_size < 1:
        raise InvalidInputError(f"candidate_size must be >= 1, got {candidate_size}")
    if candidate_size > n:
        raise InvalidRequestError(
            f"candidate_size {candidate_size} exceeds pool of {n} rows"
        )
    if min_size is None:
        min_size = candidate_size
    perm = rng.permutation(n)
    batches = []
    for start in range(0, n, candidate_size):
        group = perm[start:start + candidate_size]
        if group.size >= max(1, min_size):
            batches.append(group)
    return batches
