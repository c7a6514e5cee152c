"""Dataset construction and heterogeneous client partitioning.

Synthetic generators stand in for image corpora at desk scale; IDX-format
files (the MNIST binary convention) are supported for real data. Both
partition schemes are deterministic per seed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedFileError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float64
    labels: np.ndarray    # (N,) int64 for classification, (N, T) {0,1} float64 for multi-task
    num_classes: int | None = None
    num_tasks: int | None = None

    def __post_init__(self):
        if len(self.features) == 0:
            raise ValueError("dataset must contain at least one sample")
        if len(self.labels) != len(self.features):
            raise ValueError("features and labels disagree on sample count")
        if self.num_classes is not None:
            if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
                raise ValueError("label out of range")

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    dims: int = 20
    samples_per_class: int = 30
    cluster_spread: float = 1.0
    inter_cluster_scale: float = 3.0
    mean_rank: int | None = None  # confine class means to a shared subspace
    nuisance_spread: float | None = None  # noise scale off the mean subspace
    seed: int = 0

    def __post_init__(self):
        if min(self.num_classes, self.dims, self.samples_per_class) <= 0:
            raise ValueError("all counts must be positive")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")
        if self.mean_rank is not None and not (0 < self.mean_rank <= self.dims):
            raise ValueError("mean_rank must lie in (0, dims]")
        if self.nuisance_spread is not None and self.mean_rank is None:
            raise ValueError("nuisance_spread requires mean_rank")


def gen_blobs(spec: SyntheticSpec) -> Dataset:
    """Gaussian class clusters around seeded random means, shuffled.

    With mean_rank set, the class means span only a low-dimensional
    subspace while the per-sample noise stays full-dimensional, so the
    discriminative structure has to be discovered from data. An optional
    nuisance_spread inflates the noise on the orthogonal complement of
    the mean subspace: those directions carry no class information and a
    classifier must learn to suppress them.
    """
    rng = np.random.default_rng(spec.seed)
    cov_sqrt = None
    if spec.mean_rank is None:
        means = rng.normal(size=(spec.num_classes, spec.dims)) * spec.inter_cluster_scale
    else:
        full, _ = np.linalg.qr(rng.normal(size=(spec.dims, spec.dims)))
        basis = full[:, :spec.mean_rank]
        coords = rng.normal(size=(spec.num_classes, spec.mean_rank))
        means = coords @ basis.T * spec.inter_cluster_scale
        if spec.nuisance_spread is not None:
            rest = full[:, spec.mean_rank:]
            cov_sqrt = (basis * spec.cluster_spread) @ basis.T \
                + (rest * spec.nuisance_spread) @ rest.T
    n = spec.num_classes * spec.samples_per_class
    feats = np.empty((n, spec.dims))
    labels = np.empty(n, dtype=np.int64)
    for k in range(spec.num_classes):
        lo = k * spec.samples_per_class
        hi = lo + spec.samples_per_class
        noise = rng.normal(size=(spec.samples_per_class, spec.dims))
        if cov_sqrt is None:
            noise = noise * spec.cluster_spread
        else:
            noise = noise @ cov_sqrt
        feats[lo:hi] = means[k] + noise
        labels[lo:hi] = k
    order = rng.permutation(n)
    return Dataset(feats[order], labels[order], num_classes=spec.num_classes)


def gen_multi_attribute(
    tasks: int,
    dims: int,
    samples: int,
    seed: int,
    shared_rank: int | None = None,
    label_noise: float = 0.0,
    task_vectors: np.ndarray | None = None,
    nuisance_spread: float | None = None,
    latent_margin: float | None = None,
) -> Dataset:
    """Binary labels per task on shared low-rank feature structure.

    Default mode: each task is a (noisy) linear threshold whose weight
    vector lives in a common shared_rank subspace, so one feature
    extractor can serve every task. With nuisance_spread set, the
    orthogonal complement of that subspace carries inflated label-free
    variance that a classifier must learn to suppress.

    With latent_margin set, samples instead carry shared_rank latent
    binary factors; factor j contributes a bimodal coordinate at
    +/- latent_margin and task t reads factor t mod shared_rank, so tasks
    are clean-margin attributes of a common latent code.
    """
    if tasks < 2:
        raise ValueError("need at least 2 tasks")
    rng = np.random.default_rng(seed)
    rank = min(shared_rank or min(4, dims), dims)
    if latent_margin is not None:
        if task_vectors is not None:
            raise ValueError("task_vectors cannot be combined with latent_margin")
        full, _ = np.linalg.qr(rng.normal(size=(dims, dims)))
        bits = rng.integers(0, 2, size=(samples, rank))
        sig = (2 * bits - 1) * latent_margin + rng.normal(size=(samples, rank))
        rest = rng.normal(size=(samples, dims - rank))
        if nuisance_spread is not None:
            rest = rest * nuisance_spread
        feats = np.concatenate([sig, rest], axis=1) @ full.T
        labels = bits[:, np.arange(tasks) % rank].astype(np.float64)
    else:
        if nuisance_spread is None:
            feats = rng.normal(size=(samples, dims))
            if task_vectors is None:
                basis = rng.normal(size=(dims, rank))
                coeffs = rng.normal(size=(rank, tasks))
                task_vectors = basis @ coeffs
        else:
            if task_vectors is not None:
                raise ValueError("task_vectors cannot be combined with nuisance_spread")
            full, _ = np.linalg.qr(rng.normal(size=(dims, dims)))
            coords = rng.normal(size=(samples, dims))
            coords[:, rank:] *= nuisance_spread
            feats = coords @ full.T
            coeffs = rng.normal(size=(rank, tasks))
            task_vectors = full[:, :rank] @ coeffs
        labels = (feats @ task_vectors > 0).astype(np.float64)
    if label_noise > 0:
        flips = rng.random(labels.shape) < label_noise
        labels = np.where(flips, 1.0 - labels, labels)
    return Dataset(feats, labels, num_tasks=tasks)


def _read_be32(f, what: str) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise TruncatedFileError(f"truncated while reading {what}")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Parse paired IDX image/label files, pixels scaled to [0, 1]."""
    with open(images_path, "rb") as f:
        magic = _read_be32(f, "image magic")
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagicError(f"bad image magic 0x{magic:08x}")
        count = _read_be32(f, "image count")
        rows = _read_be32(f, "row count")
        cols = _read_be32(f, "column count")
        payload = f.read(count * rows * cols)
        if len(payload) != count * rows * cols:
            raise TruncatedFileError("image payload shorter than declared")
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as f:
        magic = _read_be32(f, "label magic")
        if magic != IDX_LABELS_MAGIC:
            raise BadMagicError(f"bad label magic 0x{magic:08x}")
        label_count = _read_be32(f, "label count")
        payload = f.read(label_count)
        if len(payload) != label_count:
            raise TruncatedFileError("label payload shorter than declared")
        labels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    if label_count != count:
        raise CountMismatchError(f"{count} images but {label_count} labels")
    feats = pixels.astype(np.float64) / 255.0
    return Dataset(feats, labels, num_classes=int(labels.max()) + 1)


@dataclass(frozen=True)
class HeterogeneityConfig:
    scheme: str  # "pathological" | "dirichlet"
    clients: int
    seed: int = 0
    k_classes: int = 2   # pathological only
    beta: float = 0.1    # dirichlet only

    def __post_init__(self):
        if self.scheme not in ("pathological", "dirichlet"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.clients < 1:
            raise ValueError("need at least one client")
        if self.scheme == "pathological" and self.k_classes < 1:
            raise ValueError("k_classes must be >= 1")
        if self.scheme == "dirichlet" and self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass
class PartitionPlan:
    assignments: list[np.ndarray]
    train: list[np.ndarray] = field(default_factory=list)
    test: list[np.ndarray] = field(default_factory=list)

    @property
    def clients(self) -> int:
        return len(self.assignments)


def partition_pathological(ds: Dataset, cfg: HeterogeneityConfig) -> PartitionPlan:
    """Each client receives samples of exactly k distinct classes.

    Classes are dealt round-robin over a seeded class permutation so every
    class is placed; a class shared by several clients has its samples
    split evenly among them.
    """
    if cfg.scheme != "pathological":
        raise ValueError("config scheme is not pathological")
    k = int(ds.num_classes)
    if cfg.k_classes > k:
        raise ValueError(f"k_classes {cfg.k_classes} exceeds class count {k}")
    if cfg.clients * cfg.k_classes < k:
        raise ValueError("C * k must cover every class at least once")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(k)
    # client i's class slots; consecutive entries of the cyclic permutation
    # are distinct whenever k_classes <= num_classes
    owners: dict[int, list[int]] = {c: [] for c in range(k)}
    for client in range(cfg.clients):
        for j in range(cfg.k_classes):
            owners[int(perm[(client * cfg.k_classes + j) % k])].append(client)
    assignments: list[list[int]] = [[] for _ in range(cfg.clients)]
    for cls in range(k):
        idx = np.flatnonzero(ds.labels == cls)
        idx = rng.permutation(idx)
        chunks = np.array_split(idx, len(owners[cls]))
        for client, chunk in zip(owners[cls], chunks):
            assignments[client].extend(chunk.tolist())
    return PartitionPlan([np.sort(np.asarray(a, dtype=np.int64)) for a in assignments])


def partition_dirichlet(ds: Dataset, cfg: HeterogeneityConfig) -> PartitionPlan:
    """Per-class client shares drawn from Dirichlet(beta, ..., beta).

    Largest-remainder rounding so every sample is assigned exactly once.
    """
    if cfg.scheme != "dirichlet":
        raise ValueError("config scheme is not dirichlet")
    rng = np.random.default_rng(cfg.seed)
    assignments: list[list[int]] = [[] for _ in range(cfg.clients)]
    for cls in range(int(ds.num_classes)):
        idx = rng.permutation(np.flatnonzero(ds.labels == cls))
        props = rng.dirichlet([cfg.beta] * cfg.clients)
        raw = props * len(idx)
        counts = np.floor(raw).astype(int)
        short = len(idx) - counts.sum()
        remainders = raw - counts
        for client in np.argsort(-remainders, kind="stable")[:short]:
            counts[client] += 1
        start = 0
        for client, cnt in enumerate(counts):
            assignments[client].extend(idx[start:start + cnt].tolist())
            start += cnt
    return PartitionPlan([np.sort(np.asarray(a, dtype=np.int64)) for a in assignments])


def partition_even(ds: Dataset, clients: int, seed: int) -> PartitionPlan:
    """Shuffle and deal samples into near-equal parts (one per client/task)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    return PartitionPlan([np.sort(chunk) for chunk in np.array_split(order, clients)])


def split_local_train_test(
    plan: PartitionPlan, test_fraction: float, seed: int, labels: np.ndarray | None = None
) -> PartitionPlan:
    """Per-client train/test split, stratified by label when possible.

    Pass the dataset's class labels to stratify; stratification applies
    only where every local class has at least 2 samples.
    """
    if not (0 < test_fraction < 1):
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for client, idx in enumerate(plan.assignments):
        n = len(idx)
        if n < 2:
            raise ValueError(f"client {client} has fewer than 2 samples")
        strata = _strata(labels, idx)
        tr, te = [], []
        if strata is not None:
            for members in strata:
                members = rng.permutation(members)
                n_te = int(round(len(members) * test_fraction))
                n_te = min(max(n_te, 0), len(members) - 1)
                te.extend(members[:n_te].tolist())
                tr.extend(members[n_te:].tolist())
        else:
            members = rng.permutation(idx)
            n_te = int(round(n * test_fraction))
            n_te = min(max(n_te, 1), n - 1)
            te = members[:n_te].tolist()
            tr = members[n_te:].tolist()
        if not te:  # tiny clients can round every stratum to zero test samples
            te.append(tr.pop())
        train.append(np.sort(np.asarray(tr, dtype=np.int64)))
        test.append(np.sort(np.asarray(te, dtype=np.int64)))
    return PartitionPlan(plan.assignments, train, test)


def _strata(labels: np.ndarray | None, idx: np.ndarray):
    if labels is None or labels.ndim != 1:
        return None
    local = labels[idx]
    groups = [idx[local == cls] for cls in np.unique(local)]
    if any(len(g) < 2 for g in groups):
        return None
    return groups
