"""Synthetic generators, client partitioning, local splits, IDX parsing."""
from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import looptrain as lt
from looptrain.data import (
    BadMagicError,
    CountMismatchError,
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    TruncatedFileError,
)

from conftest import tiny_blobs


# -------------------------------------------------------------------- blobs

def test_blobs_shapes_and_balanced_labels():
    ds = lt.gen_blobs(lt.SyntheticSpec(num_classes=4, dims=6, samples_per_class=10, seed=1))
    assert ds.features.shape == (40, 6)
    assert ds.labels.shape == (40,)
    assert ds.num_classes == 4
    counts = np.bincount(ds.labels, minlength=4)
    assert list(counts) == [10, 10, 10, 10]


def test_blobs_deterministic_per_seed():
    a = tiny_blobs(3)
    b = tiny_blobs(3)
    c = tiny_blobs(4)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, c.features)


def test_blobs_low_rank_means_span_requested_subspace():
    spec = lt.SyntheticSpec(num_classes=10, dims=20, samples_per_class=200,
                            cluster_spread=1e-6, inter_cluster_scale=3.0,
                            mean_rank=4, seed=0)
    ds = lt.gen_blobs(spec)
    # with near-zero spread the samples sit on the class means; their
    # singular values past the requested rank must vanish
    sv = np.linalg.svd(ds.features - 0, compute_uv=False)
    assert sv[3] > 1.0
    assert sv[4] < 1e-3


def test_blobs_nuisance_inflates_orthogonal_complement_only():
    base = dict(num_classes=6, dims=12, samples_per_class=300,
                cluster_spread=1.0, inter_cluster_scale=0.0001, mean_rank=3, seed=5)
    quiet = lt.gen_blobs(lt.SyntheticSpec(**base))
    loud = lt.gen_blobs(lt.SyntheticSpec(**base, nuisance_spread=6.0))
    # total variance rises roughly by (dims-rank) * (6^2 - 1) per dim
    assert loud.features.var() > 5 * quiet.features.var()


def test_blobs_spec_validation():
    with pytest.raises(ValueError):
        lt.SyntheticSpec(num_classes=0)
    with pytest.raises(ValueError):
        lt.SyntheticSpec(mean_rank=30, dims=20)
    with pytest.raises(ValueError):
        lt.SyntheticSpec(nuisance_spread=2.0)  # requires mean_rank


# ---------------------------------------------------------- multi-attribute

def test_multi_attribute_shapes_and_binary_labels():
    ds = lt.gen_multi_attribute(tasks=5, dims=8, samples=60, seed=2, shared_rank=3)
    assert ds.features.shape == (60, 8)
    assert ds.labels.shape == (60, 5)
    assert ds.num_tasks == 5
    assert set(np.unique(ds.labels)) <= {0.0, 1.0}


def test_multi_attribute_deterministic_and_seed_sensitive():
    a = lt.gen_multi_attribute(4, 6, 30, seed=9)
    b = lt.gen_multi_attribute(4, 6, 30, seed=9)
    c = lt.gen_multi_attribute(4, 6, 30, seed=10)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, c.features)


def test_multi_attribute_label_noise_flips_labels():
    clean = lt.gen_multi_attribute(4, 6, 200, seed=7)
    # label_noise draws after the clean labels, so compare flip fraction
    noisy = lt.gen_multi_attribute(4, 6, 200, seed=7, label_noise=0.5)
    frac = np.mean(clean.labels != noisy.labels)
    assert 0.35 < frac < 0.65


def test_multi_attribute_latent_mode_repeats_factors_across_tasks():
    ds = lt.gen_multi_attribute(8, 20, 300, seed=1, shared_rank=4,
                                latent_margin=3.0)
    # task t reads latent factor t mod rank, so tasks 0 and 4 agree exactly
    np.testing.assert_array_equal(ds.labels[:, 0], ds.labels[:, 4])
    np.testing.assert_array_equal(ds.labels[:, 3], ds.labels[:, 7])


def test_multi_attribute_rejects_conflicting_arguments():
    with pytest.raises(ValueError):
        lt.gen_multi_attribute(1, 6, 10, seed=0)
    tv = np.zeros((6, 3))
    with pytest.raises(ValueError):
        lt.gen_multi_attribute(3, 6, 10, seed=0, task_vectors=tv, latent_margin=1.0)
    with pytest.raises(ValueError):
        lt.gen_multi_attribute(3, 6, 10, seed=0, task_vectors=tv, nuisance_spread=1.0)


# --------------------------------------------------------------- partitions

def _pathological_plan(seed=0, clients=5, k=2, num_classes=10):
    ds = lt.gen_blobs(lt.SyntheticSpec(num_classes=num_classes, dims=4,
                                       samples_per_class=12, seed=seed))
    cfg = lt.HeterogeneityConfig("pathological", clients, seed=seed, k_classes=k)
    return ds, lt.partition_pathological(ds, cfg)


def test_pathological_each_client_sees_exactly_k_classes():
    for seed in range(5):
        ds, plan = _pathological_plan(seed)
        for idx in plan.assignments:
            assert len(np.unique(ds.labels[idx])) == 2


def test_pathological_assignments_are_disjoint_and_exhaustive():
    ds, plan = _pathological_plan(1)
    allidx = np.concatenate(plan.assignments)
    assert len(allidx) == len(ds)
    assert len(np.unique(allidx)) == len(ds)


def test_pathological_rejects_uncoverable_settings():
    ds, _ = _pathological_plan(0)
    with pytest.raises(ValueError):
        lt.partition_pathological(ds, lt.HeterogeneityConfig(
            "pathological", clients=2, seed=0, k_classes=2))  # 4 slots < 10 classes


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_dirichlet_is_exhaustive_disjoint_and_deterministic(seed):
    ds = tiny_blobs(0, num_classes=4, dims=4, samples_per_class=15)
    cfg = lt.HeterogeneityConfig("dirichlet", clients=5, seed=seed, beta=0.5)
    plan = lt.partition_dirichlet(ds, cfg)
    again = lt.partition_dirichlet(ds, cfg)
    allidx = np.concatenate(plan.assignments)
    assert sorted(allidx.tolist()) == list(range(len(ds)))
    for a, b in zip(plan.assignments, again.assignments):
        np.testing.assert_array_equal(a, b)


def _mean_label_entropy(ds, plan):
    ents = []
    for idx in plan.assignments:
        if len(idx) == 0:
            continue
        p = np.bincount(ds.labels[idx], minlength=ds.num_classes) / len(idx)
        p = p[p > 0]
        ents.append(-(p * np.log(p)).sum())
    return float(np.mean(ents))


def test_dirichlet_low_beta_is_more_skewed_than_high_beta():
    ds = tiny_blobs(0, num_classes=5, dims=4, samples_per_class=40)
    wins = 0
    for seed in range(10):
        smooth = lt.partition_dirichlet(ds, lt.HeterogeneityConfig(
            "dirichlet", 5, seed=seed, beta=10.0))
        skewed = lt.partition_dirichlet(ds, lt.HeterogeneityConfig(
            "dirichlet", 5, seed=seed, beta=0.1))
        wins += _mean_label_entropy(ds, smooth) > _mean_label_entropy(ds, skewed)
    assert wins >= 9


def test_even_partition_near_equal_and_exhaustive():
    ds = tiny_blobs(2, num_classes=3, dims=4, samples_per_class=11)  # 33 samples
    plan = lt.partition_even(ds, 4, seed=0)
    sizes = sorted(len(a) for a in plan.assignments)
    assert sizes == [8, 8, 8, 9]
    assert sorted(np.concatenate(plan.assignments).tolist()) == list(range(33))


def test_heterogeneity_config_validation():
    with pytest.raises(ValueError):
        lt.HeterogeneityConfig("uniform", 3)
    with pytest.raises(ValueError):
        lt.HeterogeneityConfig("dirichlet", 3, beta=0.0)
    with pytest.raises(ValueError):
        lt.HeterogeneityConfig("pathological", 0)


# ------------------------------------------------------------- local splits

def test_split_partitions_each_client_without_overlap():
    ds, plan = _pathological_plan(3)
    split = lt.split_local_train_test(plan, 0.25, seed=4, labels=ds.labels)
    for full, tr, te in zip(split.assignments, split.train, split.test):
        assert len(tr) > 0 and len(te) > 0
        assert set(tr) | set(te) == set(full)
        assert set(tr) & set(te) == set()


def test_split_is_stratified_when_classes_are_large_enough():
    ds, plan = _pathological_plan(0, clients=5, k=2)
    split = lt.split_local_train_test(plan, 0.25, seed=1, labels=ds.labels)
    for tr, full in zip(split.train, split.assignments):
        assert set(ds.labels[tr]) == set(ds.labels[full])


def test_split_fraction_roughly_respected():
    ds, plan = _pathological_plan(0)
    split = lt.split_local_train_test(plan, 0.25, seed=9, labels=ds.labels)
    for full, te in zip(split.assignments, split.test):
        assert abs(len(te) / len(full) - 0.25) < 0.15


def test_split_rejects_bad_fraction_and_tiny_clients():
    ds, plan = _pathological_plan(0)
    with pytest.raises(ValueError):
        lt.split_local_train_test(plan, 1.0, seed=0)
    lone = lt.PartitionPlan([np.array([0])])
    with pytest.raises(ValueError):
        lt.split_local_train_test(lone, 0.5, seed=0)


# ---------------------------------------------------------------------- IDX

def write_idx_pair(tmp_path, pixels: np.ndarray, labels: np.ndarray,
                   image_magic=IDX_IMAGES_MAGIC, label_magic=IDX_LABELS_MAGIC,
                   truncate_images=0, label_count=None):
    n, rows, cols = pixels.shape
    img = tmp_path / "images.idx"
    lab = tmp_path / "labels.idx"
    body = struct.pack(">IIII", image_magic, n, rows, cols) + pixels.tobytes()
    if truncate_images:
        body = body[:-truncate_images]
    img.write_bytes(body)
    lc = n if label_count is None else label_count
    lab.write_bytes(struct.pack(">II", label_magic, lc) + labels.tobytes()[:lc])
    return str(img), str(lab)


def test_idx_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(7, 3, 2), dtype=np.uint8)
    labels = rng.integers(0, 4, size=7, dtype=np.uint8)
    img, lab = write_idx_pair(tmp_path, pixels, labels)
    ds = lt.load_idx(img, lab)
    assert ds.features.shape == (7, 6)
    np.testing.assert_array_equal(ds.features * 255.0, pixels.reshape(7, 6).astype(float))
    np.testing.assert_array_equal(ds.labels, labels.astype(np.int64))
    assert ds.num_classes == int(labels.max()) + 1


def test_idx_rejects_bad_magic(tmp_path):
    pixels = np.zeros((2, 2, 2), dtype=np.uint8)
    labels = np.zeros(2, dtype=np.uint8)
    img, lab = write_idx_pair(tmp_path, pixels, labels, image_magic=0xDEADBEEF)
    with pytest.raises(BadMagicError):
        lt.load_idx(img, lab)
    img, lab = write_idx_pair(tmp_path, pixels, labels, label_magic=0x00000999)
    with pytest.raises(BadMagicError):
        lt.load_idx(img, lab)


def test_idx_rejects_truncated_payload(tmp_path):
    pixels = np.zeros((2, 2, 2), dtype=np.uint8)
    labels = np.zeros(2, dtype=np.uint8)
    img, lab = write_idx_pair(tmp_path, pixels, labels, truncate_images=3)
    with pytest.raises(TruncatedFileError):
        lt.load_idx(img, lab)


def test_idx_rejects_count_mismatch(tmp_path):
    pixels = np.zeros((3, 2, 2), dtype=np.uint8)
    labels = np.zeros(3, dtype=np.uint8)
    img, lab = write_idx_pair(tmp_path, pixels, labels, label_count=2)
    with pytest.raises(CountMismatchError):
        lt.load_idx(img, lab)
