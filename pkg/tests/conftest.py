"""Shared builders for small deterministic test instances."""
from __future__ import annotations

import numpy as np
import pytest

import looptrain as lt
from looptrain.seeding import child_rng, child_seed


def tiny_spec(widths=(4, 6, 3), split_index=1) -> lt.ModelSpec:
    return lt.mlp_spec(list(widths), split_index)


def seeded_params(spec: lt.ModelSpec, seed: int = 0):
    backbone = lt.init_params(spec, lt.BACKBONE, child_rng(seed, "backbone-init"))
    head = lt.init_params(spec, lt.HEAD, child_rng(seed, "head-init"))
    return backbone, head


def tiny_blobs(seed: int = 0, num_classes: int = 3, dims: int = 4,
               samples_per_class: int = 12) -> lt.Dataset:
    return lt.gen_blobs(lt.SyntheticSpec(
        num_classes=num_classes, dims=dims, samples_per_class=samples_per_class,
        cluster_spread=0.5, inter_cluster_scale=3.0, seed=seed))


def tiny_nodes(seed: int = 0, clients: int = 3, num_classes: int = 3,
               widths=(4, 6, 3), split_index=1):
    """Dataset, even partition, local splits, and ring-ready node states."""
    ds = tiny_blobs(seed, num_classes=num_classes, dims=widths[0])
    plan = lt.partition_even(ds, clients, child_seed(seed, "partition"))
    plan = lt.split_local_train_test(plan, 0.25, child_seed(seed, "split"), labels=ds.labels)
    spec = tiny_spec(widths, split_index)
    nodes = lt.make_nodes(spec, plan, ds, seed)
    return ds, plan, spec, nodes


@pytest.fixture
def rng():
    return np.random.default_rng(0)
