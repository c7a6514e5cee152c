#!/usr/bin/env python3
"""Compare global-model constructions against a pooled-data baseline.

Trains the ring protocol on a Dirichlet-partitioned synthetic task, builds
three global models from the result (backbone probe head, stacked integrator
over cached head outputs, and a gated mixture of heads), and reports their
accuracy on the union of client test sets next to a single model trained
end to end on the pooled data with a matched sample-visit budget.
"""
from __future__ import annotations

import argparse

import numpy as np

import looptrain as lt
from looptrain.nn import mlp_spec
from looptrain.protocol import (
    NodeState,
    Schedule,
    configure_node_optimizers,
    train_full_model,
)
from looptrain.seeding import child_seed

WIDTHS = [20, 64, 32, 10]
SPLIT = 2
CLIENTS = 5


def run_seed(seed: int, rounds: int) -> dict[str, float]:
    ds = lt.gen_blobs(lt.SyntheticSpec(
        num_classes=10, dims=20, samples_per_class=40, cluster_spread=1.0,
        inter_cluster_scale=3.0, mean_rank=4, nuisance_spread=4.0,
        seed=child_seed(seed, "data")))
    plan = lt.partition_dirichlet(ds, lt.HeterogeneityConfig(
        "dirichlet", CLIENTS, child_seed(seed, "part"), beta=1.0))
    plan = lt.split_local_train_test(plan, 0.5, child_seed(seed, "split"),
                                     labels=ds.labels)
    spec = mlp_spec(WIDTHS, SPLIT)
    sched = Schedule(rounds=rounds, batch_size=5)

    nodes = lt.make_nodes(spec, plan, ds, seed)
    configure_node_optimizers(nodes, sched)
    result = lt.run_li(nodes, lt.make_backbone(spec, seed, sched), spec, sched)
    lt.fine_tune_heads(result.backbone, result.nodes, spec, sched)
    backbone = result.backbone.params
    heads = [node.head for node in result.nodes]

    tr = np.concatenate(plan.train)
    te = np.concatenate(plan.test)
    trx, trn_y = ds.features[tr], ds.labels[tr]
    tex, tey = ds.features[te], ds.labels[te]
    gseed = child_seed(seed, "gm")

    out = {"probe": lt.probe_backbone(spec, backbone, trx, trn_y, tex, tey,
                                      sched, gseed, epochs=40)}

    prov = np.concatenate([np.full(len(ix), c) for c, ix in enumerate(plan.train)])
    cache = lt.collect_head_outputs(spec, backbone, heads, trx, trn_y, prov)
    stacked = lt.train_integrator(cache, spec, backbone, heads, 10, sched,
                                  gseed, epochs=20, lr=1e-3)
    out["stacked"] = float(np.mean(lt.predict_stacked(stacked, tex) == tey))

    gate = lt.train_gating(spec, backbone, heads, trx, trn_y, sched, gseed,
                           epochs=20, lr=1e-3)
    out["moe"] = float(np.mean(lt.predict_moe(gate, tex) == tey))

    # pooled baseline with a backbone sample-visit budget matched to the
    # ring run: 4 backbone epochs per node visit over 1/5 of the data equals
    # 4 pooled epochs per round
    model = lt.make_full_model(spec, seed, sched)
    pooled = NodeState(-1, model.head, model.head_opt, trx, trn_y, tex, tey,
                       "softmax_ce", child_seed(seed, "pooled-batches"))
    for rnd in range(1, sched.rounds + 1):
        model = train_full_model(model, pooled, spec, sched, rnd, 4)
    out["pooled"] = lt.evaluate_accuracy(spec, model.backbone, model.head,
                                         tex, tey)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--rounds", type=int, default=30)
    args = parser.parse_args()

    columns = ("probe", "stacked", "moe", "pooled")
    stats = {c: [] for c in columns}
    for seed in range(args.seeds):
        out = run_seed(seed, args.rounds)
        for c in columns:
            stats[c].append(out[c])
        print(f"seed {seed}: " + "  ".join(f"{c} {out[c]:.3f}" for c in columns))

    print("\nmeans: " + "  ".join(
        f"{c} {np.mean(stats[c]):.4f}" for c in columns))


if __name__ == "__main__":
    main()
