"""Experiment runner: config in, metrics.csv / summary.json out."""
from __future__ import annotations

import csv
import json
import os
import shutil
import time
from dataclasses import dataclass

import numpy as np

from . import data, ensemble, protocol, ring
from .config import ExperimentConfig
from .nn import LrPolicy, mlp_spec
from .protocol import (
    CommMeter,
    RunResult,
    Schedule,
    VisitRecord,
    fine_tune_heads,
    make_backbone,
    make_full_model,
    make_nodes,
    run_fedavg,
    run_isolated,
    run_li,
    run_per_batch_ring,
)
from .seeding import child_seed

OUTPUT_ROOT_ENV = "LOOPTRAIN_OUTPUT_ROOT"

METRICS_HEADER = [
    "round", "node_id", "phase", "local_test_accuracy", "loss",
    "lr_head", "lr_backbone", "parameters_sent", "wall_ms",
]


def build_schedule(cfg: ExperimentConfig) -> Schedule:
    sc = cfg.schedule
    e_full = 0 if cfg.strategy == "li_no_optional" else sc.e_full
    return Schedule(
        rounds=sc.rounds, e_head=sc.e_head, e_backbone=sc.e_backbone, e_full=e_full,
        batch_size=sc.batch_size,
        head_lr=LrPolicy(sc.head_lr, sc.lr_gamma, sc.lr_period),
        backbone_lr=LrPolicy(sc.backbone_lr, sc.lr_gamma, sc.lr_period),
        fine_tune_epochs=sc.fine_tune_epochs, fine_tune_lr=sc.fine_tune_lr,
        head_warmup_epochs=sc.head_warmup_epochs,
        optimizer=sc.optimizer, weight_decay=sc.weight_decay,
    )


def build_dataset(cfg: ExperimentConfig) -> data.Dataset:
    d = cfg.dataset
    seed = child_seed(cfg.seed, "data")
    if d.kind == "blobs":
        return data.gen_blobs(data.SyntheticSpec(
            num_classes=d.num_classes, dims=d.dims, samples_per_class=d.samples_per_class,
            cluster_spread=d.cluster_spread, inter_cluster_scale=d.inter_cluster_scale,
            mean_rank=d.mean_rank, nuisance_spread=d.nuisance_spread, seed=seed))
    if d.kind == "multi_attribute":
        return data.gen_multi_attribute(d.tasks, d.dims, d.samples, seed,
                                        shared_rank=d.shared_rank, label_noise=d.label_noise,
                                        nuisance_spread=d.nuisance_spread,
                                        latent_margin=d.latent_margin)
    return data.load_idx(d.images, d.labels)


def build_partition(cfg: ExperimentConfig, ds: data.Dataset) -> data.PartitionPlan:
    h = cfg.heterogeneity
    seed = child_seed(cfg.seed, "partition")
    if cfg.dataset.kind == "multi_attribute" or h.scheme == "even":
        plan = data.partition_even(ds, h.clients, seed)
    elif h.scheme == "pathological":
        plan = data.partition_pathological(ds, data.HeterogeneityConfig(
            "pathological", h.clients, seed, k_classes=h.classes_per_client))
    else:
        plan = data.partition_dirichlet(ds, data.HeterogeneityConfig(
            "dirichlet", h.clients, seed, beta=h.beta))
    labels = ds.labels if ds.labels.ndim == 1 else None
    return data.split_local_train_test(plan, cfg.test_fraction,
                                       child_seed(cfg.seed, "split"), labels=labels)


def _mtl_nodes(cfg: ExperimentConfig, ds: data.Dataset, plan, spec, schedule):
    """Task nodes: each part of the data keeps only its task's label column."""
    nodes = make_nodes(spec, plan, ds, cfg.seed, loss_kind="sigmoid_bce")
    for node in nodes:
        node.train_y = node.train_y[:, node.node_id:node.node_id + 1]
        node.test_y = node.test_y[:, node.node_id:node.node_id + 1]
    return nodes


@dataclass
class ExperimentOutput:
    result: RunResult
    summary: dict
    output_dir: str


def _pooled(ds, plan):
    tr = np.concatenate(plan.train)
    te = np.concatenate(plan.test)
    return ds.features[tr], ds.labels[tr], ds.features[te], ds.labels[te]


def run_experiment(cfg: ExperimentConfig, write_files: bool = True) -> ExperimentOutput:
    out_dir = resolve_output_dir(cfg.output_dir)
    if write_files:
        os.makedirs(out_dir, exist_ok=True)
    try:
        return _run_experiment_inner(cfg, out_dir, write_files)
    except Exception:
        if write_files:
            shutil.rmtree(out_dir, ignore_errors=True)  # no silent partial output
        raise


def resolve_output_dir(output_dir: str) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return os.path.join(root, output_dir)
    return output_dir


def _run_experiment_inner(cfg: ExperimentConfig, out_dir: str, write_files: bool) -> ExperimentOutput:
    t0 = time.perf_counter()
    schedule = build_schedule(cfg)
    ds = build_dataset(cfg)
    plan = build_partition(cfg, ds)
    spec = mlp_spec(list(cfg.model.widths), cfg.model.split_index)
    loss_kind = "sigmoid_bce" if cfg.strategy == "mtl_li" else "softmax_ce"
    if cfg.strategy == "mtl_li":
        nodes = _mtl_nodes(cfg, ds, plan, spec, schedule)
    else:
        nodes = make_nodes(spec, plan, ds, cfg.seed, loss_kind=loss_kind)
    protocol.configure_node_optimizers(nodes, schedule)
    meter = CommMeter()
    faults = ring.FaultScript.load(cfg.fault_script) if cfg.fault_script else None

    if cfg.strategy in ("li", "li_no_optional", "mtl_li"):
        backbone = make_backbone(spec, cfg.seed, schedule)
        if schedule.head_warmup_epochs > 0:
            fine_tune_heads(backbone, nodes, spec, schedule,
                            epochs=schedule.head_warmup_epochs)
        result = run_li(nodes, backbone, spec, schedule, faults=faults, meter=meter)
        if schedule.fine_tune_epochs > 0:
            fine_tune_heads(result.backbone, result.nodes, spec, schedule)
            for node in result.nodes:
                result.final_accuracy[node.node_id] = protocol.evaluate_accuracy(
                    spec, result.backbone.params, node.head,
                    node.test_x, node.test_y, node.loss_kind)
    elif cfg.strategy == "fedavg":
        model = make_full_model(spec, cfg.seed, schedule)
        result = run_fedavg(nodes, model, spec, schedule, meter=meter)
    elif cfg.strategy == "isolated":
        backbone = make_backbone(spec, cfg.seed, schedule)
        result = run_isolated(nodes, backbone, spec, schedule)
    elif cfg.strategy == "per_batch_ring":
        model = make_full_model(spec, cfg.seed, schedule)
        result = run_per_batch_ring(nodes, model, spec, schedule, meter=meter)
    else:
        raise ValueError(f"unhandled strategy {cfg.strategy!r}")

    summary = {
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "clients": len(result.nodes),
        "rounds": schedule.rounds,
        "client_accuracy": {str(k): v for k, v in sorted(result.final_accuracy.items())},
        "mean_accuracy": result.mean_final_accuracy(),
        "comm": {
            "parameters_sent": result.meter.parameters_sent,
            "optimizer_state_sent": result.meter.optimizer_state_sent,
            "messages_sent": result.meter.messages_sent,
            "head_parameters_sent": result.meter.head_parameters_sent,
        },
        "wrapped": [
            {"round": r, "hop": h, "wrap_points": sorted(w)} for r, h, w in result.wraps
        ],
        "max_partitions": result.partitions_seen,
        "unreachable": {str(k): v for k, v in result.unreachable.items()},
    }

    # global-model constructions need the ring-trained backbone and per-node
    # heads, so they only apply to the single-label ring strategies
    if cfg.strategy in ("li", "li_no_optional") and (
            cfg.global_model.probe or cfg.global_model.stacked or cfg.global_model.moe):
        summary["global_model"] = _global_model_stages(cfg, ds, plan, spec, schedule, result)

    summary["wall_s"] = round(time.perf_counter() - t0, 3)

    if write_files:
        emit_metrics(result.records, os.path.join(out_dir, "metrics.csv"))
        with open(os.path.join(out_dir, "summary.json"), "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(out_dir, "config.json"), "w") as f:
            f.write(cfg.dumps())
    return ExperimentOutput(result, summary, out_dir)


def _global_model_stages(cfg, ds, plan, spec, schedule, result) -> dict:
    if result.backbone is None:
        raise ValueError("global-model stages require a ring-trained backbone")
    tr_x, tr_y, te_x, te_y = _pooled(ds, plan)
    backbone = result.backbone.params
    heads = [node.head for node in result.nodes]
    gseed = child_seed(cfg.seed, "global-model")
    gm: dict = {}
    if cfg.global_model.probe:
        gm["probe_accuracy"] = ensemble.probe_backbone(
            spec, backbone, tr_x, tr_y, te_x, te_y, schedule,
            gseed, epochs=cfg.global_model.epochs)
    if cfg.global_model.stacked:
        prov = np.concatenate([np.full(len(ix), c) for c, ix in enumerate(plan.train)])
        cache = ensemble.collect_head_outputs(spec, backbone, heads, tr_x, tr_y, prov)
        stacked = ensemble.train_integrator(
            cache, spec, backbone, heads, int(ds.num_classes), schedule,
            gseed, epochs=cfg.global_model.epochs, lr=cfg.global_model.lr)
        pred = ensemble.predict_stacked(stacked, te_x)
        gm["stacked_accuracy"] = float(np.mean(pred == te_y))
    if cfg.global_model.moe:
        gate = ensemble.train_gating(spec, backbone, heads, tr_x, tr_y, schedule,
                                     gseed, epochs=cfg.global_model.epochs,
                                     lr=cfg.global_model.lr)
        pred = ensemble.predict_moe(gate, te_x)
        gm["moe_accuracy"] = float(np.mean(pred == te_y))
    return gm


def emit_metrics(records: list[VisitRecord], path: str):
    """Fixed header, floats at 6 significant digits, newline-terminated."""
    if not records:
        raise ValueError("no records to emit")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow([
                r.round, r.node_id, r.phase,
                f"{r.accuracy:.6g}",
                f"{r.loss:.6g}", f"{r.lr_head:.6g}", f"{r.lr_backbone:.6g}",
                r.parameters_sent, f"{r.wall_ms:.6g}",
            ])


def report_client_deltas(li_summary: dict, iso_summary: dict, csv_path: str | None = None):
    """Per-client accuracy improvement of ring training over isolation."""
    li_acc = li_summary["client_accuracy"]
    iso_acc = iso_summary["client_accuracy"]
    if set(li_acc) != set(iso_acc):
        raise ValueError("client sets differ between the two summaries")
    rows = []
    for client in sorted(li_acc, key=int):
        rows.append({
            "client": int(client),
            "accuracy_ring": li_acc[client],
            "accuracy_isolated": iso_acc[client],
            "delta": li_acc[client] - iso_acc[client],
        })
    mean_delta = float(np.mean([r["delta"] for r in rows]))
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["client", "accuracy_ring",
                                                   "accuracy_isolated", "delta"])
            writer.writeheader()
            writer.writerows(rows)
    return rows, mean_delta


def run_optional_step_ablation(cfg: ExperimentConfig, write_files: bool = True) -> dict:
    """Paired runs with and without the joint-training phase.

    Both arms share partitions and initial parameters; the arm without the
    extra phase runs proportionally more rounds so total epochs match.
    The difference is reported, not asserted.
    """
    import copy as _copy

    if cfg.strategy not in ("li", "li_no_optional"):
        raise ValueError("ablation applies to the ring strategy")
    with_cfg = _copy.deepcopy(cfg)
    with_cfg.strategy = "li"
    if with_cfg.schedule.e_full == 0:
        with_cfg.schedule.e_full = 2
    with_cfg.global_model.stacked = True
    with_cfg.output_dir = os.path.join(cfg.output_dir, "with_optional")

    without_cfg = _copy.deepcopy(with_cfg)
    without_cfg.strategy = "li_no_optional"
    sc = with_cfg.schedule
    scale = (sc.e_head + sc.e_backbone + sc.e_full) / max(1, sc.e_head + sc.e_backbone)
    without_cfg.schedule.rounds = max(1, round(sc.rounds * scale))
    without_cfg.output_dir = os.path.join(cfg.output_dir, "without_optional")

    with_out = run_experiment(with_cfg, write_files=write_files)
    without_out = run_experiment(without_cfg, write_files=write_files)
    wg = with_out.summary.get("global_model", {}).get("stacked_accuracy")
    wog = without_out.summary.get("global_model", {}).get("stacked_accuracy")
    report = {
        "with_optional": with_out.summary,
        "without_optional": without_out.summary,
        "global_accuracy_with": wg,
        "global_accuracy_without": wog,
        "signed_difference": None if wg is None or wog is None else wg - wog,
    }
    if write_files:
        out_dir = resolve_output_dir(cfg.output_dir)
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "ablation.json"), "w") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
    return report
