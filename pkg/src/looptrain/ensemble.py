"""Global-model constructions over a frozen backbone and frozen heads.

Three routes to a single global predictor: stacking every head's logits
into an integrating network, a mixture-of-experts gate over the heads'
probability outputs, and a linear-probe measurement of backbone quality.
None of these ever update the backbone or the heads.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .nn import (
    BACKBONE,
    HEAD,
    ModelSpec,
    ParamSet,
    apply_update,
    backward_masked,
    forward_split,
    init_optimizer,
    init_params,
    loss_softmax_ce,
    mlp_spec,
)
from .protocol import Schedule, _batches, lr_at_round
from .seeding import child_rng, child_seed


@dataclass
class FeatureCache:
    rows: np.ndarray        # (N, C * head_dim)
    labels: np.ndarray
    provenance: np.ndarray  # client index each sample came from

    def to_csv(self, path: str):
        width = self.rows.shape[1]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f"h{i}" for i in range(width)] + ["label", "provenance"])
            for row, lab, prov in zip(self.rows, self.labels, self.provenance):
                writer.writerow([f"{v:.17g}" for v in row] + [int(lab), int(prov)])


@dataclass
class StackedEnsemble:
    spec: ModelSpec
    backbone: ParamSet
    heads: list[ParamSet]
    integrator_spec: ModelSpec
    integrator_backbone: ParamSet
    integrator_head: ParamSet


@dataclass
class GatingEnsemble:
    spec: ModelSpec
    backbone: ParamSet
    heads: list[ParamSet]
    gate_spec: ModelSpec
    gate_backbone: ParamSet
    gate_head: ParamSet


def _head_logits(spec: ModelSpec, head: ParamSet, features: np.ndarray) -> np.ndarray:
    a = features
    for i in spec.segment_ids(HEAD):
        w, b = head.entries[i]
        z = a @ w + b
        a = np.maximum(z, 0.0) if spec.layers[i].activation == "relu" else z
    return a


def _backbone_features(spec: ModelSpec, backbone: ParamSet, x: np.ndarray) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    for i in spec.segment_ids(BACKBONE):
        w, b = backbone.entries[i]
        z = a @ w + b
        a = np.maximum(z, 0.0) if spec.layers[i].activation == "relu" else z
    return a


def collect_head_outputs(
    spec: ModelSpec,
    backbone: ParamSet,
    heads: list[ParamSet],
    x: np.ndarray,
    labels: np.ndarray,
    provenance: np.ndarray | None = None,
) -> FeatureCache:
    """Backbone features computed once per sample, every head's logits
    concatenated in client-index order."""
    if len({h.entries[max(h.entries)][1].shape[0] for h in heads}) != 1:
        raise ValueError("all heads must share an output width")
    feats = _backbone_features(spec, backbone, x)
    rows = np.hstack([_head_logits(spec, h, feats) for h in heads])
    if provenance is None:
        provenance = np.full(len(x), -1, dtype=np.int64)
    return FeatureCache(rows, np.asarray(labels), np.asarray(provenance))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _train_small_net(
    net_spec: ModelSpec,
    backbone: ParamSet,
    head: ParamSet,
    x: np.ndarray,
    y: np.ndarray,
    schedule: Schedule,
    epochs: int,
    seed: int,
    lr: float,
):
    """Plain supervised training of a small standalone network."""
    opt_b = init_optimizer(backbone, schedule.optimizer, schedule.weight_decay)
    opt_h = init_optimizer(head, schedule.optimizer, schedule.weight_decay)
    for epoch in range(epochs):
        rng = np.random.default_rng(child_seed(seed, f"epoch-{epoch}"))
        for idx in _batches(len(x), schedule.batch_size, rng):
            _, logits = forward_split(net_spec, backbone, head, x[idx])
            _, dlogits = loss_softmax_ce(logits, y[idx])
            grads = backward_masked(net_spec, backbone, head, x[idx], dlogits, "both")
            head, opt_h = apply_update(head, grads[HEAD], opt_h, lr)
            backbone, opt_b = apply_update(backbone, grads[BACKBONE], opt_b, lr)
    return backbone, head


def train_integrator(
    cache: FeatureCache,
    spec: ModelSpec,
    backbone: ParamSet,
    heads: list[ParamSet],
    num_classes: int,
    schedule: Schedule,
    seed: int,
    epochs: int = 20,
    hidden: int | None = None,
    lr: float = 1e-3,
) -> StackedEnsemble:
    """Train only the integrating network on shuffled pooled cache rows."""
    if len(cache.rows) == 0:
        raise ValueError("empty feature cache")
    in_dim = cache.rows.shape[1]
    hidden = hidden or 4 * num_classes
    ispec = mlp_spec([in_dim, hidden, num_classes], split_index=1)
    ib = init_params(ispec, BACKBONE, child_rng(seed, "integrator-backbone"))
    ih = init_params(ispec, HEAD, child_rng(seed, "integrator-head"))
    ib, ih = _train_small_net(ispec, ib, ih, cache.rows, cache.labels,
                              schedule, epochs, child_seed(seed, "integrator-batches"), lr)
    return StackedEnsemble(spec, backbone, heads, ispec, ib, ih)


def stacked_rows(ensemble: StackedEnsemble, x: np.ndarray) -> np.ndarray:
    feats = _backbone_features(ensemble.spec, ensemble.backbone, x)
    return np.hstack([_head_logits(ensemble.spec, h, feats) for h in ensemble.heads])


def predict_stacked(ensemble: StackedEnsemble, x: np.ndarray) -> np.ndarray:
    """Argmax of the integrator over concatenated head logits (lowest-index ties)."""
    rows = stacked_rows(ensemble, x)
    _, logits = forward_split(ensemble.integrator_spec, ensemble.integrator_backbone,
                              ensemble.integrator_head, rows)
    return np.argmax(logits, axis=1)


def gate_weights(ensemble: GatingEnsemble, x: np.ndarray) -> np.ndarray:
    feats = _backbone_features(ensemble.spec, ensemble.backbone, x)
    _, logits = forward_split(ensemble.gate_spec, ensemble.gate_backbone,
                              ensemble.gate_head, feats)
    return _softmax(logits)


def moe_mixture(ensemble: GatingEnsemble, x: np.ndarray) -> np.ndarray:
    """Convex combination of the experts' probability outputs."""
    feats = _backbone_features(ensemble.spec, ensemble.backbone, x)
    _, glogits = forward_split(ensemble.gate_spec, ensemble.gate_backbone,
                               ensemble.gate_head, feats)
    w = _softmax(glogits)
    experts = np.stack([_softmax(_head_logits(ensemble.spec, h, feats))
                        for h in ensemble.heads])  # (C, N, K)
    return np.einsum("nc,cnk->nk", w, experts)


def train_gating(
    spec: ModelSpec,
    backbone: ParamSet,
    heads: list[ParamSet],
    x: np.ndarray,
    y: np.ndarray,
    schedule: Schedule,
    seed: int,
    epochs: int = 20,
    hidden: int = 32,
    lr: float = 1e-3,
) -> GatingEnsemble:
    """Only the gating network trains; loss is cross-entropy of the mixture."""
    c = len(heads)
    feat_dim = spec.feature_dim
    gspec = mlp_spec([feat_dim, hidden, c], split_index=1)
    gb = init_params(gspec, BACKBONE, child_rng(seed, "gate-backbone"))
    gh = init_params(gspec, HEAD, child_rng(seed, "gate-head"))
    opt_b = init_optimizer(gb, schedule.optimizer, schedule.weight_decay)
    opt_h = init_optimizer(gh, schedule.optimizer, schedule.weight_decay)
    feats = _backbone_features(spec, backbone, x)
    expert_probs = np.stack([_softmax(_head_logits(spec, h, feats)) for h in heads])  # (C, N, K)
    y = np.asarray(y, dtype=np.int64)
    for epoch in range(epochs):
        rng = np.random.default_rng(child_seed(seed, f"gate-epoch-{epoch}"))
        for idx in _batches(len(x), schedule.batch_size, rng):
            fb = feats[idx]
            _, glogits = forward_split(gspec, gb, gh, fb)
            w = _softmax(glogits)                       # (B, C)
            pe = expert_probs[:, idx, :]                # (C, B, K)
            mix = np.einsum("bc,cbk->bk", w, pe)
            n = len(idx)
            p_true = pe[:, np.arange(n), y[idx]].T      # (B, C)
            mix_true = np.maximum(mix[np.arange(n), y[idx]], 1e-300)
            dw = -(p_true / mix_true[:, None]) / n
            # softmax jacobian back to gate logits
            dglogits = w * (dw - (dw * w).sum(axis=1, keepdims=True))
            grads = backward_masked(gspec, gb, gh, fb, dglogits, "both")
            gh, opt_h = apply_update(gh, grads[HEAD], opt_h, lr)
            gb, opt_b = apply_update(gb, grads[BACKBONE], opt_b, lr)
    return GatingEnsemble(spec, backbone, heads, gspec, gb, gh)


def predict_moe(ensemble: GatingEnsemble, x: np.ndarray) -> np.ndarray:
    return np.argmax(moe_mixture(ensemble, x), axis=1)


def probe_backbone(
    spec: ModelSpec,
    backbone: ParamSet,
    train_x: np.ndarray,
    train_y: np.ndarray,
    test_x: np.ndarray,
    test_y: np.ndarray,
    schedule: Schedule,
    seed: int,
    epochs: int = 20,
    lr: float | None = None,
) -> float:
    """Freeze the backbone, train a fresh head on pooled data, return
    pooled-test accuracy."""
    from .protocol import NodeState, _train_epochs  # local import avoids a cycle

    head = init_params(spec, HEAD, child_rng(seed, "probe-head"))
    probe_node = NodeState(
        node_id=-1, head=head,
        head_opt=init_optimizer(head, schedule.optimizer, schedule.weight_decay),
        train_x=np.asarray(train_x), train_y=np.asarray(train_y),
        test_x=np.asarray(test_x), test_y=np.asarray(test_y),
        loss_kind="softmax_ce", batch_seed=child_seed(seed, "probe-batches"),
    )
    # fresh-head probes need a working rate; the per-round head rate is
    # sized for incremental updates, not training from scratch
    lr = lr if lr is not None else schedule.fine_tune_lr
    _, _, probe_node.head, probe_node.head_opt, _ = _train_epochs(
        spec, backbone, init_optimizer(backbone, "sgd"), probe_node,
        epochs, "head_only", lr, 0.0, schedule.batch_size)
    feats = _backbone_features(spec, backbone, test_x)
    logits = _head_logits(spec, probe_node.head, feats)
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(test_y)))
