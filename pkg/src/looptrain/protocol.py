"""Ring training engine: two-phase node visits, baselines, comm metering.

One shared backbone circulates the ring as a token. At each node the head
is trained first with the backbone frozen, then the backbone with the head
frozen, then optionally both together. Heads never leave their node.
"""
from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn, ring
from .nn import (
    BACKBONE,
    HEAD,
    LrPolicy,
    ModelSpec,
    OptimizerState,
    ParamSet,
    apply_update,
    backward_masked,
    forward_split,
    init_optimizer,
    init_params,
    loss_sigmoid_bce,
    loss_softmax_ce,
    lr_at_round,
)
from .seeding import child_rng, child_seed


class EmptyDataError(ValueError):
    pass


@dataclass
class Schedule:
    rounds: int = 30
    e_head: int = 2
    e_backbone: int = 2
    e_full: int = 2
    batch_size: int = 10
    head_lr: LrPolicy = field(default_factory=lambda: LrPolicy(1e-4, 0.5, 10))
    backbone_lr: LrPolicy = field(default_factory=lambda: LrPolicy(4e-4, 0.5, 10))
    fine_tune_epochs: int = 6
    fine_tune_lr: float = 1e-2
    head_warmup_epochs: int = 0
    optimizer: str = "adamw"
    weight_decay: float = 0.1
    reset_backbone_optimizer_per_node: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if min(self.e_head, self.e_backbone, self.e_full,
               self.fine_tune_epochs, self.head_warmup_epochs) < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def local_epochs(self) -> int:
        """Per-round budget for full-model baselines, matched to a visit."""
        return max(1, self.e_head + self.e_backbone + self.e_full)


@dataclass
class NodeState:
    node_id: int
    head: ParamSet
    head_opt: OptimizerState
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    loss_kind: str = "softmax_ce"
    batch_seed: int = 0
    epochs_done: int = 0  # advances the node's private batch-order stream


@dataclass
class SharedBackbone:
    params: ParamSet
    opt: OptimizerState
    round_stamp: int = 0
    hop_count: int = 0

    def copy(self) -> "SharedBackbone":
        return SharedBackbone(self.params.copy(), self.opt.copy(), self.round_stamp, self.hop_count)


@dataclass
class CommMeter:
    parameters_sent: int = 0
    optimizer_state_sent: int = 0
    messages_sent: int = 0
    head_parameters_sent: int = 0
    per_round: dict[int, dict[str, int]] = field(default_factory=dict)

    def record(self, rnd: int, n_params: int, n_state: int, n_head: int = 0):
        self.parameters_sent += n_params
        self.optimizer_state_sent += n_state
        self.messages_sent += 1
        self.head_parameters_sent += n_head
        bucket = self.per_round.setdefault(rnd, {"parameters": 0, "state": 0, "messages": 0, "head": 0})
        bucket["parameters"] += n_params
        bucket["state"] += n_state
        bucket["messages"] += 1
        bucket["head"] += n_head


@dataclass
class VisitRecord:
    round: int
    node_id: int
    phase: str
    accuracy: float
    loss: float
    lr_head: float
    lr_backbone: float
    parameters_sent: int
    wall_ms: float


@dataclass
class RunResult:
    strategy: str
    records: list[VisitRecord]
    final_accuracy: dict[int, float]
    nodes: list[NodeState]
    meter: CommMeter
    backbone: SharedBackbone | None = None
    full_model: "FullModel | None" = None
    wraps: list[tuple[int, int, frozenset]] = field(default_factory=list)
    unreachable: dict[int, list[int]] = field(default_factory=dict)
    partitions_seen: int = 1

    def mean_final_accuracy(self) -> float:
        return float(np.mean(list(self.final_accuracy.values())))


@dataclass
class FullModel:
    backbone: ParamSet
    head: ParamSet
    backbone_opt: OptimizerState
    head_opt: OptimizerState

    def copy(self) -> "FullModel":
        return FullModel(self.backbone.copy(), self.head.copy(),
                         self.backbone_opt.copy(), self.head_opt.copy())

    def num_params(self) -> int:
        return self.backbone.num_params() + self.head.num_params()


def make_nodes(
    spec: ModelSpec,
    plan,
    dataset,
    master_seed: int,
    loss_kind: str = "softmax_ce",
) -> list[NodeState]:
    """Build per-client node states (head init + local data views).

    Heads share one initialization: distinct random heads pull the shared
    backbone toward incompatible projections early on, and personalization
    comes from the local training data, not from the starting point.
    """
    common_head = init_params(spec, HEAD, child_rng(master_seed, "head-init"))
    nodes = []
    for c, _ in enumerate(plan.assignments):
        tr, te = plan.train[c], plan.test[c]
        head = common_head.copy()
        nodes.append(NodeState(
            node_id=c,
            head=head,
            head_opt=init_optimizer(head, "adamw", 0.1),
            train_x=dataset.features[tr],
            train_y=dataset.labels[tr],
            test_x=dataset.features[te],
            test_y=dataset.labels[te],
            loss_kind=loss_kind,
            batch_seed=child_seed(master_seed, f"batch-{c}"),
        ))
    return nodes


def make_backbone(spec: ModelSpec, master_seed: int, schedule: Schedule) -> SharedBackbone:
    params = init_params(spec, BACKBONE, child_rng(master_seed, "backbone-init"))
    return SharedBackbone(params, init_optimizer(params, schedule.optimizer, schedule.weight_decay))


def configure_node_optimizers(nodes: list[NodeState], schedule: Schedule):
    for node in nodes:
        node.head_opt = init_optimizer(node.head, schedule.optimizer, schedule.weight_decay)
    return nodes


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    if n <= batch_size:
        yield order
        return
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def _loss_and_grad(logits, node: NodeState, idx):
    if node.loss_kind == "softmax_ce":
        return loss_softmax_ce(logits, node.train_y[idx])
    return loss_sigmoid_bce(logits, node.train_y[idx])


def _train_epochs(
    spec: ModelSpec,
    backbone: ParamSet,
    backbone_opt: OptimizerState,
    node: NodeState,
    epochs: int,
    trainable: str,
    lr_head: float,
    lr_backbone: float,
    batch_size: int,
):
    """Mini-batch training of the requested segment(s). Returns the new
    (backbone, backbone_opt, head, head_opt, last_epoch_mean_loss)."""
    head, head_opt = node.head, node.head_opt
    mean_loss = float("nan")
    if epochs == 0:
        return backbone, backbone_opt, head, head_opt, mean_loss
    n = len(node.train_x)
    if n == 0:
        raise EmptyDataError(f"node {node.node_id} has no local training data")
    for _ in range(epochs):
        rng = np.random.default_rng(child_seed(node.batch_seed, f"epoch-{node.epochs_done}"))
        node.epochs_done += 1
        losses = []
        for idx in _batches(n, batch_size, rng):
            _, logits = forward_split(spec, backbone, head, node.train_x[idx])
            loss, dlogits = _loss_and_grad(logits, node, idx)
            losses.append(loss)
            grads = backward_masked(spec, backbone, head, node.train_x[idx], dlogits, trainable)
            if HEAD in grads:
                head, head_opt = apply_update(head, grads[HEAD], head_opt, lr_head)
            if BACKBONE in grads:
                backbone, backbone_opt = apply_update(backbone, grads[BACKBONE], backbone_opt, lr_backbone)
        mean_loss = float(np.mean(losses))
    return backbone, backbone_opt, head, head_opt, mean_loss


def train_head_step(node: NodeState, backbone: SharedBackbone, spec: ModelSpec,
                    schedule: Schedule, rnd: int) -> float:
    """Head-only epochs; the backbone is read-only throughout."""
    _, _, node.head, node.head_opt, loss = _train_epochs(
        spec=spec, backbone=backbone.params, backbone_opt=backbone.opt,
        node=node, epochs=schedule.e_head, trainable="head_only",
        lr_head=lr_at_round(schedule.head_lr, rnd), lr_backbone=0.0,
        batch_size=schedule.batch_size,
    )
    return loss


def train_backbone_step(node: NodeState, backbone: SharedBackbone, spec: ModelSpec,
                        schedule: Schedule, rnd: int) -> float:
    """Backbone epochs supervised through the frozen head."""
    backbone.params, backbone.opt, _, _, loss = _train_epochs(
        spec=spec, backbone=backbone.params, backbone_opt=backbone.opt,
        node=node, epochs=schedule.e_backbone, trainable="backbone_only",
        lr_head=0.0, lr_backbone=lr_at_round(schedule.backbone_lr, rnd),
        batch_size=schedule.batch_size,
    )
    return loss


def train_full_step(node: NodeState, backbone: SharedBackbone, spec: ModelSpec,
                    schedule: Schedule, rnd: int) -> float:
    """Joint epochs; each segment keeps its own optimizer and rate."""
    backbone.params, backbone.opt, node.head, node.head_opt, loss = _train_epochs(
        spec=spec, backbone=backbone.params, backbone_opt=backbone.opt,
        node=node, epochs=schedule.e_full, trainable="both",
        lr_head=lr_at_round(schedule.head_lr, rnd),
        lr_backbone=lr_at_round(schedule.backbone_lr, rnd),
        batch_size=schedule.batch_size,
    )
    return loss


def visit_node(
    node: NodeState,
    backbone: SharedBackbone,
    spec: ModelSpec,
    schedule: Schedule,
    rnd: int,
    trace: list | None = None,
) -> dict[str, float]:
    """One node's training turn: head phase, backbone phase, optional full phase."""
    losses = {}
    phases = [("head", schedule.e_head, train_head_step),
              ("backbone", schedule.e_backbone, train_backbone_step),
              ("full", schedule.e_full, train_full_step)]
    for name, epochs, step in phases:
        if epochs == 0:
            continue
        if trace is not None:
            before = (backbone.params.hash_hex(), node.head.hash_hex())
        losses[name] = step(node, backbone, spec, schedule, rnd)
        if trace is not None:
            after = (backbone.params.hash_hex(), node.head.hash_hex())
            trace.append({
                "round": rnd, "node": node.node_id, "phase": name,
                "backbone_before": before[0], "backbone_after": after[0],
                "head_before": before[1], "head_after": after[1],
            })
    return losses


def evaluate_accuracy(
    spec: ModelSpec, backbone: ParamSet, head: ParamSet, x: np.ndarray, y: np.ndarray,
    loss_kind: str = "softmax_ce",
) -> float:
    """Argmax accuracy (softmax) or threshold-at-0 accuracy (binary).

    np.argmax resolves ties toward the lowest class index.
    """
    if len(x) == 0:
        raise EmptyDataError("empty evaluation set")
    _, logits = forward_split(spec, backbone, head, x)
    if loss_kind == "softmax_ce":
        pred = np.argmax(logits, axis=1)
        return float(np.mean(pred == np.asarray(y)))
    pred = (logits > 0).astype(np.float64)
    return float(np.mean(pred == np.asarray(y)))


@dataclass
class _Token:
    backbone: SharedBackbone
    members: frozenset
    node: int  # holder: last node visited


def _reconcile_tokens(tokens: list[_Token], view: ring.RouteView) -> list[_Token]:
    if not view.components:
        return tokens
    out = []
    for comp in view.components:
        cs = frozenset(comp)
        holders = [t for t in tokens if t.node in cs]
        if holders:
            # on heal, the copy held by the component with the lowest node
            # id wins; the other copies are discarded
            winner = min(holders, key=lambda t: min(t.members))
            winner.members = cs
            out.append(winner)
        else:
            donors = [t for t in tokens if t.members & cs] or tokens
            donor = min(donors, key=lambda t: min(t.members))
            out.append(_Token(donor.backbone.copy(), cs, comp[-1]))
    return out


def run_li(
    nodes: list[NodeState],
    backbone: SharedBackbone,
    spec: ModelSpec,
    schedule: Schedule,
    topology: ring.RingTopology | None = None,
    faults: ring.FaultScript | None = None,
    meter: CommMeter | None = None,
    trace: list | None = None,
) -> RunResult:
    """Ring protocol: the backbone token visits every reachable node once
    per round; splits train divergent copies, heals merge lowest-id-first."""
    if schedule.e_backbone < 1:
        raise ValueError("ring training requires e_backbone >= 1")
    nodes = copy.deepcopy(nodes)
    by_id = {n.node_id: n for n in nodes}
    topo = topology or ring.RingTopology.healthy(len(nodes))
    if topo.num_nodes != len(nodes):
        raise ValueError("topology size does not match node count")
    meter = meter if meter is not None else CommMeter()
    events = list(faults.events) if faults else []
    ev_idx = 0
    token0 = _Token(backbone.copy(), frozenset(by_id), max(by_id))
    tokens = [token0]
    records: list[VisitRecord] = []
    wraps: list[tuple[int, int, frozenset]] = []
    unreachable: dict[int, list[int]] = {}
    partitions_seen = 1
    state_size = token0.backbone.opt.num_scalars() if schedule.optimizer == "adamw" else 1
    n_params = token0.backbone.params.num_params()
    start = time.perf_counter()

    for rnd in range(1, schedule.rounds + 1):
        hop = 0
        visited: set[int] = set()
        last_wraps: frozenset | None = None
        while True:
            while ev_idx < len(events) and (events[ev_idx].round, events[ev_idx].hop) <= (rnd, hop):
                topo = ring.apply_fault_event(topo, events[ev_idx])
                ev_idx += 1
            view = ring.reconfigure(topo)
            tokens = _reconcile_tokens(tokens, view)
            partitions_seen = max(partitions_seen, ring.detect_partitions(view))
            active_wraps = frozenset().union(*view.wrap_points) if view.wrap_points else frozenset()
            if active_wraps and active_wraps != last_wraps:
                wraps.append((rnd, hop, active_wraps))
            last_wraps = active_wraps
            comp = next((c for c in view.components if any(n not in visited for n in c)), None)
            if comp is None:
                break
            token = next(t for t in tokens if t.members == frozenset(comp))
            pos = comp.index(token.node) if token.node in comp else len(comp) - 1
            target = next(comp[(pos + 1 + k) % len(comp)] for k in range(len(comp))
                          if comp[(pos + 1 + k) % len(comp)] not in visited)
            node = by_id[target]
            t0 = time.perf_counter()
            if schedule.reset_backbone_optimizer_per_node:
                token.backbone.opt = init_optimizer(
                    token.backbone.params, schedule.optimizer, schedule.weight_decay)
            losses = visit_node(node, token.backbone, spec, schedule, rnd, trace)
            meter.record(rnd, n_params, state_size, 0)
            token.backbone.hop_count += 1
            token.node = target
            visited.add(target)
            acc = evaluate_accuracy(spec, token.backbone.params, node.head,
                                    node.test_x, node.test_y, node.loss_kind)
            records.append(VisitRecord(
                round=rnd, node_id=target, phase="visit", accuracy=acc,
                loss=losses.get("backbone", float("nan")),
                lr_head=lr_at_round(schedule.head_lr, rnd),
                lr_backbone=lr_at_round(schedule.backbone_lr, rnd),
                parameters_sent=meter.parameters_sent,
                wall_ms=(time.perf_counter() - t0) * 1000.0,
            ))
            hop += 1
        down = [i for i in by_id if i not in visited]
        if down:
            unreachable[rnd] = down
        for token in tokens:
            token.backbone.round_stamp = rnd

    # final accuracies use the backbone of each node's current component
    view = ring.reconfigure(topo)
    tokens = _reconcile_tokens(tokens, view)
    main = min(tokens, key=lambda t: min(t.members))
    final = {}
    for node in nodes:
        token = next((t for t in tokens if node.node_id in t.members), main)
        final[node.node_id] = evaluate_accuracy(
            spec, token.backbone.params, node.head, node.test_x, node.test_y, node.loss_kind)
    _ = time.perf_counter() - start
    return RunResult(
        strategy="li", records=records, final_accuracy=final, nodes=nodes,
        meter=meter, backbone=main.backbone, wraps=wraps,
        unreachable=unreachable, partitions_seen=partitions_seen,
    )


def fine_tune_heads(
    backbone: SharedBackbone, nodes: list[NodeState], spec: ModelSpec,
    schedule: Schedule, epochs: int | None = None, lr: float | None = None,
) -> list[NodeState]:
    """Extra head-only epochs on each node against the frozen backbone.

    Heads go stale between a node's last visit and the end of the run;
    the dedicated fine-tune rate is much larger than the per-round head
    rate so six epochs actually re-align the head to the final backbone.
    """
    epochs = schedule.fine_tune_epochs if epochs is None else epochs
    lr = schedule.fine_tune_lr if lr is None else lr
    for node in nodes:
        _, _, node.head, node.head_opt, _ = _train_epochs(
            spec, backbone.params, backbone.opt, node, epochs, "head_only",
            lr, 0.0, schedule.batch_size)
    return nodes


def make_full_model(spec: ModelSpec, master_seed: int, schedule: Schedule) -> FullModel:
    backbone = init_params(spec, BACKBONE, child_rng(master_seed, "backbone-init"))
    head = init_params(spec, HEAD, child_rng(master_seed, "shared-head-init"))
    return FullModel(
        backbone, head,
        init_optimizer(backbone, schedule.optimizer, schedule.weight_decay),
        init_optimizer(head, schedule.optimizer, schedule.weight_decay),
    )


def train_full_model(
    model: FullModel, node: NodeState, spec: ModelSpec, schedule: Schedule,
    rnd: int, epochs: int,
) -> FullModel:
    """Plain local training of a full model (both segments), segment-wise rates."""
    saved_head, saved_opt = node.head, node.head_opt
    node.head, node.head_opt = model.head, model.head_opt
    try:
        backbone, backbone_opt, head, head_opt, _ = _train_epochs(
            spec, model.backbone, model.backbone_opt, node, epochs, "both",
            lr_at_round(schedule.head_lr, rnd), lr_at_round(schedule.backbone_lr, rnd),
            schedule.batch_size)
    finally:
        node.head, node.head_opt = saved_head, saved_opt
    return FullModel(backbone, head, backbone_opt, head_opt)


def average_params(param_sets: list[ParamSet], weights: list[float]) -> ParamSet:
    """Weighted elementwise mean; weights are normalized."""
    total = float(sum(weights))
    entries = {}
    for i in param_sets[0].entries:
        w = sum((wt / total) * ps.entries[i][0] for ps, wt in zip(param_sets, weights))
        b = sum((wt / total) * ps.entries[i][1] for ps, wt in zip(param_sets, weights))
        entries[i] = (w, b)
    return ParamSet(param_sets[0].segment, entries)


def run_fedavg(
    nodes: list[NodeState],
    model: FullModel,
    spec: ModelSpec,
    schedule: Schedule,
    meter: CommMeter | None = None,
) -> RunResult:
    """Server-style baseline: broadcast, local training, weighted averaging."""
    nodes = copy.deepcopy(nodes)
    meter = meter if meter is not None else CommMeter()
    model = model.copy()
    n_full = model.num_params()
    locals_: dict[int, FullModel] = {n.node_id: model.copy() for n in nodes}
    records = []
    for rnd in range(1, schedule.rounds + 1):
        trained, weights = [], []
        for node in nodes:
            if len(node.train_x) == 0:
                raise EmptyDataError(f"client {node.node_id} has no training data")
            meter.record(rnd, n_full, 0)  # broadcast down
            local = locals_[node.node_id]
            local.backbone, local.head = model.backbone.copy(), model.head.copy()
            locals_[node.node_id] = train_full_model(local, node, spec, schedule, rnd,
                                                     schedule.local_epochs)
            meter.record(rnd, n_full, 0)  # upload
            trained.append(locals_[node.node_id])
            weights.append(float(len(node.train_x)))
        model.backbone = average_params([m.backbone for m in trained], weights)
        model.head = average_params([m.head for m in trained], weights)
        for node in nodes:
            acc = evaluate_accuracy(spec, model.backbone, model.head,
                                    node.test_x, node.test_y, node.loss_kind)
            records.append(VisitRecord(rnd, node.node_id, "fedavg", acc, float("nan"),
                                       lr_at_round(schedule.head_lr, rnd),
                                       lr_at_round(schedule.backbone_lr, rnd),
                                       meter.parameters_sent, 0.0))
    final = {n.node_id: evaluate_accuracy(spec, model.backbone, model.head,
                                          n.test_x, n.test_y, n.loss_kind) for n in nodes}
    return RunResult("fedavg", records, final, nodes, meter, full_model=model)


def run_isolated(
    nodes: list[NodeState],
    backbone: SharedBackbone,
    spec: ModelSpec,
    schedule: Schedule,
) -> RunResult:
    """Each client trains a private full model; no communication at all."""
    nodes = copy.deepcopy(nodes)
    meter = CommMeter()
    records = []
    models = {}
    for node in nodes:
        models[node.node_id] = FullModel(
            backbone.params.copy(), node.head.copy(),
            init_optimizer(backbone.params, schedule.optimizer, schedule.weight_decay),
            node.head_opt.copy(),
        )
    for rnd in range(1, schedule.rounds + 1):
        for node in nodes:
            models[node.node_id] = train_full_model(
                models[node.node_id], node, spec, schedule, rnd, schedule.local_epochs)
            m = models[node.node_id]
            acc = evaluate_accuracy(spec, m.backbone, m.head, node.test_x, node.test_y, node.loss_kind)
            records.append(VisitRecord(rnd, node.node_id, "isolated", acc, float("nan"),
                                       lr_at_round(schedule.head_lr, rnd),
                                       lr_at_round(schedule.backbone_lr, rnd), 0, 0.0))
    final = {n.node_id: evaluate_accuracy(spec, models[n.node_id].backbone, models[n.node_id].head,
                                          n.test_x, n.test_y, n.loss_kind) for n in nodes}
    return RunResult("isolated", records, final, nodes, meter)


def run_per_batch_ring(
    nodes: list[NodeState],
    model: FullModel,
    spec: ModelSpec,
    schedule: Schedule,
    topology: ring.RingTopology | None = None,
    meter: CommMeter | None = None,
) -> RunResult:
    """Whole-model circulation: one mini-batch step per node, then hop."""
    nodes = copy.deepcopy(nodes)
    meter = meter if meter is not None else CommMeter()
    model = model.copy()
    n_full = model.num_params()
    records = []
    for rnd in range(1, schedule.rounds + 1):
        queues = {}
        for node in nodes:
            rng = np.random.default_rng(child_seed(node.batch_seed, f"epoch-{node.epochs_done}"))
            node.epochs_done += 1
            queues[node.node_id] = list(_batches(len(node.train_x), schedule.batch_size, rng))
        lr_h = lr_at_round(schedule.head_lr, rnd)
        lr_b = lr_at_round(schedule.backbone_lr, rnd)
        while any(queues.values()):
            for node in nodes:
                q = queues[node.node_id]
                if not q:
                    continue
                idx = q.pop(0)
                _, logits = forward_split(spec, model.backbone, model.head, node.train_x[idx])
                _, dlogits = _loss_and_grad(logits, node, idx)
                grads = backward_masked(spec, model.backbone, model.head,
                                        node.train_x[idx], dlogits, "both")
                model.head, model.head_opt = apply_update(model.head, grads[HEAD],
                                                          model.head_opt, lr_h)
                model.backbone, model.backbone_opt = apply_update(
                    model.backbone, grads[BACKBONE], model.backbone_opt, lr_b)
                meter.record(rnd, n_full, 0)  # the full model hops after every batch
        for node in nodes:
            acc = evaluate_accuracy(spec, model.backbone, model.head,
                                    node.test_x, node.test_y, node.loss_kind)
            records.append(VisitRecord(rnd, node.node_id, "per_batch_ring", acc, float("nan"),
                                       lr_h, lr_b, meter.parameters_sent, 0.0))
    final = {n.node_id: evaluate_accuracy(spec, model.backbone, model.head,
                                          n.test_x, n.test_y, n.loss_kind) for n in nodes}
    return RunResult("per_batch_ring", records, final, nodes, meter, full_model=model)
