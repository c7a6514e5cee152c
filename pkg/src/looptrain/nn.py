"""Small dense-network engine with an explicit backbone/head split.

Everything is float64 and purely functional: operations take parameter
sets and return new ones, so callers control all state. The split point
divides the layer stack into a "backbone" segment (feature extractor,
circulated between nodes) and a "head" segment (stays private to a node).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

BACKBONE = "backbone"
HEAD = "head"
ACTIVATIONS = ("relu", "identity")


class ShapeMismatchError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError(f"layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    split_index: int

    def __post_init__(self):
        if not (0 < self.split_index < len(self.layers)):
            raise ValueError(
                f"split_index {self.split_index} must leave both segments non-empty "
                f"(layer count {len(self.layers)})"
            )
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"adjacent layer widths incompatible: {a.out_dim} vs {b.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def feature_dim(self) -> int:
        return self.layers[self.split_index - 1].out_dim

    def segment_ids(self, segment: str) -> range:
        if segment == BACKBONE:
            return range(0, self.split_index)
        if segment == HEAD:
            return range(self.split_index, len(self.layers))
        raise ValueError(f"unknown segment {segment!r}")


def mlp_spec(widths: list[int], split_index: int) -> ModelSpec:
    """ReLU hidden layers, identity final layer."""
    layers = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        act = "identity" if i == len(widths) - 2 else "relu"
        layers.append(LayerSpec(a, b, act))
    return ModelSpec(tuple(layers), split_index)


@dataclass
class ParamSet:
    segment: str
    entries: dict[int, tuple[np.ndarray, np.ndarray]]

    def copy(self) -> "ParamSet":
        return ParamSet(self.segment, {i: (w.copy(), b.copy()) for i, (w, b) in self.entries.items()})

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in self.entries.values())

    def hash_hex(self) -> str:
        h = hashlib.sha256()
        for i in sorted(self.entries):
            w, b = self.entries[i]
            h.update(np.ascontiguousarray(w).tobytes())
            h.update(np.ascontiguousarray(b).tobytes())
        return h.hexdigest()


def init_params(spec: ModelSpec, segment: str, rng: np.random.Generator) -> ParamSet:
    """Fan-in-scaled uniform init (He-style for ReLU layers), zero biases."""
    entries = {}
    for i in spec.segment_ids(segment):
        layer = spec.layers[i]
        gain = 6.0 if layer.activation == "relu" else 3.0
        limit = math.sqrt(gain / layer.in_dim)
        w = rng.uniform(-limit, limit, size=(layer.in_dim, layer.out_dim))
        b = np.zeros(layer.out_dim)
        entries[i] = (w, b)
    return ParamSet(segment, entries)


def _merged(spec: ModelSpec, backbone: ParamSet, head: ParamSet) -> dict:
    if backbone.segment != BACKBONE or head.segment != HEAD:
        raise ValueError("param sets passed in the wrong segment slots")
    params = {**backbone.entries, **head.entries}
    if sorted(params) != list(range(len(spec.layers))):
        raise ShapeMismatchError("param sets do not cover every layer exactly once")
    for i, (w, b) in params.items():
        layer = spec.layers[i]
        if w.shape != (layer.in_dim, layer.out_dim) or b.shape != (layer.out_dim,):
            raise ShapeMismatchError(f"layer {i}: params {w.shape}/{b.shape} do not match spec")
    return params


def _forward_cached(spec: ModelSpec, params: dict, batch: np.ndarray):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != spec.in_dim:
        raise ShapeMismatchError(f"batch width {batch.shape} does not match input dim {spec.in_dim}")
    pre, act = [], [batch]
    a = batch
    for i, layer in enumerate(spec.layers):
        w, b = params[i]
        z = a @ w + b
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        pre.append(z)
        act.append(a)
    return pre, act


def forward_split(spec: ModelSpec, backbone: ParamSet, head: ParamSet, batch: np.ndarray):
    """Returns (features, logits): features are the backbone output."""
    params = _merged(spec, backbone, head)
    _, act = _forward_cached(spec, params, batch)
    features, logits = act[spec.split_index], act[-1]
    if not np.all(np.isfinite(logits)):
        raise NonFiniteError("forward pass produced non-finite logits")
    return features, logits


def loss_softmax_ce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatchError("one label per logits row required")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    loss = -float(logp[np.arange(n), labels].mean())
    p = np.exp(logp)
    d = p.copy()
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def loss_sigmoid_bce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ShapeMismatchError("logits and targets must share a shape")
    if not np.all((targets == 0.0) | (targets == 1.0)):
        raise ValueError("targets must be 0 or 1")
    # max(z,0) - z*t + log(1 + exp(-|z|)) is the stable per-element form
    per = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    loss = float(per.mean())
    d = (1.0 / (1.0 + np.exp(-logits)) - targets) / logits.size
    return loss, d


def backward_masked(
    spec: ModelSpec,
    backbone: ParamSet,
    head: ParamSet,
    batch: np.ndarray,
    dlogits: np.ndarray,
    trainable: str,
) -> dict[str, ParamSet]:
    """Backprop returning gradients only for the requested segment(s).

    trainable is one of "head_only", "backbone_only", "both". Frozen
    segments are backpropagated through but produce no gradient entries.
    """
    if trainable not in ("head_only", "backbone_only", "both"):
        raise ValueError(f"unknown trainable mode {trainable!r}")
    params = _merged(spec, backbone, head)
    pre, act = _forward_cached(spec, params, batch)
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != act[-1].shape:
        raise ShapeMismatchError("dlogits shape does not match logits")
    grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    delta = dlogits
    for i in reversed(range(len(spec.layers))):
        if spec.layers[i].activation == "relu":
            delta = delta * (pre[i] > 0)
        grads[i] = (act[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ params[i][0].T
    out = {}
    if trainable in ("head_only", "both"):
        out[HEAD] = ParamSet(HEAD, {i: grads[i] for i in spec.segment_ids(HEAD)})
    if trainable in ("backbone_only", "both"):
        out[BACKBONE] = ParamSet(BACKBONE, {i: grads[i] for i in spec.segment_ids(BACKBONE)})
    return out


@dataclass
class LrPolicy:
    base_lr: float
    gamma: float = 0.5
    period: int = 10

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must lie in (0, 1]")
        if self.period <= 0:
            raise ValueError("period must be positive")


def lr_at_round(policy: LrPolicy, rnd: int) -> float:
    if rnd < 0:
        raise ValueError("round must be non-negative")
    return policy.base_lr * policy.gamma ** (rnd // policy.period)


@dataclass
class OptimizerState:
    kind: str  # "sgd" | "adamw"
    t: int = 0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    v: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.kind, self.t, self.weight_decay, self.beta1, self.beta2, self.epsilon,
            {i: (a.copy(), b.copy()) for i, (a, b) in self.m.items()},
            {i: (a.copy(), b.copy()) for i, (a, b) in self.v.items()},
        )

    def num_scalars(self) -> int:
        return sum(a.size + b.size for a, b in self.m.values()) + sum(
            a.size + b.size for a, b in self.v.values()
        ) + 1


def init_optimizer(params: ParamSet, kind: str = "adamw", weight_decay: float = 0.0) -> OptimizerState:
    if kind not in ("sgd", "adamw"):
        raise ValueError(f"unknown optimizer kind {kind!r}")
    state = OptimizerState(kind, weight_decay=weight_decay)
    if kind == "adamw":
        for i, (w, b) in params.entries.items():
            state.m[i] = (np.zeros_like(w), np.zeros_like(b))
            state.v[i] = (np.zeros_like(w), np.zeros_like(b))
    return state


def _check_aligned(params: ParamSet, grads: ParamSet):
    if set(params.entries) != set(grads.entries):
        raise ShapeMismatchError("gradient entries do not match parameter entries")
    for i in params.entries:
        for p, g in zip(params.entries[i], grads.entries[i]):
            if p.shape != g.shape:
                raise ShapeMismatchError(f"layer {i}: grad shape {g.shape} != param shape {p.shape}")


def sgd_step(params: ParamSet, grads: ParamSet, lr: float) -> ParamSet:
    _check_aligned(params, grads)
    entries = {
        i: (w - lr * gw, b - lr * gb)
        for i, ((w, b), (gw, gb)) in ((i, (params.entries[i], grads.entries[i])) for i in params.entries)
    }
    return ParamSet(params.segment, entries)


def adamw_step(
    params: ParamSet, grads: ParamSet, state: OptimizerState, lr: float
) -> tuple[ParamSet, OptimizerState]:
    if state.kind != "adamw":
        raise ValueError("adamw_step requires an adamw OptimizerState")
    _check_aligned(params, grads)
    new = state.copy()
    new.t = state.t + 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    c1 = 1.0 - b1 ** new.t
    c2 = 1.0 - b2 ** new.t
    entries = {}
    for i in params.entries:
        pair = []
        for j, (p, g) in enumerate(zip(params.entries[i], grads.entries[i])):
            m = b1 * new.m[i][j] + (1 - b1) * g
            v = b2 * new.v[i][j] + (1 - b2) * g * g
            new.m[i] = (m, new.m[i][1]) if j == 0 else (new.m[i][0], m)
            new.v[i] = (v, new.v[i][1]) if j == 0 else (new.v[i][0], v)
            # decoupled decay: applied to the parameter directly, not via moments
            p2 = p - lr * state.weight_decay * p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
            pair.append(p2)
        entries[i] = tuple(pair)
    return ParamSet(params.segment, entries), new


def apply_update(
    params: ParamSet, grads: ParamSet, state: OptimizerState, lr: float
) -> tuple[ParamSet, OptimizerState]:
    """Dispatch on optimizer kind; SGD keeps only the step counter in state."""
    if state.kind == "sgd":
        new = state.copy()
        new.t = state.t + 1
        return sgd_step(params, grads, lr), new
    return adamw_step(params, grads, state, lr)


def compute_loss(spec, backbone, head, batch, targets, loss_kind):
    _, logits = forward_split(spec, backbone, head, batch)
    if loss_kind == "softmax_ce":
        return loss_softmax_ce(logits, targets)
    if loss_kind == "sigmoid_bce":
        return loss_sigmoid_bce(logits, targets)
    raise ValueError(f"unknown loss kind {loss_kind!r}")


def grad_check(
    spec: ModelSpec,
    backbone: ParamSet,
    head: ParamSet,
    batch: np.ndarray,
    targets,
    loss_kind: str = "softmax_ce",
    eps: float = 1e-5,
) -> float:
    """Central finite differences over every scalar parameter.

    Returns the maximum relative error between analytic and numeric
    gradients, with |analytic - numeric| / max(|a|, |n|, 1e-12).
    """
    if not (0 < eps <= 1e-3):
        raise ValueError("eps must lie in (0, 1e-3]")
    _, dlogits = compute_loss(spec, backbone, head, batch, targets, loss_kind)
    grads = backward_masked(spec, backbone, head, batch, dlogits, "both")
    worst = 0.0
    for seg, pset in ((BACKBONE, backbone), (HEAD, head)):
        for i in pset.entries:
            for j in range(2):
                arr = pset.entries[i][j]
                g = grads[seg].entries[i][j]
                flat = arr.reshape(-1)
                gflat = g.reshape(-1)
                for idx in range(flat.size):
                    orig = flat[idx]
                    flat[idx] = orig + eps
                    lp, _ = compute_loss(spec, backbone, head, batch, targets, loss_kind)
                    flat[idx] = orig - eps
                    lm, _ = compute_loss(spec, backbone, head, batch, targets, loss_kind)
                    flat[idx] = orig
                    numeric = (lp - lm) / (2 * eps)
                    analytic = gflat[idx]
                    err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
                    worst = max(worst, err)
    return worst
