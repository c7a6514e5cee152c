"""Serverless ring-topology training with a shared backbone and private heads."""

from .nn import (
    BACKBONE,
    HEAD,
    LayerSpec,
    LrPolicy,
    ModelSpec,
    OptimizerState,
    ParamSet,
    adamw_step,
    backward_masked,
    forward_split,
    grad_check,
    init_optimizer,
    init_params,
    loss_sigmoid_bce,
    loss_softmax_ce,
    lr_at_round,
    mlp_spec,
    sgd_step,
)
from .data import (
    Dataset,
    HeterogeneityConfig,
    PartitionPlan,
    SyntheticSpec,
    gen_blobs,
    gen_multi_attribute,
    load_idx,
    partition_dirichlet,
    partition_even,
    partition_pathological,
    split_local_train_test,
)
from .ring import FaultEvent, FaultScript, RingTopology, RouteView, apply_fault_event, detect_partitions, next_hop, reconfigure
from .protocol import (
    CommMeter,
    FullModel,
    NodeState,
    RunResult,
    Schedule,
    SharedBackbone,
    evaluate_accuracy,
    fine_tune_heads,
    make_backbone,
    make_full_model,
    make_nodes,
    run_fedavg,
    run_isolated,
    run_li,
    run_per_batch_ring,
    train_backbone_step,
    train_full_step,
    train_head_step,
    visit_node,
)
from .ensemble import (
    FeatureCache,
    GatingEnsemble,
    StackedEnsemble,
    collect_head_outputs,
    predict_moe,
    predict_stacked,
    probe_backbone,
    train_gating,
    train_integrator,
)
from .pipeline import MakespanEstimate, PipelineModel, estimate_pipeline_makespan
from .config import ConfigError, ExperimentConfig, parse_config, parse_config_dict
from .harness import emit_metrics, report_client_deltas, run_experiment, run_optional_step_ablation

__version__ = "0.1.0"
