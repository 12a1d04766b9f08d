"""Feeder resilience scoring, dual-agent PPO switching control, and
techno-economic evaluation of the learned policies."""

from .economics import (
    CostEffectiveness,
    EconomicParameters,
    EpisodeTrace,
    TraceStep,
    capital_cost,
    cost_effectiveness,
    failure_cost,
    npv,
    operational_cost,
    resilience_value,
    revenue_potential,
    risk_reduction_benefit,
    total_cost,
)
from .env import (
    EnvConfig,
    EnvState,
    GridEnv,
    StepOutcome,
    Weather,
    reward_calamity,
    reward_normal,
    step_cost,
    weather_transition,
)
from .feeder import (
    BranchRecord,
    DerRecord,
    FeederError,
    GridNetwork,
    NodeRecord,
    Scenario,
    Subgraph,
    effective_topology,
    parse_feeder,
    parse_scenario,
    serialize_feeder,
)
from .metrics import (
    AhpWeights,
    MetricDomainError,
    MetricVector,
    PathCounts,
    ahp_weights,
    average_ros,
    classify_paths,
    cls_ratio,
    composite_score,
    dg_feasible,
    high_centrality_count,
    information_centrality,
    network_efficiency,
    normalize_metrics,
    path_variability,
    rating_of_service,
    resilience_score,
)
from .percolation import percolation_strength, percolation_threshold, susceptibility
from .ppo import (
    ExperienceBuffer,
    PpoHyperparams,
    StrategicPolicy,
    TacticalPolicy,
    entropy_strategic,
    entropy_tactical,
    gae,
    joint_log_prob,
    sample_strategic,
    sample_tactical,
)
from .training import (
    CheckpointError,
    TrainConfig,
    TrainingMetrics,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
