"""Workbench for emerging wireless MAC protocols with multi-agent RL."""

from .env import (
    DELETE,
    IDLE,
    NON_DECODABLE,
    NOTHING,
    NULL_MSG,
    TRANSMIT,
    BsAction,
    ChannelOutcome,
    ConfigError,
    EnvState,
    EpisodeStats,
    MetricError,
    SimConfig,
    UeAction,
    arrival_step,
    bs_observation,
    compute_reward,
    decoded,
    delivery_rate,
    episode_done,
    goodput,
    new_episode,
    resolve_channel,
    step,
    ue_observation,
)
from .rollout import run_episode, stats_from_trace, trace_header, write_trace_csv
from .baseline import (
    ACK,
    SG,
    SR,
    BaselineProtocol,
    baseline_bs_policy,
    baseline_ue_policy,
    run_baseline_episode,
)
from .marl import (
    AgentProtocol,
    EvalPoint,
    Learner,
    ReplayBuffer,
    TrainConfig,
    evaluate,
    eval_seeds,
    load_checkpoint,
    save_checkpoint,
    select_actions,
    train_run,
)
from .harness import (
    Campaign,
    ProtocolRecord,
    ci95_halfwidth,
    emit_report,
    load_config_file,
    run_campaign,
    select_best,
    sweep_tbler,
)

__version__ = "0.1.0"
