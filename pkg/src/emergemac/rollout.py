"""Episode driver and per-TTI trace export.

Every policy — the hand-coded contention-free one and the learned agents —
drives the environment through `run_episode`, so comparisons on shared seeds
exercise the identical code path. A protocol object must provide:

    reset(config)                          called once per episode
    ue_actions(obs, dcms) -> [UeAction]    decide all UE actions for this TTI
    bs_action(obs_b, ucms, rng) -> BsAction  invoked inside env.step

where `obs` are the UEs' decision-time buffer lengths (end of the previous
TTI) and `dcms` the control messages delivered this TTI.

Trace rows log, per TTI: the decision context of every UE (obs, env action,
UCM, DCM received) plus the channel observation and the shared reward.
"""

import csv

from . import env
from .env import EpisodeStats, SimConfig


def trace_header(n_ue: int) -> list[str]:
    cols = ["t"]
    for tag in ("obs", "act", "ucm", "dcm"):
        cols += [f"{tag}_ue{u}" for u in range(1, n_ue + 1)]
    cols += ["outcome", "reward"]
    return cols


def run_episode(config: SimConfig, seed, protocol, trace=None, on_step=None) -> EpisodeStats:
    """Drive one episode to completion and return its statistics.

    `trace`, if given, is a list that receives one row dict per TTI.
    `on_step(state, obs, reward, done, info)` is called after every TTI.
    """
    state = env.new_episode(config, seed)
    protocol.reset(config)
    obs = [0] * config.n_ue
    done = False
    while not done:
        dcms = list(state.pending_dcm)
        actions = protocol.ue_actions(obs, dcms)
        t = state.t
        prev_obs = obs
        state, obs, reward, done, info = env.step(state, actions, protocol.bs_action)
        if trace is not None:
            row = {"t": t, "outcome": info["obs_b"], "reward": reward}
            for i in range(config.n_ue):
                row[f"obs_ue{i + 1}"] = prev_obs[i]
                row[f"act_ue{i + 1}"] = actions[i].env_action
                row[f"ucm_ue{i + 1}"] = actions[i].ucm
                row[f"dcm_ue{i + 1}"] = dcms[i]
            trace.append(row)
        if on_step is not None:
            on_step(state, obs, reward, done, info)
    return state.stats


def write_trace_csv(path, rows, n_ue: int) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=trace_header(n_ue))
        writer.writeheader()
        writer.writerows(rows)


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{k: int(v) for k, v in row.items()} for row in csv.DictReader(f)]


def stats_from_trace(rows, config: SimConfig) -> tuple[int, int]:
    """Recompute (n_rx, n_ttis) from a per-TTI trace.

    A new receipt is identified from the (reward, outcome) pair. The decoded
    transmitter cannot simultaneously delete, so with n_ue <= 2 the reward
    cases are disjoint: +R means a new receipt, 0 means a new receipt plus
    one wrongful deletion, and -R can only be a lone wrongful deletion. This
    inference needs reward_param >= 2 (at R=1 the -1 cases collide) and
    n_ue <= 2; outside that regime the trace schema is not informative
    enough and we refuse rather than guess.
    """
    if config.n_ue > 2:
        raise ValueError("trace recomputation supports n_ue <= 2 only")
    if config.reward_param < 2:
        raise ValueError("trace recomputation needs reward_param >= 2")
    big_r = config.reward_param
    n_rx = 0
    for row in rows:
        fresh = row["reward"] == big_r or (row["reward"] == 0 and config.n_ue == 2)
        if fresh:
            if not 1 <= row["outcome"] <= config.n_ue:
                raise ValueError(f"reward {row['reward']} without a decoded PDU at t={row['t']}")
            n_rx += 1
    return n_rx, len(rows)
