"""Diagnostic: does the critic/actor learn delete-after-receipt?"""
import sys
import time

import numpy as np

from emergemac import nn
from emergemac.env import SimConfig
from emergemac.marl import AgentProtocol, EP_TRAIN, Learner, TrainConfig, episode_seed
from emergemac.rollout import run_episode

sim = SimConfig(total_sdus=1, tbler=0.1)
cfg = TrainConfig(episodes_train=6000, episodes_eval=100, episodes_test=100,
                  eval_interval=1500, ablation="full")
learner = Learner(sim, cfg, seed=1)

completed = [0, 0]  # [window completions, window episodes]


def greedy_probe(tag):
    proto = AgentProtocol(learner, "greedy")
    rows = []

    def on_step(state, obs, reward, done, info):
        rows.append((state.t - 1, tuple(obs), info["ucms"], tuple(info["dcm"]),
                     info["obs_b"], reward))

    # also capture per-decision Q for UE1's three env actions
    stats = run_episode(sim, episode_seed(12345, 99, 0), proto, on_step=on_step)
    print(f"[{tag}] greedy episode: n_rx={stats.n_rx} dur={stats.n_ttis}")
    for r in rows[:10]:
        print("   t=%d obs=%s ucm=%s dcm=%s obs_b=%d r=%d" % r)


def q_probe(tag):
    # drive a scripted situation: UE1 holds one SDU that the BS just decoded
    proto = AgentProtocol(learner, "greedy")
    proto.reset(sim)
    sim0 = SimConfig(total_sdus=1, tbler=0.0, p_arrival=1.0)
    state_seen = {}

    def on_step(state, obs, reward, done, info):
        state_seen[state.t - 1] = (tuple(obs), info)

    from emergemac.env import UeAction, BsAction, TRANSMIT

    class Script:
        def reset(self, config):
            proto.reset(config)
            self.t = 0

        def ue_actions(self, obs, dcms):
            self.states = proto.enc.ue_states(obs, dcms)
            acts = [UeAction(TRANSMIT if self.t == 1 else 0, 1), UeAction(0, 0)]
            proto.enc.record_ue(obs, [a.env_action for a in acts],
                                [a.ucm for a in acts], dcms)
            return acts

        def bs_action(self, obs_b, ucms, rng):
            s_b = proto.enc.bs_state(obs_b, ucms)
            self.bs_state = s_b
            dcm = (0, 0)
            proto.enc.record_bs(obs_b, ucms, dcm)
            self.t += 1
            return BsAction(dcm)

    script = Script()
    run3 = None
    state = None
    import emergemac.env as envmod
    st = envmod.new_episode(sim0, 5)
    script.reset(sim0)
    obs = [0, 0]
    for t in range(3):
        acts = script.ue_actions(obs, list(st.pending_dcm))
        st, obs, r, done, info = envmod.step(st, acts, script.bs_action)
    # now UE1's SDU was decoded at t=1; evaluate Q(s, a) for env actions
    ue_states = script.states  # decision states at t=2
    role = learner.roles["ue"]
    logits, _ = nn.forward(role.actor, ue_states)
    msgs = np.zeros((2, sim.ul_vocab))
    msgs[:, 0] = 1.0
    qs = []
    for a_env_idx in range(3):
        a_env = np.zeros((1, 2, 3))
        a_env[0, :, 0] = 1.0
        a_env[0, 0, :] = 0.0
        a_env[0, 0, a_env_idx] = 1.0
        a_msg = np.tile(msgs[None, :, :], (1, 1, 1))
        batchlike = {
            "ue_s": ue_states[None, :, :], "a_env": a_env, "a_msg": a_msg,
            "bs_s": script.bs_state[None, :], "a_bs": np.zeros((1, 6)),
        }
        rows = learner._ue_rows(batchlike["ue_s"], batchlike["a_env"],
                                batchlike["a_msg"], batchlike["bs_s"],
                                batchlike["a_bs"])
        q, _ = nn.forward(role.critic, rows)
        qs.append(float(q[0, 0]))  # perspective UE1
    print(f"[{tag}] UE1 post-receipt: logits={np.round(logits[0], 2)} "
          f"Q(nothing/tx/delete)={np.round(qs, 2)}")


protocol = AgentProtocol(learner, "explore", sink=learner.add_transition)
steps = 0
t0 = time.perf_counter()


def on_step(state, obs, reward, done, info):
    global steps
    protocol.observe_step(state, obs, reward, done, info)
    steps += 1
    if steps % cfg.update_interval == 0:
        learner.update()


for ep in range(cfg.episodes_train):
    stats = run_episode(sim, episode_seed(1, EP_TRAIN, ep), protocol, on_step=on_step)
    completed[1] += 1
    if stats.n_ttis < sim.max_steps:
        completed[0] += 1
    if (ep + 1) % 1500 == 0:
        print(f"=== ep {ep+1} ({time.perf_counter()-t0:.0f}s): "
              f"{completed[0]}/{completed[1]} training episodes finished early")
        completed[:] = [0, 0]
        greedy_probe(ep + 1)
        q_probe(ep + 1)
        sys.stdout.flush()
