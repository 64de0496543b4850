"""Isolate critic learning: uniform random behavior, critic-only updates."""
import time

import numpy as np

from emergemac import nn
from emergemac.env import SimConfig, UeAction, BsAction, TRANSMIT, NOTHING, DELETE
from emergemac.marl import AgentProtocol, EP_TRAIN, Learner, TrainConfig, episode_seed
from emergemac.rollout import run_episode

sim = SimConfig(total_sdus=1, tbler=0.1)
cfg = TrainConfig(episodes_train=3000, episodes_eval=50, episodes_test=50,
                  eval_interval=10**9, ablation="full")
learner = Learner(sim, cfg, seed=3)
urng = np.random.default_rng(99)


class UniformExplore(AgentProtocol):
    """Uniform random actions, but still records states/transitions."""

    def ue_actions(self, obs, dcms):
        acts = super().ue_actions(obs, dcms)
        forced = []
        onehots_env = np.zeros((len(acts), 3))
        onehots_msg = np.zeros((len(acts), self.learner.sim.ul_vocab))
        for i in range(len(acts)):
            e = int(urng.integers(3))
            m = int(urng.integers(self.learner.sim.ul_vocab))
            onehots_env[i, e] = 1
            onehots_msg[i, m] = 1
            forced.append(UeAction(e, m))
        self._cur["a_env"] = onehots_env
        self._cur["a_msg"] = onehots_msg
        # fix the recorded history slice to match the forced actions
        for i in range(len(acts)):
            self.enc._ue_hist[i].pop()
        self.enc.record_ue(obs, [a.env_action for a in forced],
                           [a.ucm for a in forced], dcms)
        return forced

    def bs_action(self, obs_b, ucms, rng):
        action = super().bs_action(obs_b, ucms, rng)
        n = self.learner.sim.n_ue
        d = self.learner.sim.dl_vocab
        dcms = tuple(int(urng.integers(d)) for _ in range(n))
        onehot = np.zeros(n * d)
        for i, x in enumerate(dcms):
            onehot[i * d + x] = 1
        self._cur["a_bs"] = onehot
        self.enc._bs_hist.pop()
        self.enc.record_bs(obs_b, ucms, dcms)
        return BsAction(dcms)


proto = UniformExplore(learner, "explore", sink=learner.add_transition)
steps = 0
t0 = time.perf_counter()
completions = 0
for ep in range(cfg.episodes_train):
    def on_step(state, obs, reward, done, info):
        global steps
        proto.observe_step(state, obs, reward, done, info)
        steps += 1
        if steps % cfg.update_interval == 0 and len(learner.replay) >= cfg.batch_size:
            batch = learner.replay.sample(cfg.batch_size, learner._replay_rng)
            learner.critic_update(batch)
            learner.update_targets()
    stats = run_episode(sim, episode_seed(3, EP_TRAIN, ep), proto, on_step=on_step)
    completions += stats.n_ttis < sim.max_steps
print(f"{completions}/{cfg.episodes_train} episodes completed, "
      f"{learner.roles['ue'].critic_opt.t} critic rounds, {time.perf_counter()-t0:.0f}s")

# --- probe Q rankings in canonical situations ------------------------------
enc = learner.new_encoder()

def probe(name, ue1_hist, obs, dcms, bs_hist, bs_cur):
    """Q(s, a_env) for UE1 with UE2 idle; history slices given as tuples."""
    enc.reset()
    for (o, a, m, d), (o2, a2, m2, d2) in ue1_hist:
        enc.record_ue([o, o2], [a, a2], [m, m2], [d, d2])
    for ob, ucms, dc in bs_hist:
        enc.record_bs(ob, ucms, dc)
    ue_s = enc.ue_states(obs, dcms)[None, :, :]
    bs_s = enc.bs_state(*bs_cur)[None, :]
    msgs = np.zeros((1, 2, sim.ul_vocab))
    msgs[0, :, 0] = 1
    qs = []
    for a in range(3):
        a_env = np.zeros((1, 2, 3))
        a_env[0, 1, 0] = 1
        a_env[0, 0, a] = 1
        rows = learner._ue_rows(ue_s, a_env, msgs, bs_s, np.zeros((1, 6)))
        q, _ = nn.forward(learner.roles["ue"].critic, rows)
        qs.append(round(float(q[0, 0]), 3))
    print(f"{name}: Q(nothing, tx, delete) = {qs}")

idle = (0, 0, 0, 0)
# state A: UE1 buffered, never transmitted (pre-delivery)
probe("pre-delivery buffered",
      [( (0,0,0,0), idle ), ((1,0,0,0), idle), ((1,0,0,0), idle)],
      [1, 0], [0, 0],
      [(0, (0,0), (0,0))]*3, (0, (0,0)))
# state B: UE1 transmitted last TTI and the BS decoded it (post-receipt)
probe("just decoded (post-receipt)",
      [((1,0,0,0), idle), ((1,0,0,0), idle), ((1,1,0,0), idle)],
      [1, 0], [0, 0],
      [(0, (0,0), (0,0)), (0, (0,0), (0,0)), (1, (0,0), (0,0))], (0, (0,0)))
EOF
