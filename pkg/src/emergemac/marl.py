"""Multi-agent actor-critic learner over the uplink environment.

Centralized training with decentralized execution: every agent acts from its
own history-windowed state, while critics see the joint states and actions
during training. The UEs share one actor/critic parameter set; the BS is a
single agent with one downlink-message head per UE. Discrete actions are
relaxed with the Gumbel-softmax trick during updates, and hard one-hots (what
the environment executed) are stored in replay.

Two ablations are supported: "nocomm" removes the control-message channels
entirely (the BS, whose only action channel is communication, then ceases to
be an agent and all DCMs are null), and "ddpg" keeps the messages but gives
every agent a decentralized critic over its own (state, action) only.
"""

import json
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .env import NULL_MSG, BsAction, ConfigError, SimConfig, UeAction
from .rollout import run_episode

CHECKPOINT_VERSION = 1

FULL = "full"
NOCOMM = "nocomm"
DDPG = "ddpg"
ABLATIONS = (FULL, NOCOMM, DDPG)

# tags for deriving independent RNG streams / episode seeds from a run seed
_INIT, _EXPLORE, _UPDATE, _REPLAY = 0, 1, 2, 3
EP_TRAIN, EP_EVAL, EP_TEST = 10, 11, 12


def rng_stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, tag)))


def episode_seed(seed: int, tag: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(seed, tag, index))


@dataclass(frozen=True)
class TrainConfig:
    """Learner hyperparameters. Defaults follow the reference training setup."""

    memory_length: int = 3          # history slices per agent state (k)
    replay_capacity: int = 100_000
    batch_size: int = 1024
    update_interval: int = 96       # environment steps between update rounds
    learning_rate: float = 1e-3
    discount: float = 0.99
    policy_reg: float = 1e-3        # squared-logit penalty weight
    gumbel_temperature: float = 1.0
    soft_update: float = 1e-3
    episodes_train: int = 300_000
    episodes_eval: int = 500
    episodes_test: int = 5000
    ablation: str = FULL
    eval_interval: int = 5000       # training episodes between greedy evaluations
    hidden: tuple = (64, 64)
    include_ue_id: bool = False     # append a UE-index one-hot to shared-actor inputs

    def validate(self) -> None:
        if self.memory_length < 1:
            raise ConfigError("memory_length must be >= 1")
        if self.replay_capacity < 1 or self.batch_size < 1:
            raise ConfigError("replay_capacity and batch_size must be >= 1")
        if self.update_interval < 1 or self.eval_interval < 1:
            raise ConfigError("update_interval and eval_interval must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must be in (0, 1]")
        if self.policy_reg < 0:
            raise ConfigError("policy_reg must be >= 0")
        if self.gumbel_temperature <= 0:
            raise ConfigError("gumbel_temperature must be > 0")
        if not 0.0 <= self.soft_update <= 1.0:
            raise ConfigError("soft_update must be in [0, 1]")
        if min(self.episodes_train, self.episodes_eval, self.episodes_test) < 1:
            raise ConfigError("episode counts must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}")
        if len(self.hidden) < 1 or any(h < 1 for h in self.hidden):
            raise ConfigError(f"invalid hidden sizes {self.hidden}")

    @property
    def comm(self) -> bool:
        return self.ablation != NOCOMM


def ue_slice_width(sim: SimConfig, comm: bool) -> int:
    base = (sim.buffer_capacity + 1) + 3
    return base + (sim.ul_vocab + sim.dl_vocab if comm else 0)


def bs_slice_width(sim: SimConfig) -> int:
    return (sim.n_ue + 2) + sim.n_ue * sim.ul_vocab + sim.n_ue * sim.dl_vocab


class EpisodeEncoder:
    """One-hot state encoder with k-slice history windows, reset per episode.

    A slice is the tuple recorded at one TTI: (obs, action, UCM, DCM) for a
    UE, (channel obs, all UCMs, all DCMs) for the BS. The state for the
    decision at TTI t is [slice_t | slice_{t-1} | ...], newest first, where
    the current slice carries what the agent knows at decision time (its
    not-yet-chosen blocks stay zero) and pre-episode slices are all zero.
    """

    def __init__(self, sim: SimConfig, cfg: TrainConfig):
        self.sim = sim
        self.k = cfg.memory_length
        self.comm = cfg.comm
        self.include_ue_id = cfg.include_ue_id
        self.ue_slice = ue_slice_width(sim, self.comm)
        self.bs_slice = bs_slice_width(sim)
        self.ue_dim = self.k * self.ue_slice + (sim.n_ue if cfg.include_ue_id else 0)
        self.bs_dim = self.k * self.bs_slice
        self.reset()

    def reset(self) -> None:
        self._ue_hist = [deque(maxlen=self.k - 1) for _ in range(self.sim.n_ue)]
        # the BS keeps one extra completed slice so that a pre-TTI snapshot
        # (no partial current slice) spans the full k-slice window
        self._bs_hist = deque(maxlen=self.k)

    # --- UE side -------------------------------------------------------

    def _ue_slice_vec(self, obs: int, act, ucm, dcm) -> np.ndarray:
        sim = self.sim
        v = np.zeros(self.ue_slice)
        v[obs] = 1.0
        off = sim.buffer_capacity + 1
        if act is not None:
            v[off + act] = 1.0
        off += 3
        if self.comm:
            if ucm is not None:
                v[off + ucm] = 1.0
            off += sim.ul_vocab
            v[off + dcm] = 1.0
        return v

    def _with_history(self, current: np.ndarray, hist: deque, width: int, dim: int,
                      ue_index=None) -> np.ndarray:
        state = np.zeros(dim)
        state[:width] = current
        for j, sl in enumerate(reversed(hist)):
            state[(j + 1) * width:(j + 2) * width] = sl
        if ue_index is not None:
            state[self.k * width + ue_index] = 1.0
        return state

    def ue_states(self, obs, dcms) -> np.ndarray:
        """Decision-time states for all UEs, shape (n_ue, ue_dim)."""
        rows = []
        for i in range(self.sim.n_ue):
            cur = self._ue_slice_vec(obs[i], None, None, dcms[i] if self.comm else 0)
            rows.append(self._with_history(cur, self._ue_hist[i], self.ue_slice, self.ue_dim,
                                           ue_index=i if self.include_ue_id else None))
        return np.stack(rows)

    def record_ue(self, obs, acts, ucms, dcms) -> None:
        """Append the completed (obs, action, ucm, dcm) slice of this TTI."""
        for i in range(self.sim.n_ue):
            self._ue_hist[i].append(
                self._ue_slice_vec(obs[i], acts[i], ucms[i], dcms[i] if self.comm else 0)
            )

    # --- BS side -------------------------------------------------------

    def _bs_slice_vec(self, obs_b, ucms, dcms) -> np.ndarray:
        sim = self.sim
        v = np.zeros(self.bs_slice)
        v[obs_b] = 1.0
        off = sim.n_ue + 2
        for i in range(sim.n_ue):
            v[off + i * sim.ul_vocab + ucms[i]] = 1.0
        off += sim.n_ue * sim.ul_vocab
        if dcms is not None:
            for i in range(sim.n_ue):
                v[off + i * sim.dl_vocab + dcms[i]] = 1.0
        return v

    def _recent_bs(self, count: int) -> list:
        hist = list(self._bs_hist)
        return hist[len(hist) - count:] if count < len(hist) else hist

    def bs_state(self, obs_b: int, ucms) -> np.ndarray:
        """Decision-time BS state: this TTI's channel obs and UCMs are known."""
        cur = self._bs_slice_vec(obs_b, ucms, None)
        return self._with_history(cur, self._recent_bs(self.k - 1),
                                  self.bs_slice, self.bs_dim)

    def bs_state_pre(self) -> np.ndarray:
        """Pre-TTI BS snapshot: the k most recent completed slices.

        Used as the BS component of the joint pre-state seen by the UE
        critics, so that the channel outcome of the actions being scored
        never leaks into their own value estimate.
        """
        state = np.zeros(self.bs_dim)
        for j, sl in enumerate(reversed(self._bs_hist)):
            state[j * self.bs_slice:(j + 1) * self.bs_slice] = sl
        return state

    def bs_state_terminal(self) -> np.ndarray:
        """Post-episode BS state with an all-zero current slice (bootstrap-masked)."""
        return self._with_history(np.zeros(self.bs_slice), self._recent_bs(self.k - 1),
                                  self.bs_slice, self.bs_dim)

    def record_bs(self, obs_b, ucms, dcms) -> None:
        self._bs_hist.append(self._bs_slice_vec(obs_b, ucms, dcms))


class ReplayBuffer:
    """Fixed-capacity ring buffer over named numpy arrays, uniform sampling."""

    def __init__(self, capacity: int, fields: dict):
        self.capacity = capacity
        self._data = {name: np.zeros((capacity, *shape)) for name, shape in fields.items()}
        self._size = 0
        self._next = 0

    def __len__(self) -> int:
        return self._size

    def add(self, items: dict) -> None:
        for name, value in items.items():
            self._data[name][self._next] = value
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self._size, size=batch_size)
        return {name: arr[idx] for name, arr in self._data.items()}


@dataclass
class ActorCritic:
    """Online and target networks plus optimizer state for one agent role."""

    actor: nn.Mlp
    critic: nn.Mlp
    target_actor: nn.Mlp
    target_critic: nn.Mlp
    actor_opt: nn.AdamState
    critic_opt: nn.AdamState
    head_slices: list   # categorical heads within the actor output


def critic_loss_and_grads(critic: nn.Mlp, x, y):
    """Mean squared TD error over rows of x against targets y, plus its gradient."""
    q, cache = nn.forward(critic, x)
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    grad_out = (2.0 * err / err.size)[:, None]
    grads, _ = nn.backward(critic, cache, grad_out)
    return loss, grads


def actor_objective_and_grads(actor: nn.Mlp, critic: nn.Mlp, own_states, build_rows,
                              head_slices, own_off, own_width, noise, zeta, reg):
    """Policy objective E[Q] - reg*mean(logits^2) and its actor-parameter gradient.

    The acting agent's own action is re-derived differentiably as
    Gumbel-softmax(actor logits, noise); `build_rows(soft)` assembles the
    critic input with that action spliced in at [own_off, own_off+own_width).
    """
    logits, actor_cache = nn.forward(actor, own_states)
    soft = np.empty_like(logits)
    for sl in head_slices:
        soft[:, sl] = nn.gumbel_softmax(logits[:, sl], noise[:, sl], zeta)
    x = build_rows(soft)
    q, critic_cache = nn.forward(critic, x)
    objective = float(q.mean() - reg * np.mean(logits ** 2))
    grad_q = np.full((x.shape[0], 1), 1.0 / x.shape[0])
    _, grad_in = nn.backward(critic, critic_cache, grad_q)
    grad_soft = grad_in[:, own_off:own_off + own_width]
    grad_logits = np.empty_like(logits)
    for sl in head_slices:
        grad_logits[:, sl] = nn.gumbel_softmax_grad(soft[:, sl], grad_soft[:, sl], zeta)
    grad_logits -= 2.0 * reg * logits / logits.size
    grads, _ = nn.backward(actor, actor_cache, grad_logits)
    return objective, grads


def select_actions(logits, head_slices, mode: str, zeta: float = 1.0, rng=None) -> np.ndarray:
    """Executed one-hot actions per head for a (rows, out) logit matrix.

    explore: argmax of a Gumbel-softmax sample per head; greedy: argmax of
    the raw logits, no noise.
    """
    logits = np.asarray(logits, dtype=np.float64)
    rows = logits[None, :] if logits.ndim == 1 else logits
    out = np.zeros_like(rows)
    for sl in head_slices:
        block = rows[:, sl]
        if mode == "explore":
            block = nn.gumbel_softmax_sample(block, zeta, rng)
        elif mode != "greedy":
            raise ValueError(f"unknown mode {mode!r}")
        idx = block.argmax(axis=1)
        out[np.arange(rows.shape[0]), sl.start + idx] = 1.0
    return out[0] if logits.ndim == 1 else out


class Learner:
    """Actor-critic learner for one training repetition."""

    def __init__(self, sim: SimConfig, cfg: TrainConfig, seed: int):
        sim.validate()
        cfg.validate()
        self.sim = sim
        self.cfg = cfg
        self.seed = seed
        self.comm = cfg.comm

        enc = EpisodeEncoder(sim, cfg)
        self.ue_dim = enc.ue_dim
        self.bs_dim = enc.bs_dim
        n, u_voc, d_voc = sim.n_ue, sim.ul_vocab, sim.dl_vocab
        self.ue_act_dim = 3 + (u_voc if self.comm else 0)
        self.bs_act_dim = n * d_voc

        if cfg.ablation == DDPG:
            ue_crit_in = self.ue_dim + self.ue_act_dim
            bs_crit_in = self.bs_dim + self.bs_act_dim
        elif cfg.ablation == NOCOMM:
            ue_crit_in = n * (self.ue_dim + self.ue_act_dim)
            bs_crit_in = 0
        else:
            joint = n * (self.ue_dim + self.ue_act_dim) + self.bs_dim + self.bs_act_dim
            ue_crit_in = bs_crit_in = joint
        # offset of the acting agent's own action block within a critic row
        if cfg.ablation == DDPG:
            self._ue_own_off = self.ue_dim
            self._bs_own_off = self.bs_dim
        elif cfg.ablation == NOCOMM:
            self._ue_own_off = n * self.ue_dim
            self._bs_own_off = None
        else:
            self._ue_own_off = n * self.ue_dim + self.bs_dim
            self._bs_own_off = self.bs_dim + n * self.ue_dim

        init_rng = rng_stream(seed, _INIT)
        self.roles = {}
        self.roles["ue"] = self._make_role(
            (self.ue_dim, *cfg.hidden, self.ue_act_dim),
            (ue_crit_in, *cfg.hidden, 1),
            [slice(0, 3)] + ([slice(3, 3 + u_voc)] if self.comm else []),
            init_rng,
        )
        if self.comm:
            self.roles["bs"] = self._make_role(
                (self.bs_dim, *cfg.hidden, self.bs_act_dim),
                (bs_crit_in, *cfg.hidden, 1),
                [slice(i * d_voc, (i + 1) * d_voc) for i in range(n)],
                init_rng,
            )

        fields = {
            "ue_s": (n, self.ue_dim), "ue_s2": (n, self.ue_dim),
            "a_env": (n, 3), "r": (), "done": (),
        }
        if self.comm:
            fields.update({
                "a_msg": (n, u_voc),
                # bs_s/bs_s2: the BS's own decision states (mid-TTI, after the
                # channel); bs_pre/bs_pre2: pre-TTI snapshots used as the BS
                # component of the joint pre-state in the UE critics
                "bs_s": (self.bs_dim,), "bs_s2": (self.bs_dim,),
                "bs_pre": (self.bs_dim,), "bs_pre2": (self.bs_dim,),
                "a_bs": (self.bs_act_dim,),
            })
        self.replay = ReplayBuffer(cfg.replay_capacity, fields)

        self._explore_rng = rng_stream(seed, _EXPLORE)
        self._update_rng = rng_stream(seed, _UPDATE)
        self._replay_rng = rng_stream(seed, _REPLAY)

    def _make_role(self, actor_dims, critic_dims, head_slices, rng) -> ActorCritic:
        actor = nn.init_mlp(actor_dims, rng)
        critic = nn.init_mlp(critic_dims, rng)
        return ActorCritic(
            actor=actor, critic=critic,
            target_actor=actor.copy(), target_critic=critic.copy(),
            actor_opt=nn.init_adam(actor), critic_opt=nn.init_adam(critic),
            head_slices=head_slices,
        )

    def new_encoder(self) -> EpisodeEncoder:
        return EpisodeEncoder(self.sim, self.cfg)

    # --- action selection ------------------------------------------------

    def act_ue(self, states, mode: str) -> np.ndarray:
        """One-hot (env, ucm) heads for all UEs; states shape (n_ue, ue_dim)."""
        role = self.roles["ue"]
        logits, _ = nn.forward(role.actor, states)
        return select_actions(logits, role.head_slices, mode,
                              self.cfg.gumbel_temperature, self._explore_rng)

    def act_bs(self, state, mode: str) -> np.ndarray:
        role = self.roles["bs"]
        logits, _ = nn.forward(role.actor, state)
        return select_actions(logits, role.head_slices, mode,
                              self.cfg.gumbel_temperature, self._explore_rng)

    # --- critic input assembly -------------------------------------------

    def _ue_rows(self, s_ue, a_env, a_msg, s_b, a_bs, own_override=None) -> np.ndarray:
        """Perspective rows for the shared UE critic, own agent first.

        Inputs are batch-major: s_ue (M, n, ue_dim), a_env (M, n, 3), etc.
        Returns (n*M, in_dim); perspective u occupies rows [u*M, (u+1)*M).
        `own_override` replaces the acting UE's own action block (used for
        the differentiable re-derived actions during actor updates).
        """
        n = self.sim.n_ue
        m = s_ue.shape[0]
        ablation = self.cfg.ablation
        rows = []
        for u in range(n):
            others = [v for v in range(n) if v != u]
            if own_override is not None:
                own = own_override[u * m:(u + 1) * m]
            elif self.comm:
                own = np.concatenate([a_env[:, u], a_msg[:, u]], axis=1)
            else:
                own = a_env[:, u]
            blocks = [s_ue[:, u]]
            if ablation != DDPG:
                blocks += [s_ue[:, v] for v in others]
                if self.comm:
                    blocks.append(s_b)
            blocks.append(own)
            if ablation != DDPG:
                for v in others:
                    blocks.append(a_env[:, v])
                    if self.comm:
                        blocks.append(a_msg[:, v])
                if self.comm:
                    blocks.append(a_bs)
            rows.append(np.concatenate(blocks, axis=1))
        return np.concatenate(rows, axis=0)

    def _bs_rows(self, s_b, a_bs, s_ue, a_env, a_msg, own_override=None) -> np.ndarray:
        """Critic rows for the BS role, shape (M, in_dim)."""
        n = self.sim.n_ue
        own = own_override if own_override is not None else a_bs
        blocks = [s_b]
        if self.cfg.ablation != DDPG:
            blocks += [s_ue[:, v] for v in range(n)]
        blocks.append(own)
        if self.cfg.ablation != DDPG:
            for v in range(n):
                blocks.append(a_env[:, v])
                blocks.append(a_msg[:, v])
        return np.concatenate(blocks, axis=1)

    def _batch_views(self, batch, next_side: bool, ue_actions, bs_actions):
        s_ue = batch["ue_s2"] if next_side else batch["ue_s"]
        s_b = None
        if self.comm:
            s_b = batch["bs_pre2"] if next_side else batch["bs_pre"]
        a_env, a_msg = ue_actions
        return s_ue, a_env, a_msg, s_b, bs_actions

    def _target_actions(self, batch):
        """Greedy one-hot actions of the target actors on the next states."""
        n = self.sim.n_ue
        m = batch["r"].shape[0]
        role = self.roles["ue"]
        flat = batch["ue_s2"].reshape(m * n, self.ue_dim)
        logits, _ = nn.forward(role.target_actor, flat)
        onehot = select_actions(logits, role.head_slices, "greedy")
        a_env = onehot[:, :3].reshape(m, n, 3)
        a_msg = onehot[:, 3:].reshape(m, n, -1) if self.comm else None
        a_bs = None
        if self.comm:
            bs_role = self.roles["bs"]
            bs_logits, _ = nn.forward(bs_role.target_actor, batch["bs_s2"])
            a_bs = select_actions(bs_logits, bs_role.head_slices, "greedy")
        return a_env, a_msg, a_bs

    # --- updates ----------------------------------------------------------

    def add_transition(self, items: dict) -> None:
        self.replay.add(items)

    def critic_update(self, batch, gamma=None) -> dict:
        """One Adam step per role on the mean squared TD error; returns losses."""
        gamma = self.cfg.discount if gamma is None else gamma
        n = self.sim.n_ue
        a2_env, a2_msg, a2_bs = self._target_actions(batch)
        losses = {}

        role = self.roles["ue"]
        x = self._ue_rows(*self._batch_views(batch, False, (batch["a_env"],
                          batch.get("a_msg")), batch.get("a_bs")))
        x2 = self._ue_rows(*self._batch_views(batch, True, (a2_env, a2_msg), a2_bs))
        q2, _ = nn.forward(role.target_critic, x2)
        r = np.tile(batch["r"], n)
        done = np.tile(batch["done"], n)
        y = r + gamma * (1.0 - done) * q2[:, 0]
        losses["ue"] = self._critic_step(role, x, y)

        if self.comm:
            role = self.roles["bs"]
            x = self._bs_rows(batch["bs_s"], batch["a_bs"], batch["ue_s"],
                              batch["a_env"], batch["a_msg"])
            x2 = self._bs_rows(batch["bs_s2"], a2_bs, batch["ue_s2"], a2_env, a2_msg)
            q2, _ = nn.forward(role.target_critic, x2)
            y = batch["r"] + gamma * (1.0 - batch["done"]) * q2[:, 0]
            losses["bs"] = self._critic_step(role, x, y)
        return losses

    def _critic_step(self, role: ActorCritic, x, y) -> float:
        loss, grads = critic_loss_and_grads(role.critic, x, y)
        nn.adam_step(role.critic, grads, role.critic_opt, self.cfg.learning_rate)
        return loss

    def actor_update(self, batch) -> dict:
        """Ascend E[Q] - reg per role through re-derived Gumbel-softmax actions."""
        n = self.sim.n_ue
        m = batch["r"].shape[0]
        objectives = {}

        role = self.roles["ue"]
        own_states = np.concatenate([batch["ue_s"][:, u] for u in range(n)], axis=0)
        rows = lambda soft: self._ue_rows(
            batch["ue_s"], batch["a_env"], batch.get("a_msg"),
            batch.get("bs_pre"), batch.get("a_bs"), own_override=soft)
        objectives["ue"] = self._actor_step(role, own_states, rows,
                                            self._ue_own_off, self.ue_act_dim)

        if self.comm:
            role = self.roles["bs"]
            rows = lambda soft: self._bs_rows(
                batch["bs_s"], batch["a_bs"], batch["ue_s"],
                batch["a_env"], batch["a_msg"], own_override=soft)
            objectives["bs"] = self._actor_step(role, batch["bs_s"], rows,
                                                self._bs_own_off, self.bs_act_dim)
        return objectives

    def _actor_step(self, role: ActorCritic, own_states, build_rows, own_off, own_width,
                    noise=None) -> float:
        cfg = self.cfg
        if noise is None:
            rows = own_states.shape[0] if own_states.ndim == 2 else 1
            noise = nn.gumbel_noise((rows, role.actor.dims[-1]), self._update_rng)
        objective, grads = actor_objective_and_grads(
            role.actor, role.critic, own_states, build_rows, role.head_slices,
            own_off, own_width, noise, cfg.gumbel_temperature, cfg.policy_reg)
        nn.adam_step(role.actor, grads.scaled(-1.0), role.actor_opt, cfg.learning_rate)
        return objective

    def update_targets(self) -> None:
        tau = self.cfg.soft_update
        for role in self.roles.values():
            nn.soft_update(role.target_actor, role.actor, tau)
            nn.soft_update(role.target_critic, role.critic, tau)

    def update(self):
        """One full update round, or None while the replay warms up."""
        if len(self.replay) < self.cfg.batch_size:
            return None
        batch = self.replay.sample(self.cfg.batch_size, self._replay_rng)
        losses = self.critic_update(batch)
        objectives = self.actor_update(batch)
        self.update_targets()
        return {"critic": losses, "actor": objectives}


class AgentProtocol:
    """Drives episodes with a learner's actors; optionally records transitions.

    Greedy mode mutates no learner state; explore mode consumes the learner's
    exploration stream and, when a sink is given, emits (x, a, r, x') joint
    transitions. The BS part of x' only becomes known at the next TTI's BS
    decision, so transitions are buffered one TTI.
    """

    def __init__(self, learner: Learner, mode: str, sink=None):
        self.learner = learner
        self.mode = mode
        self.sink = sink
        self.enc = learner.new_encoder()
        self._pending = None
        self._cur = None
        self._next_ue_states = None

    def reset(self, config: SimConfig) -> None:
        if config.n_ue != self.learner.sim.n_ue:
            raise ConfigError("episode config does not match the trained agent sizes")
        self.enc.reset()
        self._pending = None
        self._cur = None
        self._next_ue_states = None

    def ue_actions(self, obs, dcms):
        enc = self.enc
        states = self._next_ue_states
        if states is None:
            states = enc.ue_states(obs, dcms)
        onehot = self.learner.act_ue(states, self.mode)
        env_idx = onehot[:, :3].argmax(axis=1)
        if self.learner.comm:
            msg_idx = onehot[:, 3:].argmax(axis=1)
        else:
            msg_idx = np.zeros(len(env_idx), dtype=int)
        self._cur = {
            "ue_s": states,
            "a_env": onehot[:, :3],
            "a_msg": onehot[:, 3:] if self.learner.comm else None,
        }
        enc.record_ue(obs, env_idx, msg_idx, dcms)
        return [UeAction(int(e), int(u)) for e, u in zip(env_idx, msg_idx)]

    def bs_action(self, obs_b, ucms, rng) -> BsAction:
        n = self.learner.sim.n_ue
        if not self.learner.comm:
            return BsAction((NULL_MSG,) * n)
        pre = self.enc.bs_state_pre()
        state = self.enc.bs_state(obs_b, ucms)
        if self._pending is not None:
            self._pending["bs_s2"] = state
            self.sink(self._pending)
            self._pending = None
        onehot = self.learner.act_bs(state, self.mode)
        d_voc = self.learner.sim.dl_vocab
        dcms = tuple(int(onehot[i * d_voc:(i + 1) * d_voc].argmax()) for i in range(n))
        self._cur["bs_s"] = state
        self._cur["bs_pre"] = pre
        self._cur["a_bs"] = onehot
        self.enc.record_bs(obs_b, ucms, dcms)
        return BsAction(dcms)

    def observe_step(self, state, obs, reward, done, info) -> None:
        """Driver hook: complete histories and emit/buffer the transition."""
        next_states = self.enc.ue_states(obs, info["dcm_next"])
        self._next_ue_states = next_states
        if self.sink is None:
            return
        transition = dict(self._cur)
        if transition.get("a_msg") is None:
            transition.pop("a_msg", None)
        transition.update({"r": float(reward), "done": float(done), "ue_s2": next_states})
        if not self.learner.comm:
            self.sink(transition)
            return
        transition["bs_pre2"] = self.enc.bs_state_pre()
        if done:
            transition["bs_s2"] = self.enc.bs_state_terminal()
            self.sink(transition)
        else:
            self._pending = transition


@dataclass
class EvalPoint:
    train_episode: int
    mean_goodput: float
    mean_delivery_rate: float
    mean_duration: float


@dataclass
class EvalResult:
    goodputs: list
    delivery_rates: list
    durations: list

    @property
    def mean_goodput(self) -> float:
        return float(np.mean(self.goodputs))

    @property
    def mean_delivery_rate(self) -> float:
        return float(np.mean(self.delivery_rates))

    @property
    def mean_duration(self) -> float:
        return float(np.mean(self.durations))


def evaluate(learner: Learner, sim: SimConfig, episode_seeds, trace_sink=None) -> EvalResult:
    """Greedy rollouts over the given seeds; pure with respect to the learner."""
    from .env import delivery_rate, goodput

    protocol = AgentProtocol(learner, "greedy")
    result = EvalResult([], [], [])
    for seed in episode_seeds:
        trace = [] if trace_sink is not None else None
        stats = run_episode(sim, seed, protocol, trace=trace)
        result.goodputs.append(goodput(stats))
        result.delivery_rates.append(delivery_rate(stats, sim))
        result.durations.append(stats.n_ttis)
        if trace_sink is not None:
            trace_sink(trace, stats)
    return result


def eval_seeds(run_seed: int, count: int, tag: int = EP_EVAL) -> list:
    return [episode_seed(run_seed, tag, j) for j in range(count)]


def train_run(sim: SimConfig, cfg: TrainConfig, seed: int, progress=None):
    """Train one repetition; returns (learner, evaluation trace).

    The trace starts with an untrained (episode 0) evaluation point and then
    one point per eval_interval episodes, always including the final episode.
    Every point evaluates the same fixed seed set with exploration and
    learning disabled.
    """
    learner = Learner(sim, cfg, seed)
    seeds = eval_seeds(seed, cfg.episodes_eval)
    trace = []

    def eval_point(episode_index: int) -> None:
        res = evaluate(learner, sim, seeds)
        trace.append(EvalPoint(episode_index, res.mean_goodput,
                               res.mean_delivery_rate, res.mean_duration))
        if progress is not None:
            progress(trace[-1])

    eval_point(0)
    protocol = AgentProtocol(learner, "explore", sink=learner.add_transition)
    steps = 0

    def on_step(state, obs, reward, done, info):
        nonlocal steps
        protocol.observe_step(state, obs, reward, done, info)
        steps += 1
        if steps % cfg.update_interval == 0:
            learner.update()

    for ep in range(cfg.episodes_train):
        run_episode(sim, episode_seed(seed, EP_TRAIN, ep), protocol, on_step=on_step)
        if (ep + 1) % cfg.eval_interval == 0 or ep + 1 == cfg.episodes_train:
            eval_point(ep + 1)
    return learner, trace


def save_checkpoint(path, learner: Learner, seed: int) -> None:
    """Persist all role networks plus the configs and seed in one npz file."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "seed": seed,
        "sim": asdict(learner.sim),
        "train": asdict(learner.cfg),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, role in learner.roles.items():
        for net_tag in ("actor", "critic", "target_actor", "target_critic"):
            net = getattr(role, net_tag)
            arrays[f"{name}.{net_tag}.dims"] = np.array(net.dims)
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                arrays[f"{name}.{net_tag}.w{i}"] = w
                arrays[f"{name}.{net_tag}.b{i}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Rebuild a Learner (empty replay) from a checkpoint; returns (learner, seed)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        sim = SimConfig(**meta["sim"])
        train_kwargs = dict(meta["train"])
        train_kwargs["hidden"] = tuple(train_kwargs["hidden"])
        cfg = TrainConfig(**train_kwargs)
        learner = Learner(sim, cfg, meta["seed"])
        for name, role in learner.roles.items():
            for net_tag in ("actor", "critic", "target_actor", "target_critic"):
                net = getattr(role, net_tag)
                dims = tuple(int(d) for d in data[f"{name}.{net_tag}.dims"])
                if dims != net.dims:
                    raise ValueError(f"checkpoint dims {dims} != expected {net.dims}")
                for i in range(len(dims) - 1):
                    net.weights[i][:] = data[f"{name}.{net_tag}.w{i}"]
                    net.biases[i][:] = data[f"{name}.{net_tag}.b{i}"]
    return learner, meta["seed"]
