"""Single-cell TDMA uplink environment.

One base station serves ``n_ue`` user equipments over a shared uplink data
channel modeled as a packet erasure channel, plus per-UE error-free control
channels in both directions. Each UE owns a FIFO transmission buffer; SDUs
arrive stochastically until a per-UE budget is exhausted. UEs can transmit or
delete the oldest buffered SDU and attach one uplink control message (UCM)
per TTI; the BS answers with one downlink control message (DCM) per UE,
delivered at the next TTI.

Intra-TTI ordering is fixed: arrivals, then UE actions, then channel
resolution, then the BS acts (seeing this TTI's outcome and UCMs), then the
shared reward. UE indices are 1-based in channel outcomes and BS
observations; action/message sequences are positional (entry i belongs to
UE i+1).
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

# UE environment actions
NOTHING = 0
TRANSMIT = 1
DELETE = 2

# control-message symbol 0 is the null message in both vocabularies
NULL_MSG = 0


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


class MetricError(ValueError):
    """Raised when a metric is undefined for the given statistics."""


@dataclass(frozen=True)
class SimConfig:
    """Environment parameters. Defaults follow the reference scenario."""

    n_ue: int = 2               # N
    buffer_capacity: int = 5    # B, SDUs per UE buffer
    total_sdus: int = 2         # P, SDUs each UE must deliver
    p_arrival: float = 0.5      # per-TTI arrival probability
    tbler: float = 0.1          # erasure probability of an uncollided PDU
    dl_vocab: int = 3           # |D|, downlink control vocabulary size
    ul_vocab: int = 2           # |U|, uplink control vocabulary size
    max_steps: int = 24         # T_max, episode truncation in TTIs
    reward_param: int = 3       # R, magnitude of the delivery/deletion reward

    def validate(self) -> None:
        if self.n_ue < 1:
            raise ConfigError(f"n_ue must be >= 1, got {self.n_ue}")
        if self.buffer_capacity < 1:
            raise ConfigError(f"buffer_capacity must be >= 1, got {self.buffer_capacity}")
        if self.total_sdus < 1:
            raise ConfigError(f"total_sdus must be >= 1, got {self.total_sdus}")
        if not 0.0 <= self.p_arrival <= 1.0:
            raise ConfigError(f"p_arrival must be in [0, 1], got {self.p_arrival}")
        if not 0.0 <= self.tbler <= 1.0:
            raise ConfigError(f"tbler must be in [0, 1], got {self.tbler}")
        if self.dl_vocab < 1 or self.ul_vocab < 1:
            raise ConfigError("control vocabularies need at least the null symbol")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.reward_param < 1:
            raise ConfigError(f"reward_param must be >= 1, got {self.reward_param}")


@dataclass
class Sdu:
    """Ledger record for one SDU; `received_by_bs` is monotone."""

    id: int
    owner: int          # UE index, 1-based
    generated_at: int   # TTI of the arrival draw
    received_by_bs: bool = False
    in_buffer: bool = False
    dropped: bool = False   # arrived while the buffer was full; never deliverable

    @property
    def status(self) -> str:
        if self.in_buffer:
            return "in_buffer"
        if self.dropped:
            return "dropped"
        return "deleted_after_receipt" if self.received_by_bs else "deleted_unreceived"


@dataclass(frozen=True)
class ChannelOutcome:
    """Result of one TTI on the shared data channel."""

    kind: str               # "idle" | "decoded" | "non_decodable"
    ue: int | None = None   # 1-based transmitter index, only for "decoded"


IDLE = ChannelOutcome("idle")
NON_DECODABLE = ChannelOutcome("non_decodable")


def decoded(ue: int) -> ChannelOutcome:
    return ChannelOutcome("decoded", ue)


@dataclass(frozen=True)
class UeAction:
    env_action: int = NOTHING   # NOTHING | TRANSMIT | DELETE
    ucm: int = NULL_MSG


@dataclass(frozen=True)
class BsAction:
    dcm: tuple[int, ...] = ()   # one DCM symbol per UE


@dataclass
class EpisodeStats:
    n_rx: int = 0                 # distinct SDUs received
    n_ttis: int = 0               # episode duration
    n_generated: int = 0          # includes SDUs dropped on arrival
    wrongful_deletions: int = 0
    collisions: int = 0
    erasures: int = 0             # single-transmitter TTIs lost to the channel
    overflow_drops: int = 0       # arrivals into a full buffer


@dataclass
class EnvState:
    config: SimConfig
    t: int
    buffers: list[deque]            # per-UE FIFOs of SDU ids
    ledger: list[Sdu]               # indexed by SDU id
    generated_count: list[int]
    pending_dcm: list[int]          # produced at t-1, delivered to UEs at t
    last_outcome: ChannelOutcome
    stats: EpisodeStats
    arrival_rng: np.random.Generator
    erasure_rng: np.random.Generator
    policy_rng: np.random.Generator  # spare stream for randomized policies (baseline grants)
    done: bool = False


@dataclass(frozen=True)
class StepEvents:
    """Reward-relevant events collected over one TTI."""

    new_receipt: bool = False
    wrongful_deletions: int = 0


def _substream(ss: np.random.SeedSequence, key: int) -> np.random.SeedSequence:
    # equivalent to ss.spawn() children, but without mutating ss (a reused
    # seed object must always restart the exact same episode)
    return np.random.SeedSequence(entropy=ss.entropy, spawn_key=(*ss.spawn_key, key))


def new_episode(config: SimConfig, seed) -> EnvState:
    """Create a fresh episode state, deterministically seeded.

    `seed` may be an int or a numpy SeedSequence; it is split into three
    independent sub-streams (arrivals, erasures, policy randomness) so that
    arrival realizations do not depend on the policies being run.
    """
    config.validate()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    arrival_ss, erasure_ss, policy_ss = (_substream(ss, k) for k in range(3))
    return EnvState(
        config=config,
        t=0,
        buffers=[deque() for _ in range(config.n_ue)],
        ledger=[],
        generated_count=[0] * config.n_ue,
        pending_dcm=[NULL_MSG] * config.n_ue,
        last_outcome=IDLE,
        stats=EpisodeStats(),
        arrival_rng=np.random.default_rng(arrival_ss),
        erasure_rng=np.random.default_rng(erasure_ss),
        policy_rng=np.random.default_rng(policy_ss),
    )


def arrival_step(state: EnvState) -> EnvState:
    """Draw at most one arrival per UE that still has SDUs to generate.

    An SDU arriving into a full buffer counts as generated but is dropped
    permanently (logged in stats.overflow_drops).
    """
    cfg = state.config
    for i in range(cfg.n_ue):
        if state.generated_count[i] >= cfg.total_sdus:
            continue
        if state.arrival_rng.random() < cfg.p_arrival:
            state.generated_count[i] += 1
            state.stats.n_generated += 1
            sdu = Sdu(id=len(state.ledger), owner=i + 1, generated_at=state.t)
            if len(state.buffers[i]) < cfg.buffer_capacity:
                sdu.in_buffer = True
                state.buffers[i].append(sdu.id)
            else:
                sdu.dropped = True
                state.stats.overflow_drops += 1
            state.ledger.append(sdu)
    return state


def resolve_channel(transmitters: set, tbler: float, rng: np.random.Generator) -> ChannelOutcome:
    """Outcome of one TTI on the shared channel.

    No transmitter: idle. Exactly one: decoded with probability 1-tbler (one
    rng variate consumed), otherwise non-decodable. Two or more: collision,
    always non-decodable, no variate consumed.
    """
    if not transmitters:
        return IDLE
    if len(transmitters) >= 2:
        return NON_DECODABLE
    (u,) = transmitters
    if rng.random() < tbler:
        return NON_DECODABLE
    return decoded(u)


def bs_observation(outcome: ChannelOutcome, n_ue: int) -> int:
    """Integer channel observation: 0 idle, u for a decoded UE u, N+1 otherwise."""
    if outcome.kind == "idle":
        return 0
    if outcome.kind == "decoded":
        return outcome.ue
    return n_ue + 1


def ue_observation(state: EnvState, u: int) -> int:
    """Current buffer occupancy of UE u (1-based index)."""
    if not 1 <= u <= state.config.n_ue:
        raise IndexError(f"UE index {u} out of range [1, {state.config.n_ue}]")
    return len(state.buffers[u - 1])


def compute_reward(events: StepEvents, reward_param: int) -> int:
    """Shared reward for one TTI.

    +R if a not-previously-received SDU was decoded, -R per wrongful
    deletion, summed; -1 when neither kind of event fired.
    """
    r = 0
    if events.new_receipt:
        r += reward_param
    r -= reward_param * events.wrongful_deletions
    if not events.new_receipt and events.wrongful_deletions == 0:
        r = -1
    return r


def episode_done(state: EnvState) -> bool:
    """True once the transmission task is finished or the episode truncates.

    Finished means: every SDU generated, every non-dropped SDU received, and
    all buffers empty. A wrongfully deleted SDU can never be received, so
    such episodes always run to max_steps.
    """
    cfg = state.config
    if state.t >= cfg.max_steps:
        return True
    if any(c < cfg.total_sdus for c in state.generated_count):
        return False
    if any(state.buffers):
        return False
    return all(s.received_by_bs for s in state.ledger if not s.dropped)


def step(state: EnvState, ue_actions, bs_action_provider):
    """Advance one TTI.

    `ue_actions` is a sequence of n_ue UeAction. `bs_action_provider` is
    called as provider(obs_b, ucms, rng) after channel resolution and must
    return a BsAction; its DCMs are delivered to the UEs at the next TTI.

    Returns (state, ue_buffer_lengths, reward, done, info). The info dict
    carries the channel outcome, the BS observation, this TTI's UCMs, the
    DCMs the UEs received this TTI ("dcm") and the ones just produced
    ("dcm_next"), and the reward events.
    """
    cfg = state.config
    if state.done:
        raise RuntimeError("step() called on a finished episode")
    if len(ue_actions) != cfg.n_ue:
        raise ValueError(f"expected {cfg.n_ue} UE actions, got {len(ue_actions)}")

    dcm_delivered = list(state.pending_dcm)

    # (1) arrivals
    arrival_step(state)

    # (2) UE environment actions
    transmitters = set()
    tx_sdu = {}
    wrongful = 0
    for i, act in enumerate(ue_actions):
        buf = state.buffers[i]
        if act.env_action == TRANSMIT and buf:
            transmitters.add(i + 1)
            tx_sdu[i + 1] = buf[0]
        elif act.env_action == DELETE and buf:
            sdu = state.ledger[buf.popleft()]
            sdu.in_buffer = False
            if not sdu.received_by_bs:
                wrongful += 1
                state.stats.wrongful_deletions += 1

    # (3) shared data channel
    outcome = resolve_channel(transmitters, cfg.tbler, state.erasure_rng)
    state.last_outcome = outcome
    if len(transmitters) >= 2:
        state.stats.collisions += 1
    elif len(transmitters) == 1 and outcome.kind == "non_decodable":
        state.stats.erasures += 1
    new_receipt = False
    if outcome.kind == "decoded":
        sdu = state.ledger[tx_sdu[outcome.ue]]
        if not sdu.received_by_bs:
            sdu.received_by_bs = True
            state.stats.n_rx += 1
            new_receipt = True

    # (4) BS observes and schedules; DCMs reach UEs at t+1
    obs_b = bs_observation(outcome, cfg.n_ue)
    ucms = tuple(act.ucm for act in ue_actions)
    bs_action = bs_action_provider(obs_b, ucms, state.policy_rng)
    dcm_next = list(bs_action.dcm)
    if len(dcm_next) != cfg.n_ue:
        raise ValueError(f"BsAction must carry {cfg.n_ue} DCMs, got {len(dcm_next)}")
    if any(not 0 <= d < cfg.dl_vocab for d in dcm_next):
        raise ValueError(f"DCM symbol out of range [0, {cfg.dl_vocab}): {dcm_next}")
    state.pending_dcm = dcm_next

    # (5) shared reward
    events = StepEvents(new_receipt=new_receipt, wrongful_deletions=wrongful)
    reward = compute_reward(events, cfg.reward_param)

    # (6) clock and termination
    state.t += 1
    state.stats.n_ttis = state.t
    state.done = episode_done(state)

    obs = [len(b) for b in state.buffers]
    info = {
        "outcome": outcome,
        "obs_b": obs_b,
        "ucms": ucms,
        "dcm": dcm_delivered,
        "dcm_next": dcm_next,
        "events": events,
    }
    return state, obs, reward, state.done, info


def goodput(stats: EpisodeStats) -> float:
    """Distinct SDUs delivered per TTI (retransmissions never count)."""
    if stats.n_ttis == 0:
        raise MetricError("goodput is undefined before the first TTI")
    return stats.n_rx / stats.n_ttis


def delivery_rate(stats: EpisodeStats, config: SimConfig) -> float:
    """Fraction of the nominal SDU total that was correctly received."""
    return stats.n_rx / (config.total_sdus * config.n_ue)
