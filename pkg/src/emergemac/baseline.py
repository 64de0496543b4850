"""Hand-coded contention-free protocol: SR / SG / ACK.

A UE requests the channel (SR) whenever its buffer is non-empty, transmits
only after a scheduling grant (SG), and deletes the oldest SDU only after an
acknowledgment (ACK). The BS acknowledges every decoded PDU; among the
remaining requesters it grants exactly one, chosen uniformly at random, so
the transmitting set never exceeds one UE and no collision can occur. A
grant to a UE whose buffer emptied in the meantime is simply wasted.
"""

import numpy as np

from .env import DELETE, NOTHING, NULL_MSG, TRANSMIT, BsAction, ConfigError, SimConfig, UeAction
from .rollout import run_episode

# fixed message meanings; they fit the default vocabularies (|U|=2, |D|=3)
SR = 1
SG = 1
ACK = 2


def check_vocab(config: SimConfig) -> None:
    if config.ul_vocab < 2 or config.dl_vocab < 3:
        raise ConfigError(
            "contention-free baseline needs ul_vocab >= 2 (null/SR) and dl_vocab >= 3 (null/SG/ACK)"
        )


def baseline_ue_policy(buffer_len: int, last_dcm: int) -> UeAction:
    """UE side: SR while data is buffered, transmit on SG, delete on ACK."""
    if buffer_len <= 0:
        return UeAction(NOTHING, NULL_MSG)
    if last_dcm == SG:
        return UeAction(TRANSMIT, SR)
    if last_dcm == ACK:
        return UeAction(DELETE, SR)
    return UeAction(NOTHING, SR)


def baseline_bs_policy(outcome_obs: int, ucms, rng: np.random.Generator) -> BsAction:
    """BS side: ACK the decoded UE, grant one remaining requester at random."""
    n_ue = len(ucms)
    dcm = [NULL_MSG] * n_ue
    requesters = [i for i, m in enumerate(ucms) if m == SR]
    if 1 <= outcome_obs <= n_ue:
        dcm[outcome_obs - 1] = ACK
        # a successful transmitter's simultaneous SR is ignored
        requesters = [i for i in requesters if i != outcome_obs - 1]
    if requesters:
        dcm[requesters[rng.integers(len(requesters))]] = SG
    return BsAction(tuple(dcm))


class BaselineProtocol:
    """Protocol adapter driving the environment with the fixed policies."""

    def reset(self, config: SimConfig) -> None:
        check_vocab(config)

    def ue_actions(self, obs, dcms):
        return [baseline_ue_policy(o, d) for o, d in zip(obs, dcms)]

    def bs_action(self, obs_b, ucms, rng):
        return baseline_bs_policy(obs_b, ucms, rng)


def run_baseline_episode(config: SimConfig, seed, trace=None, on_step=None):
    """One contention-free episode; returns its EpisodeStats."""
    return run_episode(config, seed, BaselineProtocol(), trace=trace, on_step=on_step)
