"""Shared helpers: scripted/random protocols and gradient-check utilities."""

import numpy as np
import pytest

from emergemac import nn
from emergemac.env import BsAction, SimConfig, UeAction


class ScriptProtocol:
    """Plays a fixed per-TTI script of UE actions and (optionally) DCMs.

    Past the end of the script everybody does nothing and the BS stays
    silent, so episodes run to truncation unless the script finishes the
    task.
    """

    def __init__(self, ue_script, dcm_script=None):
        self.ue_script = ue_script
        self.dcm_script = dcm_script
        self._t = 0
        self._n = None

    def reset(self, config):
        self._t = 0
        self._n = config.n_ue

    def ue_actions(self, obs, dcms):
        if self._t < len(self.ue_script):
            return list(self.ue_script[self._t])
        return [UeAction()] * self._n

    def bs_action(self, obs_b, ucms, rng):
        dcm = (0,) * self._n
        if self.dcm_script is not None and self._t < len(self.dcm_script):
            dcm = tuple(self.dcm_script[self._t])
        self._t += 1
        return BsAction(dcm)


class RandomProtocol:
    """Uniformly random actions and messages from a private seeded stream."""

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.cfg = None

    def reset(self, config):
        self.cfg = config

    def ue_actions(self, obs, dcms):
        return [UeAction(int(self.rng.integers(3)), int(self.rng.integers(self.cfg.ul_vocab)))
                for _ in range(self.cfg.n_ue)]

    def bs_action(self, obs_b, ucms, rng):
        return BsAction(tuple(int(self.rng.integers(self.cfg.dl_vocab))
                              for _ in range(self.cfg.n_ue)))


# --- gradient-check utilities -------------------------------------------

def flat_params(mlp):
    return np.concatenate([a.ravel() for a in mlp.weights + mlp.biases])


def set_params(mlp, vec):
    i = 0
    for a in mlp.weights + mlp.biases:
        a[:] = vec[i:i + a.size].reshape(a.shape)
        i += a.size


def flat_grads(grads):
    return np.concatenate([a.ravel() for a in grads.weights + grads.biases])


def random_net(dims, rng, scale=0.6):
    """Fully randomized parameters (biases included) to keep ReLUs generic."""
    net = nn.init_mlp(dims, rng)
    for a in net.weights + net.biases:
        a[:] = rng.normal(scale=scale, size=a.shape)
    return net


def min_abs_preactivation(cache):
    hidden = cache.pre[:-1]
    if not hidden:
        return np.inf
    return min(float(np.abs(z).min()) for z in hidden)


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a)
    b = np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def central_diff(f, vec, eps=1e-5):
    """Central finite differences of scalar f over a parameter vector."""
    grad = np.empty_like(vec)
    for j in range(vec.size):
        up = vec.copy()
        up[j] += eps
        down = vec.copy()
        down[j] -= eps
        grad[j] = (f(up) - f(down)) / (2 * eps)
    return grad


@pytest.fixture
def table1_config():
    return SimConfig()
