"""Minimal neural substrate: MLPs, exact backprop, Adam, Gumbel-softmax.

Everything runs on float64 numpy so gradient checks against central finite
differences stay tight. Networks are fixed-topology fully connected stacks
with ReLU hidden layers and a linear output; categorical heads (softmax,
Gumbel sampling) are applied by the caller on top of the raw logits.
"""

from dataclasses import dataclass

import numpy as np

FORMAT_VERSION = 1


@dataclass
class Mlp:
    dims: tuple
    weights: list   # weights[i]: (dims[i+1], dims[i])
    biases: list    # biases[i]: (dims[i+1],)

    def copy(self) -> "Mlp":
        return Mlp(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class ForwardCache:
    """Layer inputs and pre-activations retained for backprop."""

    inputs: list        # inputs[i]: activation entering layer i, (batch, dims[i])
    pre: list           # pre[i]: pre-activation of layer i, (batch, dims[i+1])
    squeezed: bool      # input arrived as a 1-D vector


@dataclass
class Grads:
    weights: list
    biases: list

    def scaled(self, factor: float) -> "Grads":
        return Grads([factor * w for w in self.weights], [factor * b for b in self.biases])


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0


def init_mlp(dims, rng: np.random.Generator) -> Mlp:
    """Symmetric uniform fan-in initialization (bound 1/sqrt(fan_in)), zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"invalid layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def init_adam(mlp: Mlp) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in mlp.weights],
        v_w=[np.zeros_like(w) for w in mlp.weights],
        m_b=[np.zeros_like(b) for b in mlp.biases],
        v_b=[np.zeros_like(b) for b in mlp.biases],
    )


def forward(mlp: Mlp, x) -> tuple:
    """Evaluate the network; accepts a single vector or a batch of rows.

    Returns (output, cache); the cache feeds `backward`.
    """
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.shape[1] != mlp.dims[0]:
        raise ValueError(f"input width {x.shape[1]} != {mlp.dims[0]}")
    inputs, pre = [], []
    h = x
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
    out = h[0] if squeezed else h
    return out, ForwardCache(inputs, pre, squeezed)


def backward(mlp: Mlp, cache: ForwardCache, output_grad) -> tuple:
    """Exact gradients of sum(output * output_grad) w.r.t. parameters and input.

    Parameter gradients are summed over the batch rows. Returns
    (Grads, input_grad) with input_grad shaped like the forward input.
    """
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeezed:
        g = g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != {cache.pre[-1].shape}")
    grads_w = [None] * len(mlp.weights)
    grads_b = [None] * len(mlp.biases)
    for i in range(len(mlp.weights) - 1, -1, -1):
        if i < len(mlp.weights) - 1:
            g = g * (cache.pre[i] > 0)
        grads_w[i] = g.T @ cache.inputs[i]
        grads_b[i] = g.sum(axis=0)
        g = g @ mlp.weights[i]
    input_grad = g[0] if cache.squeezed else g
    return Grads(grads_w, grads_b), input_grad


def adam_step(mlp: Mlp, grads: Grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place."""
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to adam_step")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for params, gs, ms, vs in (
        (mlp.weights, grads.weights, state.m_w, state.v_w),
        (mlp.biases, grads.biases, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Polyak blend target <- tau*online + (1-tau)*target, in place."""
    if target.dims != online.dims:
        raise ValueError(f"shape mismatch {target.dims} vs {online.dims}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    u = np.clip(u, 1e-12, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gumbel_softmax(logits, noise, temperature: float) -> np.ndarray:
    """Deterministic relaxation given explicit noise; differentiable in logits."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return softmax((np.asarray(logits, dtype=np.float64) + noise) / temperature)


def gumbel_softmax_sample(logits, temperature: float, rng: np.random.Generator) -> np.ndarray:
    """Sample softmax((logits + Gumbel(0,1)) / temperature); rows sum to one."""
    logits = np.asarray(logits, dtype=np.float64)
    return gumbel_softmax(logits, gumbel_noise(logits.shape, rng), temperature)


def gumbel_softmax_grad(y, grad_y, temperature: float) -> np.ndarray:
    """Backprop grad_y through y = softmax((logits + g)/temperature) to the logits."""
    dot = (grad_y * y).sum(axis=-1, keepdims=True)
    return y * (grad_y - dot) / temperature


def save_mlp(path, mlp: Mlp) -> None:
    """Flat versioned dump: layer dims plus row-major weight/bias arrays."""
    arrays = {"version": np.array([FORMAT_VERSION]), "dims": np.array(mlp.dims)}
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        arrays[f"w{i}"] = np.ascontiguousarray(w)
        arrays[f"b{i}"] = np.ascontiguousarray(b)
    np.savez(path, **arrays)


def load_mlp(path) -> Mlp:
    with np.load(path) as data:
        version = int(data["version"][0])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported parameter dump version {version}")
        dims = tuple(int(d) for d in data["dims"])
        weights = [data[f"w{i}"].astype(np.float64) for i in range(len(dims) - 1)]
        biases = [data[f"b{i}"].astype(np.float64) for i in range(len(dims) - 1)]
    return Mlp(dims, weights, biases)
