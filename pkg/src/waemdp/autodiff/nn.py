"""Small feed-forward networks on top of the tape."""
from __future__ import annotations

import numpy as np

from waemdp.autodiff import tensor as T
from waemdp.autodiff.tensor import Tensor
from waemdp.errors import ShapeMismatch

ACTIVATIONS = {
    "relu": (T.relu, lambda x: np.maximum(x, 0.0)),
    "tanh": (T.tanh, np.tanh),
    "sigmoid": (T.sigmoid, T._sigmoid_np),
    "leaky_relu": (T.leaky_relu, lambda x: np.where(x > 0, x, 0.01 * x)),
    "softplus": (T.softplus, lambda x: np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))),
    "identity": (lambda x: x, lambda x: x),
}


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def param(value, name):
    return Tensor(value, requires_grad=True, name=name)


class Module:
    """Anything holding named parameter tensors."""

    def named_parameters(self):
        raise NotImplementedError

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        for name, p in self.named_parameters():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeMismatch(f"{name}: {value.shape} vs {p.shape}")
            p.value = value.copy()

    def parameter_count(self):
        return int(sum(p.value.size for p in self.parameters()))


class Mlp(Module):
    def __init__(self, sizes, rng, activation="relu", output_activation="identity", name="mlp"):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.activation = activation
        self.output_activation = output_activation
        self.name = name
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.weights.append(param(glorot_uniform(rng, fan_in, fan_out), f"{name}.w{i}"))
            self.biases.append(param(np.zeros(fan_out), f"{name}.b{i}"))

    def named_parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [(w.name, w), (b.name, b)]
        return out

    def __call__(self, x):
        act = ACTIVATIONS[self.activation][0]
        last = len(self.weights) - 1
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.linear(h, w, b)
            h = act(h) if i < last else ACTIVATIONS[self.output_activation][0](h)
        return h

    def forward_np(self, x):
        """Numpy-only forward pass (no tape), for evaluation loops."""
        act = ACTIVATIONS[self.activation][1]
        last = len(self.weights) - 1
        h = np.asarray(x, dtype=np.float64)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.value + b.value
            h = act(h) if i < last else ACTIVATIONS[self.output_activation][1](h)
        return h


def made_masks(n_bits, n_hidden):
    """Masks for a one-hidden-layer MADE with sequential degrees.

    Hidden unit k has degree k mod n and sees input bits d < degree. Output i
    sees hidden units of degree <= i, plus a strictly lower-triangular direct
    connection, so logit i depends on bits 0..i-1 only.
    """
    degrees = np.arange(n_hidden) % n_bits
    bits = np.arange(n_bits)
    in_hidden = (bits[:, None] < degrees[None, :]).astype(np.float64)
    hidden_out = (degrees[:, None] <= bits[None, :]).astype(np.float64)
    direct = (bits[:, None] < bits[None, :]).astype(np.float64)
    return in_hidden, hidden_out, direct


class Made(Module):
    """Autoregressive conditioner: bits (N, n) and optional context (N, c) -> logits (N, n)."""

    def __init__(self, n_bits, rng, n_hidden=64, context_dim=0, activation="relu", name="made"):
        self.n_bits = n_bits
        self.n_hidden = n_hidden
        self.context_dim = context_dim
        self.activation = activation
        self.name = name
        self.mask_in, self.mask_out, self.mask_direct = made_masks(n_bits, n_hidden)
        self.w_in = param(glorot_uniform(rng, n_bits, n_hidden), f"{name}.w_in")
        self.b_hidden = param(np.zeros(n_hidden), f"{name}.b_hidden")
        self.w_out = param(glorot_uniform(rng, n_hidden, n_bits), f"{name}.w_out")
        self.w_direct = param(glorot_uniform(rng, n_bits, n_bits), f"{name}.w_direct")
        self.b_out = param(np.zeros(n_bits), f"{name}.b_out")
        self.w_ctx_hidden = self.w_ctx_out = None
        if context_dim:
            self.w_ctx_hidden = param(glorot_uniform(rng, context_dim, n_hidden), f"{name}.w_ctx_hidden")
            self.w_ctx_out = param(glorot_uniform(rng, context_dim, n_bits), f"{name}.w_ctx_out")

    def named_parameters(self):
        ps = [self.w_in, self.b_hidden, self.w_out, self.w_direct, self.b_out]
        if self.context_dim:
            ps += [self.w_ctx_hidden, self.w_ctx_out]
        return [(p.name, p) for p in ps]

    # The conditioner is split so that the context contribution can be computed
    # once and reused across the n sequential passes of ancestral sampling.
    def context_terms(self, context):
        if not self.context_dim:
            return self.b_hidden, self.b_out
        return (
            T.linear(context, self.w_ctx_hidden, self.b_hidden),
            T.linear(context, self.w_ctx_out, self.b_out),
        )

    def masked_weights(self):
        return (
            T.mul(self.w_in, self.mask_in),
            T.mul(self.w_out, self.mask_out),
            T.mul(self.w_direct, self.mask_direct),
        )

    def logits(self, bits, context=None, terms=None, weights=None):
        hidden_bias, out_bias = terms if terms is not None else self.context_terms(context)
        act = ACTIVATIONS[self.activation][0]
        w_in, w_out, w_direct = weights if weights is not None else self.masked_weights()
        h = act(T.add(T.matmul(bits, w_in), hidden_bias))
        return T.add(T.add(T.matmul(h, w_out), T.matmul(bits, w_direct)), out_bias)

    def context_terms_np(self, context):
        if not self.context_dim:
            return self.b_hidden.value, self.b_out.value
        return (
            context @ self.w_ctx_hidden.value + self.b_hidden.value,
            context @ self.w_ctx_out.value + self.b_out.value,
        )

    def logits_np(self, bits, context=None, terms=None):
        hidden_bias, out_bias = terms if terms is not None else self.context_terms_np(context)
        act = ACTIVATIONS[self.activation][1]
        h = act(bits @ (self.w_in.value * self.mask_in) + hidden_bias)
        return h @ (self.w_out.value * self.mask_out) + bits @ (self.w_direct.value * self.mask_direct) + out_bias
