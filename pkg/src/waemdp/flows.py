"""Autoregressive Bernoulli distributions over n-bit vectors.

Bit 0 is the most significant bit when a vector is read as an integer index,
so ``all_patterns(n)[k]`` is the binary expansion of ``k``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit

from waemdp.autodiff import tensor as T
from waemdp.autodiff.nn import Made
from waemdp.distributions import logistic_noise, relaxed_bernoulli
from waemdp.errors import DimensionMismatch


def all_patterns(n_bits):
    idx = np.arange(2 ** n_bits)
    return ((idx[:, None] >> np.arange(n_bits - 1, -1, -1)[None, :]) & 1).astype(np.float64)


def bits_to_index(bits):
    bits = np.asarray(np.round(bits), dtype=np.int64)
    n = bits.shape[-1]
    return (bits << np.arange(n - 1, -1, -1)).sum(axis=-1)


def index_to_bits(index, n_bits):
    index = np.asarray(index, dtype=np.int64)
    return ((index[..., None] >> np.arange(n_bits - 1, -1, -1)) & 1).astype(np.float64)


class AutoregressiveBernoulli:
    """Shared machinery; subclasses provide ``conditional_logits(bits, context)``."""

    n_bits: int

    def conditional_logits(self, bits, context=None):
        raise NotImplementedError

    def _check(self, bits):
        bits = np.atleast_2d(np.asarray(bits, dtype=np.float64))
        if bits.shape[-1] != self.n_bits:
            raise DimensionMismatch(f"expected {self.n_bits} bits, got {bits.shape[-1]}")
        return bits

    def log_prob(self, bits, context=None):
        bits = self._check(bits)
        logits = self.conditional_logits(bits, context)
        return np.sum(np.where(bits > 0.5, log_expit(logits), log_expit(-logits)), axis=-1)

    def prob(self, bits, context=None):
        return np.exp(self.log_prob(bits, context))

    def probs_all(self, context=None):
        """Probabilities of all 2^n patterns for a single context (vector of length c)."""
        patterns = all_patterns(self.n_bits)
        if context is not None and np.ndim(context) == 1:
            context = np.broadcast_to(np.asarray(context, dtype=np.float64), (len(patterns), np.size(context)))
        return np.exp(self.log_prob(patterns, context))

    def _ancestral(self, batch, context, choose):
        bits = np.zeros((batch, self.n_bits))
        for i in range(self.n_bits):
            logits = self.conditional_logits(bits, context)[:, i]
            bits[:, i] = choose(logits, i)
        return bits

    def sample(self, rng, context=None, size=1, temperature=None):
        """Binary draws (temperature None) or relaxed draws at the given temperature."""
        batch = len(context) if context is not None and np.ndim(context) == 2 else size
        if temperature is None:
            return self._ancestral(batch, context, lambda a, i: (rng.uniform(size=batch) < expit(a)).astype(float))
        noise = logistic_noise(rng, (batch, self.n_bits))
        return self._ancestral(batch, context, lambda a, i: relaxed_bernoulli(a, temperature, noise[:, i]))

    def greedy_mode(self, context=None, size=1):
        batch = len(context) if context is not None and np.ndim(context) == 2 else size
        return self._ancestral(batch, context, lambda a, i: (a > 0).astype(float))

    def exact_mode(self, context=None):
        if self.n_bits > 16:
            raise ValueError("exact mode enumerates 2^n patterns; limited to n <= 16")
        return all_patterns(self.n_bits)[int(np.argmax(self.probs_all(context)))]


class MadeFlow(AutoregressiveBernoulli):
    """Masked autoregressive relaxed-Bernoulli flow with a MADE conditioner."""

    def __init__(self, n_bits, rng, n_hidden=64, context_dim=0, name="flow"):
        self.n_bits = n_bits
        self.context_dim = context_dim
        self.made = Made(n_bits, rng, n_hidden=n_hidden, context_dim=context_dim, name=name)

    def named_parameters(self):
        return self.made.named_parameters()

    def parameters(self):
        return self.made.parameters()

    def conditional_logits(self, bits, context=None):
        return self.made.logits_np(bits, context)

    def logits_tensor(self, bits, context=None):
        return self.made.logits(bits, context)

    def log_prob_tensor(self, bits, context=None):
        """Differentiable log-probability of (possibly soft) bits."""
        logits = self.made.logits(bits, context)
        bits = T.as_tensor(bits)
        terms = T.add(T.mul(bits, T.log_sigmoid(logits)), T.mul(T.sub(1.0, bits), T.log_sigmoid(T.neg(logits))))
        return T.tsum(terms, axis=1)

    def relaxed_sample_tensor(self, noise, temperature, context=None):
        """Reparameterized sample z_i = sigmoid((l_i + alpha_i(z_<i)) / temperature).

        ``noise`` is an (N, n) array of standard logistic draws. Each pass of the
        conditioner fills in one more bit; the context part is computed once.
        """
        batch = noise.shape[0]
        terms = self.made.context_terms(context)
        weights = self.made.masked_weights()
        columns = []
        for i in range(self.n_bits):
            # bits >= i are still zero; logit i does not depend on them anyway
            filled = columns + [T.Tensor(np.zeros((batch, self.n_bits - i)))]
            current = T.concat(filled, axis=1) if len(filled) > 1 else filled[0]
            logits = self.made.logits(current, terms=terms, weights=weights)
            columns.append(relaxed_bernoulli(logits[:, i:i + 1], temperature, noise[:, i:i + 1]))
        return T.concat(columns, axis=1) if len(columns) > 1 else columns[0]


class UniformBits(AutoregressiveBernoulli):
    def __init__(self, n_bits):
        self.n_bits = n_bits

    def conditional_logits(self, bits, context=None):
        return np.zeros((np.shape(bits)[0], self.n_bits))


class TableFlow(AutoregressiveBernoulli):
    """Exact conditionals read off a joint table over 2^n patterns.

    ``joint`` has shape (2^n,) or (n_contexts, 2^n); with a table of contexts,
    the context argument is an integer index (or array of indices). Conditionals
    with zero prefix mass get logit 0.
    """

    def __init__(self, n_bits, joint, saturation=np.inf):
        joint = np.atleast_2d(np.asarray(joint, dtype=np.float64))
        if joint.shape[1] != 2 ** n_bits:
            raise DimensionMismatch(f"joint has {joint.shape[1]} entries, expected {2 ** n_bits}")
        self.n_bits = n_bits
        self.joint = joint / joint.sum(axis=1, keepdims=True)
        self.saturation = saturation

    def conditional_logits(self, bits, context=None):
        bits = np.atleast_2d(bits)
        ctx = np.zeros(len(bits), dtype=int) if context is None else np.broadcast_to(np.asarray(context, dtype=int), (len(bits),))
        rows = self.joint[ctx]
        n = self.n_bits
        out = np.zeros((len(bits), n))
        prefix = np.zeros(len(bits), dtype=np.int64)
        for i in range(n):
            width = 2 ** (n - i)
            block = rows.reshape(len(bits), -1, width)[np.arange(len(bits)), prefix]
            p1 = block[:, width // 2:].sum(axis=1)
            total = block.sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                logit = np.log(p1) - np.log(total - p1)
            logit = np.where(total > 0, logit, 0.0)
            out[:, i] = np.clip(logit, -self.saturation, self.saturation)
            prefix = prefix * 2 + (np.round(bits[:, i]) > 0.5)
        return out

    def log_prob(self, bits, context=None):
        bits = self._check(bits)
        logits = self.conditional_logits(bits, context)
        with np.errstate(divide="ignore"):
            return np.sum(np.where(bits > 0.5, log_expit(logits), log_expit(-logits)), axis=-1)
