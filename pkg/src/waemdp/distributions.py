"""Relaxed Bernoulli / Gumbel-softmax sampling and their zero-temperature limits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from waemdp.autodiff import tensor as T
from waemdp.errors import NonPositiveTemperature


def _check_temperature(temperature):
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")


def logistic_noise(rng, shape):
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=shape)
    return np.log(u) - np.log1p(-u)


def gumbel_noise(rng, shape):
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def relaxed_bernoulli(logits, temperature, noise):
    """sigmoid((logits + noise) / temperature); works on arrays or tape tensors."""
    _check_temperature(temperature)
    if isinstance(logits, T.Tensor):
        return T.sigmoid(T.mul(T.add(logits, noise), 1.0 / temperature))
    return expit((np.asarray(logits) + noise) / temperature)


def sample_relaxed_bernoulli(logit, temperature, rng):
    _check_temperature(temperature)
    logit = np.asarray(logit, dtype=np.float64)
    return relaxed_bernoulli(logit, temperature, logistic_noise(rng, logit.shape))


def gumbel_softmax(logits, temperature, noise):
    """Relaxed one-hot sample along the last axis."""
    _check_temperature(temperature)
    if isinstance(logits, T.Tensor):
        return T.softmax(T.mul(T.add(logits, noise), 1.0 / temperature), axis=-1)
    return softmax((np.asarray(logits) + noise) / temperature, axis=-1)


def sample_gumbel_softmax(logits, temperature, rng):
    _check_temperature(temperature)
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] < 2:
        raise ValueError("Gumbel-softmax needs at least two classes")
    return gumbel_softmax(logits, temperature, gumbel_noise(rng, logits.shape))


def smooth_heaviside(z, temperature):
    _check_temperature(temperature)
    if isinstance(z, T.Tensor):
        return T.sigmoid(T.mul(z, 2.0 / temperature))
    return expit(2.0 * np.asarray(z) / temperature)


def hard_heaviside(z):
    return (np.asarray(z) > 0).astype(np.float64)


@dataclass(frozen=True)
class RelaxedBernoulli:
    logit: float
    temperature: float

    def __post_init__(self):
        _check_temperature(self.temperature)

    def sample(self, rng, size=None):
        noise = logistic_noise(rng, size if size is not None else np.shape(self.logit))
        return relaxed_bernoulli(np.asarray(self.logit, dtype=np.float64), self.temperature, noise)

    def mode(self):
        return hard_heaviside(self.logit)


@dataclass(frozen=True)
class GumbelSoftmax:
    logits: tuple
    temperature: float

    def __post_init__(self):
        _check_temperature(self.temperature)
        k = len(self.logits)
        if k < 2:
            raise ValueError("Gumbel-softmax needs at least two classes")
        if self.temperature > 1.0 / (k - 1) + 1e-12:
            raise ValueError(f"temperature {self.temperature} exceeds 1/(k-1) = {1.0 / (k - 1)}")

    def sample(self, rng, size=()):
        logits = np.asarray(self.logits, dtype=np.float64)
        noise = gumbel_noise(rng, tuple(np.atleast_1d(size)) + logits.shape if size != () else logits.shape)
        return gumbel_softmax(logits, self.temperature, noise)

    def mode(self):
        # np.argmax returns the first maximal index, which is the tie rule we want.
        out = np.zeros(len(self.logits))
        out[int(np.argmax(self.logits))] = 1.0
        return out


def zero_temperature_mode(dist):
    """Mode of the discrete limit: ties go to 0 (bits) or the lowest index (classes).

    For an autoregressive flow this is the greedy per-bit mode of the
    factorization, which need not be the global mode.
    """
    if isinstance(dist, (RelaxedBernoulli, GumbelSoftmax)):
        return dist.mode()
    return dist.greedy_mode()
