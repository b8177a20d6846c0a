"""PAC estimation of the reward and transition local losses."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from waemdp.errors import DomainError, InsufficientSamples, PolicyMismatch


def _check_unit(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


def required_samples(epsilon, delta):
    """Smallest T with T >= ln(4/delta) / (2 epsilon^2)."""
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    return math.ceil(-math.log(delta / 4.0) / (2.0 * epsilon ** 2))


def required_samples_value(epsilon, delta, gamma, lipschitz_value):
    """Sample count for an epsilon-accurate value-difference bound."""
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    if lipschitz_value < 0 or not math.isfinite(lipschitz_value):
        raise DomainError(f"value Lipschitz constant must be finite and >= 0, got {lipschitz_value}")
    inflation = (1.0 + gamma * lipschitz_value) ** 2 / (1.0 - gamma) ** 2
    return math.ceil(-math.log(delta / 4.0) * inflation / (2.0 * epsilon ** 2))


@dataclass
class LocalLossEstimate:
    loss_reward: float
    loss_transition: float
    samples_used: int
    epsilon: float
    delta: float

    def to_dict(self):
        return asdict(self)


def local_losses_from_samples(model, samples):
    """Empirical means of |r - R(z, a)| and 1 - P(z' | z, a) over the samples."""
    if not samples:
        raise InsufficientSamples("no samples")
    states = np.stack([smp.s for smp in samples])
    nexts = np.stack([smp.s_next for smp in samples])
    labels = np.stack([smp.label for smp in samples])
    labels_next = np.stack([smp.label_next for smp in samples])
    rewards = np.array([smp.r for smp in samples])
    z = model.embed_np(states, labels)
    z_next = model.embed_np(nexts, labels_next)
    if any(smp.a_latent is None for smp in samples):
        latent_actions = model.encode_action_np(z, [smp.a for smp in samples])
    else:
        latent_actions = np.array([smp.a_latent for smp in samples], dtype=int)
    reward_gap = np.abs(rewards - model.reward_np(z, latent_actions))
    miss = 1.0 - model.transition_prob_np(z, latent_actions, z_next)
    return float(reward_gap.mean()), float(np.clip(miss, 0.0, 1.0).mean())


def estimate_local_losses(model, sampler, epsilon=0.01, delta=0.045, n_samples=None, strict=True):
    """Draw ``n_samples`` stationary transitions under the latent policy and estimate the losses.

    The guarantees only cover traces produced by the model's own latent
    policy; with ``strict`` any other sampler policy is refused, as is a
    sample count below the Hoeffding requirement.
    """
    needed = required_samples(epsilon, delta)
    n_samples = needed if n_samples is None else int(n_samples)
    if strict:
        if getattr(sampler.policy, "model", None) is not model:
            raise PolicyMismatch(
                "local-loss guarantees hold only for traces of the model's latent policy; "
                f"sampler uses a {getattr(sampler.policy, 'kind', type(sampler.policy).__name__)} policy"
            )
        if n_samples < needed:
            raise InsufficientSamples(f"{n_samples} samples < required {needed}")
    samples = sampler.sample(n_samples)
    loss_r, loss_p = local_losses_from_samples(model, samples)
    return LocalLossEstimate(loss_r, loss_p, n_samples, epsilon, delta)
