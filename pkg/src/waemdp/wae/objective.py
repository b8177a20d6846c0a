"""Pieces of the Wasserstein auto-encoding objective.

The min player (latent model) minimizes reconstruction plus the scaled dual
estimates; the max player (two critics) maximizes the dual estimates minus a
gradient penalty that keeps the critics close to 1-Lipschitz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from waemdp.autodiff import tensor as T
from waemdp.autodiff.nn import Mlp
from waemdp.distributions import gumbel_noise, logistic_noise
from waemdp.errors import DimensionMismatch, EmptyBatch, ShapeMismatch


def raw_distance(t1, t2):
    """Sum of Euclidean distances between states, actions, rewards and successors."""
    s1, a1, r1, n1 = (np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in t1)
    s2, a2, r2, n2 = (np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in t2)
    for x, y in ((s1, s2), (a1, a2), (r1, r2), (n1, n2)):
        if x.shape != y.shape:
            raise DimensionMismatch(f"component shapes differ: {x.shape} vs {y.shape}")
    return float(
        np.linalg.norm(s1 - s2) + np.linalg.norm(a1 - a2) + np.linalg.norm(r1 - r2) + np.linalg.norm(n1 - n2)
    )


def latent_metric(x, y, temperature):
    """d(x, y) / (temperature + d(x, y)) for the Euclidean d; a bounded metric."""
    if not 0.0 < temperature <= 1.0:
        raise ValueError("temperature must lie in (0, 1]")
    d = np.linalg.norm(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64), axis=-1)
    return d / (temperature + d)


def latent_metric_constants(temperature, n):
    """(a, b) with a d <= d_lambda <= b d on [0, 1]^n."""
    return 1.0 / (temperature + np.sqrt(n)), 1.0 / temperature


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    action_features: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    labels: np.ndarray
    next_labels: np.ndarray

    def __len__(self):
        return len(self.rewards)

    @classmethod
    def from_samples(cls, samples, model):
        if not samples:
            raise EmptyBatch("empty batch")
        actions = np.array([smp.a for smp in samples])
        return cls(
            states=np.stack([smp.s for smp in samples]),
            actions=actions,
            action_features=model.ground_action_features(actions),
            rewards=np.array([smp.r for smp in samples], dtype=np.float64),
            next_states=np.stack([smp.s_next for smp in samples]),
            labels=np.stack([smp.label for smp in samples]).astype(np.float64),
            next_labels=np.stack([smp.label_next for smp in samples]).astype(np.float64),
        )


def row_norm(x):
    return T.sqrt(T.add(T.tsum(T.square(x), axis=1), 1e-12))


def reconstruction_loss(model, batch, z, latent_action, z_next):
    """Mean over the batch of d_S(s, G(z)) + d_A(a, psi(z, a_bar)) + |r - R(z, a_bar)| + d_S(s', G(z'))."""
    if len(batch) == 0:
        raise EmptyBatch("empty batch")
    loss = T.add(row_norm(T.sub(model.decode_tensor(z), batch.states)),
                 row_norm(T.sub(model.decode_tensor(z_next), batch.next_states)))
    reward = model.reward_tensor(z, latent_action)
    loss = T.add(loss, T.tabs(T.sub(T.reshape(reward, (len(batch),)), batch.rewards)))
    if not model.identity_actions:
        loss = T.add(loss, row_norm(T.sub(model.ground_action_tensor(z, latent_action), batch.action_features)))
    return T.mean(loss)


def gradient_penalty(critic, x, y, eps, fixed=None):
    """Mean of (||grad critic(x_tilde)|| - 1)^2 at x_tilde = eps x + (1 - eps) y.

    ``x`` and ``y`` are arrays (treated as constants); ``fixed`` are extra
    input columns prepended unchanged, so only the interpolated part is
    differentiated. ``eps`` has shape (N, 1).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"{x.shape} vs {y.shape}")
    point = T.Tensor(eps * x + (1.0 - eps) * y, requires_grad=True)
    inputs = point if fixed is None else T.concat([T.Tensor(fixed), point], axis=1)
    (g,) = T.grad(T.tsum(critic(inputs)), [point], create_graph=True)
    return T.mean(T.square(T.sub(row_norm(g), 1.0)))


class Critics:
    """The steady-state critic on (z, a_bar, z') and the transition critic on (s, a, z, a_bar, z')."""

    def __init__(self, model, state_dim, action_dim, rng, hidden=64, activation="tanh"):
        n, k = model.n_bits, model.n_latent_actions
        self.steady = Mlp([2 * n + k, hidden, hidden, 1], rng, activation=activation, name="critic_steady")
        self.transition = Mlp([state_dim + action_dim + 2 * n + k, hidden, hidden, 1], rng,
                              activation=activation, name="critic_transition")

    def named_parameters(self):
        return self.steady.named_parameters() + self.transition.named_parameters()

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.value.copy() for name, p in self.named_parameters()}


@dataclass
class NoiseDraw:
    flow: np.ndarray
    prior_labels: np.ndarray
    prior_free: np.ndarray
    prior_policy: np.ndarray
    prior_flow: np.ndarray
    action: np.ndarray
    gp_steady: np.ndarray
    gp_transition: np.ndarray

    @classmethod
    def draw(cls, model, batch_size, rng):
        n, k, ap = model.n_bits, model.n_latent_actions, model.ap_bits
        return cls(
            flow=logistic_noise(rng, (batch_size, n)),
            prior_labels=logistic_noise(rng, (batch_size, ap)),
            prior_free=logistic_noise(rng, (batch_size, n - ap)),
            prior_policy=gumbel_noise(rng, (batch_size, k)),
            prior_flow=logistic_noise(rng, (batch_size, n)),
            action=gumbel_noise(rng, (batch_size, k)),
            gp_steady=rng.uniform(size=(batch_size, 1)),
            gp_transition=rng.uniform(size=(batch_size, 1)),
        )


def critic_value(critic, parts):
    return T.mean(critic(T.concat(parts, axis=1)))


def steady_state_regularizer(critics, data_triple, prior_triple):
    """Dual estimate of the steady-state distance: E critic(data) - E critic(prior)."""
    return T.sub(critic_value(critics.steady, list(data_triple)), critic_value(critics.steady, list(prior_triple)))


def transition_regularizer(critics, context, encoded_next, model_next):
    """Dual estimate of the transition loss: critic at the encoded successor minus at the model successor."""
    context = list(context)
    return T.sub(critic_value(critics.transition, context + [encoded_next]),
                 critic_value(critics.transition, context + [model_next]))


@dataclass
class ObjectiveTerms:
    recon: T.Tensor
    w_steady: T.Tensor
    w_transition: T.Tensor
    penalty: T.Tensor

    def floats(self):
        return {
            "recon": float(self.recon.value),
            "w_ss": float(self.w_steady.value),
            "w_trans": float(self.w_transition.value),
            "gp": float(self.penalty.value),
        }


def objective_terms(model, critics, batch, noise, track_model=True):
    """One forward pass shared by both players.

    With ``track_model`` false the latent model runs without recording, so only
    the critics receive gradients.
    """
    ctx = T.enable_grad() if track_model else T.no_grad()
    with ctx:
        z = model.embed_tensor(batch.states, batch.labels)
        z_next = model.embed_tensor(batch.next_states, batch.next_labels)
        a_bar = model.latent_action_tensor(z, batch.actions, noise.action)
        z_model = model.transition_sample_tensor(z, a_bar, noise.flow)
        z_prior = model.prior_sample_tensor(noise.prior_labels, noise.prior_free)
        a_prior = model.policy_sample_tensor(z_prior, noise.prior_policy)
        z_prior_next = model.transition_sample_tensor(z_prior, a_prior, noise.prior_flow)
        recon = reconstruction_loss(model, batch, z, a_bar, z_next)
    ground = [T.Tensor(batch.states), T.Tensor(batch.action_features)]
    w_steady = steady_state_regularizer(critics, (z, a_bar, z_model), (z_prior, a_prior, z_prior_next))
    w_transition = transition_regularizer(critics, ground + [z, a_bar], z_next, z_model)
    data_triple = np.concatenate([z.value, a_bar.value, z_model.value], axis=1)
    prior_triple = np.concatenate([z_prior.value, a_prior.value, z_prior_next.value], axis=1)
    fixed = np.concatenate([batch.states, batch.action_features, z.value, a_bar.value], axis=1)
    penalty = T.add(
        gradient_penalty(critics.steady, data_triple, prior_triple, noise.gp_steady),
        gradient_penalty(critics.transition, z_next.value, z_model.value, noise.gp_transition, fixed=fixed),
    )
    return ObjectiveTerms(recon, w_steady, w_transition, penalty)
