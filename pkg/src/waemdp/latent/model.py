"""Neural latent space model over n-bit latent states.

The first ``ap_bits`` bits of a latent state are the labels of the ground
state; the encoder only produces the remaining bits. Latent actions are
either the ground actions themselves (identity mode, discrete ground actions)
or a learned categorical abstraction of continuous actions.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import softmax

from waemdp.autodiff import tensor as T
from waemdp.autodiff.checkpoint import decode_params, encode_params
from waemdp.autodiff.nn import Mlp
from waemdp.distributions import gumbel_softmax, hard_heaviside, relaxed_bernoulli, smooth_heaviside
from waemdp.errors import DimensionMismatch, NonPositiveTemperature
from waemdp.flows import MadeFlow, all_patterns, bits_to_index


@dataclass
class ModelConfig:
    state_dim: int
    ap: list
    n_bits: int
    n_actions: int | None = None  # discrete ground actions (identity mode)
    action_low: list | None = None  # continuous ground actions
    action_high: list | None = None
    n_latent_actions: int | None = None
    hidden: int = 64
    flow_hidden: int = 64
    temp_encoder: float = 2.0 / 3.0
    temp_transition: float = 0.5
    temp_prior: float = 0.5
    temp_policy: float = 1.0 / 3.0
    temp_action: float = 1.0 / 3.0
    initial_state: list = field(default_factory=list)
    initial_label: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_bits <= len(self.ap):
            raise DimensionMismatch(f"n_bits={self.n_bits} leaves no free bits after {len(self.ap)} label bits")
        if self.n_actions is None and self.action_low is None:
            raise ValueError("either n_actions or an action box is required")
        if self.n_latent_actions is None:
            self.n_latent_actions = self.n_actions
        for name in ("temp_encoder", "temp_transition", "temp_prior", "temp_policy", "temp_action"):
            if not getattr(self, name) > 0:
                raise NonPositiveTemperature(f"{name} must be > 0")

    @property
    def ap_bits(self):
        return len(self.ap)

    @property
    def free_bits(self):
        return self.n_bits - len(self.ap)

    @property
    def identity_actions(self):
        return self.n_actions is not None and self.n_latent_actions == self.n_actions


class WaeMdp:
    def __init__(self, config: ModelConfig, rng):
        self.config = c = config
        self.n_bits = c.n_bits
        self.ap = list(c.ap)
        self.ap_bits = c.ap_bits
        self.n_latent_actions = c.n_latent_actions
        self.identity_actions = c.identity_actions
        k, h = c.n_latent_actions, c.hidden
        self.encoder = Mlp([c.state_dim, h, h, c.free_bits], rng, name="encoder")
        self.transition = MadeFlow(c.n_bits, rng, n_hidden=c.flow_hidden, context_dim=c.n_bits + k, name="transition")
        self.reward = Mlp([c.n_bits + k, h, 1], rng, name="reward")
        self.policy = Mlp([c.n_bits, h, k], rng, name="policy")
        self.decoder = Mlp([c.n_bits, h, h, c.state_dim], rng, name="decoder")
        self.label_prior = MadeFlow(c.ap_bits, rng, n_hidden=16, name="label_prior")
        self.action_encoder = self.action_decoder = None
        if not self.identity_actions:
            adim = c.n_actions if c.n_actions is not None else len(c.action_low)
            self.action_encoder = Mlp([c.n_bits + adim, h, k], rng, name="action_encoder")
            self.action_decoder = Mlp([c.n_bits + k, h, adim], rng, output_activation="tanh", name="action_decoder")

    # -- parameters ------------------------------------------------------------
    def modules(self):
        mods = [self.encoder, self.transition, self.reward, self.policy, self.decoder, self.label_prior]
        if self.action_encoder is not None:
            mods += [self.action_encoder, self.action_decoder]
        return mods

    def named_parameters(self):
        return [item for m in self.modules() for item in m.named_parameters()]

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        for name, p in self.named_parameters():
            p.value = np.asarray(state[name], dtype=np.float64).reshape(p.shape).copy()

    # -- action plumbing -------------------------------------------------------
    def _action_box(self):
        low = np.asarray(self.config.action_low, dtype=np.float64)
        high = np.asarray(self.config.action_high, dtype=np.float64)
        return low, high

    def ground_action_features(self, actions):
        """Ground actions as network inputs: one-hot for discrete, raw vectors for boxes."""
        if self.config.n_actions is not None:
            return np.eye(self.config.n_actions)[np.asarray(actions, dtype=int)]
        return np.asarray(actions, dtype=np.float64).reshape(len(actions), -1)

    # -- zero-temperature (deployment / certification) -------------------------
    def embed_np(self, states, labels):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
        if labels.shape[1] != self.ap_bits:
            raise DimensionMismatch(f"expected {self.ap_bits} label bits, got {labels.shape[1]}")
        return np.concatenate([labels, hard_heaviside(self.encoder.forward_np(states))], axis=1)

    def encode_action_np(self, z, actions):
        if self.identity_actions:
            return np.asarray(actions, dtype=int).reshape(-1)
        inputs = np.concatenate([z, self.ground_action_features(actions)], axis=1)
        return np.argmax(self.action_encoder.forward_np(inputs), axis=1)

    def ground_action_np(self, z, latent_actions):
        latent_actions = np.asarray(latent_actions, dtype=int).reshape(-1)
        if self.identity_actions:
            return latent_actions
        onehot = np.eye(self.n_latent_actions)[latent_actions]
        out = self.action_decoder.forward_np(np.concatenate([np.atleast_2d(z), onehot], axis=1))
        if self.config.n_actions is not None:
            return np.argmax(out, axis=1)
        low, high = self._action_box()
        return low + (out + 1.0) * (high - low) / 2.0

    def _context_np(self, z, latent_actions):
        onehot = np.eye(self.n_latent_actions)[np.asarray(latent_actions, dtype=int).reshape(-1)]
        return np.concatenate([np.atleast_2d(z), onehot], axis=1)

    def reward_np(self, z, latent_actions):
        return 0.5 * np.tanh(self.reward.forward_np(self._context_np(z, latent_actions))[:, 0])

    def transition_prob_np(self, z, latent_actions, z_next):
        return np.exp(self.transition.log_prob(z_next, self._context_np(z, latent_actions)))

    def transition_row_np(self, z, latent_action):
        return self.transition.probs_all(self._context_np(np.atleast_2d(z), [latent_action])[0])

    def policy_probs_np(self, z):
        return softmax(self.policy.forward_np(np.atleast_2d(z)), axis=1)

    def initial_latent(self):
        return self.embed_np([self.config.initial_state], [self.config.initial_label])[0]

    def prior_probs_all(self):
        """Stationary prior over all 2^n latent states (labels from the flow, other bits uniform)."""
        labels = self.label_prior.probs_all()
        return np.repeat(labels, 2 ** self.config.free_bits) / 2 ** self.config.free_bits

    # -- relaxed (training) -----------------------------------------------------
    def embed_tensor(self, states, labels):
        code = smooth_heaviside(self.encoder(T.Tensor(states)), self.config.temp_encoder)
        return T.concat([T.Tensor(np.asarray(labels, dtype=np.float64)), code], axis=1)

    def latent_action_tensor(self, z, actions, noise):
        """Relaxed latent action for observed ground actions."""
        if self.identity_actions:
            return T.Tensor(np.eye(self.n_latent_actions)[np.asarray(actions, dtype=int)])
        inputs = T.concat([z, T.Tensor(self.ground_action_features(actions))], axis=1)
        return gumbel_softmax(self.action_encoder(inputs), self.config.temp_action, noise)

    def ground_action_tensor(self, z, latent_action):
        out = self.action_decoder(T.concat([z, latent_action], axis=1))
        if self.config.n_actions is not None:
            return T.softmax(T.mul(out, 5.0), axis=1)
        low, high = self._action_box()
        return T.add(low, T.mul(T.add(out, 1.0), (high - low) / 2.0))

    def reward_tensor(self, z, latent_action):
        return T.mul(T.tanh(self.reward(T.concat([z, latent_action], axis=1))), 0.5)

    def transition_sample_tensor(self, z, latent_action, noise):
        context = T.concat([z, latent_action], axis=1)
        return self.transition.relaxed_sample_tensor(noise, self.config.temp_transition, context)

    def policy_sample_tensor(self, z, noise):
        return gumbel_softmax(self.policy(z), self.config.temp_policy, noise)

    def prior_sample_tensor(self, label_noise, free_noise):
        labels = self.label_prior.relaxed_sample_tensor(label_noise, self.config.temp_prior)
        free = T.Tensor(relaxed_bernoulli(np.zeros_like(free_noise), self.config.temp_prior, free_noise))
        return T.concat([labels, free], axis=1)

    def decode_tensor(self, z):
        return self.decoder(z)

    # -- persistence ------------------------------------------------------------
    def to_dict(self, extra=None):
        return {
            "architecture": {"kind": "wae_mdp", **asdict(self.config)},
            "params": encode_params(self.state_dict()),
            "config": extra or {},
        }

    def save(self, path, extra=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(extra), fh)

    @classmethod
    def from_dict(cls, blob):
        arch = dict(blob["architecture"])
        arch.pop("kind", None)
        model = cls(ModelConfig(**arch), np.random.default_rng(0))
        model.load_state_dict(decode_params(blob["params"]))
        return model

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def latent_index(bits):
    return bits_to_index(bits)


__all__ = ["ModelConfig", "WaeMdp", "all_patterns", "latent_index"]
