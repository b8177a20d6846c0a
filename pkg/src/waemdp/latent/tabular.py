"""Hand-built latent models backed by explicit tables (test fixtures and oracles)."""
from __future__ import annotations

import numpy as np

from waemdp.flows import TableFlow, bits_to_index, index_to_bits


class TabularLatentModel:
    """Latent model whose flow is an exact table over 2^n latent states.

    ``encode(states, labels) -> bits`` is the state embedding; ``P`` has shape
    (2^n, A, 2^n), ``R`` (2^n, A) and ``policy`` (2^n, A). Actions are shared
    with the ground MDP (identity mode).
    """

    identity_actions = True

    def __init__(self, n_bits, ap, encode, P, R, policy, initial_bits):
        self.n_bits = n_bits
        self.ap = list(ap)
        self.ap_bits = len(self.ap)
        self.encode = encode
        self.P = np.asarray(P, dtype=np.float64)
        self.R = np.asarray(R, dtype=np.float64)
        self.policy_rows = np.asarray(policy, dtype=np.float64)
        self.n_latent_actions = self.P.shape[1]
        self.flow = TableFlow(n_bits, self.P.reshape(-1, 2 ** n_bits))
        self._initial = np.asarray(initial_bits, dtype=np.float64)

    def embed_np(self, states, labels):
        return np.atleast_2d(self.encode(np.atleast_2d(states), np.atleast_2d(labels))).astype(np.float64)

    def encode_action_np(self, z, actions):
        return np.asarray(actions, dtype=int).reshape(-1)

    def ground_action_np(self, z, latent_actions):
        return np.asarray(latent_actions, dtype=int).reshape(-1)

    def _context(self, z, latent_actions):
        return bits_to_index(np.atleast_2d(z)) * self.n_latent_actions + np.asarray(latent_actions, dtype=int).reshape(-1)

    def reward_np(self, z, latent_actions):
        return self.R[bits_to_index(np.atleast_2d(z)), np.asarray(latent_actions, dtype=int).reshape(-1)]

    def transition_prob_np(self, z, latent_actions, z_next):
        return np.exp(self.flow.log_prob(z_next, self._context(z, latent_actions)))

    def transition_row_np(self, z, latent_action):
        return self.flow.probs_all(self._context(z, [latent_action])[0])

    def policy_probs_np(self, z):
        return self.policy_rows[bits_to_index(np.atleast_2d(z))]

    def initial_latent(self):
        return self._initial.copy()


def exact_gridworld_abstraction(grid, n_bits=None, reset_epsilon=0.75, policy=None):
    """Exact abstraction of the reset-augmented gridworld.

    Every cell and the reset state get their own latent state; labels occupy
    the leading bits. Returns (model, tabular ground MDP, phi) where phi maps
    tabular ground indices to latent indices.
    """
    ground = grid.to_tabular(reset_epsilon)
    n_ground = ground.n_states
    ap_bits = len(ground.ap)
    free = int(np.ceil(np.log2(n_ground)))
    n_bits = n_bits or ap_bits + free
    free = n_bits - ap_bits
    if 2 ** free < n_ground:
        raise ValueError(f"{n_bits} bits cannot separate {n_ground} ground states")
    codes = np.array([np.concatenate([ground.labels[i], index_to_bits(i, free)]) for i in range(n_ground)])
    phi = bits_to_index(codes)
    size = 2 ** n_bits
    A = ground.n_actions
    P = np.zeros((size, A, size))
    R = np.zeros((size, A))
    P[np.arange(size), :, np.arange(size)] = 1.0  # unused latent states are absorbing
    for i in range(n_ground):
        P[phi[i]] = 0.0
        for a in range(A):
            np.add.at(P[phi[i], a], phi, ground.P[i, a])
        R[phi[i]] = ground.R[i]
    if policy is None:
        policy = np.zeros((n_ground, A))
        for i in range(n_ground):
            if i < grid.size * grid.size:
                policy[i, grid.scripted_rule(grid.encode(divmod(i, grid.size)))] = 1.0
            else:
                policy[i, 0] = 1.0
    latent_policy = np.full((size, A), 1.0 / A)
    latent_policy[phi] = policy

    def encode(states, labels):
        idx = np.array([grid.tabular_index(s) for s in states])
        return codes[idx]

    model = TabularLatentModel(n_bits, ground.ap, encode, P, R, latent_policy, codes[ground.s_init])
    return model, ground, phi
