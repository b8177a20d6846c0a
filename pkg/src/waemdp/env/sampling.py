"""Stationary sampling of transitions and the replay store."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from waemdp.env.mdp import step
from waemdp.env.wrappers import ResetAugmented
from waemdp.errors import NotErgodic


def closed_classes(chain, tol=0.0):
    """Strongly connected components with no edge leaving them."""
    adjacency = csr_matrix(np.asarray(chain) > tol)
    n_comp, comp = connected_components(adjacency, directed=True, connection="strong")
    leaving = np.zeros(n_comp, bool)
    rows, cols = adjacency.nonzero()
    leaving[comp[rows][comp[rows] != comp[cols]]] = True
    return [np.flatnonzero(comp == c) for c in range(n_comp) if not leaving[c]]


def stationary_distribution(chain):
    """The stationary distribution of a row-stochastic matrix.

    Chains with a single closed class have a unique stationary distribution
    (periodic or not); states outside that class get zero mass.
    """
    chain = np.asarray(chain, dtype=np.float64)
    n = chain.shape[0]
    classes = closed_classes(chain)
    if len(classes) != 1:
        raise NotErgodic(f"chain has {len(classes)} closed classes")
    cls = classes[0]
    sub = chain[np.ix_(cls, cls)]
    k = len(cls)
    system = np.vstack([sub.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    xi_cls, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    xi = np.zeros(n)
    xi[cls] = np.clip(xi_cls, 0.0, None)
    xi /= xi.sum()
    # one refinement sweep removes round-off from the least-squares solve
    residual = np.max(np.abs(xi @ chain - xi))
    if residual > 1e-10:
        raise NotErgodic(f"stationary solve residual {residual:.2e}")
    return xi


class StationarySampler:
    """Draws transitions from a policy's (approximately) stationary regime.

    Episodic environments are wrapped with ResetAugmented first, so the chain
    keeps running across episodes; ``burn_in`` steps are discarded up front.
    """

    def __init__(self, mdp, policy, rng, reset_epsilon=0.75, burn_in=1000):
        if not 0.0 < reset_epsilon < 1.0:
            raise ValueError("reset_epsilon must lie in (0, 1)")
        if mdp.episodic and not isinstance(mdp, ResetAugmented):
            mdp = ResetAugmented(mdp, reset_epsilon)
        self.mdp = mdp
        self.policy = policy
        self.rng = rng
        self.reset_epsilon = reset_epsilon
        self.burn_in = burn_in
        self.state = np.asarray(mdp.initial_state, dtype=np.float64)
        self.episode = 0
        self.t = 0
        self._burned = False

    def _advance(self):
        a = self.policy.act(self.state, self.rng)
        sample = step(self.mdp, self.state, a, self.rng, ep=self.episode, t=self.t)
        sample.a_latent = getattr(self.policy, "last_latent_action", None)
        restarted = (
            isinstance(self.mdp, ResetAugmented)
            and self.mdp.in_reset(sample.s)
            and not self.mdp.in_reset(sample.s_next)
        )
        if restarted:
            self.episode += 1
            self.t = 0
        else:
            self.t += 1
        self.state = sample.s_next
        return sample

    def sample(self, n):
        if n < 1:
            raise ValueError("n must be >= 1")
        if not self._burned:
            for _ in range(self.burn_in):
                self._advance()
            self._burned = True
            self.episode = 0
        return [self._advance() for _ in range(n)]


def sample_stationary(sampler, n):
    return sampler.sample(n)


def reset_sojourns(samples, reset_index=-1):
    """Lengths of maximal runs of samples whose source state is labelled reset."""
    runs, current = [], 0
    for smp in samples:
        if smp.label is not None and smp.label[reset_index]:
            current += 1
        elif current:
            runs.append(current)
            current = 0
    return np.asarray(runs)


class ReplayStore:
    """Bounded FIFO of transitions with uniform sampling with replacement."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items = []
        self._next = 0

    def __len__(self):
        return len(self.items)

    def add(self, sample):
        if len(self.items) < self.capacity:
            self.items.append(sample)
        else:
            self.items[self._next] = sample
        self._next = (self._next + 1) % self.capacity

    def extend(self, samples):
        for sample in samples:
            self.add(sample)

    def sample(self, n, rng):
        if not self.items:
            raise ValueError("replay store is empty")
        idx = rng.integers(len(self.items), size=n)
        return [self.items[i] for i in idx]
