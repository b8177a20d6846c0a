"""Extraction of an explicit tabular MDP from a latent model."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from waemdp.env.mdp import TabularMdp
from waemdp.errors import BudgetExceeded
from waemdp.flows import all_patterns, bits_to_index, index_to_bits

log = logging.getLogger(__name__)

EXACT_LIMIT = 16


@dataclass
class LatentExtraction:
    mdp: TabularMdp
    states: np.ndarray  # (S, n_bits) latent codes, row i is tabular state i
    policy: np.ndarray  # (S, A) latent policy rows
    residual: np.ndarray  # (S, A) probability mass dropped per row

    def index_of(self, bits):
        lookup = {int(k): i for i, k in enumerate(bits_to_index(self.states))}
        return np.array([lookup[int(k)] for k in bits_to_index(np.atleast_2d(bits))])


def _successors(model, z, action, threshold, rng, n_samples):
    if model.n_bits <= EXACT_LIMIT:
        row = model.transition_row_np(z, action)
        keep = np.flatnonzero(row > threshold)
        if not len(keep):
            keep = np.array([int(np.argmax(row))])
        return keep, row[keep]
    # too many patterns to enumerate: collect the mass of sampled successors
    flow_samples = model.transition.sample(rng, np.repeat(model._context_np(z[None], [action]), n_samples, axis=0))
    keep = np.unique(bits_to_index(flow_samples))
    probs = model.transition_prob_np(np.repeat(z[None], len(keep), 0), [action] * len(keep),
                                     index_to_bits(keep, model.n_bits))
    return keep, probs


def extract_explicit(model, budget=4096, threshold=0.0, rng=None, n_samples=4096):
    """Breadth-first exploration of latent states reachable from the initial latent state.

    Successor distributions are enumerated exactly over all 2^n patterns when
    n <= 16 (successors with probability <= ``threshold`` are dropped, except
    that the most likely successor is always kept);
    beyond that, successors are collected from samples. Dropped mass is kept in
    ``residual`` and rows are renormalized.
    """
    rng = rng or np.random.default_rng(0)
    n_actions = model.n_latent_actions
    start = bits_to_index(model.initial_latent()[None])[0]
    order = {int(start): 0}
    queue = deque([int(start)])
    rows = {}
    if model.n_bits > EXACT_LIMIT:
        log.warning("n_bits=%d > %d: successor sets are sampled, residual mass recorded", model.n_bits, EXACT_LIMIT)
    while queue:
        current = queue.popleft()
        z = index_to_bits(current, model.n_bits)
        for a in range(n_actions):
            succ, probs = _successors(model, z, a, threshold, rng, n_samples)
            rows[current, a] = (succ, probs)
            for k in succ:
                k = int(k)
                if k not in order:
                    if len(order) >= budget:
                        raise BudgetExceeded(f"more than {budget} reachable latent states")
                    order[k] = len(order)
                    queue.append(k)
    n = len(order)
    keys = np.array(sorted(order, key=order.get))
    codes = index_to_bits(keys, model.n_bits)
    P = np.zeros((n, n_actions, n))
    residual = np.zeros((n, n_actions))
    for (key, a), (succ, probs) in rows.items():
        i = order[key]
        cols = [order[int(k)] for k in succ]
        P[i, a, cols] = probs
        mass = probs.sum()
        residual[i, a] = max(0.0, 1.0 - mass)
        P[i, a] /= mass
    R = np.stack([model.reward_np(codes, np.full(n, a)) for a in range(n_actions)], axis=1)
    policy = model.policy_probs_np(codes)
    labels = codes[:, : model.ap_bits] > 0.5
    mdp = TabularMdp(P=P, R=R, labels=labels, ap=list(model.ap), s_init=0)
    return LatentExtraction(mdp, codes, policy, residual)


__all__ = ["LatentExtraction", "all_patterns", "extract_explicit"]
