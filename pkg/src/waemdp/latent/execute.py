"""Running a latent policy in the ground environment."""
from __future__ import annotations

import numpy as np

from waemdp.env.mdp import step
from waemdp.env.policies import Policy
from waemdp.env.wrappers import ResetAugmented


class LatentPolicy(Policy):
    """Embeds the ground state, draws a latent action, and maps it back to a ground action."""

    kind = "latent"

    def __init__(self, model, env, greedy=False):
        self.model = model
        self.env = env
        self.greedy = greedy
        self.last_latent_action = None

    def latent_probs(self, s):
        z = self.model.embed_np([s], [self.env.label(s)])
        return z, self.model.policy_probs_np(z)[0]

    def probs(self, s):
        z, p = self.latent_probs(s)
        if not self.model.identity_actions:
            raise TypeError("ground action probabilities need identity action mode")
        return p

    def act(self, s, rng):
        z, p = self.latent_probs(s)
        if self.greedy:
            latent = int(np.argmax(p))
        else:
            latent = min(int(np.searchsorted(np.cumsum(p), rng.uniform() * p.sum(), side="right")), len(p) - 1)
        self.last_latent_action = latent
        action = self.model.ground_action_np(z, [latent])[0]
        return int(action) if self.model.identity_actions else action


def episode_over(env, sample):
    """Episodes end after acting in a terminal state; in a reset-augmented env, on entering reset."""
    if isinstance(env, ResetAugmented):
        return env.in_reset(sample.s_next)
    return sample.done


def run_episodes(env, policy, n_episodes, rng, max_steps=200):
    """Undiscounted episode returns and the concatenated trace log."""
    returns, traces = [], []
    for ep in range(n_episodes):
        s = np.asarray(env.initial_state, dtype=np.float64)
        total = 0.0
        for t in range(max_steps):
            smp = step(env, s, policy.act(s, rng), rng, ep=ep, t=t)
            smp.a_latent = getattr(policy, "last_latent_action", None)
            traces.append(smp)
            total += smp.r
            if episode_over(env, smp):
                break
            s = smp.s_next
        returns.append(total)
    return np.asarray(returns), traces


def latent_flow_execute(model, env, n_episodes, rng, max_steps=200, greedy=False):
    return run_episodes(env, LatentPolicy(model, env, greedy=greedy), n_episodes, rng, max_steps)
