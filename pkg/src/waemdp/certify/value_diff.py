"""Monte-Carlo ground values of the latent policy against exact latent values."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from waemdp.certify.properties import ConstrainedReach, NextReach, Return
from waemdp.certify.vi import value_iteration
from waemdp.env.mdp import step
from waemdp.env.wrappers import ResetAugmented
from waemdp.latent.execute import LatentPolicy
from waemdp.latent.extract import extract_explicit


@dataclass
class ValueDifferenceReport:
    ground_value: float
    ground_ci: float
    latent_value: float
    difference: float
    episodes: int
    horizon: int

    def to_dict(self):
        return asdict(self)


def _label_mask(formula, env, s):
    return bool(formula.mask(env.label(s)[None, :], env.atomic_props)[0])


def discounted_outcome(env, policy, prop, gamma, rng, horizon):
    """One rollout's discounted return, or gamma^t* for the reachability event."""
    s = np.asarray(env.initial_state, dtype=np.float64)
    total, discount = 0.0, 1.0
    for _ in range(horizon):
        if isinstance(prop, ConstrainedReach):
            if _label_mask(prop.target, env, s):
                return discount
            if not _label_mask(prop.constraint, env, s):
                return 0.0
        smp = step(env, s, policy.act(s, rng), rng)
        if isinstance(prop, Return):
            total += discount * smp.r
        elif isinstance(prop, NextReach):
            if _label_mask(prop.source, env, s) and _label_mask(prop.target, env, smp.s_next):
                return discount * gamma
        discount *= gamma
        s = smp.s_next
    return total


def value_difference(model, env, prop=Return(), gamma=0.99, n_episodes=30, rng=None, extraction=None,
                     horizon=None, reset_epsilon=0.75):
    """|V(s_I) - V_bar(z_I)| with V averaged over rollouts and V_bar from value iteration.

    ``env`` must have the state signature the model was trained on; episodic
    environments are reset-augmented so rollouts run the continuing process.
    """
    rng = rng or np.random.default_rng(0)
    if env.episodic and not isinstance(env, ResetAugmented):
        env = ResetAugmented(env, reset_epsilon)
    if horizon is None:
        horizon = int(math.ceil(math.log(1e-4) / math.log(gamma))) if 0 < gamma < 1 else 1000
    policy = LatentPolicy(model, env)
    outcomes = np.array([discounted_outcome(env, policy, prop, gamma, rng, horizon) for _ in range(n_episodes)])
    extraction = extraction or extract_explicit(model)
    latent = value_iteration(extraction.mdp, prop, gamma, policy=extraction.policy)[extraction.mdp.s_init]
    ci = 1.96 * outcomes.std(ddof=1) / math.sqrt(n_episodes) if n_episodes > 1 else math.inf
    mean = float(outcomes.mean())
    return ValueDifferenceReport(mean, float(ci), float(latent), abs(mean - float(latent)), n_episodes, horizon)
