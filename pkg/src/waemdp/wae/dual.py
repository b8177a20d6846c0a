"""Stand-alone dual (critic) estimate of the Wasserstein distance between two weighted point sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from waemdp.autodiff import tensor as T
from waemdp.autodiff.nn import Mlp
from waemdp.autodiff.optim import Adam
from waemdp.errors import DimensionMismatch
from waemdp.wae.objective import gradient_penalty


@dataclass
class DualEstimate:
    value: float
    penalty: float
    steps: int


def discrete_metric_embedding(k):
    """k points in R^k at pairwise Euclidean distance exactly 1."""
    return np.eye(k) / np.sqrt(2.0)


def dual_wasserstein(points, p, q, rng, hidden=64, steps=3000, batch=64, gp_coef=10.0, lr=1e-3):
    """Train a gradient-penalized critic f to maximize E_p f - E_q f and return that gap.

    Expectations over the two discrete distributions are taken exactly (weighted
    sums over ``points``); the penalty is evaluated on random interpolates
    between points drawn from p and from q.
    """
    points = np.asarray(points, dtype=np.float64)
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if not (len(points) == len(p) == len(q)):
        raise DimensionMismatch("points, p and q must have the same length")
    critic = Mlp([points.shape[1], hidden, hidden, 1], rng, activation="tanh", name="dual_critic")
    opt = Adam(critic.parameters(), lr=lr, beta1=0.5, beta2=0.9)
    weights = p - q
    penalty = T.Tensor(0.0)
    for _ in range(steps):
        x = points[rng.choice(len(p), size=batch, p=p)]
        y = points[rng.choice(len(q), size=batch, p=q)]
        gap = T.tsum(T.mul(T.reshape(critic(T.Tensor(points)), (len(points),)), weights))
        penalty = gradient_penalty(critic, x, y, rng.uniform(size=(batch, 1)))
        objective = T.sub(gap, T.mul(penalty, gp_coef))
        opt.step([g.value for g in T.grad(objective, critic.parameters())], "ascend")
    value = float(critic.forward_np(points)[:, 0] @ weights)
    return DualEstimate(value, float(penalty.value), steps)
