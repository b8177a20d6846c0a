"""Lipschitz constants of an explicit latent MDP and the resulting bounds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from waemdp.env.sampling import stationary_distribution
from waemdp.errors import DomainError


@dataclass
class LipschitzConstants:
    reward: float
    transition: float
    reward_max: float
    value: float
    gamma: float
    value_branch: str

    def to_dict(self):
        return asdict(self)


def pairwise_tv_max(rows):
    rows = np.asarray(rows, dtype=np.float64)
    best = 0.0
    for i in range(len(rows)):
        best = max(best, 0.5 * np.abs(rows[i + 1:] - rows[i]).sum(axis=1).max(initial=0.0))
    return float(best)


def lipschitz_constants(latent, policy, gamma):
    """Constants under the discrete metric on latent states.

    K_R is the largest reward gap between two latent states, K_P the largest
    total-variation distance between their successor distributions, and
    K_V = min(R_max / (1 - gamma), K_R / (1 - gamma K_P)).
    """
    chain, rewards = latent.under_policy(policy)
    k_r = float(rewards.max() - rewards.min()) if len(rewards) else 0.0
    k_p = pairwise_tv_max(chain)
    r_max = float(np.abs(rewards).max()) if len(rewards) else 0.0
    by_range = r_max / (1.0 - gamma)
    by_lipschitz = k_r / (1.0 - gamma * k_p) if gamma * k_p < 1.0 else math.inf
    branch = "reward_lipschitz" if by_lipschitz < by_range else "reward_max"
    return LipschitzConstants(k_r, k_p, r_max, min(by_range, by_lipschitz), gamma, branch)


@dataclass
class BisimBoundReport:
    expected_bisim: float
    reward_distance: float | None
    label_distance: float
    value_return: float
    value_reach: float
    pairwise_formula: str
    gamma: float
    epsilon: float

    def to_dict(self):
        return asdict(self)


def bisim_bound(estimate, consts, gamma, epsilon):
    """Bounds implied by the estimated local losses (each already including the PAC slack)."""
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    if consts.value_branch == "reward_lipschitz" and gamma * consts.transition >= 1.0:
        raise DomainError("gamma * K_P >= 1: the Lipschitz branch of K_V is undefined")
    loss_r, loss_p = estimate.loss_reward, estimate.loss_transition
    k_v = consts.value
    expected = (loss_r + epsilon + gamma * (loss_p + epsilon)) / (1.0 - gamma)
    reward_distance = None
    if gamma * consts.transition < 1.0:
        reward_distance = (loss_r + epsilon) + gamma * (loss_p + epsilon) * consts.reward / (1.0 - gamma * consts.transition)
    label_distance = gamma * (loss_p + epsilon) / (1.0 - gamma)
    value_return = (loss_r + gamma * k_v * loss_p) / (1.0 - gamma) + epsilon
    value_reach = gamma * loss_p / (1.0 - gamma) + gamma * epsilon / (1.0 + gamma * k_v)
    formula = (
        f"d(s1, phi(s1)) + d(s2, phi(s2)) <= {expected:.6g} * (1/xi(s1) + 1/xi(s2)) "
        "for states with positive stationary mass xi"
    )
    return BisimBoundReport(expected, reward_distance, label_distance, value_return, value_reach,
                            formula, gamma, epsilon)


@dataclass
class ExactLocalLosses:
    loss_reward: float
    loss_transition: float
    miss_probability: float
    stationary: np.ndarray


def exact_local_losses(ground, phi, latent, latent_policy):
    """Local losses of a tabular (ground, phi, latent) triple under the latent policy.

    ``phi`` maps ground state indices to latent state indices. The transition
    loss is the expected total variation between the pushed-forward ground
    kernel and the latent kernel; ``miss_probability`` is the expectation of
    the sample estimator 1 - P(phi(s') | phi(s), a), which upper-bounds it.
    """
    phi = np.asarray(phi, dtype=int)
    latent_policy = np.asarray(latent_policy, dtype=np.float64)
    ground_policy = latent_policy[phi]
    chain, _ = ground.under_policy(ground_policy)
    xi = stationary_distribution(chain)
    push = np.zeros((ground.n_states, ground.n_actions, latent.n_states))
    for j in range(latent.n_states):
        push[:, :, j] = ground.P[:, :, phi == j].sum(axis=2)
    lat_rows = latent.P[phi]  # (S, A, S_bar)
    weight = xi[:, None] * ground_policy
    reward_gap = np.abs(ground.R - latent.R[phi])
    tv = 0.5 * np.abs(push - lat_rows).sum(axis=2)
    hit = np.einsum("sat,sat->sa", push, lat_rows)
    return ExactLocalLosses(
        float((weight * reward_gap).sum()), float((weight * tv).sum()), float((weight * (1.0 - hit)).sum()), xi,
    )


def pairwise_bound_matrix(expected_bound, stationary):
    """Numerical pairwise representation bound for tabular ground MDPs (inf where xi = 0)."""
    with np.errstate(divide="ignore"):
        inv = np.where(stationary > 0, 1.0 / stationary, np.inf)
    return expected_bound * (inv[:, None] + inv[None, :])
