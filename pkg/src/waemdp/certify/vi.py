"""Value iteration for discounted return and discounted reachability."""
from __future__ import annotations

import numpy as np

from waemdp.certify.properties import ConstrainedReach, NextReach, Return
from waemdp.errors import DomainError, NotConverged


def _backup(mdp, values, policy):
    """Expected next-state values per state under the policy (or the best action)."""
    q = mdp.P @ values  # (S, A)
    if policy is None:
        return q
    return np.einsum("sa,sa->s", policy, q)


def value_iteration(mdp, prop=Return(), gamma=0.99, policy=None, tol=1e-10, max_iter=1_000_000,
                    record=False):
    """Fixed point of the Bellman operator for ``prop``.

    ``policy`` is an (S, A) row-stochastic matrix; ``None`` maximizes over
    actions. Reachability iterates start from the indicator of the target, so
    they are nondecreasing. Iteration stops once successive iterates differ by
    at most tol * (1 - gamma) / gamma in sup-norm, which bounds the distance to
    the fixed point by ``tol``. With ``record`` the list of iterates is
    returned alongside the values.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if policy is not None:
        policy = np.asarray(policy, dtype=np.float64)
    n = mdp.n_states
    if isinstance(prop, Return):
        rewards = mdp.R if policy is None else np.einsum("sa,sa->s", policy, mdp.R)

        def update(v):
            q = rewards + gamma * _backup(mdp, v, policy)
            return q.max(axis=1) if policy is None else q

        values = np.zeros(n)
    elif isinstance(prop, ConstrainedReach):
        target = prop.target.mask(mdp.labels, mdp.ap)
        alive = prop.constraint.mask(mdp.labels, mdp.ap) & ~target

        def update(v):
            q = gamma * _backup(mdp, v, policy)
            q = q.max(axis=1) if policy is None else q
            return np.where(target, 1.0, np.where(alive, q, 0.0))

        values = target.astype(np.float64)
    elif isinstance(prop, NextReach):
        source = prop.source.mask(mdp.labels, mdp.ap)
        hit = prop.target.mask(mdp.labels, mdp.ap).astype(np.float64)

        def update(v):
            # from a source state, landing in a target state completes the event
            completed = np.where(source[:, None], mdp.P @ hit, 0.0)
            q = gamma * (completed + mdp.P @ v - np.where(source[:, None], mdp.P @ (hit * v), 0.0))
            if policy is None:
                return q.max(axis=1)
            return np.einsum("sa,sa->s", policy, q)

        values = np.zeros(n)
    else:
        raise DomainError(f"unsupported property {prop!r}")

    threshold = tol * (1.0 - gamma) / gamma if 0.0 < gamma < 1.0 else tol
    iterates = [values.copy()] if record else None
    for _ in range(int(max_iter)):
        new = update(values)
        delta = np.max(np.abs(new - values)) if n else 0.0
        values = new
        if record:
            iterates.append(values.copy())
        if delta <= threshold:
            return (values, iterates) if record else values
    raise NotConverged(f"no convergence after {max_iter} iterations (last change {delta:.3e})")


def reach_value_forward(mdp, prop, gamma, policy, start, tol=1e-15, max_steps=10_000_000):
    """Discounted reachability probability from ``start`` by forward mass propagation.

    Independent of the backward Bellman recursion: pushes the state
    distribution forward, collecting gamma^t times the mass that first enters a
    target state at step t, and dropping mass that leaves the constraint.
    """
    chain = np.einsum("sa,sat->st", np.asarray(policy, dtype=np.float64), mdp.P)
    if isinstance(prop, ConstrainedReach):
        target = prop.target.mask(mdp.labels, mdp.ap)
        alive = prop.constraint.mask(mdp.labels, mdp.ap) & ~target
        mass = np.zeros(mdp.n_states)
        mass[start] = 1.0
        total, discount = 0.0, 1.0
        for _ in range(max_steps):
            total += discount * mass[target].sum()
            mass = np.where(alive, mass, 0.0)
            if discount * mass.sum() < tol:
                return total
            mass = mass @ chain
            discount *= gamma
        raise NotConverged("forward propagation did not settle")
    if isinstance(prop, NextReach):
        source = prop.source.mask(mdp.labels, mdp.ap)
        target = prop.target.mask(mdp.labels, mdp.ap)
        mass = np.zeros(mdp.n_states)
        mass[start] = 1.0
        total, discount = 0.0, gamma
        for _ in range(max_steps):
            if discount * mass.sum() < tol:
                return total
            from_source = np.where(source, mass, 0.0) @ chain
            total += discount * from_source[target].sum()
            mass = np.where(source, 0.0, mass) @ chain + np.where(target, 0.0, from_source)
            discount *= gamma
        raise NotConverged("forward propagation did not settle")
    raise DomainError("forward propagation supports reachability properties only")


def reach_value_linear(mdp, prop, gamma, policy):
    """Exact constrained-reachability values by a linear solve under a fixed policy."""
    chain = np.einsum("sa,sat->st", np.asarray(policy, dtype=np.float64), mdp.P)
    target = prop.target.mask(mdp.labels, mdp.ap)
    alive = prop.constraint.mask(mdp.labels, mdp.ap) & ~target
    idx = np.flatnonzero(alive)
    values = target.astype(np.float64)
    if len(idx):
        sub = chain[np.ix_(idx, idx)]
        rhs = gamma * chain[np.ix_(idx, np.flatnonzero(target))].sum(axis=1)
        values[idx] = np.linalg.solve(np.eye(len(idx)) - gamma * sub, rhs)
    return values


def policy_return_linear(mdp, gamma, policy):
    chain, rewards = mdp.under_policy(policy)
    return np.linalg.solve(np.eye(mdp.n_states) - gamma * chain, rewards)
