from __future__ import annotations

import numpy as np


class Policy:
    kind = "policy"

    def probs(self, s):
        """Action distribution for discrete action spaces."""
        raise NotImplementedError

    def act(self, s, rng):
        p = self.probs(s)
        return int(rng.choice(len(p), p=p))


class ScriptedPolicy(Policy):
    """Wraps ``rule(state) -> action`` (deterministic) for discrete or continuous actions."""

    kind = "scripted"

    def __init__(self, rule, n_actions=None):
        self.rule = rule
        self.n_actions = n_actions

    def probs(self, s):
        if self.n_actions is None:
            raise TypeError("probabilities are only defined for discrete actions")
        out = np.zeros(self.n_actions)
        out[int(self.rule(s))] = 1.0
        return out

    def act(self, s, rng):
        return self.rule(s)


class TabularPolicy(Policy):
    """Rows of action probabilities indexed by a state index function."""

    kind = "tabular"

    def __init__(self, rows, index=lambda s: int(np.argmax(s))):
        self.rows = np.asarray(rows, dtype=np.float64)
        self.index = index

    def probs(self, s):
        return self.rows[self.index(s)]


class UniformPolicy(Policy):
    kind = "uniform"

    def __init__(self, action_space):
        self.action_space = action_space

    def probs(self, s):
        return np.full(self.action_space.n, 1.0 / self.action_space.n)

    def act(self, s, rng):
        return self.action_space.sample(rng)
