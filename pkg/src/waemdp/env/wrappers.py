"""Environment transformations: reset augmentation, initial-distribution dummy
state, and affine reward rescaling."""
from __future__ import annotations

import numpy as np

from waemdp.env.mdp import GroundMdp

RESET = "reset"


class Wrapper(GroundMdp):
    def __init__(self, inner: GroundMdp):
        self.inner = inner
        self.state_dim = inner.state_dim
        self.action_space = inner.action_space
        self.atomic_props = list(inner.atomic_props)
        self.initial_state = np.asarray(inner.initial_state, dtype=np.float64)
        self.transition_rewarded = inner.transition_rewarded
        self.name = inner.name

    def transition(self, s, a, rng):
        return self.inner.transition(s, a, rng)

    def label(self, s):
        return self.inner.label(s)

    def is_terminal(self, s):
        return self.inner.is_terminal(s)

    @property
    def episodic(self):
        return self.inner.episodic

    def unwrapped(self):
        inner = self.inner
        while isinstance(inner, Wrapper):
            inner = inner.inner
        return inner


class ResetAugmented(Wrapper):
    """Continuing version of an episodic MDP.

    States get one extra coordinate, the reset flag. Acting in a terminal state
    leads to the reset state; the reset state loops on itself with probability
    ``epsilon`` and otherwise restarts at the initial state. The extra
    proposition ``reset`` holds exactly in the reset state.
    """

    def __init__(self, inner: GroundMdp, epsilon=0.75):
        super().__init__(inner)
        if not 0.0 <= epsilon < 1.0:
            raise ValueError(f"reset epsilon must lie in [0, 1), got {epsilon}")
        self.epsilon = epsilon
        self.state_dim = inner.state_dim + 1
        self.atomic_props = list(inner.atomic_props) + [RESET]
        self.initial_state = np.append(inner.initial_state, 0.0)
        self.reset_state = np.append(inner.initial_state, 1.0)

    @staticmethod
    def in_reset(s):
        return s[-1] > 0.5

    def transition(self, s, a, rng):
        if self.in_reset(s):
            return (self.reset_state.copy() if rng.uniform() < self.epsilon else self.initial_state.copy()), 0.0
        base = s[:-1]
        if self.inner.is_terminal(base):
            _, r = self.inner.transition(base, a, rng)
            return self.reset_state.copy(), r
        s_next, r = self.inner.transition(base, a, rng)
        return np.append(s_next, 0.0), r

    def label(self, s):
        if self.in_reset(s):
            out = np.zeros(len(self.atomic_props), bool)
            out[-1] = True
            return out
        return np.append(self.inner.label(s[:-1]), False)

    def is_terminal(self, s):
        return False

    @property
    def episodic(self):
        return False


class InitialDistributionWrap(Wrapper):
    """Prepends a dummy state whose successor is drawn from ``initial_sampler``.

    The dummy state is encoded with an extra flag coordinate (like the reset
    state) and carries only the ``reset`` proposition.
    """

    def __init__(self, inner: GroundMdp, initial_sampler):
        super().__init__(inner)
        self.initial_sampler = initial_sampler
        self.state_dim = inner.state_dim + 1
        self.atomic_props = list(inner.atomic_props)
        if RESET not in self.atomic_props:
            self.atomic_props.append(RESET)
        self.initial_state = np.append(np.zeros(inner.state_dim), 1.0)

    def _lift(self, s):
        return np.append(s, 0.0)

    def transition(self, s, a, rng):
        if s[-1] > 0.5:
            return self._lift(np.asarray(self.initial_sampler(rng), dtype=np.float64)), 0.0
        s_next, r = self.inner.transition(s[:-1], a, rng)
        return self._lift(s_next), r

    def label(self, s):
        out = np.zeros(len(self.atomic_props), bool)
        if s[-1] > 0.5:
            out[self.atomic_props.index(RESET)] = True
            return out
        inner = self.inner.label(s[:-1])
        out[: len(inner)] = inner
        return out

    def is_terminal(self, s):
        return s[-1] <= 0.5 and self.inner.is_terminal(s[:-1])


def initial_distribution_wrap(mdp, initial_sampler):
    return InitialDistributionWrap(mdp, initial_sampler)


class RewardScaled(Wrapper):
    """Affinely maps native rewards in [low, high] onto [-1/2, 1/2]."""

    def __init__(self, inner: GroundMdp, low, high):
        super().__init__(inner)
        if not high > low:
            raise ValueError("reward range must have high > low")
        self.low, self.high = float(low), float(high)
        self.name = inner.name

    def scale(self, r):
        return (r - (self.low + self.high) / 2.0) / (self.high - self.low)

    def unscale(self, r):
        return r * (self.high - self.low) + (self.low + self.high) / 2.0

    def transition(self, s, a, rng):
        s_next, r = self.inner.transition(s, a, rng)
        return s_next, self.scale(r)
