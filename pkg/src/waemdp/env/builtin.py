"""Desk-scale built-in environments."""
from __future__ import annotations

import numpy as np

from waemdp.env.mdp import GroundMdp, TabularMdp
from waemdp.env.policies import ScriptedPolicy, UniformPolicy
from waemdp.env.spaces import Box, Discrete
from waemdp.env.wrappers import RewardScaled
from waemdp.errors import WaeMdpError

MOVES = np.array([[-1, 0], [0, 1], [1, 0], [0, -1]])  # up, right, down, left


class Gridworld(GroundMdp):
    """5x5 grid with a goal corner and a few unsafe cells.

    State is (row, col) / (size - 1). The intended move happens with
    probability 1 - slip, otherwise one of the three other moves is taken
    uniformly; moves into walls leave the agent in place. Goal and unsafe cells
    are terminal, and acting in them yields their reward.
    """

    name = "gridworld"

    def __init__(self, size=5, slip=0.1, goal=(4, 4), unsafe=((2, 1), (3, 2), (4, 1)),
                 step_reward=-0.02, goal_reward=0.5, unsafe_reward=-0.5, start=(0, 0)):
        self.size = size
        self.slip = slip
        self.goal = tuple(goal)
        self.unsafe = {tuple(c) for c in unsafe}
        self.step_reward, self.goal_reward, self.unsafe_reward = step_reward, goal_reward, unsafe_reward
        self.start = tuple(start)
        self.state_dim = 2
        self.action_space = Discrete(4)
        self.atomic_props = ["goal", "unsafe"]
        self.initial_state = self.encode(self.start)

    def encode(self, cell):
        return np.asarray(cell, dtype=np.float64) / (self.size - 1)

    def cell(self, s):
        scale = self.size - 1
        return int(round(float(s[0]) * scale)), int(round(float(s[1]) * scale))

    def reward_at(self, cell):
        if cell == self.goal:
            return self.goal_reward
        if cell in self.unsafe:
            return self.unsafe_reward
        return self.step_reward

    def move_probs(self, a):
        p = np.full(4, self.slip / 3.0)
        p[a] = 1.0 - self.slip
        return p

    def moved(self, cell, direction):
        dr, dc = MOVES[direction]
        top = self.size - 1
        return min(max(cell[0] + int(dr), 0), top), min(max(cell[1] + int(dc), 0), top)

    def transition(self, s, a, rng):
        cell = self.cell(s)
        # intended move w.p. 1 - slip, otherwise one of the other three uniformly
        u = rng.uniform()
        direction = int(a)
        if u >= 1.0 - self.slip:
            direction = (direction + 1 + int((u - 1.0 + self.slip) * 3.0 / self.slip) % 3) % 4
        return self.encode(self.moved(cell, direction)), self.reward_at(cell)

    def label(self, s):
        cell = self.cell(s)
        return np.array([cell == self.goal, cell in self.unsafe])

    def is_terminal(self, s):
        cell = self.cell(s)
        return cell == self.goal or cell in self.unsafe

    @property
    def episodic(self):
        return True

    def scripted_rule(self, s):
        # right along the top row, then down the last column
        row, col = self.cell(s)
        return 1 if col < self.size - 1 else 2

    def to_tabular(self, reset_epsilon=0.75):
        """Exact reset-augmented tabular model: cells row-major, then the reset state."""
        n_cells = self.size * self.size
        reset = n_cells
        P = np.zeros((n_cells + 1, 4, n_cells + 1))
        R = np.zeros((n_cells + 1, 4))
        labels = np.zeros((n_cells + 1, 3), bool)
        start = self.start[0] * self.size + self.start[1]
        for idx in range(n_cells):
            cell = divmod(idx, self.size)
            labels[idx, :2] = [cell == self.goal, cell in self.unsafe]
            for a in range(4):
                R[idx, a] = self.reward_at(cell)
                if cell == self.goal or cell in self.unsafe:
                    P[idx, a, reset] = 1.0
                    continue
                for d, pd in enumerate(self.move_probs(a)):
                    r, c = self.moved(cell, d)
                    P[idx, a, r * self.size + c] += pd
        P[reset, :, reset] = reset_epsilon
        P[reset, :, start] += 1.0 - reset_epsilon
        labels[reset, 2] = True
        return TabularMdp(P=P, R=R, labels=labels, ap=["goal", "unsafe", "reset"], s_init=start)

    def tabular_index(self, s):
        """Index into ``to_tabular`` for a (possibly reset-augmented) state vector."""
        if len(s) > 2 and s[2] > 0.5:
            return self.size * self.size
        r, c = self.cell(s)
        return r * self.size + c


class CliffWalk(GroundMdp):
    """1-D continuous point mass: move left or right, the cliff is at the left edge.

    Native rewards (-1 per step, +10 goal, -10 cliff) are outside [-1/2, 1/2];
    ``make_env`` wraps it with RewardScaled.
    """

    name = "cliff"

    def __init__(self, step_size=0.1, noise=0.03, start=0.3):
        self.step_size, self.noise = step_size, noise
        self.state_dim = 1
        self.action_space = Discrete(2)
        self.atomic_props = ["goal", "unsafe"]
        self.initial_state = np.array([start])

    def transition(self, s, a, rng):
        x = float(s[0])
        if self.is_terminal(s):
            return s.copy(), (10.0 if x >= 0.95 else -10.0)
        x += (self.step_size if int(a) == 1 else -self.step_size) + rng.normal(0.0, self.noise)
        return np.array([min(max(x, 0.0), 1.0)]), -1.0

    def label(self, s):
        return np.array([s[0] >= 0.95, s[0] <= 0.05])

    def is_terminal(self, s):
        return bool(s[0] >= 0.95 or s[0] <= 0.05)

    @property
    def episodic(self):
        return True

    def step(self, s, a, rng):
        # native rewards are checked after rescaling by the wrapper
        self.check_action(a)
        s_next, r = self.transition(np.asarray(s, dtype=np.float64), a, rng)
        return s_next, r, self.is_terminal(s)

    def scripted_rule(self, s):
        return 1


class PointMass2D(GroundMdp):
    """2-D point mass steered by a heading in [-1, 1] (scaled to [-pi, pi])."""

    name = "pointmass"

    def __init__(self, speed=0.1, noise=0.01, hazard=(0.5, 0.5), hazard_radius=0.15):
        self.speed, self.noise = speed, noise
        self.hazard = np.asarray(hazard)
        self.hazard_radius = hazard_radius
        self.state_dim = 2
        self.action_space = Box((-1.0,), (1.0,))
        self.atomic_props = ["goal", "unsafe"]
        self.initial_state = np.array([0.1, 0.1])

    def _goal(self, s):
        return bool(s[0] >= 0.85 and s[1] >= 0.85)

    def _unsafe(self, s):
        return bool(np.linalg.norm(np.asarray(s[:2]) - self.hazard) <= self.hazard_radius)

    def transition(self, s, a, rng):
        if self._goal(s):
            return s.copy(), 0.5
        if self._unsafe(s):
            return s.copy(), -0.5
        heading = np.pi * float(np.atleast_1d(a)[0])
        move = self.speed * np.array([np.cos(heading), np.sin(heading)]) + rng.normal(0.0, self.noise, 2)
        return np.clip(s + move, 0.0, 1.0), -0.01

    def label(self, s):
        return np.array([self._goal(s), self._unsafe(s)])

    def is_terminal(self, s):
        return self._goal(s) or self._unsafe(s)

    @property
    def episodic(self):
        return True

    def scripted_rule(self, s):
        # go along the bottom edge, then up the right edge, avoiding the hazard
        if s[0] < 0.9:
            return np.array([0.0])
        return np.array([0.5])


ENVIRONMENTS = ("gridworld", "cliff", "pointmass")


def make_env(name):
    if name == "gridworld":
        return Gridworld()
    if name == "cliff":
        return RewardScaled(CliffWalk(), -10.0, 10.0)
    if name == "pointmass":
        return PointMass2D()
    raise WaeMdpError(f"unknown environment {name!r}; choose from {', '.join(ENVIRONMENTS)}")


def make_policy(name, env):
    base = env.unwrapped() if hasattr(env, "unwrapped") else env
    if name == "scripted":
        n = env.action_space.n if isinstance(env.action_space, Discrete) else None
        return ScriptedPolicy(base.scripted_rule, n)
    if name == "random":
        return UniformPolicy(env.action_space) if isinstance(env.action_space, Discrete) else ScriptedPolicy(
            lambda s, _rng=np.random.default_rng(0): env.action_space.sample(_rng)
        )
    raise WaeMdpError(f"unknown policy {name!r}; choose scripted or random")
