"""Ground MDPs: the abstract kernel interface and finite (tabular) MDPs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from waemdp.env.spaces import Discrete
from waemdp.errors import InvalidAction, RewardRangeError

REWARD_BOUND = 0.5


@dataclass
class TransitionSample:
    s: np.ndarray
    a: object
    r: float
    s_next: np.ndarray
    label_next: np.ndarray
    ep: int = 0
    t: int = 0
    label: np.ndarray | None = None
    done: bool = False
    a_latent: int | None = None

    def to_dict(self):
        a = self.a.tolist() if isinstance(self.a, np.ndarray) else self.a
        out = {
            "s": np.asarray(self.s).tolist(),
            "a": a,
            "r": float(self.r),
            "s_next": np.asarray(self.s_next).tolist(),
            "label_next": np.asarray(self.label_next, dtype=int).tolist(),
            "ep": int(self.ep),
            "t": int(self.t),
        }
        if self.label is not None:
            out["label"] = np.asarray(self.label, dtype=int).tolist()
        if self.a_latent is not None:
            out["a_latent"] = int(self.a_latent)
        return out

    @classmethod
    def from_dict(cls, d):
        a = d["a"]
        return cls(
            s=np.asarray(d["s"], dtype=np.float64),
            a=np.asarray(a, dtype=np.float64) if isinstance(a, list) else a,
            r=float(d["r"]),
            s_next=np.asarray(d["s_next"], dtype=np.float64),
            label_next=np.asarray(d["label_next"], dtype=bool),
            ep=int(d.get("ep", 0)),
            t=int(d.get("t", 0)),
            label=None if d.get("label") is None else np.asarray(d["label"], dtype=bool),
            a_latent=d.get("a_latent"),
        )


class GroundMdp:
    """A labelled MDP with a stochastic kernel.

    Subclasses implement ``transition(s, a, rng) -> (s_next, reward)``,
    ``label(s)`` and optionally ``is_terminal(s)``. Acting in a terminal state
    collects that state's reward and ends the episode.
    """

    name = "ground"
    state_dim: int
    action_space: object
    atomic_props: list
    initial_state: np.ndarray
    transition_rewarded = False

    def transition(self, s, a, rng):
        raise NotImplementedError

    def label(self, s):
        raise NotImplementedError

    def is_terminal(self, s):
        return False

    @property
    def episodic(self):
        return False

    def check_action(self, a):
        if not self.action_space.contains(a):
            raise InvalidAction(f"action {a!r} not in {self.action_space}")

    def step(self, s, a, rng):
        """One draw from the kernel: (s_next, reward, done)."""
        self.check_action(a)
        done = self.is_terminal(s)
        s_next, r = self.transition(np.asarray(s, dtype=np.float64), a, rng)
        if not -REWARD_BOUND - 1e-12 <= r <= REWARD_BOUND + 1e-12:
            raise RewardRangeError(f"reward {r} outside [-1/2, 1/2]; wrap the env with RewardScaled")
        return np.asarray(s_next, dtype=np.float64), float(r), done


def step(mdp, s, a, rng, ep=0, t=0):
    s = np.asarray(s, dtype=np.float64)
    s_next, r, done = mdp.step(s, a, rng)
    return TransitionSample(
        s=s, a=a, r=r, s_next=s_next, label_next=mdp.label(s_next), ep=ep, t=t,
        label=mdp.label(s), done=done,
    )


@dataclass
class TabularMdp:
    P: np.ndarray  # (S, A, S)
    R: np.ndarray  # (S, A)
    labels: np.ndarray  # (S, |AP|) bool
    ap: list
    s_init: int = 0
    terminal: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool).reshape(self.P.shape[0], len(self.ap))
        if self.P.ndim != 3 or self.P.shape[0] != self.P.shape[2]:
            raise ValueError(f"P must have shape (S, A, S), got {self.P.shape}")
        if self.R.shape != self.P.shape[:2]:
            raise ValueError(f"R must have shape {self.P.shape[:2]}, got {self.R.shape}")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("every P[s][a] must be a probability vector")

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def n_actions(self):
        return self.P.shape[1]

    def ap_mask(self, names):
        """Boolean state mask of states carrying any of the given propositions."""
        cols = [self.ap.index(name) for name in names]
        return self.labels[:, cols].any(axis=1) if cols else np.zeros(self.n_states, bool)

    def under_policy(self, policy_rows):
        """Markov chain and reward vector induced by a (S, A) stochastic policy."""
        policy_rows = np.asarray(policy_rows, dtype=np.float64)
        return np.einsum("sa,sat->st", policy_rows, self.P), np.einsum("sa,sa->s", policy_rows, self.R)

    def to_dict(self):
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "P": self.P.tolist(),
            "R": self.R.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "ap": list(self.ap),
            "s_init": int(self.s_init),
        }

    @classmethod
    def from_dict(cls, d):
        mdp = cls(P=d["P"], R=d["R"], labels=d["labels"], ap=list(d["ap"]), s_init=int(d["s_init"]))
        if mdp.n_states != d["n_states"] or mdp.n_actions != d["n_actions"]:
            raise ValueError("n_states / n_actions disagree with P")
        return mdp

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class TabularEnv(GroundMdp):
    """Simulator over a TabularMdp; states are one-hot vectors."""

    name = "tabular"

    def __init__(self, mdp: TabularMdp, terminal=None):
        self.mdp = mdp
        self.state_dim = mdp.n_states
        self.action_space = Discrete(mdp.n_actions)
        self.atomic_props = list(mdp.ap)
        self.initial_state = self.encode(mdp.s_init)
        self.terminal = np.zeros(mdp.n_states, bool) if terminal is None else np.asarray(terminal, bool)
        self._cdf = np.cumsum(mdp.P, axis=2)

    def encode(self, index):
        out = np.zeros(self.mdp.n_states)
        out[index] = 1.0
        return out

    @staticmethod
    def index(s):
        return int(np.argmax(s))

    def transition(self, s, a, rng):
        i = self.index(s)
        j = int(np.searchsorted(self._cdf[i, int(a)], rng.uniform(), side="right"))
        return self.encode(min(j, self.mdp.n_states - 1)), float(self.mdp.R[i, int(a)])

    def label(self, s):
        return self.mdp.labels[self.index(s)].copy()

    def is_terminal(self, s):
        return bool(self.terminal[self.index(s)])

    @property
    def episodic(self):
        return bool(self.terminal.any())
