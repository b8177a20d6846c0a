from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Discrete:
    n: int

    def contains(self, a):
        try:
            value = np.asarray(a)
            return value.size == 1 and float(value) == int(value) and 0 <= int(value) < self.n
        except (TypeError, ValueError):
            return False

    def sample(self, rng):
        return int(rng.integers(self.n))

    @property
    def dim(self):
        return 1

    def to_dict(self):
        return {"kind": "discrete", "n": self.n}


@dataclass(frozen=True)
class Box:
    low: tuple
    high: tuple

    def contains(self, a):
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        return a.shape == (len(self.low),) and bool(np.all(a >= self.low) and np.all(a <= self.high))

    def sample(self, rng):
        return rng.uniform(self.low, self.high)

    @property
    def dim(self):
        return len(self.low)

    def to_dict(self):
        return {"kind": "box", "low": list(self.low), "high": list(self.high)}
