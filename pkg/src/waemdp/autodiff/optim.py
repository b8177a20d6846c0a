from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from waemdp.errors import ShapeMismatch


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first: list = field(default_factory=list)
    second: list = field(default_factory=list)


class Adam:
    """Adam over a fixed list of parameter tensors (values updated in place)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr, beta1, beta2, eps)
        self.state.first = [np.zeros_like(p.value) for p in self.params]
        self.state.second = [np.zeros_like(p.value) for p in self.params]

    def step(self, grads, direction="descend"):
        if direction not in ("ascend", "descend"):
            raise ValueError(f"direction must be ascend or descend, got {direction!r}")
        if len(grads) != len(self.params):
            raise ShapeMismatch(f"{len(grads)} gradients for {len(self.params)} parameters")
        st = self.state
        st.step_count += 1
        sign = 1.0 if direction == "ascend" else -1.0
        c1 = 1.0 - st.beta1 ** st.step_count
        c2 = 1.0 - st.beta2 ** st.step_count
        for p, g, m, v in zip(self.params, grads, st.first, st.second):
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.value.shape:
                raise ShapeMismatch(f"gradient {g.shape} for parameter {p.value.shape}")
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * g * g
            p.value = p.value + sign * st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)


def adam_step(optimizer, grads, direction="descend"):
    optimizer.step(grads, direction)
    return optimizer.params
