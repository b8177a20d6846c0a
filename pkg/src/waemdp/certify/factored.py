"""Fitting distributions over bit vectors: independent bits versus an autoregressive flow."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from waemdp.autodiff import tensor as T
from waemdp.autodiff.optim import Adam
from waemdp.flows import MadeFlow, all_patterns

# Four-state chain used as the running example: from s0 the chain moves to a
# goal state w.p. 1/2 and to one of two unsafe states w.p. 1/4 each; the last
# three states are absorbing. Codes are (goal, unsafe, extra bit).
CHAIN_CODES = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 1]], dtype=np.float64)
CHAIN_ROW = np.array([0.0, 0.5, 0.25, 0.25])


def chain_joint():
    """The row out of s0 as a distribution over all 8 patterns."""
    joint = np.zeros(8)
    idx = (CHAIN_CODES @ np.array([4, 2, 1])).astype(int)
    joint[idx] = CHAIN_ROW
    return joint


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def fit_factored(joint, n_bits):
    """Maximum-likelihood independent-Bernoulli parameters: the bit marginals."""
    return np.asarray(joint, dtype=np.float64) @ all_patterns(n_bits)


def factored_probs(means):
    patterns = all_patterns(len(means))
    means = np.asarray(means, dtype=np.float64)
    return np.prod(np.where(patterns > 0.5, means, 1.0 - means), axis=1)


def _flatten(params):
    return np.concatenate([p.value.ravel() for p in params])


def _assign(params, flat):
    offset = 0
    for p in params:
        p.value = flat[offset:offset + p.value.size].reshape(p.value.shape).copy()
        offset += p.value.size


def fit_autoregressive(joint, n_bits, rng, n_hidden=16, method="lbfgs", steps=5000, lr=0.05):
    """Fit a MADE flow by exact weighted maximum likelihood (cross-entropy).

    Deterministic conditionals need saturated logits; a quasi-Newton solver
    gets there in tens of iterations, whereas Adam's step normalization makes
    the last decades of total variation slow. ``method="adam"`` is kept for
    comparison.
    """
    joint = np.asarray(joint, dtype=np.float64)
    flow = MadeFlow(n_bits, rng, n_hidden=n_hidden)
    support = joint > 0
    patterns = all_patterns(n_bits)[support]
    weights = joint[support]
    params = flow.parameters()

    def loss_and_grad():
        loss = T.neg(T.tsum(T.mul(flow.log_prob_tensor(patterns), weights)))
        return loss.value.item(), [g.value for g in T.grad(loss, params)]

    if method == "adam":
        opt = Adam(params, lr=lr)
        for _ in range(steps):
            opt.step(loss_and_grad()[1], "descend")
        return flow
    if method != "lbfgs":
        raise ValueError(f"unknown method {method!r}")

    def objective(flat):
        _assign(params, flat)
        value, grads = loss_and_grad()
        return value, np.concatenate([g.ravel() for g in grads])

    result = minimize(objective, _flatten(params), jac=True, method="L-BFGS-B",
                      options={"maxiter": steps, "gtol": 1e-14, "ftol": 0.0})
    _assign(params, result.x)
    return flow
