"""End-to-end certification of a trained model."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from waemdp.certify.bounds import bisim_bound, lipschitz_constants
from waemdp.certify.pac import estimate_local_losses, required_samples
from waemdp.certify.properties import Return, time_to_failure
from waemdp.certify.value_diff import value_difference
from waemdp.certify.vi import value_iteration
from waemdp.env.sampling import StationarySampler
from waemdp.latent.execute import LatentPolicy
from waemdp.latent.extract import extract_explicit


@dataclass
class CertificationReport:
    epsilon: float
    delta: float
    gamma: float
    samples_used: int
    loss_reward: float
    loss_transition: float
    constants: dict
    bounds: dict
    latent_states: int
    max_residual: float
    property_values: dict = field(default_factory=dict)
    value_difference: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def summary(self):
        lines = [
            f"PAC local losses (eps={self.epsilon}, delta={self.delta}, T={self.samples_used}):",
            f"  L_R ~ {self.loss_reward:.6f}   L_P ~ {self.loss_transition:.6f}",
            f"latent MDP: {self.latent_states} reachable states (max residual {self.max_residual:.2e})",
            "constants: " + ", ".join(f"{k}={v:.4g}" for k, v in self.constants.items() if isinstance(v, float)),
        ]
        lines += [f"bound {k}: {v:.6g}" for k, v in self.bounds.items() if isinstance(v, float)]
        lines += [f"property {k}: {v:.6g}" for k, v in self.property_values.items()]
        if self.value_difference:
            vd = self.value_difference
            lines.append(f"value difference: |{vd['ground_value']:.4f} - {vd['latent_value']:.4f}| = "
                         f"{vd['difference']:.4f} (CI +-{vd['ground_ci']:.4f})")
        return "\n".join(lines)


REPORT_KEYS = {f for f in CertificationReport.__dataclass_fields__}


def certify(model, env, epsilon=0.01, delta=0.045, gamma=0.99, seed=0, budget=4096, n_episodes=30,
            reset_epsilon=0.75, properties=None):
    rng = np.random.default_rng(seed)
    extraction = extract_explicit(model, budget=budget)
    sampler = StationarySampler(env, None, rng, reset_epsilon)
    sampler.policy = LatentPolicy(model, sampler.mdp)
    estimate = estimate_local_losses(model, sampler, epsilon, delta)
    consts = lipschitz_constants(extraction.mdp, extraction.policy, gamma)
    bounds = bisim_bound(estimate, consts, gamma, epsilon)
    values = {}
    props = properties if properties is not None else {"return": Return()}
    if properties is None and "unsafe" in model.ap and "reset" in model.ap:
        props["!reset U unsafe"] = time_to_failure()
    for name, prop in props.items():
        values[name] = float(value_iteration(extraction.mdp, prop, gamma, policy=extraction.policy)[0])
    vd = value_difference(model, sampler.mdp, Return(), gamma, n_episodes, rng, extraction=extraction)
    return CertificationReport(
        epsilon=epsilon, delta=delta, gamma=gamma, samples_used=estimate.samples_used,
        loss_reward=estimate.loss_reward, loss_transition=estimate.loss_transition,
        constants=consts.to_dict(), bounds=bounds.to_dict(), latent_states=extraction.mdp.n_states,
        max_residual=float(extraction.residual.max()), property_values=values, value_difference=vd.to_dict(),
    )


__all__ = ["REPORT_KEYS", "CertificationReport", "certify", "required_samples"]
