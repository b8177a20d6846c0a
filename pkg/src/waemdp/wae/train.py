"""The alternating min-max training loop."""
from __future__ import annotations

import logging
import pickle
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from waemdp.autodiff import tensor as T
from waemdp.autodiff.optim import Adam
from waemdp.env.policies import Policy
from waemdp.env.sampling import ReplayStore, StationarySampler
from waemdp.env.spaces import Discrete
from waemdp.errors import DivergenceDetected
from waemdp.latent.execute import LatentPolicy
from waemdp.latent.model import ModelConfig, WaeMdp
from waemdp.wae.objective import Critics, NoiseDraw, TransitionBatch, objective_terms

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("step", "recon", "w_ss", "w_trans", "gp", "wall_ms")


@dataclass
class TrainingConfig:
    n_bits: int = 6
    latent_actions: int | None = None
    batch: int = 64
    steps: int = 30_000
    m: int = 5  # one model update per m critic updates
    gp_coef: float = 10.0
    beta: float | None = None
    beta_ss: float = 10.0
    beta_trans: float = 10.0
    lr_model: float = 3e-4
    lr_critic: float = 3e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    hidden: int = 64
    temp_encoder: float = 2.0 / 3.0
    temp_transition: float = 0.5
    temp_prior: float = 0.5
    temp_policy: float = 1.0 / 3.0
    temp_action: float = 1.0 / 3.0
    replay_capacity: int = 1_000_000
    warmup: int = 2_000
    env_steps_per_update: int = 1
    reset_epsilon: float = 0.75
    burn_in: int = 1_000
    epsilon_mimic: float = 0.0  # initial probability of acting with the latent policy
    seed: int = 0

    def __post_init__(self):
        if self.beta is not None:
            self.beta_ss = self.beta_trans = self.beta
        for name in ("beta_ss", "beta_trans"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.gp_coef <= 0:
            raise ValueError("gp_coef must be > 0")
        if self.batch < 1 or self.steps < 0 or self.m < 1:
            raise ValueError("batch and m must be >= 1, steps >= 0")

    def to_dict(self):
        return asdict(self)


class MimicPolicy(Policy):
    """Acts with the latent policy with a probability decaying linearly to zero."""

    kind = "mimic"

    def __init__(self, expert, latent, start, horizon):
        self.expert, self.latent = expert, latent
        self.start, self.horizon = start, max(horizon, 1)
        self.t = 0

    def act(self, s, rng):
        p = self.start * max(0.0, 1.0 - self.t / self.horizon)
        self.t += 1
        return self.latent.act(s, rng) if rng.uniform() < p else self.expert.act(s, rng)


def build_model(env, config: TrainingConfig, rng):
    space = env.action_space
    discrete = isinstance(space, Discrete)
    model_config = ModelConfig(
        state_dim=env.state_dim,
        ap=list(env.atomic_props),
        n_bits=config.n_bits,
        n_actions=space.n if discrete else None,
        action_low=None if discrete else list(space.low),
        action_high=None if discrete else list(space.high),
        n_latent_actions=config.latent_actions if config.latent_actions else (space.n if discrete else 4),
        hidden=config.hidden,
        temp_encoder=config.temp_encoder,
        temp_transition=config.temp_transition,
        temp_prior=config.temp_prior,
        temp_policy=config.temp_policy,
        temp_action=config.temp_action,
        initial_state=list(np.asarray(env.initial_state, dtype=float)),
        initial_label=[bool(b) for b in env.label(env.initial_state)],
    )
    return WaeMdp(model_config, rng)


@dataclass
class TrainingState:
    step: int = 0
    model_updates: int = 0
    metrics: list = field(default_factory=list)


class Trainer:
    """Holds everything that evolves during training, so it can be checkpointed."""

    def __init__(self, env, policy, config: TrainingConfig):
        self.config = config
        streams = np.random.SeedSequence(config.seed).spawn(4)
        init_rng, critic_rng, env_rng, noise_rng = (np.random.default_rng(s) for s in streams)
        self.noise_rng = noise_rng
        sampler_probe = StationarySampler(env, policy, env_rng, config.reset_epsilon, config.burn_in)
        self.env = sampler_probe.mdp  # reset-augmented when episodic
        self.model = build_model(self.env, config, init_rng)
        action_dim = self.env.action_space.n if isinstance(self.env.action_space, Discrete) else self.env.action_space.dim
        self.critics = Critics(self.model, self.env.state_dim, action_dim, critic_rng, hidden=config.hidden)
        if config.epsilon_mimic > 0:
            policy = MimicPolicy(policy, LatentPolicy(self.model, self.env), config.epsilon_mimic, config.steps)
            sampler_probe.policy = policy
        self.sampler = sampler_probe
        self.replay = ReplayStore(config.replay_capacity)
        betas = (config.adam_beta1, config.adam_beta2)
        self.model_opt = Adam(self.model.parameters(), lr=config.lr_model, beta1=betas[0], beta2=betas[1])
        self.critic_opt = Adam(self.critics.parameters(), lr=config.lr_critic, beta1=betas[0], beta2=betas[1])
        self.state = TrainingState()

    def snapshot(self):
        return {"model": self.model.state_dict(), "critics": self.critics.state_dict(), "step": self.state.step}

    def _collect(self, n):
        self.replay.extend(self.sampler.sample(n))

    def train_step(self):
        cfg = self.config
        step = self.state.step
        if len(self.replay) == 0:
            self._collect(max(cfg.warmup, cfg.batch))
        self._collect(cfg.env_steps_per_update)
        start = time.perf_counter()
        batch = TransitionBatch.from_samples(self.replay.sample(cfg.batch, self.noise_rng), self.model)
        noise = NoiseDraw.draw(self.model, cfg.batch, self.noise_rng)
        update_model = step % cfg.m == 0
        terms = objective_terms(self.model, self.critics, batch, noise, track_model=update_model)
        values = terms.floats()
        if not all(np.isfinite(v) for v in values.values()):
            raise DivergenceDetected(f"non-finite loss at step {step}: {values}", step=step, checkpoint=self._last_good)
        weighted = T.add(T.mul(terms.w_steady, cfg.beta_ss), T.mul(terms.w_transition, cfg.beta_trans))
        critic_objective = T.sub(weighted, T.mul(terms.penalty, cfg.gp_coef))
        critic_grads = T.grad(critic_objective, self.critics.parameters())
        if update_model:
            model_loss = T.add(terms.recon, weighted)
            model_grads = T.grad(model_loss, self.model.parameters())
            self.model_opt.step([g.value for g in model_grads], "descend")
            self.state.model_updates += 1
        self.critic_opt.step([g.value for g in critic_grads], "ascend")
        values["step"] = step
        values["wall_ms"] = (time.perf_counter() - start) * 1e3
        self.state.metrics.append(values)
        self.state.step += 1
        return values

    def run(self, steps=None, checkpoint_every=0, checkpoint_path=None, log_every=1000):
        steps = self.config.steps if steps is None else steps
        self._last_good = self.snapshot()
        target = self.state.step + steps
        while self.state.step < target:
            values = self.train_step()
            if log_every and self.state.step % log_every == 0:
                log.info("step %d recon %.4f w_ss %.4f w_trans %.4f gp %.4f", values["step"], values["recon"],
                         values["w_ss"], values["w_trans"], values["gp"])
                self._last_good = self.snapshot()
            if checkpoint_every and checkpoint_path and self.state.step % checkpoint_every == 0:
                self.save_checkpoint(checkpoint_path)
        return self.state.metrics

    def save_checkpoint(self, path):
        with open(path, "wb") as fh:
            pickle.dump(self, fh)

    @staticmethod
    def load_checkpoint(path):
        with open(path, "rb") as fh:
            return pickle.load(fh)


def train(env, policy, config: TrainingConfig, **run_kwargs):
    trainer = Trainer(env, policy, config)
    metrics = trainer.run(**run_kwargs)
    return trainer.model, metrics, trainer
