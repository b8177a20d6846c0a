import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waemdp.autodiff import tensor as T
from waemdp.autodiff.nn import Mlp
from waemdp.env import make_env, make_policy
from waemdp.errors import DimensionMismatch, DivergenceDetected, EmptyBatch, ShapeMismatch
from waemdp.wae.objective import gradient_penalty, latent_metric, latent_metric_constants, raw_distance
from waemdp.wae.train import Trainer, TrainingConfig

unit_vectors = st.integers(1, 13).flatmap(
    lambda n: st.tuples(*[st.lists(st.floats(0, 1), min_size=n, max_size=n) for _ in range(3)])
)


@settings(max_examples=60, deadline=None)
@given(unit_vectors, st.floats(0.05, 1.0))
def test_latent_metric_axioms(points, temp):
    x, y, z = (np.array(p) for p in points)
    dxy = latent_metric(x, y, temp)
    assert dxy == pytest.approx(latent_metric(y, x, temp))
    assert latent_metric(x, x, temp) == 0.0
    assert dxy <= latent_metric(x, z, temp) + latent_metric(z, y, temp) + 1e-12


@settings(max_examples=60, deadline=None)
@given(unit_vectors, st.floats(0.05, 1.0))
def test_latent_metric_sandwich(points, temp):
    x, y, _ = (np.array(p) for p in points)
    a, b = latent_metric_constants(temp, len(x))
    d = np.linalg.norm(x - y)
    assert a * d - 1e-12 <= latent_metric(x, y, temp) <= b * d + 1e-12


def test_latent_metric_temperature_domain():
    with pytest.raises(ValueError):
        latent_metric(np.zeros(2), np.ones(2), 0.0)


def test_raw_distance():
    t1 = (np.zeros(2), np.array([1.0, 0.0]), 0.1, np.zeros(2))
    t2 = (np.array([3.0, 4.0]), np.array([0.0, 1.0]), -0.1, np.zeros(2))
    assert raw_distance(t1, t2) == pytest.approx(5 + np.sqrt(2) + 0.2)
    with pytest.raises(DimensionMismatch):
        raw_distance(t1, (np.zeros(3),) + t2[1:])


def test_gradient_penalty_zero_for_unit_slope_linear_critic(rng):
    critic = Mlp([3, 1], rng)
    w = rng.normal(size=(3, 1))
    critic.weights[0].value = w / np.linalg.norm(w)
    x, y = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    gp = gradient_penalty(critic, x, y, rng.uniform(size=(5, 1)))
    assert float(gp.value) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ShapeMismatch):
        gradient_penalty(critic, x, y[:, :2], np.ones((5, 1)))


def test_gradient_penalty_for_scaled_linear_critic(rng):
    critic = Mlp([2, 1], rng)
    critic.weights[0].value = np.array([[3.0], [4.0]])
    gp = gradient_penalty(critic, np.zeros((4, 2)), np.ones((4, 2)), np.full((4, 1), 0.5))
    assert float(gp.value) == pytest.approx(16.0)


def small_config(**kw):
    base = dict(n_bits=6, batch=16, steps=30, m=2, hidden=16, warmup=50, burn_in=20, seed=3)
    base.update(kw)
    return TrainingConfig(**base)


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(gp_coef=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(beta_ss=-1.0)
    assert TrainingConfig(beta=2.0).beta_trans == 2.0


def test_training_steps_are_finite_and_update_schedule():
    env = make_env("gridworld")
    trainer = Trainer(env, make_policy("scripted", env), small_config())
    metrics = trainer.run(log_every=0)
    assert len(metrics) == 30 and trainer.state.model_updates == 15
    assert all(np.isfinite(m[k]) for m in metrics for k in ("recon", "w_ss", "w_trans", "gp"))


def test_training_is_deterministic_given_seed():
    env = make_env("gridworld")
    runs = [Trainer(env, make_policy("scripted", env), small_config(steps=8)).run(log_every=0) for _ in range(2)]
    assert [m["recon"] for m in runs[0]] == [m["recon"] for m in runs[1]]


def test_checkpoint_resume_continues_identically(tmp_path):
    env = make_env("gridworld")
    straight = Trainer(env, make_policy("scripted", env), small_config(steps=10))
    straight.run(10, log_every=0)
    split = Trainer(env, make_policy("scripted", env), small_config(steps=10))
    split.run(4, log_every=0)
    split.save_checkpoint(tmp_path / "ck.pkl")
    resumed = Trainer.load_checkpoint(tmp_path / "ck.pkl")
    resumed.run(6, log_every=0)
    assert [m["recon"] for m in resumed.state.metrics] == [m["recon"] for m in straight.state.metrics]


def test_divergence_is_reported_with_last_good_checkpoint():
    env = make_env("gridworld")
    trainer = Trainer(env, make_policy("scripted", env), small_config(steps=5))
    trainer.run(2, log_every=0)
    trainer.model.decoder.weights[0].value[:] = np.nan
    with pytest.raises(DivergenceDetected) as info:
        trainer.run(2, log_every=0)
    assert info.value.checkpoint is not None


def test_continuous_environment_trains():
    env = make_env("pointmass")
    trainer = Trainer(env, make_policy("scripted", env), small_config(steps=6, latent_actions=3))
    metrics = trainer.run(log_every=0)
    assert all(np.isfinite(m["recon"]) for m in metrics)


def test_empty_batch_rejected():
    from waemdp.wae.objective import TransitionBatch

    with pytest.raises(EmptyBatch):
        TransitionBatch.from_samples([], None)


def test_model_gradients_flow_into_policy_and_encoder():
    env = make_env("gridworld")
    trainer = Trainer(env, make_policy("scripted", env), small_config(steps=1))
    trainer._collect(100)
    from waemdp.wae.objective import NoiseDraw, TransitionBatch, objective_terms

    batch = TransitionBatch.from_samples(trainer.replay.sample(16, trainer.noise_rng), trainer.model)
    noise = NoiseDraw.draw(trainer.model, 16, trainer.noise_rng)
    terms = objective_terms(trainer.model, trainer.critics, batch, noise)
    loss = T.add(terms.recon, T.add(terms.w_steady, terms.w_transition))
    grads = dict(zip([n for n, _ in trainer.model.named_parameters()],
                     T.grad(loss, trainer.model.parameters())))
    for name in ("encoder.w0", "policy.w0", "transition.w_ctx_out", "decoder.w0", "reward.w0"):
        assert np.abs(grads[name].value).sum() > 0, name
