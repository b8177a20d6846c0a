"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python -m tests.test_acceptance`` (lines go to stderr as they complete).
"""
import time

import numpy as np
import pytest

from tests.acceptance_log import verdict
from tests.fd_cases import all_cases, check_case
from tests.oracles import random_tabular, reach_by_enumeration
from waemdp.certify.bounds import exact_local_losses, lipschitz_constants
from waemdp.certify.factored import chain_joint, factored_probs, fit_autoregressive, fit_factored, total_variation
from waemdp.certify.pac import estimate_local_losses, required_samples
from waemdp.certify.properties import parse_property, time_to_failure
from waemdp.certify.vi import policy_return_linear, value_iteration
from waemdp.env import make_env, make_policy
from waemdp.env.builtin import Gridworld
from waemdp.env.mdp import TabularMdp
from waemdp.env.sampling import StationarySampler
from waemdp.latent.execute import LatentPolicy, latent_flow_execute, run_episodes
from waemdp.latent.extract import extract_explicit
from waemdp.latent.tabular import TabularLatentModel, exact_gridworld_abstraction
from waemdp.wae.dual import discrete_metric_embedding, dual_wasserstein
from waemdp.wae.objective import latent_metric, latent_metric_constants
from waemdp.wae.train import Trainer, TrainingConfig


def test_criterion_1_factored_versus_autoregressive():
    start = time.perf_counter()
    means = fit_factored(chain_joint(), 3)
    probs = factored_probs(means)[[0, 4, 2, 3]]
    flow = fit_autoregressive(chain_joint(), 3, np.random.default_rng(0))
    tv = total_variation(flow.probs_all(), chain_joint())
    elapsed = time.perf_counter() - start
    ok = (
        np.allclose(means, [0.5, 0.5, 0.25], rtol=0, atol=1e-15)
        and np.allclose(probs, [3 / 16, 3 / 16, 3 / 16, 1 / 16], rtol=0, atol=1e-15)
        and tv <= 1e-6
        and elapsed < 10
    )
    verdict(1, "factored fit vs flow fit", ok,
            f"b={means.tolist()}, probs={probs.tolist()}, flow TV={tv:.2e}, {elapsed:.2f}s")
    assert ok


def perturbed_gridworld_pair(rng):
    """The exact gridworld abstraction with noisy rewards and mixed-in transition noise."""
    grid = Gridworld()
    exact, ground, phi = exact_gridworld_abstraction(grid)
    P = exact.P.copy()
    used = np.unique(phi)
    noise = np.zeros_like(P)
    noise[:, :, used] = rng.dirichlet(np.ones(len(used)), size=P.shape[:2])
    P[used] = 0.8 * P[used] + 0.2 * noise[used]
    R = np.clip(exact.R + rng.uniform(-0.1, 0.1, size=exact.R.shape), -0.5, 0.5)
    model = TabularLatentModel(exact.n_bits, exact.ap, exact.encode, P, R, exact.policy_rows, exact.initial_latent())
    latent = TabularMdp(P=P, R=R, labels=np.zeros((len(P), 1)), ap=["unused"])
    truth = exact_local_losses(ground, phi, latent, exact.policy_rows)
    return grid, model, truth


def test_criterion_2_pac_estimates():
    start = time.perf_counter()
    grid, model, truth = perturbed_gridworld_pair(np.random.default_rng(7))
    eps, delta, runs = 0.05, 0.1, 200
    hits = 0
    for k in range(runs):
        sampler = StationarySampler(grid, None, np.random.default_rng(10_000 + k), burn_in=200)
        sampler.policy = LatentPolicy(model, sampler.mdp)
        est = estimate_local_losses(model, sampler, eps, delta)
        hits += (abs(est.loss_reward - truth.loss_reward) <= eps
                 and abs(est.loss_transition - truth.miss_probability) <= eps)
    elapsed = time.perf_counter() - start
    frozen = required_samples(0.01, 0.045)
    ok = frozen == 22437 and hits >= 0.9 * runs and elapsed < 120
    verdict(2, "PAC sample bound and soundness", ok,
            f"required_samples(0.01,0.045)={frozen}; {hits}/{runs} runs within eps "
            f"(L_R={truth.loss_reward:.4f}, L_P={truth.miss_probability:.4f}); {elapsed:.1f}s")
    assert ok


def loop_chain(p):
    P = np.array([[[p, 1 - p]], [[0.0, 1.0]]])
    return TabularMdp(P=P, R=np.zeros((2, 1)), labels=[[False], [True]], ap=["goal"])


def test_criterion_3_value_iteration():
    reach = parse_property("F goal")
    worst = 0.0
    for gamma in (0.5, 0.9, 0.99):
        v = value_iteration(loop_chain(0.0), reach, gamma, policy=np.ones((2, 1)), tol=1e-12)
        worst = max(worst, abs(v[0] - gamma))
        for p in (0.1, 0.5, 0.9):
            v = value_iteration(loop_chain(p), reach, gamma, policy=np.ones((2, 1)), tol=1e-12)
            worst = max(worst, abs(v[0] - gamma * (1 - p) / (1 - gamma * p)))
    monotone = 0
    rng = np.random.default_rng(3)
    prop = parse_property("!b U a")
    for _ in range(100):
        mdp = random_tabular(rng, 20, 3, density=0.4)
        policy = rng.dirichlet(np.ones(3), size=20) if rng.uniform() < 0.5 else None
        _, iterates = value_iteration(mdp, prop, 0.95, policy=policy, record=True)
        monotone += all(np.all(b >= a - 1e-15) for a, b in zip(iterates, iterates[1:]))
    ok = worst <= 1e-10 and monotone == 100
    verdict(3, "value iteration closed forms and monotone iterates", ok,
            f"max closed-form error {worst:.1e}; monotone on {monotone}/100 random 20-state MDPs")
    assert ok


def random_triple(rng):
    n_ground, n_latent, n_actions = rng.integers(4, 13), rng.integers(2, 6), rng.integers(1, 4)
    n_latent = min(n_latent, n_ground)
    phi = np.concatenate([np.arange(n_latent), rng.integers(n_latent, size=n_ground - n_latent)])
    rng.shuffle(phi)
    ground = random_tabular(rng, n_ground, n_actions, ap=("a",), density=rng.uniform(0.3, 1.0))
    push = np.zeros((n_latent, n_actions, n_latent))
    for j in range(n_latent):
        members = phi == j
        mixed = ground.P[members].mean(axis=0)
        for t in range(n_latent):
            push[j, :, t] = mixed[:, phi == t].sum(axis=1)
    # latent model: pushed-forward kernel blended with noise, averaged rewards plus noise
    weight = rng.uniform(0.0, 1.0)
    P = (1 - weight) * push + weight * rng.dirichlet(np.ones(n_latent), size=(n_latent, n_actions))
    R = np.array([ground.R[phi == j].mean(axis=0) for j in range(n_latent)])
    R = np.clip(R + rng.uniform(-0.2, 0.2, size=R.shape), -0.5, 0.5)
    latent = TabularMdp(P=P, R=R, labels=np.zeros((n_latent, 1)), ap=["a"])
    return ground, phi, latent, rng.dirichlet(np.ones(n_actions), size=n_latent)


def test_criterion_4_value_bound_soundness():
    start = time.perf_counter()
    gamma = 0.9
    rng = np.random.default_rng(4)
    worst_ratio, violations = 0.0, 0
    for _ in range(50):
        ground, phi, latent, policy = random_triple(rng)
        losses = exact_local_losses(ground, phi, latent, policy)
        consts = lipschitz_constants(latent, policy, gamma)
        ground_values = policy_return_linear(ground, gamma, policy[phi])
        latent_values = policy_return_linear(latent, gamma, policy)
        gap = float(losses.stationary @ np.abs(ground_values - latent_values[phi]))
        bound = (losses.loss_reward + gamma * consts.value * losses.loss_transition) / (1 - gamma)
        violations += gap > bound + 1e-12
        worst_ratio = max(worst_ratio, gap / bound if bound > 0 else 0.0)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 60
    verdict(4, "value-difference bound on random triples", ok,
            f"{violations} violations in 50 triples; worst gap/bound {worst_ratio:.3f}; {elapsed:.1f}s")
    assert ok


def test_criterion_5_dual_estimator():
    rng = np.random.default_rng(5)
    errors = []
    for i in range(10):
        k = int(rng.integers(2, 9))
        p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        exact = 0.5 * np.abs(p - q).sum()
        est = dual_wasserstein(discrete_metric_embedding(k), p, q, np.random.default_rng(100 + i),
                               hidden=32, steps=1500)
        errors.append(abs(est.value - exact))
    ok = max(errors) <= 0.05
    verdict(5, "gradient-penalized dual estimate vs exact TV", ok,
            f"max |estimate - TV| = {max(errors):.4f} over 10 instances")
    assert ok


def test_criterion_6_gradients():
    results = [(name, seed, check_case(name, seed)) for name, seed in all_cases(50)]
    worst = max(err for *_, err in results)
    failing = [name for name, _, err in results if err > 1e-4]
    has_double = any(name.startswith("gradient_penalty") for name, *_ in results)
    ok = not failing and has_double and len(results) == 50
    verdict(6, "gradient vs finite differences", ok,
            f"50 cases, worst relative error {worst:.1e}, double-backward included: {has_double}")
    assert ok, failing


def test_criterion_7_end_to_end_distillation():
    start = time.perf_counter()
    env = make_env("gridworld")
    scripted = make_policy("scripted", env)
    trainer = Trainer(env, scripted, TrainingConfig(n_bits=6, steps=30_000, seed=0))
    trainer.run(log_every=0)
    recon = np.array([m["recon"] for m in trainer.state.metrics])
    early, final = recon[50:150].mean(), recon[-1000:].mean()
    scripted_return = run_episodes(env, scripted, 1000, np.random.default_rng(1))[0].mean()
    latent_return = latent_flow_execute(trainer.model, trainer.env, 1000, np.random.default_rng(2))[0].mean()
    sampler = StationarySampler(env, None, np.random.default_rng(3))
    sampler.policy = LatentPolicy(trainer.model, sampler.mdp)
    estimate = estimate_local_losses(trainer.model, sampler, 0.05, 0.05)
    elapsed = time.perf_counter() - start
    ok = (final < 0.5 * early and latent_return >= 0.8 * scripted_return
          and estimate.loss_transition < 0.5 and elapsed < 1800)
    verdict(7, "end-to-end gridworld distillation", ok,
            f"recon {early:.4f} -> {final:.4f}; return latent {latent_return:.3f} vs scripted "
            f"{scripted_return:.3f} ({latent_return / scripted_return:.0%}); L_P={estimate.loss_transition:.3f}, "
            f"L_R={estimate.loss_reward:.3f}; {elapsed / 60:.1f} min")
    assert ok


def enumerate_reach(extraction, prop, gamma):
    """Oracle: push probability mass forward step by step from the initial latent state."""
    mdp = extraction.mdp
    chain, _ = mdp.under_policy(extraction.policy)
    target = prop.target.mask(mdp.labels, mdp.ap)
    alive = prop.constraint.mask(mdp.labels, mdp.ap) & ~target
    horizon = int(np.ceil(np.log(1e-14) / np.log(gamma)))
    return reach_by_enumeration(chain, target, alive, mdp.s_init, gamma, horizon)


def test_criterion_8_time_to_failure():
    from waemdp.env.wrappers import ResetAugmented
    from waemdp.wae.train import build_model

    grid = Gridworld()
    gamma = 0.99
    prop = time_to_failure()
    exact_model, _, _ = exact_gridworld_abstraction(grid)
    neural = build_model(ResetAugmented(grid, 0.75), TrainingConfig(n_bits=6), np.random.default_rng(8))
    errors = []
    for model in (exact_model, neural):
        extraction = extract_explicit(model)
        engine = value_iteration(extraction.mdp, prop, gamma, policy=extraction.policy, tol=1e-12)[0]
        errors.append(abs(engine - enumerate_reach(extraction, prop, gamma)))
    ok = max(errors) <= 1e-8
    verdict(8, "time-to-failure value vs enumeration", ok,
            f"|engine - oracle| = {errors[0]:.1e} (exact abstraction), {errors[1]:.1e} (neural model)")
    assert ok


def test_criterion_9_latent_metric():
    rng = np.random.default_rng(9)
    axioms_ok = sandwich_ok = True
    for n in (1, 4, 13):
        for temp in (0.1, 0.5, 1.0):
            x, y, z = (rng.uniform(size=(10_000, n)) for _ in range(3))
            dxy, dyx = latent_metric(x, y, temp), latent_metric(y, x, temp)
            dxz, dzy = latent_metric(x, z, temp), latent_metric(z, y, temp)
            axioms_ok &= bool(np.all(dxy >= 0) and np.all(dxy == dyx)
                              and np.all(latent_metric(x, x, temp) == 0)
                              and np.all(dxy <= dxz + dzy + 1e-12))
            a, b = latent_metric_constants(temp, n)
            d = np.linalg.norm(x - y, axis=1)
            sandwich_ok &= bool(np.all(a * d <= dxy + 1e-12) and np.all(dxy <= b * d + 1e-12))
    ok = axioms_ok and sandwich_ok
    verdict(9, "latent metric axioms and sandwich", ok,
            f"axioms on 1e4 triples: {axioms_ok}; sandwich on 1e4 pairs for n in 1,4,13: {sandwich_ok}")
    assert ok


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
