import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tests.oracles import random_tabular, reach_by_enumeration
from waemdp.certify.bounds import (
    LipschitzConstants,
    bisim_bound,
    exact_local_losses,
    lipschitz_constants,
    pairwise_bound_matrix,
    pairwise_tv_max,
)
from waemdp.certify.factored import chain_joint, factored_probs, fit_autoregressive, fit_factored, total_variation
from waemdp.certify.pac import LocalLossEstimate, estimate_local_losses, required_samples, required_samples_value
from waemdp.certify.properties import (
    And,
    Atom,
    ConstrainedReach,
    NextReach,
    Not,
    Or,
    Return,
    parse_property,
    time_to_failure,
)
from waemdp.certify.vi import policy_return_linear, reach_value_forward, reach_value_linear, value_iteration
from waemdp.env.mdp import TabularMdp
from waemdp.errors import DomainError, NotConverged, PropertySyntaxError


def loop_chain(p):
    """State 0 stays with probability p, otherwise moves to the absorbing target state 1."""
    P = np.array([[[p, 1 - p]], [[0.0, 1.0]]])
    return TabularMdp(P=P, R=np.zeros((2, 1)), labels=[[False], [True]], ap=["goal"])


# -- PAC sample sizes ----------------------------------------------------------

def test_required_samples_frozen():
    assert required_samples(0.01, 0.045) == 22437
    assert required_samples(0.5, 0.5) == 5


def test_required_samples_value_frozen():
    assert required_samples_value(0.1, 0.1, 0.5, 1.0) == 1660


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (1.0, 0.1), (0.1, 0.0), (0.1, 1.2)])
def test_required_samples_domain(eps, delta):
    with pytest.raises(DomainError):
        required_samples(eps, delta)


def test_required_samples_value_domain():
    with pytest.raises(DomainError):
        required_samples_value(0.1, 0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        required_samples_value(0.1, 0.1, 0.5, math.inf)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.99), st.floats(0.001, 0.99))
def test_required_samples_satisfies_hoeffding(eps, delta):
    t = required_samples(eps, delta)
    assert 4 * math.exp(-2 * t * eps ** 2) <= delta * (1 + 1e-12)
    if t > 1:
        assert 4 * math.exp(-2 * (t - 1) * eps ** 2) > delta * (1 - 1e-12)


# -- properties ------------------------------------------------------------------

def test_parse_constrained_reach():
    assert parse_property("!reset U unsafe") == time_to_failure()
    assert parse_property("~reset U unsafe") == time_to_failure()
    assert parse_property("(a | b) U c & d") == ConstrainedReach(Or(Atom("a"), Atom("b")), And(Atom("c"), Atom("d")))


def test_parse_eventually_and_next():
    assert str(parse_property("F goal")) == "true U goal"
    assert parse_property("F (unsafe & X reset)") == NextReach(Atom("unsafe"), Atom("reset"))
    assert parse_property("F (a & b & X !c)") == NextReach(And(Atom("a"), Atom("b")), Not(Atom("c")))


@pytest.mark.parametrize("text", ["", "goal", "a U", "F (a & X)", "a U b)", "a $ b", "U goal"])
def test_parse_errors(text):
    with pytest.raises(PropertySyntaxError):
        parse_property(text)


def test_atom_mask_unknown_proposition():
    with pytest.raises(Exception):
        Atom("nope").mask(np.zeros((2, 1), bool), ["a"])


# -- value iteration --------------------------------------------------------------

def test_one_step_reach_is_gamma():
    mdp = loop_chain(0.0)
    v = value_iteration(mdp, parse_property("F goal"), 0.9, policy=np.ones((2, 1)))
    assert v[0] == pytest.approx(0.9, abs=1e-10)


@pytest.mark.parametrize("p,gamma", [(0.3, 0.9), (0.8, 0.5), (0.95, 0.99)])
def test_loop_chain_closed_form(p, gamma):
    v = value_iteration(loop_chain(p), parse_property("F goal"), gamma, policy=np.ones((2, 1)), tol=1e-12)
    assert v[0] == pytest.approx(gamma * (1 - p) / (1 - gamma * p), abs=1e-10)


def test_reachability_three_routes_agree():
    rng = np.random.default_rng(11)
    mdp = random_tabular(rng, 10, 3, density=0.5)
    policy = rng.dirichlet(np.ones(3), size=10)
    prop = ConstrainedReach(Not(Atom("b")), Atom("a"))
    vi = value_iteration(mdp, prop, 0.9, policy=policy, tol=1e-12)
    lin = reach_value_linear(mdp, prop, 0.9, policy)
    chain, _ = mdp.under_policy(policy)
    target = prop.target.mask(mdp.labels, mdp.ap)
    alive = prop.constraint.mask(mdp.labels, mdp.ap) & ~target
    for s in range(10):
        assert vi[s] == pytest.approx(lin[s], abs=1e-10)
        assert vi[s] == pytest.approx(reach_value_forward(mdp, prop, 0.9, policy, s), abs=1e-10)
        assert vi[s] == pytest.approx(reach_by_enumeration(chain, target, alive, s, 0.9, 600), abs=1e-10)


def test_next_reach_matches_forward_propagation():
    rng = np.random.default_rng(12)
    mdp = random_tabular(rng, 8, 2, density=0.5)
    policy = rng.dirichlet(np.ones(2), size=8)
    prop = NextReach(Atom("a"), Atom("b"))
    vi = value_iteration(mdp, prop, 0.9, policy=policy, tol=1e-12)
    for s in range(8):
        assert vi[s] == pytest.approx(reach_value_forward(mdp, prop, 0.9, policy, s), abs=1e-9)


def test_return_matches_linear_solve():
    rng = np.random.default_rng(13)
    mdp = random_tabular(rng, 7, 2)
    policy = rng.dirichlet(np.ones(2), size=7)
    np.testing.assert_allclose(value_iteration(mdp, Return(), 0.95, policy=policy, tol=1e-12),
                               policy_return_linear(mdp, 0.95, policy), atol=1e-10)


def test_maximizing_value_dominates_every_policy():
    rng = np.random.default_rng(14)
    mdp = random_tabular(rng, 6, 3)
    best = value_iteration(mdp, Return(), 0.9)
    for _ in range(5):
        policy = rng.dirichlet(np.ones(3), size=6)
        assert np.all(best >= value_iteration(mdp, Return(), 0.9, policy=policy) - 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_reachability_iterates_monotone(seed):
    rng = np.random.default_rng(seed)
    mdp = random_tabular(rng, 12, 2)
    _, iterates = value_iteration(mdp, parse_property("!b U a"), 0.9, record=True)
    for prev, cur in zip(iterates, iterates[1:]):
        assert np.all(cur >= prev - 1e-15)
    assert np.all((iterates[-1] >= 0) & (iterates[-1] <= 1))


def test_value_iteration_errors():
    with pytest.raises(DomainError):
        value_iteration(loop_chain(0.5), Return(), 1.5)
    with pytest.raises(NotConverged):
        value_iteration(loop_chain(0.999), parse_property("F goal"), 0.999999, max_iter=3)


# -- Lipschitz constants and bounds ------------------------------------------------

def test_pairwise_tv_max():
    assert pairwise_tv_max([[1, 0], [0, 1], [0.5, 0.5]]) == pytest.approx(1.0)


def test_lipschitz_constants_on_two_state_mdp():
    P = np.array([[[0.5, 0.5]], [[0.5, 0.5]]])
    mdp = TabularMdp(P=P, R=[[0.1], [-0.3]], labels=[[0], [0]], ap=["x"])
    consts = lipschitz_constants(mdp, np.ones((2, 1)), 0.9)
    assert consts.reward == pytest.approx(0.4) and consts.transition == 0.0
    # identical successor rows: K_V = K_R beats R_max / (1 - gamma) = 3
    assert consts.value == pytest.approx(0.4) and consts.value_branch == "reward_lipschitz"


def test_bisim_bound_formulas():
    consts = LipschitzConstants(0.4, 0.5, 0.3, 0.5, 0.9, "reward_lipschitz")
    est = LocalLossEstimate(0.01, 0.02, 100, 0.05, 0.1)
    b = bisim_bound(est, consts, 0.9, 0.05)
    assert b.expected_bisim == pytest.approx((0.06 + 0.9 * 0.07) / 0.1)
    assert b.value_return == pytest.approx((0.01 + 0.9 * 0.5 * 0.02) / 0.1 + 0.05)
    assert b.label_distance == pytest.approx(0.9 * 0.07 / 0.1)
    with pytest.raises(DomainError):
        bisim_bound(est, consts, 1.0, 0.05)


def test_pairwise_bound_matrix_inf_for_zero_mass():
    m = pairwise_bound_matrix(0.1, np.array([0.5, 0.5, 0.0]))
    assert m[0, 1] == pytest.approx(0.4) and np.isinf(m[0, 2])


def test_exact_local_losses_vanish_for_exact_abstraction():
    from waemdp.env.builtin import Gridworld
    from waemdp.latent.extract import extract_explicit
    from waemdp.latent.tabular import exact_gridworld_abstraction

    model, ground, phi = exact_gridworld_abstraction(Gridworld())
    latent = TabularMdp(P=model.P, R=model.R, labels=np.zeros((len(model.P), 1)), ap=["x"])
    losses = exact_local_losses(ground, phi, latent, model.policy_rows)
    assert losses.loss_reward == pytest.approx(0.0, abs=1e-12)
    assert losses.loss_transition == pytest.approx(0.0, abs=1e-12)
    assert extract_explicit(model).mdp.n_states == 26


def test_miss_probability_upper_bounds_total_variation():
    rng = np.random.default_rng(21)
    ground = random_tabular(rng, 8, 2)
    phi = rng.integers(3, size=8)
    latent = random_tabular(rng, 3, 2)
    losses = exact_local_losses(ground, phi, latent, rng.dirichlet(np.ones(2), size=3))
    assert losses.loss_transition <= losses.miss_probability + 1e-12


def test_estimator_refuses_foreign_policy():
    from waemdp.env.builtin import Gridworld, make_policy
    from waemdp.env.sampling import StationarySampler
    from waemdp.errors import InsufficientSamples, PolicyMismatch
    from waemdp.latent.execute import LatentPolicy
    from waemdp.latent.tabular import exact_gridworld_abstraction

    grid = Gridworld()
    model, ground, phi = exact_gridworld_abstraction(grid)
    sampler = StationarySampler(grid, make_policy("scripted", grid), np.random.default_rng(0))
    with pytest.raises(PolicyMismatch):
        estimate_local_losses(model, sampler, 0.1, 0.1)
    sampler.policy = LatentPolicy(model, sampler.mdp)
    with pytest.raises(InsufficientSamples):
        estimate_local_losses(model, sampler, 0.1, 0.1, n_samples=10)
    est = estimate_local_losses(model, sampler, 0.1, 0.1)
    assert est.samples_used == required_samples(0.1, 0.1)
    assert est.loss_reward == pytest.approx(0.0, abs=1e-12)
    # an exact but stochastic model still misses single draws: compare with the exact miss probability
    latent = TabularMdp(P=model.P, R=model.R, labels=np.zeros((len(model.P), 1)), ap=["x"])
    exact = exact_local_losses(ground, phi, latent, model.policy_rows)
    assert abs(est.loss_transition - exact.miss_probability) <= 0.1


# -- factored vs autoregressive ----------------------------------------------------

def test_factored_fit_on_chain_row():
    means = fit_factored(chain_joint(), 3)
    np.testing.assert_allclose(means, [0.5, 0.5, 0.25], atol=1e-15)
    probs = factored_probs(means)
    codes = [0, 4, 2, 3]
    np.testing.assert_allclose(probs[codes], [3 / 16, 3 / 16, 3 / 16, 1 / 16], atol=1e-15)
    assert total_variation(probs, chain_joint()) > 0.5


def test_autoregressive_fit_is_exact():
    flow = fit_autoregressive(chain_joint(), 3, np.random.default_rng(0))
    assert total_variation(flow.probs_all(), chain_joint()) <= 1e-6
