from waemdp.env.builtin import CliffWalk, Gridworld, PointMass2D, make_env, make_policy
from waemdp.env.mdp import GroundMdp, TabularEnv, TabularMdp, TransitionSample, step
from waemdp.env.policies import Policy, ScriptedPolicy, TabularPolicy, UniformPolicy
from waemdp.env.sampling import ReplayStore, StationarySampler, sample_stationary, stationary_distribution
from waemdp.env.spaces import Box, Discrete
from waemdp.env.wrappers import (
    InitialDistributionWrap, ResetAugmented, RewardScaled, initial_distribution_wrap,
)

__all__ = [
    "Box", "CliffWalk", "Discrete", "Gridworld", "GroundMdp", "InitialDistributionWrap",
    "PointMass2D", "Policy", "ReplayStore", "ResetAugmented", "RewardScaled", "ScriptedPolicy",
    "StationarySampler", "TabularEnv", "TabularMdp", "TabularPolicy", "TransitionSample",
    "UniformPolicy", "initial_distribution_wrap", "make_env", "make_policy", "sample_stationary",
    "stationary_distribution", "step",
]
