from waemdp.latent.execute import LatentPolicy, latent_flow_execute, run_episodes
from waemdp.latent.extract import LatentExtraction, extract_explicit
from waemdp.latent.model import ModelConfig, WaeMdp
from waemdp.latent.tabular import TabularLatentModel, exact_gridworld_abstraction

__all__ = [
    "LatentExtraction", "LatentPolicy", "ModelConfig", "TabularLatentModel", "WaeMdp",
    "exact_gridworld_abstraction", "extract_explicit", "latent_flow_execute", "run_episodes",
]
