from waemdp.wae.dual import DualEstimate, discrete_metric_embedding, dual_wasserstein
from waemdp.wae.objective import (
    Critics, gradient_penalty, latent_metric, latent_metric_constants, raw_distance, reconstruction_loss,
    steady_state_regularizer, transition_regularizer,
)
from waemdp.wae.train import METRIC_COLUMNS, Trainer, TrainingConfig, build_model, train

__all__ = [
    "Critics", "DualEstimate", "METRIC_COLUMNS", "Trainer", "TrainingConfig", "build_model", "discrete_metric_embedding", "dual_wasserstein", "gradient_penalty",
    "latent_metric", "latent_metric_constants", "raw_distance", "reconstruction_loss",
    "steady_state_regularizer", "train", "transition_regularizer",
]
