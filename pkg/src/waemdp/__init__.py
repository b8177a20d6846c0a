"""Discrete latent-space models of small MDPs, learned with a Wasserstein
auto-encoder objective and certified with PAC local losses and value iteration."""

__version__ = "0.1.0"
