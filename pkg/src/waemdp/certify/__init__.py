from waemdp.certify.bounds import (
    BisimBoundReport, LipschitzConstants, bisim_bound, exact_local_losses, lipschitz_constants,
)
from waemdp.certify.factored import fit_autoregressive, fit_factored, total_variation
from waemdp.certify.pac import (
    LocalLossEstimate, estimate_local_losses, local_losses_from_samples, required_samples, required_samples_value,
)
from waemdp.certify.properties import ConstrainedReach, EventuallyReach, NextReach, Return, parse_property
from waemdp.certify.report import CertificationReport, certify
from waemdp.certify.vi import value_iteration

__all__ = [
    "BisimBoundReport", "CertificationReport", "ConstrainedReach", "EventuallyReach", "LipschitzConstants", "LocalLossEstimate",
    "NextReach", "Return", "bisim_bound", "certify", "estimate_local_losses", "exact_local_losses", "fit_autoregressive",
    "fit_factored", "lipschitz_constants", "local_losses_from_samples", "parse_property", "required_samples",
    "required_samples_value", "total_variation", "value_iteration",
]
