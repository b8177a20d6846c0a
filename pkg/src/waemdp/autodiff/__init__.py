from waemdp.autodiff.tensor import Tensor, as_tensor, backward, enable_grad, grad, no_grad
from waemdp.autodiff.nn import Made, Mlp, Module
from waemdp.autodiff.optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "Made", "Mlp", "Module", "Tensor",
    "adam_step", "as_tensor", "backward", "enable_grad", "grad", "no_grad",
]
