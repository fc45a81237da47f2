"""Dense tensor primitives, reverse-mode gradients and the Adam optimizer."""

from pdmrec.numerics.autograd import Tensor, backward, is_grad_enabled, no_grad
from pdmrec.numerics.gradcheck import GradCheckReport, gradient_check
from pdmrec.numerics.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "GradCheckReport",
    "Tensor",
    "adam_step",
    "backward",
    "gradient_check",
    "is_grad_enabled",
    "no_grad",
]
