"""Adam optimizer with bias correction.

AIDEV-NOTE: Parameters are updated in place. Moment buffers are created
lazily with the parameter's shape and dtype, so a float64 model keeps
float64 optimizer state.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from pdmrec.errors import DimensionError
from pdmrec.numerics.autograd import Array, Tensor


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            step=self.step,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
        )


def adam_step(
    params: Mapping[str, Tensor], grads: Mapping[str, Array], state: AdamState
) -> AdamState:
    """Apply one Adam update to every parameter and advance the step counter."""
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step

    for name, param in params.items():
        g = grads[name]
        if g.shape != param.shape:
            raise DimensionError(
                f"gradient for {name} has shape {g.shape}, parameter has {param.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m, v = state.m[name], state.v[name]

        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        denom = np.sqrt(v / bc2) + state.eps
        param.data -= ((state.lr / bc1) * m / denom).astype(param.dtype)

    return state
