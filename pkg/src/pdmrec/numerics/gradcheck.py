"""Central finite-difference check of analytic gradients."""

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from pdmrec.errors import ConfigError
from pdmrec.numerics.autograd import Array, Tensor, backward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradCheckReport:
    """Relative error per parameter tensor."""

    errors: dict[str, float]

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tolerance: float = 1e-3) -> bool:
        return self.max_error < tolerance


def relative_error(analytic: Array, numeric: Array) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-12)."""
    num = float(np.linalg.norm(analytic - numeric))
    den = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return num / max(den, 1e-12)


def numeric_gradient(
    loss_fn: Callable[[], Tensor], param: Tensor, step: float = 1e-4
) -> Array:
    """Central differences of `loss_fn` w.r.t. every element of `param`."""
    grad = np.zeros_like(param.data)
    for idx in np.ndindex(param.shape):
        original = param.data[idx]
        param.data[idx] = original + step
        plus = loss_fn().item()
        param.data[idx] = original - step
        minus = loss_fn().item()
        param.data[idx] = original
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = 1e-4,
    names: list[str] | None = None,
) -> GradCheckReport:
    """Compare backward() against central differences for each parameter.

    `loss_fn` must be deterministic: any randomness inside it has to be
    re-seeded on every call.
    """
    for name, p in params.items():
        if p.dtype != np.float64:
            raise ConfigError(f"gradient check needs float64 parameters ({name} is {p.dtype})")
        p.zero_grad()
    analytic = backward(loss_fn(), params)

    errors: dict[str, float] = {}
    for name in names or list(params):
        numeric = numeric_gradient(loss_fn, params[name], step)
        errors[name] = relative_error(analytic[name], numeric)
        logger.debug("gradcheck %s: relative error %.3e", name, errors[name])
    return GradCheckReport(errors=errors)
