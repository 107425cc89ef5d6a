"""Adam with bias correction and the step learning-rate schedule."""
import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from sciml_priors.utilities.exceptions import NonFiniteError

logger = logging.getLogger(__name__)


class AdamConfig(BaseModel):
    """Adam hyperparameters."""

    alpha: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)


@dataclass
class AdamState:
    """
    First and second moment accumulators mirroring the parameters.

    Attributes:
        config: Hyperparameters.
        m: First moments.
        v: Second moments.
        t: Number of updates applied.
    """

    config: AdamConfig = field(default_factory=AdamConfig)
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_parameters(cls, params: dict, config: AdamConfig) -> "AdamState":
        """Zero moments shaped like params."""
        return cls(
            config=config,
            m={name: np.zeros_like(array) for name, array in params.items()},
            v={name: np.zeros_like(array) for name, array in params.items()},
        )


def adam_update(
    state: AdamState, params: dict, grads: dict, alpha: float = None
) -> tuple[dict, AdamState]:
    """
    One Adam step:

        m ← β₁m + (1 − β₁)g,  v ← β₂v + (1 − β₂)g²,
        θ ← θ − α m̂ / (sqrt(v̂) + ε),  m̂ = m/(1 − β₁ᵗ),  v̂ = v/(1 − β₂ᵗ).

    Args:
        state: Moments before the step.
        params: Parameter arrays.
        grads: Gradient per parameter name.
        alpha: Learning rate overriding the configured one (for schedules).

    Returns:
        New parameters and new state; the inputs are not modified.

    Raises:
        NonFiniteError: A gradient contains NaN or infinity; the message names the parameter.
    """
    config = state.config
    rate = config.alpha if alpha is None else alpha
    step = state.t + 1
    correction1 = 1.0 - config.beta1**step
    correction2 = 1.0 - config.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            logger.error("Non-finite gradient for parameter %s", name)
            raise NonFiniteError(f"adam_update: non-finite gradient for parameter '{name}'")
        m = config.beta1 * state.m.get(name, 0.0) + (1.0 - config.beta1) * grad
        v = config.beta2 * state.v.get(name, 0.0) + (1.0 - config.beta2) * grad**2
        new_params[name] = value - rate * (m / correction1) / (
            np.sqrt(v / correction2) + config.epsilon
        )
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(config=config, m=new_m, v=new_v, t=step)


class LrSchedule(BaseModel):
    """Learning rate base·gamma^(epoch // step_size)."""

    base_rate: float = Field(gt=0.0)
    step_size: int = Field(default=10, ge=1)
    gamma: float = Field(default=1.0, gt=0.0, le=1.0)

    def rate(self, epoch: int) -> float:
        """Rate in effect during the zero-based epoch."""
        return self.base_rate * self.gamma ** (epoch // self.step_size)
