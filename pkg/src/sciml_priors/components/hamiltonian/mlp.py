"""Multilayer networks over phase space: the learned Hamiltonian H_θ(q, p), the unconstrained
vector-field baseline and the asymmetric negative-control field."""
import logging
from dataclasses import dataclass

import numpy as np

from sciml_priors.components.numkit.layers import (
    Parameters,
    init_mlp,
    mlp_forward,
    mlp_input_gradient,
)
from sciml_priors.components.numkit.tape import concat, shape_of, take
from sciml_priors.utilities.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)


def _phase_input(q, p, dimension: int, where: str):
    for name, operand in (("q", q), ("p", p)):
        shape = shape_of(operand)
        if len(shape) < 2 or shape[-1] != dimension:
            raise ShapeMismatchError(
                f"{where}: {name} must have shape (batch, {dimension}), got {shape}"
            )
    return concat([q, p], axis=-1)


@dataclass(frozen=True)
class MlpHamiltonianParams:
    """
    Layout of H_θ: `layers` affine maps of width `width` with logistic activations on all but
    the last, from (q, p) to a scalar.
    """

    dimension: int
    width: int = 64
    layers: int = 6
    prefix: str = "hamiltonian"

    def sizes(self) -> list[int]:
        """Layer sizes from input to output."""
        return [2 * self.dimension] + [self.width] * (self.layers - 1) + [1]

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """Adds Xavier weights and zero biases to params."""
        init_mlp(params, self.prefix, rng, self.sizes())


def mlp_hamiltonian_eval(layout: MlpHamiltonianParams, params: Parameters, q, p):
    """H_θ(q, p) of shape (batch, 1)."""
    features = _phase_input(q, p, layout.dimension, "mlp_hamiltonian_eval")
    return mlp_forward(params, layout.prefix, features, layout.layers, "sigmoid")


def mlp_hamiltonian_grads(layout: MlpHamiltonianParams, params: Parameters, q, p) -> tuple:
    """
    (dH_θ/dq, dH_θ/dp), each of shape (batch, N), assembled as a differentiable graph.
    """
    features = _phase_input(q, p, layout.dimension, "mlp_hamiltonian_grads")
    _, grad = mlp_input_gradient(params, layout.prefix, features, layout.layers)
    n = layout.dimension
    return take(grad, np.arange(n), axis=-1), take(grad, np.arange(n, 2 * n), axis=-1)


@dataclass(frozen=True)
class VectorFieldParams:
    """
    Layout of an unconstrained network from `n_in` to `n_out` features.

    Used with n_in = n_out = 2N as the RK4 field baseline learning (dq/dt, dp/dt) jointly, and
    with two layers and n_in = n_out = N as the asymmetric negative control for symplecticity.
    """

    n_in: int
    n_out: int
    width: int = 64
    layers: int = 3
    activation: str = "sigmoid"
    prefix: str = "field"

    def sizes(self) -> list[int]:
        """Layer sizes from input to output."""
        return [self.n_in] + [self.width] * (self.layers - 1) + [self.n_out]

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """Adds Xavier weights and zero biases to params."""
        init_mlp(params, self.prefix, rng, self.sizes())


def vector_field_eval(layout: VectorFieldParams, params: Parameters, v):
    """Unconstrained network output of shape (..., n_out)."""
    shape = shape_of(v)
    if not shape or shape[-1] != layout.n_in:
        raise ShapeMismatchError(
            f"vector_field_eval: expected last axis {layout.n_in}, got {shape}"
        )
    return mlp_forward(params, layout.prefix, v, layout.layers, layout.activation)
