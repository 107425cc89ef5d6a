"""
RoeNet: a Roe-type conservative stepper whose interface factors L (N_h x N_c) and Λ (N_h)
come from two ResBlock networks of the neighbouring states.

The interface flux is

    G = ½ L⁺ diag(Λ + |Λ|) L u_left + ½ L⁺ diag(Λ − |Λ|) L u_right,   L⁺ = (LᵀL)⁻¹ Lᵀ,

and every node is updated by the difference of its two interface fluxes, so the sum of each
component over a periodic grid is kept exactly whatever the networks output.
"""
import logging
from dataclasses import dataclass

import numpy as np

from sciml_priors.components.hyperbolic.grid import GridField1D, interface_indices
from sciml_priors.components.hyperbolic.roe import conservative_update
from sciml_priors.components.integrate.rollout import step_count
from sciml_priors.components.numkit.layers import Parameters, init_resnet, resnet_forward
from sciml_priors.components.numkit.tape import (
    absolute,
    concat,
    inverse,
    matmul,
    reshape,
    shape_of,
    take,
    transpose,
)
from sciml_priors.utilities.exceptions import ShapeMismatchError, SingularMatrixError

logger = logging.getLogger(__name__)

HEAD_STD = 1e-2


@dataclass(frozen=True)
class RoeNetModel:
    """
    Layout of the two factor networks.

    Attributes:
        components: N_c, conserved quantities per node.
        hidden: N_h, rows of L.
        blocks: ResBlocks per network.
        width: ResBlock width; defaults to max(64, 4 N_c).
        prefix: Parameter prefix.
    """

    components: int
    hidden: int
    blocks: int = 3
    width: int = 0
    prefix: str = "roenet"

    def __post_init__(self):
        if self.components < 1 or self.hidden < self.components:
            raise ShapeMismatchError(
                f"RoeNetModel: need N_h >= N_c >= 1, got N_c={self.components} N_h={self.hidden}"
            )
        if not self.width:
            object.__setattr__(self, "width", max(64, 4 * self.components))

    @property
    def l_prefix(self) -> str:
        """Prefix of the L network."""
        return f"{self.prefix}.L"

    @property
    def lambda_prefix(self) -> str:
        """Prefix of the Λ network."""
        return f"{self.prefix}.Lambda"

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """
        Adds both networks. Heads start with small weights; the L head bias is the N_h x N_c
        identity so that LᵀL starts well conditioned.
        """
        n_in = 2 * self.components
        init_resnet(
            params,
            self.l_prefix,
            rng,
            n_in,
            self.hidden * self.components,
            self.width,
            self.blocks,
            head_std=HEAD_STD,
        )
        params[f"{self.l_prefix}.head.bias"] = np.eye(self.hidden, self.components).ravel()
        init_resnet(
            params,
            self.lambda_prefix,
            rng,
            n_in,
            self.hidden,
            self.width,
            self.blocks,
            head_std=HEAD_STD,
        )


def pseudoinverse(matrix):
    """
    L⁺ = (LᵀL)⁻¹ Lᵀ for L of shape (..., N_h, N_c).

    Raises:
        SingularMatrixError: LᵀL is singular or too badly conditioned.
    """
    shape = shape_of(matrix)
    if len(shape) < 2 or shape[-2] < shape[-1]:
        raise ShapeMismatchError(
            f"pseudoinverse: need (..., N_h, N_c) with N_h >= N_c, got {shape}"
        )
    return matmul(inverse(matmul(transpose(matrix), matrix)), transpose(matrix))


def roe_factors(model: RoeNetModel, params: Parameters, u_left, u_right) -> tuple:
    """
    (L, Λ) at interfaces with neighbour states of shape (..., N_c).

    Returns:
        L of shape (..., N_h, N_c) and Λ of shape (..., N_h).
    """
    features = concat([u_left, u_right], axis=-1)
    batch = tuple(shape_of(features)[:-1])
    flat_l = resnet_forward(params, model.l_prefix, features, model.blocks)
    factor_l = reshape(flat_l, batch + (model.hidden, model.components))
    eigen = resnet_forward(params, model.lambda_prefix, features, model.blocks)
    return factor_l, eigen


def roenet_flux(model: RoeNetModel, params: Parameters, u_left, u_right):
    """Interface flux G of shape (..., N_c)."""
    factor_l, eigen = roe_factors(model, params, u_left, u_right)
    batch = tuple(shape_of(u_left)[:-1])
    column = batch + (model.components, 1)
    hidden_column = batch + (model.hidden, 1)
    magnitude = absolute(eigen)
    upwind_left = reshape((eigen + magnitude) * 0.5, hidden_column)
    upwind_right = reshape((eigen - magnitude) * 0.5, hidden_column)
    projected = upwind_left * matmul(factor_l, reshape(u_left, column)) + upwind_right * matmul(
        factor_l, reshape(u_right, column)
    )
    return reshape(matmul(pseudoinverse(factor_l), projected), batch + (model.components,))


def roenet_step(model: RoeNetModel, params: Parameters, field: GridField1D, dt: float):
    """
    One RoeNet step. Differentiable with respect to params and the field values.

    Raises:
        ShapeMismatchError: The field does not have N_c components.
        SingularMatrixError: LᵀL is singular at some interface.
    """
    if field.components != model.components:
        raise ShapeMismatchError(
            f"roenet_step: field has {field.components} components, model {model.components}"
        )
    left, right = interface_indices(field.nodes, field.bc)
    u_left = take(field.u, left, axis=-2)
    u_right = take(field.u, right, axis=-2)
    try:
        flux = roenet_flux(model, params, u_left, u_right)
    except SingularMatrixError:
        logger.error("Singular Roe factor at t=%s", field.t)
        raise
    return conservative_update(field, flux, dt)


def roenet_rollout(
    model: RoeNetModel, params: Parameters, field: GridField1D, t_span: float, dt: float
) -> GridField1D:
    """floor(t_span/dt) composed RoeNet steps."""
    steps = step_count(0.0, t_span, dt)
    for _ in range(steps):
        field = roenet_step(model, params, field, dt)
    logger.debug("RoeNet rollout of %s steps to t=%s", steps, field.t)
    return field
