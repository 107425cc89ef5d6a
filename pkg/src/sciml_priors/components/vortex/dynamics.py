"""
Learned vortex dynamics: particle velocities from a pair-interaction network θ₁ summed over the
other particles plus a local-effect network θ₂ of the local vorticity and the position,

    v_i = Σ_{j≠i} A_θ₁(X_i − X_j, |X_i − X_j|, Γ_j) + A_θ₂(ω_i, X_i).
"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from sciml_priors.components.hamiltonian.pairwise import incidence_matrices, ordered_pairs
from sciml_priors.components.integrate.steppers import rk4_step
from sciml_priors.components.numkit.layers import Parameters, init_resnet, resnet_forward
from sciml_priors.components.numkit.tape import (
    concat,
    matmul,
    reduce_sum,
    reshape,
    shape_of,
    sqrt,
    take,
)
from sciml_priors.components.vortex.system import VortexSystem, minimum_image
from sciml_priors.utilities.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DynamicsNetParams:
    """Layout of θ₁ (4 inputs) and θ₂ (3 inputs), each a ResBlock chain with a 2-vector head."""

    width: int = 64
    blocks: int = 5
    prefix: str = "dynamics"

    @property
    def pair_prefix(self) -> str:
        """Prefix of θ₁."""
        return f"{self.prefix}.pair"

    @property
    def local_prefix(self) -> str:
        """Prefix of θ₂."""
        return f"{self.prefix}.local"

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """Adds both networks with Xavier weights and zero biases."""
        init_resnet(params, self.pair_prefix, rng, 4, 2, self.width, self.blocks)
        init_resnet(params, self.local_prefix, rng, 3, 2, self.width, self.blocks)


def pair_features(positions, gamma, period):
    """
    (X_i − X_j, |X_i − X_j|, Γ_j) for every ordered pair (i, j), shape (..., N(N−1), 4).
    """
    count = shape_of(positions)[-2]
    target, source = ordered_pairs(count)
    diff = minimum_image(
        take(positions, target, axis=-2) - take(positions, source, axis=-2), period
    )
    dist = sqrt(reduce_sum(diff * diff, axis=-1, keepdims=True))
    strengths = take(gamma, source, axis=-1)
    return concat([diff, dist, reshape(strengths, tuple(shape_of(strengths)) + (1,))], axis=-1)


def dynamics_net_velocity(
    layout: DynamicsNetParams,
    params: Parameters,
    system: VortexSystem,
    local_vorticity: Any,
    mask: Any = None,
):
    """
    Velocities of shape (..., N, 2).

    Args:
        layout: Network layout.
        params: Parameter arrays or TapeNode variables.
        system: Particles; positions may be TapeNodes.
        local_vorticity: Per-particle vorticity of shape (..., N).
        mask: Optional 0/1 weights of shape (..., N); padding particles with weight 0 exert no
            pair influence on the others.
    """
    positions, gamma = system.positions, system.gamma
    count = system.count
    if tuple(shape_of(local_vorticity)[-1:]) != (count,):
        raise ShapeMismatchError(
            f"dynamics_net_velocity: local vorticity {shape_of(local_vorticity)} "
            f"for {count} particles"
        )
    vorticity = reshape(local_vorticity, tuple(shape_of(local_vorticity)) + (1,))
    local = resnet_forward(
        params, layout.local_prefix, concat([vorticity, positions], axis=-1), layout.blocks
    )
    if count < 2:
        return local
    pair = resnet_forward(
        params, layout.pair_prefix, pair_features(positions, gamma, system.period), layout.blocks
    )
    if mask is not None:
        _, source = ordered_pairs(count)
        weights = np.take(np.asarray(mask, dtype=np.float64), source, axis=-1)
        pair = pair * weights[..., None]
    as_target, _ = incidence_matrices(count)
    return matmul(as_target, pair) + local


def nvm_step(
    layout: DynamicsNetParams,
    params: Parameters,
    system: VortexSystem,
    local_vorticity: Any,
    dt: float,
    mask: Any = None,
) -> VortexSystem:
    """
    One RK4 step of dX/dt = dynamics_net_velocity; circulations and the local vorticity are held
    over the step.
    """

    def field(_t, positions):
        return dynamics_net_velocity(
            layout, params, replace(system, positions=positions), local_vorticity, mask
        )

    return system.moved(rk4_step(field, system.positions, dt))


def nvm_rollout(
    layout: DynamicsNetParams,
    params: Parameters,
    system: VortexSystem,
    dt: float,
    steps: int,
    vorticity_of: Callable[[VortexSystem], Any],
) -> list[VortexSystem]:
    """Every state of `steps` NVM steps; the local vorticity is re-sampled before each step."""
    states = [system]
    for _ in range(steps):
        current = states[-1]
        states.append(nvm_step(layout, params, current, vorticity_of(current), dt))
    return states


def periodic_difference(predicted, target, period):
    """predicted − target folded onto the nearest periodic image."""
    return minimum_image(predicted - target, period)
