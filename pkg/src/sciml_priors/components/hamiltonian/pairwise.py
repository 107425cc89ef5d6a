"""Learned pairwise Hamiltonian of a point-vortex system,

    H_θ = Σ_{j≠k} Γ_j Γ_k Ĥ_θ(X_j, X_k),

with one shared pair network Ĥ_θ from the two positions to a scalar.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from sciml_priors.components.numkit.layers import (
    Parameters,
    init_mlp,
    mlp_forward,
    mlp_input_gradient,
)
from sciml_priors.components.numkit.tape import (
    concat,
    matmul,
    reduce_sum,
    reshape,
    shape_of,
    take,
    value_of,
)
from sciml_priors.utilities.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairwiseNetParams:
    """Layout of the pair network Ĥ_θ: (x_j, y_j, x_k, y_k) -> scalar."""

    width: int = 64
    layers: int = 4
    prefix: str = "pair"

    def sizes(self) -> list[int]:
        """Layer sizes from input to output."""
        return [4] + [self.width] * (self.layers - 1) + [1]

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """Adds Xavier weights and zero biases to params."""
        init_mlp(params, self.prefix, rng, self.sizes())


@lru_cache(maxsize=32)
def ordered_pairs(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (j, k) of all ordered pairs j ≠ k in lexicographic order."""
    first, second = np.nonzero(~np.eye(count, dtype=bool))
    return first, second


@lru_cache(maxsize=32)
def incidence_matrices(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices E with E[i, pair] = 1 when particle i is the first (second) member of the pair."""
    first, second = ordered_pairs(count)
    columns = np.arange(first.size)
    as_first = np.zeros((count, first.size))
    as_second = np.zeros((count, first.size))
    as_first[first, columns] = 1.0
    as_second[second, columns] = 1.0
    return as_first, as_second


def _check_system(gamma, positions, where: str) -> int:
    gamma_shape, position_shape = shape_of(gamma), shape_of(positions)
    if (
        len(position_shape) < 2
        or position_shape[-1] != 2
        or gamma_shape[-1:] != position_shape[-2:-1]
    ):
        raise ShapeMismatchError(f"{where}: strengths {gamma_shape} vs positions {position_shape}")
    return position_shape[-2]


def _pair_terms(gamma, positions, count: int):
    first, second = ordered_pairs(count)
    features = concat([take(positions, first, axis=-2), take(positions, second, axis=-2)], -1)
    weights = take(gamma, first, axis=-1) * take(gamma, second, axis=-1)
    return features, reshape(weights, tuple(shape_of(weights)) + (1,))


def canonical_order(gamma: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Particle permutation sorting by (x, y, Γ); identical for any input ordering."""
    gamma = np.asarray(value_of(gamma))
    positions = np.asarray(value_of(positions))
    if positions.ndim != 2:
        raise ShapeMismatchError("canonical_order: expects a single system of shape (N, 2)")
    return np.lexsort((gamma, positions[:, 1], positions[:, 0]))


def pairwise_vortex_net_eval(layout: PairwiseNetParams, params: Parameters, gamma, positions):
    """
    Σ_{j≠k} Γ_j Γ_k Ĥ_θ(X_j, X_k).

    A single system (positions of shape (N, 2)) is first put in canonical particle order,
    which makes the value exactly invariant under any permutation of the particles.

    Args:
        layout: Pair network layout.
        params: Parameter arrays or TapeNode variables.
        gamma: Circulations of shape (..., N).
        positions: Positions of shape (..., N, 2).

    Returns:
        Energy of shape (...,).
    """
    count = _check_system(gamma, positions, "pairwise_vortex_net_eval")
    if count < 2:
        return np.zeros(shape_of(gamma)[:-1])
    if len(shape_of(positions)) == 2:
        order = canonical_order(gamma, positions)
        gamma, positions = take(gamma, order, axis=-1), take(positions, order, axis=-2)
    features, weights = _pair_terms(gamma, positions, count)
    pair_energy = mlp_forward(params, layout.prefix, features, layout.layers, "sigmoid")
    return reduce_sum(weights * pair_energy, axis=(-2, -1))


def pairwise_vortex_net_grads(layout: PairwiseNetParams, params: Parameters, gamma, positions):
    """
    dH_θ/dX of shape (..., N, 2), assembled as a differentiable graph.

    Each ordered pair contributes Γ_j Γ_k ∂Ĥ/∂a to particle j and Γ_j Γ_k ∂Ĥ/∂b to particle k,
    where a and b are the first and second argument of Ĥ_θ.
    """
    count = _check_system(gamma, positions, "pairwise_vortex_net_grads")
    if count < 2:
        return np.zeros(shape_of(positions))
    features, weights = _pair_terms(gamma, positions, count)
    _, feature_grad = mlp_input_gradient(params, layout.prefix, features, layout.layers)
    weighted = weights * feature_grad
    as_first, as_second = incidence_matrices(count)
    return matmul(as_first, take(weighted, [0, 1], axis=-1)) + matmul(
        as_second, take(weighted, [2, 3], axis=-1)
    )
