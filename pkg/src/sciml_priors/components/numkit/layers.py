"""Parameter initialisers and the layer stacks shared by every model family.

Parameters are plain dictionaries from name to array, kept in declaration order. The same
dictionary can be swapped for one of TapeNode variables to build a differentiable pass.
"""
import logging
from typing import Callable, Union

import numpy as np

from sciml_priors.components.numkit.tape import (
    TapeNode,
    affine,
    matmul,
    relu,
    shape_of,
    sigmoid,
    variable,
)

logger = logging.getLogger(__name__)

Parameters = dict[str, Union[np.ndarray, TapeNode]]

ACTIVATIONS: dict[str, Callable] = {"sigmoid": sigmoid, "relu": relu}


def xavier_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Glorot uniform weights of shape (fan_out, fan_in)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def scaled_normal(rng: np.random.Generator, shape: tuple, std: float) -> np.ndarray:
    """Normal(0, std) weights."""
    return rng.normal(0.0, std, size=shape)


def as_variables(params: dict[str, np.ndarray]) -> dict[str, TapeNode]:
    """Wraps every parameter array in a trainable leaf named after its key."""
    return {name: variable(array, name) for name, array in params.items()}


def count_parameters(params: dict[str, np.ndarray]) -> int:
    """Total number of scalar parameters."""
    return int(sum(np.size(array) for array in params.values()))


def init_affine(
    params: dict,
    prefix: str,
    rng: np.random.Generator,
    n_in: int,
    n_out: int,
    std: Union[float, None] = None,
) -> None:
    """Adds `<prefix>.weight` (n_out, n_in) and a zero `<prefix>.bias`.

    Weights are Xavier-uniform unless a normal std is given; std=0 gives zero weights.
    """
    if std is None:
        weight = xavier_uniform(rng, n_out, n_in)
    elif std == 0.0:
        weight = np.zeros((n_out, n_in))
    else:
        weight = scaled_normal(rng, (n_out, n_in), std)
    params[f"{prefix}.weight"] = weight
    params[f"{prefix}.bias"] = np.zeros(n_out)


def apply_affine(params: Parameters, prefix: str, x):
    """Applies the affine layer stored under prefix."""
    return affine(x, params[f"{prefix}.weight"], params[f"{prefix}.bias"])


def init_mlp(params: dict, prefix: str, rng: np.random.Generator, sizes: list[int]) -> None:
    """Adds len(sizes) - 1 Xavier-initialised affine layers `<prefix>.<k>`."""
    for index, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        init_affine(params, f"{prefix}.{index}", rng, n_in, n_out)


def mlp_forward(params: Parameters, prefix: str, x, depth: int, activation: str = "sigmoid"):
    """Affine layers with an activation between them and a linear last layer."""
    act = ACTIVATIONS[activation]
    hidden = x
    for index in range(depth - 1):
        hidden = act(apply_affine(params, f"{prefix}.{index}", hidden))
    return apply_affine(params, f"{prefix}.{depth - 1}", hidden)


def mlp_input_gradient(params: Parameters, prefix: str, x, depth: int) -> tuple:
    """
    Evaluates a scalar sigmoid MLP together with its gradient with respect to the input.

    The gradient is assembled from first-order primitives (the adjoint recursion
    g_k = (g_{k+1} ⊙ σ'(z_k)) W_k with σ' = σ(1 − σ)), so the result is itself differentiable
    with respect to the parameters by an ordinary backward pass.

    Args:
        params: Parameters of an MLP whose last layer has one output.
        prefix: Parameter prefix.
        x: Input of shape (..., n_in) with at least one leading batch axis.
        depth: Number of affine layers.

    Returns:
        (H, dH/dx) with shapes (..., 1) and (..., n_in).
    """
    activations = []
    hidden = x
    for index in range(depth - 1):
        hidden = sigmoid(apply_affine(params, f"{prefix}.{index}", hidden))
        activations.append(hidden)
    energy = apply_affine(params, f"{prefix}.{depth - 1}", hidden)

    grad = matmul(np.ones(shape_of(energy)), params[f"{prefix}.{depth - 1}.weight"])
    for index in range(depth - 2, -1, -1):
        activation = activations[index]
        grad = matmul(grad * activation * (1.0 - activation), params[f"{prefix}.{index}.weight"])
    return energy, grad


def init_resnet(
    params: dict,
    prefix: str,
    rng: np.random.Generator,
    n_in: int,
    n_out: int,
    width: int,
    blocks: int,
    head_std: Union[float, None] = None,
) -> None:
    """
    Adds a ResBlock chain: an input affine map to `width`, `blocks` residual blocks
    h + W2 relu(W1 h + b1) + b2 and an affine head to n_out.
    """
    init_affine(params, f"{prefix}.stem", rng, n_in, width)
    for block in range(blocks):
        init_affine(params, f"{prefix}.block{block}.0", rng, width, width)
        init_affine(params, f"{prefix}.block{block}.1", rng, width, width)
    init_affine(params, f"{prefix}.head", rng, width, n_out, std=head_std)


def resnet_forward(params: Parameters, prefix: str, x, blocks: int):
    """Evaluates the ResBlock chain stored under prefix."""
    hidden = apply_affine(params, f"{prefix}.stem", x)
    for block in range(blocks):
        residual = relu(apply_affine(params, f"{prefix}.block{block}.0", hidden))
        hidden = hidden + apply_affine(params, f"{prefix}.block{block}.1", residual)
    return apply_affine(params, f"{prefix}.head", hidden)
