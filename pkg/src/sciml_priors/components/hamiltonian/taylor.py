"""Symmetric Taylor fields: vector fields with a symmetric Jacobian by construction.

    T(v) = Σ_{i=1..M} A_iᵀ f_i(A_i v) − B_iᵀ f_i(B_i v) + b,    f_i(x) = x^i / i!

Their Jacobian Σ A_iᵀ diag(f_{i-1}(A_i v)) A_i − B_iᵀ diag(f_{i-1}(B_i v)) B_i is symmetric,
so a field of this form is the gradient of a scalar potential.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from sciml_priors.components.numkit.layers import Parameters
from sciml_priors.components.numkit.tape import affine, monomial, shape_of, transpose
from sciml_priors.utilities.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SymmetricTaylorParams:
    """
    Layout of one symmetric Taylor field.

    Attributes:
        dimension: N, the size of input and output.
        terms: M, the number of Taylor terms.
        hidden: N_h, the rows of each A_i and B_i.
        prefix: Parameter name prefix.
    """

    dimension: int
    terms: int = 8
    hidden: int = 16
    prefix: str = "taylor"

    def weight_names(self, index: int) -> tuple[str, str]:
        """Names of A_i and B_i for term i (1-based)."""
        return f"{self.prefix}.A{index}", f"{self.prefix}.B{index}"

    @property
    def bias_name(self) -> str:
        """Name of the bias b."""
        return f"{self.prefix}.bias"

    def initialise(self, params: dict, rng: np.random.Generator) -> None:
        """
        Adds A_i, B_i ~ Normal(0, sqrt(2 / (N·N_h·(i+1)))) and a zero bias to params.
        """
        for index in range(1, self.terms + 1):
            std = math.sqrt(2.0 / (self.dimension * self.hidden * (index + 1)))
            name_a, name_b = self.weight_names(index)
            params[name_a] = rng.normal(0.0, std, size=(self.hidden, self.dimension))
            params[name_b] = rng.normal(0.0, std, size=(self.hidden, self.dimension))
        params[self.bias_name] = np.zeros(self.dimension)


def taylor_field_eval(layout: SymmetricTaylorParams, params: Parameters, v):
    """
    Evaluates the symmetric Taylor field.

    Args:
        layout: Field layout.
        params: Parameter arrays or TapeNode variables.
        v: Input of shape (..., N).

    Returns:
        Output of shape (..., N), differentiable when params or v are graph nodes.

    Raises:
        ShapeMismatchError: The input's last axis is not N.
    """
    shape = shape_of(v)
    if not shape or shape[-1] != layout.dimension:
        raise ShapeMismatchError(
            f"taylor_field_eval: expected last axis {layout.dimension}, got shape {shape}"
        )
    output = params[layout.bias_name]
    for index in range(1, layout.terms + 1):
        name_a, name_b = layout.weight_names(index)
        weight_a, weight_b = params[name_a], params[name_b]
        positive = affine(monomial(affine(v, weight_a), index), transpose(weight_a))
        negative = affine(monomial(affine(v, weight_b), index), transpose(weight_b))
        output = output + positive - negative
    return output


def taylor_field_jacobian(
    layout: SymmetricTaylorParams, params: dict[str, np.ndarray], v: np.ndarray
) -> np.ndarray:
    """
    Analytic Jacobian Σ A_iᵀ Λ_i^A A_i − B_iᵀ Λ_i^B B_i of the field at v.

    Args:
        layout: Field layout.
        params: Parameter arrays.
        v: Input of shape (..., N).

    Returns:
        Array of shape (..., N, N).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != layout.dimension:
        raise ShapeMismatchError(
            f"taylor_field_jacobian: expected last axis {layout.dimension}, got shape {v.shape}"
        )
    jacobian = np.zeros(v.shape + (layout.dimension,))
    for index in range(1, layout.terms + 1):
        for sign, name in zip((1.0, -1.0), layout.weight_names(index)):
            weight = np.asarray(params[name])
            slope = (v @ weight.T) ** (index - 1) / math.factorial(index - 1)
            jacobian += sign * np.einsum("hi,...h,hj->...ij", weight, slope, weight)
    return jacobian
