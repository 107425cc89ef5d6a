"""Central-difference oracles for gradients and Jacobians."""
import logging
from typing import Callable

import numpy as np

from sciml_priors.components.numkit.tape import value_of
from sciml_priors.utilities.exceptions import NonFiniteError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-6


def _scalar(value) -> float:
    result = float(np.asarray(value_of(value)).reshape(()))
    if not np.isfinite(result):
        logger.error("Non-finite function value during finite differencing: %s", result)
        raise NonFiniteError("finite_difference_grad: function returned a non-finite value")
    return result


def finite_difference_grad(
    func: Callable[[np.ndarray], float], x: np.ndarray, h: float = DEFAULT_STEP
) -> np.ndarray:
    """
    Estimates the gradient of a scalar function by central differences.

    Args:
        func: Function of an array returning a scalar (float, 0-d array or evaluated TapeNode).
        x: Point of evaluation.
        h: Step per coordinate.

    Returns:
        Array of the same shape as x.

    Raises:
        ValueError: h is not positive.
        NonFiniteError: func returned NaN or infinity.
    """
    if h <= 0:
        raise ValueError(f"Finite difference step must be positive, got {h}")
    point = np.array(x, dtype=np.float64)
    grad = np.zeros_like(point)
    for index in range(point.size):
        shifted = point.copy()
        shifted.flat[index] += h
        upper = _scalar(func(shifted))
        shifted.flat[index] -= 2.0 * h
        lower = _scalar(func(shifted))
        grad.flat[index] = (upper - lower) / (2.0 * h)
    return grad


def finite_difference_jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = DEFAULT_STEP
) -> np.ndarray:
    """
    Estimates the Jacobian of a vector map of a flat vector by central differences.

    Returns:
        Matrix J with J[i, j] = d func(x)[i] / d x[j].
    """
    if h <= 0:
        raise ValueError(f"Finite difference step must be positive, got {h}")
    point = np.array(x, dtype=np.float64).ravel()
    columns = []
    for index in range(point.size):
        shifted = point.copy()
        shifted[index] += h
        upper = np.asarray(value_of(func(shifted)), dtype=np.float64).ravel()
        shifted[index] -= 2.0 * h
        lower = np.asarray(value_of(func(shifted)), dtype=np.float64).ravel()
        column = (upper - lower) / (2.0 * h)
        if not np.all(np.isfinite(column)):
            raise NonFiniteError("finite_difference_jacobian: map returned non-finite values")
        columns.append(column)
    return np.stack(columns, axis=1)


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """‖actual − expected‖ / max(‖actual‖, ‖expected‖, 1)."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(np.linalg.norm(actual), np.linalg.norm(expected), 1.0)
    return float(np.linalg.norm(actual - expected) / scale)
