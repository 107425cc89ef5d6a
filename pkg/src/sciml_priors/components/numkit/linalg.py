"""Small dense linear algebra used by the differentiable primitives."""
import logging

import numpy as np

from sciml_priors.utilities.exceptions import ShapeMismatchError, SingularMatrixError

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def invert_small_matrix(matrix: np.ndarray) -> np.ndarray:
    """
    Inverts one square matrix, or a stack of them along the leading axes, by Gauss-Jordan
    elimination with partial pivoting.

    The condition number is estimated as the ratio of the largest to the smallest pivot
    magnitude. Matrices with a zero pivot or an estimate above CONDITION_LIMIT are refused.

    Args:
        matrix: Array of shape (..., n, n).

    Returns:
        The inverse with the same shape as the input.

    Raises:
        ShapeMismatchError: The trailing two axes are not square.
        SingularMatrixError: A matrix of the stack is singular or too ill-conditioned.
    """
    work_matrix = np.asarray(matrix, dtype=np.float64)
    if work_matrix.ndim < 2 or work_matrix.shape[-1] != work_matrix.shape[-2]:
        raise ShapeMismatchError(
            f"inverse: expected square matrices, got shape {work_matrix.shape}"
        )

    size = work_matrix.shape[-1]
    stacked = work_matrix.reshape(-1, size, size)
    count = stacked.shape[0]
    augmented = np.concatenate(
        [stacked, np.broadcast_to(np.eye(size), stacked.shape)], axis=-1
    ).copy()
    rows = np.arange(count)
    pivots = np.empty((count, size))

    for column in range(size):
        pivot_rows = column + np.argmax(np.abs(augmented[:, column:, column]), axis=1)
        current = augmented[rows, column].copy()
        augmented[rows, column] = augmented[rows, pivot_rows]
        augmented[rows, pivot_rows] = current

        pivot = augmented[:, column, column].copy()
        pivots[:, column] = pivot
        if np.any(pivot == 0.0):
            logger.error("Zero pivot in column %s while inverting %s matrices", column, count)
            raise SingularMatrixError(
                f"inverse: matrix is singular (zero pivot in column {column})"
            )

        augmented[:, column] /= pivot[:, None]
        for row in range(size):
            if row != column:
                augmented[:, row] -= augmented[:, row, column][:, None] * augmented[:, column]

    magnitudes = np.abs(pivots)
    condition = magnitudes.max(axis=1) / magnitudes.min(axis=1)
    if np.any(condition > CONDITION_LIMIT):
        logger.error("Condition estimate %s exceeds %s", condition.max(), CONDITION_LIMIT)
        raise SingularMatrixError(
            f"inverse: condition estimate {condition.max():.3e} exceeds {CONDITION_LIMIT:.0e}"
        )

    return augmented[:, :, size:].reshape(work_matrix.shape)
