"""Training losses. L1, MSE and the parameter penalty work on arrays and graph nodes alike;
the classification losses are plain numpy."""
import logging

import numpy as np

from sciml_priors.components.numkit.tape import absolute, reduce_sum, shape_of

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


def _batch_size(shape: tuple) -> int:
    return shape[0] if len(shape) > 1 else 1


def loss_l1(pred, target, mask=None):
    """
    Σ|pred − target| averaged over the leading sample axis (a 1-d input is one sample).

    The subgradient at a tie is 0. An optional mask broadcastable to pred zeroes entries out.
    """
    residual = absolute(pred - target)
    if mask is not None:
        residual = residual * mask
    return reduce_sum(residual) * (1.0 / _batch_size(shape_of(pred)))


def loss_mse(pred, target):
    """Mean of (pred − target)² over all entries."""
    residual = pred - target
    return reduce_sum(residual * residual) * (1.0 / max(int(np.prod(shape_of(pred))), 1))


def parameter_penalty(params: dict, weight: float):
    """weight·Σ‖θ‖² over all parameters; 0 when weight is 0."""
    if weight == 0.0:
        return 0.0
    total = 0.0
    for value in params.values():
        total = total + reduce_sum(value * value)
    return total * weight


def loss_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """
    −Σ_c y_c ln ŷ_c averaged over samples, with one-hot labels on the last axis.
    Probabilities are floored at 1e-12.
    """
    probs = np.clip(np.asarray(probs, dtype=np.float64), PROBABILITY_FLOOR, 1.0)
    labels = np.asarray(labels, dtype=np.float64)
    per_sample = -np.sum(labels * np.log(probs), axis=-1)
    return float(np.mean(per_sample))


def loss_binary_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """−[y ln ŷ + (1 − y) ln(1 − ŷ)] averaged over entries."""
    probs = np.clip(
        np.asarray(probs, dtype=np.float64), PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR
    )
    labels = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs))))


def loss_focal(
    probs: np.ndarray, labels: np.ndarray, alpha: float = 0.25, gamma: float = 2.0
) -> float:
    """−α (1 − ŷ_t)^γ ln ŷ_t averaged over samples, ŷ_t the probability of the true class."""
    probs = np.clip(np.asarray(probs, dtype=np.float64), PROBABILITY_FLOOR, 1.0)
    labels = np.asarray(labels, dtype=np.float64)
    per_sample = -np.sum(labels * alpha * (1.0 - probs) ** gamma * np.log(probs), axis=-1)
    return float(np.mean(per_sample))
