"""Prediction error metrics."""
import logging
from dataclasses import dataclass

import numpy as np

from sciml_priors.utilities.exceptions import ShapeMismatchError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpsP:
    """ε_p at every predicted time and its mean over the horizon."""

    per_step: np.ndarray
    mean: float


def metric_eps_p(predicted: np.ndarray, reference: np.ndarray) -> EpsP:
    """
    Phase-space L1 error at each time, averaged over test samples, then over time.

    Args:
        predicted: Trajectories of shape (samples, times, 2N) or (times, 2N).
        reference: Same shape.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise ShapeMismatchError(
            f"metric_eps_p: predicted {predicted.shape} vs reference {reference.shape}"
        )
    if predicted.ndim == 2:
        predicted, reference = predicted[None], reference[None]
    per_step = np.mean(np.sum(np.abs(predicted - reference), axis=-1), axis=0)
    return EpsP(per_step=per_step, mean=float(np.mean(per_step)))


def metric_eps_u(predicted: np.ndarray, reference: np.ndarray) -> float:
    """‖u_pred − u_ref‖₂ / ‖u_ref‖₂ over a whole velocity field."""
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise ShapeMismatchError(
            f"metric_eps_u: predicted {predicted.shape} vs reference {reference.shape}"
        )
    norm = float(np.linalg.norm(reference))
    if norm == 0.0:
        logger.error("metric_eps_u: reference field is identically zero")
        raise ValidationError("metric_eps_u: reference field is identically zero")
    return float(np.linalg.norm(predicted - reference)) / norm


def metric_eps_u_series(predicted: list, reference: list) -> np.ndarray:
    """ε_u at every time of two equally long sequences of velocity fields."""
    if len(predicted) != len(reference):
        raise ShapeMismatchError(
            f"metric_eps_u_series: {len(predicted)} predicted vs {len(reference)} reference fields"
        )
    return np.array([metric_eps_u(a, b) for a, b in zip(predicted, reference)])
