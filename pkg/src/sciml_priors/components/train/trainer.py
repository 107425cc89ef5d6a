"""Mini-batch training loop shared by every model family."""
import logging
import math
import pathlib
from dataclasses import dataclass, field

import numpy as np

from sciml_priors.components.numkit.layers import as_variables, count_parameters
from sciml_priors.components.numkit.tape import backward_grad, value_of
from sciml_priors.components.train.datasets import PairDataset
from sciml_priors.components.train.models import Surrogate
from sciml_priors.components.train.optim import AdamConfig, AdamState, LrSchedule, adam_update
from sciml_priors.configuration.presets import TrainingSection
from sciml_priors.utilities.exceptions import (
    NonFiniteError,
    SingularMatrixError,
    TrainingDivergedError,
    ValidationError,
)
from sciml_priors.utilities.helperfunctions import sample_rng, write_csv

logger = logging.getLogger(__name__)

# Generator counters below the master seed
INIT_COUNTER = 0
SHUFFLE_COUNTER = 1 << 32

METRICS_HEADER = ("epoch", "loss_train", "loss_val", "lr")


@dataclass(frozen=True)
class EpochRecord:
    """Losses of one epoch; loss_val is NaN without a validation split."""

    epoch: int
    loss_train: float
    loss_val: float
    lr: float

    def row(self) -> tuple:
        """CSV row."""
        return (self.epoch, self.loss_train, self.loss_val, self.lr)


@dataclass
class TrainResult:
    """
    Outcome of train_model.

    Attributes:
        params: Final parameters.
        initial_params: Parameters before the first update.
        history: One record per completed epoch.
        optimizer: Adam moments after the last update.
    """

    params: dict[str, np.ndarray]
    initial_params: dict[str, np.ndarray]
    history: list[EpochRecord] = field(default_factory=list)
    optimizer: AdamState = None


def evaluate_loss(surrogate: Surrogate, params: dict, batch: dict, batch_size: int) -> float:
    """Sample-weighted mean loss over a split, evaluated in chunks without gradients."""
    count = len(next(iter(batch.values())))
    if count == 0:
        return math.nan
    total = 0.0
    for start in range(0, count, batch_size):
        chunk = {name: array[start : start + batch_size] for name, array in batch.items()}
        size = len(next(iter(chunk.values())))
        total += float(value_of(surrogate.loss(params, chunk))) * size
    return total / count


def _divergence(message: str, params: dict, history: list) -> TrainingDivergedError:
    logger.error("Training diverged: %s", message)
    return TrainingDivergedError(
        f"Training diverged: {message}", last_good_parameters=params, loss_history=history
    )


def train_model(
    surrogate: Surrogate,
    dataset: PairDataset,
    training: TrainingSection,
    seed: int,
) -> TrainResult:
    """
    Trains a model with Adam on shuffled mini-batches of the training split, differentiating
    through the unrolled integrator. The learning rate decays by training.gamma every
    training.step_size epochs.

    Args:
        surrogate: Model family and hyperparameters.
        dataset: Samples of the family's layout.
        training: Epochs, batch size and schedule.
        seed: Master seed; it fixes the initialisation and the batch order.

    Returns:
        Final parameters and the per-epoch history. Zero epochs return the initialisation.

    Raises:
        ValidationError: The dataset layout does not fit the model family or it is empty.
        TrainingDivergedError: A loss, gradient or matrix inverse became non-finite; the error
            carries the parameters of the last completed epoch.
    """
    if dataset.kind is not surrogate.data_kind:
        logger.error(
            "Dataset of kind %s cannot train a %s model",
            dataset.kind.value,
            surrogate.family.value,
        )
        raise ValidationError(
            f"A '{dataset.kind.value}' dataset cannot train a '{surrogate.family.value}' model"
        )
    if dataset.train_count == 0:
        raise ValidationError("The dataset has no training samples")

    params = surrogate.initialise(sample_rng(seed, INIT_COUNTER))
    initial_params = {name: array.copy() for name, array in params.items()}
    optimizer = AdamState.for_parameters(params, AdamConfig(alpha=training.learning_rate))
    schedule = LrSchedule(
        base_rate=training.learning_rate, step_size=training.step_size, gamma=training.gamma
    )
    train_split, validation_split = dataset.training(), dataset.validation()
    logger.info(
        "Training %s with %s parameters on %s samples for %s epochs",
        surrogate.family.value,
        count_parameters(params),
        dataset.train_count,
        training.epochs,
    )

    history: list[EpochRecord] = []
    for epoch in range(training.epochs):
        rate = schedule.rate(epoch)
        order = sample_rng(seed, SHUFFLE_COUNTER + epoch).permutation(dataset.train_count)
        epoch_start = params
        total = 0.0
        try:
            for start in range(0, dataset.train_count, training.batch_size):
                indices = order[start : start + training.batch_size]
                batch = {name: array[indices] for name, array in train_split.items()}
                loss = surrogate.loss(as_variables(params), batch)
                value = float(value_of(loss))
                if not math.isfinite(value):
                    raise _divergence(f"loss {value} in epoch {epoch}", epoch_start, history)
                grads = backward_grad(loss).complete(params)
                params, optimizer = adam_update(optimizer, params, grads, alpha=rate)
                total += value * len(indices)
            loss_val = evaluate_loss(surrogate, params, validation_split, training.batch_size)
        except (NonFiniteError, SingularMatrixError) as error:
            raise _divergence(f"{error.message} in epoch {epoch}", epoch_start, history) from error

        record = EpochRecord(
            epoch=epoch, loss_train=total / dataset.train_count, loss_val=loss_val, lr=rate
        )
        history.append(record)
        logger.info(
            "Epoch %s: loss_train %.6g loss_val %.6g lr %.3g",
            epoch,
            record.loss_train,
            record.loss_val,
            rate,
        )
    return TrainResult(
        params=params, initial_params=initial_params, history=history, optimizer=optimizer
    )


def write_metrics_csv(path: pathlib.Path, history: list[EpochRecord]) -> None:
    """Writes `epoch,loss_train,loss_val,lr`."""
    write_csv(path, METRICS_HEADER, (record.row() for record in history))
