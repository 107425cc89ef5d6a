"""Module containing classes used to handle errors"""
from typing import Union


class SciMLError(Exception):
    """
    Base error for every failure raised by the package.

    Attributes:
        message (str): A descriptive error message.
        exit_code (int): The process exit status the command line reports for this error.
    """

    default_exit_code = 1

    def __init__(self, message: str, exit_code: Union[int, None] = None):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code or self.default_exit_code


class ShapeMismatchError(SciMLError):
    """Operand shapes are incompatible for a primitive. The message names the primitive."""


class NonFiniteError(SciMLError):
    """A value that must be finite is NaN or infinite."""


class SingularMatrixError(SciMLError):
    """A small matrix is exactly singular or too ill-conditioned to invert."""


class UnevaluatedGraphError(SciMLError):
    """Backward was requested on a graph that has not been evaluated."""


class CflViolationError(SciMLError):
    """The Courant number of an explicit step exceeds one."""


class PhysicalStateError(SciMLError):
    """A gas state has non-positive density or pressure."""


class ConvergenceError(SciMLError):
    """An iterative solve did not converge."""


class SingularityError(SciMLError):
    """Two point vortices coincide where the energy is undefined."""


class TrainingDivergedError(SciMLError):
    """
    Training produced a non-finite loss.

    Attributes:
        last_good_parameters (dict): Parameters of the last epoch with a finite loss.
        loss_history (list): Epoch records up to the divergence.
    """

    def __init__(
        self,
        message: str,
        last_good_parameters: Union[dict, None] = None,
        loss_history: Union[list, None] = None,
    ):
        super().__init__(message)
        self.last_good_parameters = last_good_parameters or {}
        self.loss_history = loss_history or []


class UsageError(SciMLError):
    """Invalid command line usage."""

    default_exit_code = 2


class ValidationError(SciMLError):
    """Inputs that do not belong together, e.g. a checkpoint of another model family."""

    default_exit_code = 3


class StageError(SciMLError):
    """
    A stage of a reproduction run failed.

    Attributes:
        stage (str): The name of the failed stage.
    """

    default_exit_code = 4

    def __init__(self, stage: str, message: str):
        super().__init__(f"Stage '{stage}' failed: {message}")
        self.stage = stage
