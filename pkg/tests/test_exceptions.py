"""Module to test exceptions"""
from sciml_priors.utilities.exceptions import (
    CflViolationError,
    SciMLError,
    StageError,
    TrainingDivergedError,
    UsageError,
    ValidationError,
)


def test_sciml_error_initialization():
    """Tests the message and exit code of the base error."""

    # Test with both message and exit code
    error = SciMLError("Broken", 7)
    assert error.message == "Broken"
    assert error.exit_code == 7

    # Test with only message
    error = SciMLError("Broken")
    assert error.exit_code == 1  # Default exit code

    # Subclasses keep the default of the base
    error = CflViolationError("Courant number 2.0")
    assert isinstance(error, SciMLError)
    assert error.exit_code == 1


def test_exit_codes():
    """Usage, validation and stage failures map to their command line exit codes."""
    assert UsageError("bad flag").exit_code == 2
    assert ValidationError("wrong family").exit_code == 3
    assert StageError("train", "diverged").exit_code == 4


def test_stage_error_message():
    """The stage error names the failed stage."""
    error = StageError("eval", "no checkpoint")
    assert error.stage == "eval"
    assert error.message == "Stage 'eval' failed: no checkpoint"


def test_training_diverged_error():
    """The divergence error carries the last good parameters and the history."""
    params = {"w": [1.0]}
    error = TrainingDivergedError("nan loss", last_good_parameters=params, loss_history=[1, 2])
    assert error.last_good_parameters is params
    assert error.loss_history == [1, 2]

    error = TrainingDivergedError("nan loss")
    assert error.last_good_parameters == {}
    assert error.loss_history == []
