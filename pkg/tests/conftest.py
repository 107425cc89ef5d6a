"""Shared fixtures and the --run-slow switch for the acceptance runs."""

import pytest

from sciml_priors.configuration.presets import load_preset


def pytest_addoption(parser):
    """Adds --run-slow."""
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run the acceptance trainings"
    )


def pytest_collection_modifyitems(config, items):
    """Skips tests marked slow unless --run-slow was given."""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(name="output_root")
def fixture_output_root(tmp_path):
    """Empty output root for run directories."""
    root = tmp_path / "runs"
    root.mkdir()
    return root


@pytest.fixture(name="tiny_pendulum")
def fixture_tiny_pendulum():
    """The pendulum preset shrunk to a few samples, epochs and a short horizon."""
    preset = load_preset("pendulum")
    payload = preset.as_dict()
    payload["data"].update(samples=4, validation_samples=2)
    payload["model"].update(terms=2, hidden=4, width=8, layers=2)
    payload["training"].update(epochs=2, batch_size=2)
    payload["evaluation"].update(horizon=0.1, test_samples=2)
    return preset.model_validate(payload)
