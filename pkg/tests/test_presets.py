"""Tests for the experiment presets."""

import pytest

from sciml_priors.configuration.presets import (
    DataKind,
    ModelFamily,
    available_presets,
    dump_preset,
    load_preset,
    load_preset_file,
    parse_preset,
)
from sciml_priors.utilities.exceptions import UsageError, ValidationError


def test_every_shipped_preset_loads():
    """All shipped presets validate and carry their own name."""
    names = available_presets()
    assert {"pendulum", "spring", "nonseparable", "1c-linear", "sod", "vortex-pair"} <= set(names)
    for name in names:
        preset = load_preset(name)
        assert preset.name == name


def test_preset_data_kind():
    """Families map to the sample layout they train on."""
    assert load_preset("pendulum").data_kind is DataKind.PHASE
    assert load_preset("sod").data_kind is DataKind.FIELD
    assert load_preset("vortex-pair").data_kind is DataKind.VORTEX
    assert load_preset("pendulum").experiment.family is ModelFamily.TAYLOR_NET


def test_unknown_preset():
    """An unknown preset name is a usage error listing the shipped presets."""
    with pytest.raises(UsageError) as error:
        load_preset("does-not-exist")
    assert "pendulum" in error.value.message
    assert error.value.exit_code == 2


def test_overrides():
    """Overrides replace single keys and leave the original preset untouched."""
    preset = load_preset("pendulum")
    changed = preset.with_overrides(epochs=3, dt=0.05, noise_sigma=0.1, horizon=1.0)

    assert changed.training.epochs == 3
    assert changed.data.dt == 0.05
    assert changed.evaluation_dt == 0.05
    assert changed.data.noise_sigma == 0.1
    assert changed.evaluation.horizon == 1.0
    assert preset.training.epochs == 100

    # None leaves everything unchanged
    assert preset.with_overrides() == preset


def test_invalid_override():
    """A negative epoch count is rejected as a usage error."""
    with pytest.raises(UsageError):
        load_preset("pendulum").with_overrides(epochs=-1)


def test_family_must_fit_the_system():
    """A phase-space family cannot be configured on a grid field system."""
    payload = load_preset("pendulum").as_dict()
    payload["data"]["system"] = "sod"
    with pytest.raises(ValidationError):
        parse_preset(payload, "test")


def test_unknown_keys_are_rejected():
    """Misspelt keys fail validation instead of being ignored."""
    payload = load_preset("pendulum").as_dict()
    payload["training"]["epoch"] = 3
    with pytest.raises(ValidationError):
        parse_preset(payload, "test")


def test_config_echo_reloads(tmp_path):
    """The echoed configuration loads back into the same preset."""
    preset = load_preset("sod").with_overrides(epochs=1)
    path = tmp_path / "config.yaml"
    path.write_text(dump_preset(preset), encoding="utf-8")
    assert load_preset_file(path) == preset


def test_missing_and_broken_files(tmp_path):
    """A missing file raises FileNotFoundError and unparsable YAML a validation error."""
    with pytest.raises(FileNotFoundError):
        load_preset_file(tmp_path / "missing.yaml")

    broken = tmp_path / "broken.yaml"
    broken.write_text("experiment: [unclosed", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_preset_file(broken)
