#!/usr/bin/env python
"""Tests for the sciml-priors command line."""

from unittest.mock import patch

import pytest

from sciml_priors.cli.main import build_parser, main
from sciml_priors.configuration.presets import dump_preset
from sciml_priors.utilities.helperfunctions import read_csv, read_latest_pointer


@pytest.fixture(name="tiny_config")
def fixture_tiny_config(tiny_pendulum, tmp_path):
    """The shrunk pendulum preset written as a config echo."""
    path = tmp_path / "config.yaml"
    path.write_text(dump_preset(tiny_pendulum), encoding="utf-8")
    return path


def test_train_then_eval(tiny_config, output_root, capsys):
    """train prints its checkpoint; eval reads it and prints the metrics."""
    assert main(["train", "--config", str(tiny_config), "--out", str(output_root)]) == 0
    checkpoint = capsys.readouterr().out.strip().splitlines()[-1]
    assert checkpoint.endswith("checkpoint.bin")

    arguments = ["eval", "--config", str(tiny_config), "--out", str(output_root)]
    assert main(arguments + ["--checkpoint", checkpoint, "--horizon", "0.05"]) == 0
    assert "eps_p_mean:" in capsys.readouterr().out
    _, rows = read_csv(read_latest_pointer(output_root) / "eval.csv")
    assert len(rows) == 6


def test_gen_data_with_overrides(tiny_config, output_root, capsys):
    """Override flags reach the echoed configuration."""
    arguments = ["gen-data", "--config", str(tiny_config), "--out", str(output_root)]
    assert main(arguments + ["--seed", "9", "--noise-sigma", "0.1"]) == 0
    dataset = capsys.readouterr().out.strip().splitlines()[-1]
    assert dataset.endswith("dataset.bin")
    echo = (read_latest_pointer(output_root) / "config.yaml").read_text(encoding="utf-8")
    assert "noise_sigma: 0.1" in echo
    assert read_latest_pointer(output_root).name.startswith("gen-data-pendulum-9-")


class TestExitCodes:
    """Unit tests for the exit codes of failing commands"""

    def test_usage_errors(self, output_root, capsys):
        """Unknown presets, a missing preset and bad worker counts exit with 2."""
        assert main(["gen-data", "--preset", "no-such-preset", "--out", str(output_root)]) == 2
        assert "no-such-preset" in capsys.readouterr().err
        assert main(["gen-data", "--out", str(output_root)]) == 2
        assert main(["gen-data", "--preset", "pendulum", "--threads", "0"]) == 2
        assert main(["train", "--preset", "pendulum", "--epochs", "-1"]) == 2

    def test_wrong_family_checkpoint(self, tiny_config, output_root, capsys):
        """A pendulum checkpoint cannot be evaluated under the spring preset."""
        assert main(["train", "--config", str(tiny_config), "--out", str(output_root)]) == 0
        checkpoint = capsys.readouterr().out.strip().splitlines()[-1]
        arguments = ["eval", "--preset", "spring", "--checkpoint", checkpoint]
        assert main(arguments + ["--out", str(output_root)]) == 3
        assert "expected 'nssnn'" in capsys.readouterr().err

    def test_missing_checkpoint(self, tiny_config, output_root, tmp_path):
        """An unreadable checkpoint is an I/O failure."""
        arguments = ["eval", "--config", str(tiny_config), "--out", str(output_root)]
        assert main(arguments + ["--checkpoint", str(tmp_path / "absent.bin")]) == 1

    def test_parser_errors(self):
        """argparse itself rejects a missing sub-command and conflicting sources."""
        with pytest.raises(SystemExit) as caught:
            build_parser().parse_args([])
        assert caught.value.code == 2
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train", "--preset", "spring", "--config", "x.yaml"])


def test_selftest_forwards_to_pytest(tmp_path):
    """selftest runs the suite and returns its exit status."""
    with patch("sciml_priors.cli.main.TESTS_PATH", tmp_path), patch(
        "pytest.main", return_value=0
    ) as mock_main:
        assert main(["selftest", "--run-slow"]) == 0
    assert mock_main.call_args.args[0] == [str(tmp_path), "-q", "--run-slow"]

    with patch("sciml_priors.cli.main.TESTS_PATH", tmp_path / "absent"):
        assert main(["selftest"]) == 2
