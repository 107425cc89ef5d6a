"""Tests for the binary record codec and model checkpoints."""

import struct

import numpy as np
import pytest

from sciml_priors.components.store.checkpoint import (
    CHECKPOINT_MAGIC,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from sciml_priors.components.store.codec import decode_record, encode_record
from sciml_priors.utilities.exceptions import ValidationError

MAGIC = b"TESTDATA"


def _checkpoint() -> Checkpoint:
    return Checkpoint(
        family="taylor-net",
        hyperparameters={"dimension": 1, "terms": 2, "hidden": 4, "dt": 0.01, "t_train": 0.01},
        parameters={"taylor.T.a": np.arange(6.0).reshape(2, 3), "taylor.T.b": np.array([0.1])},
        seed=42,
        metadata={"config_hash": "abc"},
    )


def test_checkpoint_file(tmp_path):
    """A saved checkpoint reads back with its parameters, order and metadata."""
    path = tmp_path / "checkpoint.bin"
    save_checkpoint(path, _checkpoint())
    loaded = load_checkpoint(path)
    assert loaded.family == "taylor-net"
    assert loaded.seed == 42
    assert loaded.hyperparameters["dt"] == 0.01
    assert loaded.metadata == {"config_hash": "abc"}
    assert list(loaded.parameters) == ["taylor.T.a", "taylor.T.b"]
    np.testing.assert_array_equal(loaded.parameters["taylor.T.a"], np.arange(6.0).reshape(2, 3))


def test_encoding_is_deterministic():
    """The same content always encodes to the same bytes."""
    assert _checkpoint().to_bytes() == _checkpoint().to_bytes()
    assert _checkpoint().to_bytes()[:8] == CHECKPOINT_MAGIC


def test_require_family():
    """A checkpoint of another family is refused."""
    checkpoint = _checkpoint()
    checkpoint.require_family("taylor-net")
    with pytest.raises(ValidationError, match="expected 'roenet'"):
        checkpoint.require_family("roenet")


class TestCorruptRecords:
    """Unit tests for records the codec must refuse"""

    def test_wrong_magic(self):
        """A dataset file is not a checkpoint."""
        data = encode_record(MAGIC, {}, {"x": np.zeros(2)})
        with pytest.raises(ValidationError, match="found tag"):
            Checkpoint.from_bytes(data)

    def test_truncated(self):
        """Cutting a record short anywhere is detected."""
        data = encode_record(MAGIC, {"k": 1}, {"x": np.zeros(4)})
        with pytest.raises(ValidationError):
            decode_record(MAGIC, data[:5])
        with pytest.raises(ValidationError, match="inside array 'x'"):
            decode_record(MAGIC, data[:-1])
        with pytest.raises(ValidationError, match="trailing"):
            decode_record(MAGIC, data + b"\x00")

    def test_unsupported_version(self):
        """Only the current format version is read."""
        data = bytearray(encode_record(MAGIC, {}, {}))
        data[8] = 99
        with pytest.raises(ValidationError, match="version 99"):
            decode_record(MAGIC, bytes(data))

    def test_unreadable_header(self):
        """A header that is not JSON is refused."""
        data = struct.pack("<8sBI", MAGIC, 1, 3) + b"{x}"
        with pytest.raises(ValidationError, match="Unreadable"):
            decode_record(MAGIC, data)

    @pytest.mark.parametrize(
        "body",
        [b"{}", b"[1]", b'{"arrays": 3}', b'{"arrays": [{"shape": [1]}]}', b'{"arrays": [7]}'],
    )
    def test_header_without_array_listing(self, body):
        """Headers that are not an object with a well-formed array listing are refused."""
        data = struct.pack("<8sBI", MAGIC, 1, len(body)) + body
        with pytest.raises(ValidationError, match="array listing|array entry"):
            decode_record(MAGIC, data)

    def test_missing_header_key(self):
        """A checkpoint header without a family is refused."""
        data = encode_record(CHECKPOINT_MAGIC, {"hyperparameters": {}, "seed": 0}, {})
        with pytest.raises(ValidationError, match="family"):
            Checkpoint.from_bytes(data)

    def test_reserved_and_bad_tags(self):
        """The array listing key and short tags are rejected on encode."""
        with pytest.raises(ValueError):
            encode_record(MAGIC, {"arrays": []}, {})
        with pytest.raises(ValueError):
            encode_record(b"SHORT", {}, {})
