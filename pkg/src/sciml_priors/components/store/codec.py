"""
Binary record codec shared by checkpoints and dataset files.

Layout, all integers little-endian:

    8 bytes   magic tag
    1 byte    format version
    4 bytes   header length L (uint32)
    L bytes   UTF-8 JSON header with sorted keys, listing the arrays as {"name", "shape"}
    ...       the arrays as float64 little-endian, in header order

The header carries no timestamps, so encoding the same content twice gives identical bytes.
"""
import json
import logging
import pathlib
import struct

import numpy as np

from sciml_priors.utilities.exceptions import ValidationError
from sciml_priors.utilities.helperfunctions import atomic_write_bytes, canonical_json

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ARRAY_DTYPE = np.dtype("<f8")
_PREAMBLE = struct.Struct("<8sBI")


def encode_record(magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    """
    Serialises a header and named arrays.

    Args:
        magic: 8-byte tag identifying the record kind.
        header: JSON-serialisable metadata. The key "arrays" is reserved.
        arrays: Arrays in the order they are to be stored.

    Returns:
        The encoded record.
    """
    if len(magic) != 8:
        raise ValueError(f"Magic tag must be 8 bytes, got {magic!r}")
    if "arrays" in header:
        raise ValueError("Header key 'arrays' is reserved")
    layout = [{"name": name, "shape": list(np.shape(array))} for name, array in arrays.items()]
    header_bytes = canonical_json({**header, "arrays": layout}).encode("utf-8")
    body = b"".join(
        np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes() for array in arrays.values()
    )
    return _PREAMBLE.pack(magic, FORMAT_VERSION, len(header_bytes)) + header_bytes + body


def decode_record(magic: bytes, data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    """
    Parses a record written by encode_record.

    Raises:
        ValidationError: Wrong magic tag, unsupported version or truncated content.
    """
    if len(data) < _PREAMBLE.size:
        raise ValidationError("Record is truncated before its header")
    found, version, header_length = _PREAMBLE.unpack_from(data)
    if found != magic:
        raise ValidationError(f"Expected a {magic.decode()} record, found tag {found!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"Unsupported format version {version}")
    offset = _PREAMBLE.size
    try:
        header = json.loads(data[offset : offset + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        logger.error("Unreadable record header: %s", error)
        raise ValidationError(f"Unreadable record header: {error}") from error
    offset += header_length
    if not isinstance(header, dict) or not isinstance(header.get("arrays"), list):
        logger.error("Record header is not an object with an array listing")
        raise ValidationError("Record header lacks its array listing")

    arrays = {}
    for entry in header.pop("arrays"):
        try:
            name, shape = str(entry["name"]), tuple(int(size) for size in entry["shape"])
        except (KeyError, TypeError, ValueError) as error:
            logger.error("Malformed array entry %r in record header", entry)
            raise ValidationError(f"Malformed array entry in record header: {entry!r}") from error
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * ARRAY_DTYPE.itemsize
        if end > len(data):
            raise ValidationError(f"Record is truncated inside array '{name}'")
        arrays[name] = (
            np.frombuffer(data[offset:end], dtype=ARRAY_DTYPE).astype(np.float64).reshape(shape)
        )
        offset = end
    if offset != len(data):
        raise ValidationError(f"Record has {len(data) - offset} trailing bytes")
    return header, arrays


def write_record(path: pathlib.Path, magic: bytes, header: dict, arrays: dict) -> None:
    """Encodes and writes a record atomically."""
    atomic_write_bytes(pathlib.Path(path), encode_record(magic, header, arrays))
    logger.info("Wrote %s record %s", magic.decode(), path)


def read_record(path: pathlib.Path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    """Reads and decodes a record."""
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as error:
        logger.error("Could not read %s: %s", path, error)
        raise error
    return decode_record(magic, data)
