"""Module contains helper functions used in the project."""
import csv
import hashlib
import json
import logging
import os
import pathlib
import tempfile
from typing import Any, Iterable, Sequence

import numpy as np

from sciml_priors.configuration.settings import CSV_DIGITS, LATEST_POINTER_NAME

# get reference to the logging object
logger = logging.getLogger(__name__)

MASK_64 = (1 << 64) - 1


def format_float(value: float, digits: int = CSV_DIGITS) -> str:
    """Formats a float with the given number of significant digits."""
    return f"{float(value):.{digits}g}"


def write_csv(path: pathlib.Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """
    Writes a CSV file, formatting floats with CSV_DIGITS significant digits.

    Args:
        path: Destination file.
        header: Column names.
        rows: Row values; ints and strings are written as they are.

    Raises:
        OSError: The file could not be written.
    """
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [
                        format_float(item)
                        if isinstance(item, (float, np.floating))
                        else str(item)
                        for item in row
                    ]
                )
    except OSError as error:
        logger.error("Could not write CSV file %s: %s", path, error)
        raise error
    logger.debug("Wrote CSV file %s", path)


def read_csv(path: pathlib.Path) -> tuple[list[str], list[list[str]]]:
    """Reads a CSV file written by write_csv into its header and raw rows."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        return header, list(reader)


def splitmix64(state: int) -> int:
    """One output of the splitmix64 generator for the given 64-bit state."""
    value = (state + 0x9E3779B97F4A7C15) & MASK_64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & MASK_64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & MASK_64
    return value ^ (value >> 31)


def derive_seed(master_seed: int, counter: int) -> int:
    """Counter-based per-sample seed derived from a master seed."""
    return splitmix64((master_seed & MASK_64) ^ splitmix64(counter & MASK_64))


def sample_rng(master_seed: int, counter: int) -> np.random.Generator:
    """Independent generator for the sample with the given counter."""
    return np.random.default_rng(derive_seed(master_seed, counter))


def canonical_json(payload: Any) -> str:
    """Key-sorted, whitespace-free JSON used for hashing and file headers."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(payload: Any) -> str:
    """sha256 hex digest of the canonical JSON of a configuration."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def atomic_write_bytes(path: pathlib.Path, data: bytes) -> None:
    """Writes a file through a temporary sibling and os.replace, so readers never see a partial
    file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    descriptor, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(descriptor, "wb") as handle:
            handle.write(data)
        os.replace(temporary, path)
    except OSError as error:
        logger.error("Atomic write of %s failed: %s", path, error)
        if os.path.exists(temporary):
            os.remove(temporary)
        raise error


def create_run_directory(
    output_root: pathlib.Path, command: str, preset: str, seed: int, digest: str
) -> pathlib.Path:
    """
    Creates a new run directory `<command>-<preset>-<seed>-<digest[:12]>` below output_root.
    An existing directory is never reused; a numeric suffix is appended instead.

    Returns:
        The created directory.
    """
    output_root.mkdir(parents=True, exist_ok=True)
    base_name = f"{command}-{preset}-{seed}-{digest[:12]}"
    candidate = output_root / base_name
    suffix = 1
    while True:
        try:
            candidate.mkdir()
            break
        except FileExistsError:
            candidate = output_root / f"{base_name}-{suffix}"
            suffix += 1
    logger.info("Created run directory %s", candidate)
    return candidate


def update_latest_pointer(output_root: pathlib.Path, run_directory: pathlib.Path) -> None:
    """Rewrites the `latest` pointer file of output_root atomically."""
    atomic_write_bytes(
        output_root / LATEST_POINTER_NAME, f"{run_directory.name}\n".encode("utf-8")
    )


def read_latest_pointer(output_root: pathlib.Path) -> pathlib.Path:
    """Resolves the `latest` pointer file of output_root."""
    pointer = output_root / LATEST_POINTER_NAME
    return output_root / pointer.read_text(encoding="utf-8").strip()
