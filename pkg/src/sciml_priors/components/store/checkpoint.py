"""Model checkpoints: family tag, hyperparameters, master seed, metadata and parameter arrays."""
import logging
import pathlib
from dataclasses import dataclass, field

import numpy as np

from sciml_priors.components.store.codec import decode_record, encode_record
from sciml_priors.utilities.exceptions import ValidationError
from sciml_priors.utilities.helperfunctions import atomic_write_bytes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SCIMLCKP"


@dataclass
class Checkpoint:
    """
    A trained (or initial) model.

    Attributes:
        family: Model family tag.
        hyperparameters: Model layout and integrator settings needed to rebuild the model.
        parameters: Parameter arrays in declaration order.
        seed: Master seed of the run.
        metadata: Package version, configuration hash and training summary.
    """

    family: str
    hyperparameters: dict
    parameters: dict[str, np.ndarray]
    seed: int
    metadata: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        """Encoded checkpoint."""
        header = {
            "family": self.family,
            "hyperparameters": self.hyperparameters,
            "seed": int(self.seed),
            "metadata": self.metadata,
        }
        return encode_record(CHECKPOINT_MAGIC, header, self.parameters)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        """Decodes a checkpoint."""
        header, arrays = decode_record(CHECKPOINT_MAGIC, data)
        try:
            return cls(
                family=header["family"],
                hyperparameters=header["hyperparameters"],
                parameters=arrays,
                seed=int(header["seed"]),
                metadata=header.get("metadata", {}),
            )
        except KeyError as error:
            logger.error("Checkpoint header lacks %s", error)
            raise ValidationError(f"Checkpoint header lacks {error}") from error

    def require_family(self, family: str) -> None:
        """
        Raises:
            ValidationError: The checkpoint belongs to another model family.
        """
        if self.family != family:
            logger.error("Checkpoint family %s does not match %s", self.family, family)
            raise ValidationError(
                f"Checkpoint holds a '{self.family}' model, expected '{family}'"
            )


def save_checkpoint(path: pathlib.Path, checkpoint: Checkpoint) -> None:
    """Writes a checkpoint atomically."""
    atomic_write_bytes(pathlib.Path(path), checkpoint.to_bytes())
    logger.info("Checkpoint of family %s written to %s", checkpoint.family, path)


def load_checkpoint(path: pathlib.Path) -> Checkpoint:
    """Reads a checkpoint file."""
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as error:
        logger.error("Could not read checkpoint %s: %s", path, error)
        raise error
    return Checkpoint.from_bytes(data)
