"""One-dimensional grid fields, boundary padding and field error norms."""
import enum
import logging
import pathlib
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any

import numpy as np

from sciml_priors.components.numkit.tape import shape_of, value_of
from sciml_priors.utilities.exceptions import ShapeMismatchError
from sciml_priors.utilities.helperfunctions import write_csv

logger = logging.getLogger(__name__)

MIN_NODES = 3


class BoundaryCondition(str, enum.Enum):
    """How neighbours outside the grid are resolved."""

    PERIODIC = "periodic"
    REPLICATE = "replicate"


@dataclass(frozen=True)
class GridField1D:
    """
    Conserved quantities on N_g nodes.

    Attributes:
        u: Values of shape (..., N_g, N_c); an array or a TapeNode.
        dx: Node spacing.
        bc: Boundary condition.
        t: Current time.
        x0: Coordinate of node 0.
    """

    u: Any
    dx: float
    bc: BoundaryCondition = BoundaryCondition.PERIODIC
    t: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        shape = shape_of(self.u)
        if len(shape) < 2:
            raise ShapeMismatchError(f"GridField1D: u must be (..., N_g, N_c), got {shape}")
        if shape[-2] < MIN_NODES:
            raise ShapeMismatchError(
                f"GridField1D: need at least {MIN_NODES} nodes, got {shape[-2]}"
            )
        if self.dx <= 0:
            raise ValueError(f"GridField1D: spacing must be positive, got {self.dx}")
        object.__setattr__(self, "bc", BoundaryCondition(self.bc))

    @property
    def nodes(self) -> int:
        """N_g."""
        return shape_of(self.u)[-2]

    @property
    def components(self) -> int:
        """N_c."""
        return shape_of(self.u)[-1]

    @property
    def x(self) -> np.ndarray:
        """Node coordinates."""
        return self.x0 + self.dx * np.arange(self.nodes)

    def values(self) -> np.ndarray:
        """u as an array."""
        return value_of(self.u)

    def advanced(self, u: Any, dt: float) -> "GridField1D":
        """A copy holding u at time t + dt."""
        return replace(self, u=u, t=self.t + dt)


@lru_cache(maxsize=64)
def neighbor_indices(nodes: int, bc: BoundaryCondition) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays of the left and right neighbour of every node."""
    index = np.arange(nodes)
    if BoundaryCondition(bc) is BoundaryCondition.PERIODIC:
        return (index - 1) % nodes, (index + 1) % nodes
    return np.maximum(index - 1, 0), np.minimum(index + 1, nodes - 1)


@lru_cache(maxsize=64)
def interface_indices(nodes: int, bc: BoundaryCondition) -> tuple[np.ndarray, np.ndarray]:
    """
    Left and right node of the N_g + 1 interfaces; interface k lies between node k - 1 and k,
    with the outer two resolved by the boundary condition. For periodic grids the first and last
    interface join the same pair of nodes.
    """
    left, right = neighbor_indices(nodes, bc)
    index = np.arange(nodes)
    return np.concatenate([left[:1], index]), np.concatenate([index, right[-1:]])


def pad_neighbors(field: GridField1D, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (u_{j-1}, u_j, u_{j+1}) with boundary neighbours resolved by the field's condition.

    Raises:
        IndexError: j is outside the grid.
    """
    if not 0 <= j < field.nodes:
        raise IndexError(f"Node {j} outside grid of {field.nodes} nodes")
    values = field.values()
    left, right = neighbor_indices(field.nodes, field.bc)
    return values[..., left[j], :], values[..., j, :], values[..., right[j], :]


def field_errors(predicted: np.ndarray, reference: np.ndarray, dx: float) -> dict[str, float]:
    """
    Grid-weighted L1 and L2 norms and the max norm of the difference of two fields.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise ShapeMismatchError(
            f"field_errors: shapes {predicted.shape} and {reference.shape} differ"
        )
    difference = np.abs(predicted - reference)
    return {
        "l1": float(np.sum(difference) * dx),
        "l2": float(np.sqrt(np.sum(difference**2) * dx)),
        "max": float(np.max(difference)),
    }


def write_field_csv(path: pathlib.Path, snapshots: list[GridField1D]) -> None:
    """Writes `t,x,u_1..u_{N_c}`, one row per node and snapshot."""
    components = snapshots[0].components
    header = ["t", "x"] + [f"u_{c + 1}" for c in range(components)]
    rows = []
    for snapshot in snapshots:
        values = snapshot.values().reshape(snapshot.nodes, components)
        for x, node_values in zip(snapshot.x, values):
            rows.append([float(snapshot.t), float(x)] + [float(v) for v in node_values])
    write_csv(path, header, rows)
