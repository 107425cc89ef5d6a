"""Point-vortex systems: regularised Biot-Savart velocities, Lagrangian vortex stepping and the
fine-step reference trajectories used as ground truth."""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Union

import numpy as np

from sciml_priors.components.integrate.rollout import step_count
from sciml_priors.components.integrate.steppers import rk4_step
from sciml_priors.components.numkit.tape import shape_of, value_of
from sciml_priors.utilities.exceptions import ShapeMismatchError
from sciml_priors.utilities.helperfunctions import write_csv

logger = logging.getLogger(__name__)

BOX_SIZE = 2.0 * math.pi
DEFAULT_REGULARISATION = 0.1
REFERENCE_MAX_DT = 1e-4

Corrections = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], None]


@dataclass(frozen=True)
class VortexSystem:
    """
    Point vortices in the plane or in a periodic square box.

    Attributes:
        positions: Positions of shape (..., N, 2); an array or a TapeNode.
        gamma: Circulations of shape (..., N).
        reg: Regularisation radius R of the Biot-Savart kernel.
        period: Side of the periodic box, or None for the unbounded plane.
    """

    positions: Any
    gamma: Any
    reg: float = DEFAULT_REGULARISATION
    period: Optional[float] = BOX_SIZE

    def __post_init__(self):
        position_shape, gamma_shape = shape_of(self.positions), shape_of(self.gamma)
        if len(position_shape) < 2 or position_shape[-1] != 2:
            raise ShapeMismatchError(
                f"VortexSystem: positions must be (..., N, 2), got {position_shape}"
            )
        if gamma_shape[-1:] != position_shape[-2:-1]:
            raise ShapeMismatchError(
                f"VortexSystem: strengths {gamma_shape} do not match positions {position_shape}"
            )
        if position_shape[-2] < 1:
            raise ShapeMismatchError("VortexSystem: needs at least one particle")
        if self.reg <= 0:
            raise ValueError(f"VortexSystem: regularisation must be positive, got {self.reg}")

    @property
    def count(self) -> int:
        """N."""
        return shape_of(self.positions)[-2]

    def moved(self, positions: Any) -> "VortexSystem":
        """A copy with new positions, wrapped into the box."""
        return replace(self, positions=wrap_positions(positions, self.period))

    def total_circulation(self) -> float:
        """ΣΓ."""
        return float(np.sum(value_of(self.gamma)))

    def linear_impulse(self) -> np.ndarray:
        """ΣΓ_i X_i."""
        gamma, positions = value_of(self.gamma), value_of(self.positions)
        return np.sum(gamma[..., None] * positions, axis=-2)


def wrap_positions(positions: Any, period: Optional[float]) -> Any:
    """Maps positions into [0, period)²; the shift is a constant so graphs stay differentiable."""
    if period is None:
        return positions
    return positions - period * np.floor(value_of(positions) / period)


def minimum_image(diff: Any, period: Optional[float]) -> Any:
    """Nearest periodic copy of a displacement."""
    if period is None:
        return diff
    return diff - period * np.round(value_of(diff) / period)


def induced_velocity(
    positions: np.ndarray,
    gamma: np.ndarray,
    targets: np.ndarray,
    reg: float,
    period: Optional[float] = BOX_SIZE,
) -> np.ndarray:
    """
    (1/2π) Σ_j Γ_j ẑ × (x − X_j) / (|x − X_j|² + R²) at every target point x.

    The regularised kernel vanishes at zero separation, so targets may include the particles
    themselves.

    Args:
        positions: Particle positions of shape (..., N, 2).
        gamma: Circulations of shape (..., N).
        targets: Points of shape (..., M, 2).
        reg: Regularisation radius.
        period: Periodic box side or None.

    Returns:
        Velocities of shape (..., M, 2).
    """
    positions = np.asarray(positions, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    diff = minimum_image(targets[..., :, None, :] - positions[..., None, :, :], period)
    weight = gamma[..., None, :] / (np.sum(diff**2, axis=-1) + reg**2)
    return np.stack(
        [-np.sum(weight * diff[..., 1], axis=-1), np.sum(weight * diff[..., 0], axis=-1)], axis=-1
    ) / (2.0 * np.pi)


def biot_savart_velocities(system: VortexSystem) -> np.ndarray:
    """Velocity of every particle, shape (..., N, 2)."""
    positions = value_of(system.positions)
    gamma = value_of(system.gamma)
    return induced_velocity(positions, gamma, positions, system.reg, system.period)


def biot_savart_velocity(system: VortexSystem, i: int) -> np.ndarray:
    """Velocity induced on particle i by all the others."""
    if not 0 <= i < system.count:
        raise IndexError(f"Particle {i} outside system of {system.count}")
    return biot_savart_velocities(system)[..., i, :]


def velocity_at_points(system: VortexSystem, points: np.ndarray) -> np.ndarray:
    """Biot-Savart velocity field sampled at arbitrary points."""
    return induced_velocity(
        value_of(system.positions), value_of(system.gamma), points, system.reg, system.period
    )


def _drift(corrections: Corrections, positions: np.ndarray):
    if corrections is None:
        return 0.0
    if callable(corrections):
        return corrections(positions)
    return np.asarray(corrections, dtype=np.float64)


def lvm_step(system: VortexSystem, dt: float, corrections: Corrections = None) -> VortexSystem:
    """
    One RK4 step of dX/dt = u_BS(X) + corrections; circulations are unchanged.

    Args:
        system: Current particles.
        dt: Step, positive.
        corrections: Per-particle drift of shape (..., N, 2), or a callable of the positions.
    """
    gamma = value_of(system.gamma)

    def field(_t, positions):
        return induced_velocity(
            positions, gamma, positions, system.reg, system.period
        ) + _drift(corrections, positions)

    return system.moved(rk4_step(field, value_of(system.positions), dt))


@dataclass(frozen=True)
class ExternalDrift:
    """
    Known synthetic background flow f(x, y) = (u + s·sin y, v + s·sin x), periodic on the box.

    Stands in for the discrepancy between the point-vortex model and a resolved flow.
    """

    uniform: tuple = (0.0, 0.0)
    shear: float = 0.0

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=np.float64)
        return np.stack(
            [
                self.uniform[0] + self.shear * np.sin(positions[..., 1]),
                self.uniform[1] + self.shear * np.sin(positions[..., 0]),
            ],
            axis=-1,
        )

    @property
    def is_zero(self) -> bool:
        """No drift at all."""
        return self.shear == 0.0 and not any(self.uniform)

    def as_dict(self) -> dict:
        """Metadata record."""
        return {"uniform": [float(v) for v in self.uniform], "shear": float(self.shear)}


@dataclass
class VortexTrajectory:
    """Recorded particle positions of a reference run."""

    gamma: np.ndarray
    times: list[float] = field(default_factory=list)
    positions: list[np.ndarray] = field(default_factory=list)
    min_separation: float = math.inf
    flagged: bool = False


def min_separation(positions: np.ndarray, period: Optional[float]) -> float:
    """Smallest pairwise distance; infinite for a single particle."""
    positions = np.asarray(positions, dtype=np.float64)
    count = positions.shape[-2]
    if count < 2:
        return math.inf
    diff = minimum_image(positions[..., :, None, :] - positions[..., None, :, :], period)
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    return float(np.min(dist[..., ~np.eye(count, dtype=bool)]))


def reference_trajectory(
    system: VortexSystem,
    t: float,
    fine_dt: float = REFERENCE_MAX_DT,
    record_dt: Optional[float] = None,
    external: Optional[ExternalDrift] = None,
) -> VortexTrajectory:
    """
    Fine-step RK4 point-vortex trajectory used as ground truth.

    A run during which two particles come closer than R/10 is flagged; datasets drop it.

    Args:
        system: Initial particles.
        t: Final time.
        fine_dt: Integration step, at most 1e-4.
        record_dt: Spacing of the recorded states; every fine step when None. Must be a multiple
            of fine_dt.
        external: Optional background drift.

    Returns:
        The recorded trajectory including the initial state.
    """
    if fine_dt > REFERENCE_MAX_DT * (1.0 + 1e-12):
        raise ValueError(f"reference_trajectory: fine step {fine_dt} exceeds {REFERENCE_MAX_DT}")
    record_dt = fine_dt if record_dt is None else record_dt
    stride = int(round(record_dt / fine_dt))
    if stride < 1 or not math.isclose(stride * fine_dt, record_dt, rel_tol=1e-9):
        raise ValueError(
            f"reference_trajectory: record step {record_dt} is not a multiple of {fine_dt}"
        )

    drift = None if external is None or external.is_zero else external
    threshold = system.reg / 10.0
    gamma = np.asarray(value_of(system.gamma), dtype=np.float64)
    trajectory = VortexTrajectory(gamma=gamma.copy())
    trajectory.times.append(0.0)
    trajectory.positions.append(np.asarray(value_of(system.positions), dtype=np.float64).copy())
    trajectory.min_separation = min_separation(trajectory.positions[0], system.period)

    steps = step_count(0.0, t, fine_dt)
    current = system
    for index in range(1, steps + 1):
        current = lvm_step(current, fine_dt, drift)
        separation = min_separation(current.positions, system.period)
        trajectory.min_separation = min(trajectory.min_separation, separation)
        if index % stride == 0:
            trajectory.times.append(index * fine_dt)
            trajectory.positions.append(np.asarray(current.positions).copy())

    if trajectory.min_separation < threshold:
        trajectory.flagged = True
        logger.warning(
            "Reference run flagged: separation %.3g below %.3g",
            trajectory.min_separation,
            threshold,
        )
    return trajectory


def write_particle_csv(path, trajectory: VortexTrajectory) -> None:
    """Writes `t,x_1,y_1,Γ_1,…`, one row per recorded time."""
    count = trajectory.gamma.shape[-1]
    header = ["t"]
    for index in range(1, count + 1):
        header += [f"x_{index}", f"y_{index}", f"Γ_{index}"]
    rows = []
    for time, positions in zip(trajectory.times, trajectory.positions):
        row = [float(time)]
        for index in range(count):
            x_value, y_value = positions[index]
            row += [float(x_value), float(y_value), float(trajectory.gamma[index])]
        rows.append(row)
    write_csv(path, header, rows)
