"""Vorticity rasterisation, deterministic vortex detection and frame-to-frame vortex pairing."""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates, maximum_filter
from scipy.special import erf

from sciml_priors.components.numkit.tape import value_of
from sciml_priors.components.vortex.system import BOX_SIZE, VortexSystem, minimum_image
from sciml_priors.utilities.helperfunctions import write_csv

logger = logging.getLogger(__name__)

GRID_RESOLUTION = 200
KERNEL_VARIANCE = 0.01
DETECTION_BOX = 10
PEAK_THRESHOLD = 0.05
STRENGTH_TOLERANCE = 0.2


@dataclass(frozen=True)
class VorticityGrid:
    """
    Vorticity sampled on the nodes i·h, j·h of the periodic box, h = size/resolution.

    values[i, j] is ω at (x_i, y_j).
    """

    values: np.ndarray
    size: float = BOX_SIZE
    sigma2: float = KERNEL_VARIANCE

    @property
    def resolution(self) -> int:
        """Nodes per side."""
        return self.values.shape[0]

    @property
    def cell(self) -> float:
        """Node spacing h."""
        return self.size / self.resolution

    @property
    def coordinates(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return self.cell * np.arange(self.resolution)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Periodic bilinear interpolation at points of shape (..., 2)."""
        points = np.asarray(points, dtype=np.float64)
        index = np.mod(points, self.size) / self.cell
        flat = index.reshape(-1, 2).T
        sampled = map_coordinates(self.values, flat, order=1, mode="grid-wrap")
        return sampled.reshape(points.shape[:-1])


@dataclass(frozen=True)
class DetectedVortex:
    """A vortex found on a grid."""

    pos: np.ndarray
    strength: float


def rasterize_vorticity(
    system: VortexSystem,
    resolution: int = GRID_RESOLUTION,
    sigma2: float = KERNEL_VARIANCE,
) -> VorticityGrid:
    """
    ω(x) = Σ_i Γ_i N(x − X_i; σ²) on the nodes of the periodic box, with the isotropic
    Gaussian N of variance σ² per axis and periodic nearest-image distances.
    """
    if sigma2 <= 0:
        raise ValueError(f"rasterize_vorticity: kernel variance must be positive, got {sigma2}")
    size = system.period if system.period is not None else BOX_SIZE
    axis = size / resolution * np.arange(resolution)
    positions = np.asarray(value_of(system.positions), dtype=np.float64).reshape(-1, 2)
    gamma = np.asarray(value_of(system.gamma), dtype=np.float64).reshape(-1)
    values = np.zeros((resolution, resolution))
    norm = 1.0 / (2.0 * np.pi * sigma2)
    for (x_pos, y_pos), strength in zip(positions, gamma):
        dx = minimum_image(axis - x_pos, size)
        dy = minimum_image(axis - y_pos, size)
        values += strength * norm * np.outer(
            np.exp(-(dx**2) / (2.0 * sigma2)), np.exp(-(dy**2) / (2.0 * sigma2))
        )
    return VorticityGrid(values=values, size=size, sigma2=sigma2)


def _box_mass(centre: float, lower: float, upper: float, sigma2: float) -> float:
    scale = math.sqrt(2.0 * sigma2)
    return 0.5 * (erf((upper - centre) / scale) - erf((lower - centre) / scale))


def _wrapped_gap(a: int, b: int, resolution: int) -> int:
    gap = abs(a - b) % resolution
    return min(gap, resolution - gap)


def _window_offsets(magnitude: np.ndarray, peak: tuple, axis: int, box: int) -> np.ndarray:
    """
    Node offsets of the window along one axis. An even window leans towards the larger
    neighbour of the peak so that it is centred on the half cell nearest the blob.
    """
    lower = box // 2
    if box % 2 == 0:
        resolution = magnitude.shape[axis]
        before, after = list(peak), list(peak)
        before[axis] = (peak[axis] - 1) % resolution
        after[axis] = (peak[axis] + 1) % resolution
        if magnitude[tuple(after)] > magnitude[tuple(before)]:
            lower -= 1
    return np.arange(box) - lower


def detect_vortices(
    grid: VorticityGrid,
    box: int = DETECTION_BOX,
    threshold: float = PEAK_THRESHOLD,
) -> list[DetectedVortex]:
    """
    Finds one vortex per isolated vorticity blob.

    Peaks are nodes where |ω| is the maximum of the surrounding box and exceeds threshold times
    the global maximum. Within the box x box window around a peak the position is the
    |ω|-weighted centroid and the strength is Σ ω·ΔA, divided by the share of a Gaussian
    kernel of the grid's variance that the window covers.
    """
    magnitude = np.abs(grid.values)
    peak_value = float(np.max(magnitude)) if magnitude.size else 0.0
    if peak_value <= 0.0:
        return []

    is_peak = (magnitude == maximum_filter(magnitude, size=box, mode="wrap")) & (
        magnitude > threshold * peak_value
    )
    candidates = sorted(zip(*np.nonzero(is_peak)), key=lambda node: -magnitude[node])
    accepted: list[tuple[int, int]] = []
    for i, j in candidates:
        # Plateaus put several equal maxima inside one window; keep the first.
        if all(
            _wrapped_gap(i, k, grid.resolution) >= box // 2
            or _wrapped_gap(j, m, grid.resolution) >= box // 2
            for k, m in accepted
        ):
            accepted.append((int(i), int(j)))

    area = grid.cell**2
    detections = []
    for i, j in accepted:
        offsets_x = _window_offsets(magnitude, (i, j), 0, box)
        offsets_y = _window_offsets(magnitude, (i, j), 1, box)
        rows = np.mod(i + offsets_x, grid.resolution)
        cols = np.mod(j + offsets_y, grid.resolution)
        window = grid.values[np.ix_(rows, cols)]
        weights = np.abs(window)
        total = float(np.sum(weights))
        shift_x = float(np.sum(weights.sum(axis=1) * offsets_x)) / total
        shift_y = float(np.sum(weights.sum(axis=0) * offsets_y)) / total
        covered = _box_mass(
            shift_x * grid.cell,
            (offsets_x[0] - 0.5) * grid.cell,
            (offsets_x[-1] + 0.5) * grid.cell,
            grid.sigma2,
        ) * _box_mass(
            shift_y * grid.cell,
            (offsets_y[0] - 0.5) * grid.cell,
            (offsets_y[-1] + 0.5) * grid.cell,
            grid.sigma2,
        )
        position = np.mod(
            np.array([(i + shift_x) * grid.cell, (j + shift_y) * grid.cell]), grid.size
        )
        strength = float(np.sum(window)) * area / covered
        detections.append(DetectedVortex(pos=position, strength=strength))
    logger.debug("Detected %s vortices", len(detections))
    return detections


@dataclass
class PairingResult:
    """Index pairs (a, b) matching two detection lists, or a rejection with its reason."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    rejected: bool = False
    reason: str = ""


def pair_vortices(
    first: list[DetectedVortex],
    second: list[DetectedVortex],
    strength_tolerance: float = STRENGTH_TOLERANCE,
    period: Optional[float] = BOX_SIZE,
) -> PairingResult:
    """
    Greedy mutual-nearest-neighbour matching of two detection lists.

    Rejected when the lists differ in length or when a matched pair differs in strength by more
    than strength_tolerance relative to the larger of the two.
    """
    if len(first) != len(second):
        return PairingResult(
            rejected=True, reason=f"detected {len(first)} then {len(second)} vortices"
        )
    if not first:
        return PairingResult()

    pos_a = np.array([vortex.pos for vortex in first])
    pos_b = np.array([vortex.pos for vortex in second])
    distance = np.sqrt(
        np.sum(minimum_image(pos_a[:, None, :] - pos_b[None, :, :], period) ** 2, axis=-1)
    )
    free_a, free_b = set(range(len(first))), set(range(len(second)))
    pairs = []
    while free_a:
        rows, cols = sorted(free_a), sorted(free_b)
        sub = distance[np.ix_(rows, cols)]
        nearest_b = np.argmin(sub, axis=1)
        nearest_a = np.argmin(sub, axis=0)
        mutual = [(rows[r], cols[c]) for r, c in enumerate(nearest_b) if nearest_a[c] == r]
        if not mutual:
            r, c = np.unravel_index(np.argmin(sub), sub.shape)
            mutual = [(rows[r], cols[c])]
        for a_index, b_index in mutual:
            pairs.append((a_index, b_index))
            free_a.discard(a_index)
            free_b.discard(b_index)

    for a_index, b_index in pairs:
        strength_a, strength_b = first[a_index].strength, second[b_index].strength
        scale = max(abs(strength_a), abs(strength_b))
        if scale > 0.0 and abs(strength_a - strength_b) > strength_tolerance * scale:
            return PairingResult(
                rejected=True,
                reason=f"strength {strength_a:.4g} paired with {strength_b:.4g}",
            )
    return PairingResult(pairs=sorted(pairs))


def write_grid_csv(path, snapshots: list[tuple[float, VorticityGrid]]) -> None:
    """Writes `t,x,y,omega`, one row per node and snapshot."""
    rows = []
    for time, grid in snapshots:
        axis = grid.coordinates
        for i, x_value in enumerate(axis):
            for j, y_value in enumerate(axis):
                omega = float(grid.values[i, j])
                rows.append([float(time), float(x_value), float(y_value), omega])
    write_csv(path, ["t", "x", "y", "omega"], rows)


def local_vorticity(
    system: VortexSystem, resolution: int = GRID_RESOLUTION, sigma2: float = KERNEL_VARIANCE
) -> np.ndarray:
    """Rasterised vorticity sampled at each particle, shape (N,)."""
    grid = rasterize_vorticity(system, resolution, sigma2)
    return grid.sample(value_of(system.positions))
