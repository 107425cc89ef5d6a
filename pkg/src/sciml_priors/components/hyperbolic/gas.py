"""Ideal-gas state conversions and the one-dimensional Euler flux."""
import logging
from dataclasses import dataclass

import numpy as np

from sciml_priors.utilities.exceptions import PhysicalStateError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EulerGasParams:
    """Heat-capacity ratio of an ideal gas."""

    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"Heat capacity ratio must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class PrimitiveState:
    """Density, velocity and pressure of a uniform gas state."""

    rho: float
    v: float
    p: float

    def sound_speed(self, gas: EulerGasParams) -> float:
        """c = sqrt(γ p / ρ)."""
        return float(np.sqrt(gas.gamma * self.p / self.rho))


def to_primitive(u: np.ndarray, gas: EulerGasParams, check: bool = True) -> tuple:
    """
    (ρ, v, p) from conserved (ρ, ρv, e) on the last axis.

    Raises:
        PhysicalStateError: Density or pressure is not positive; the message names the first
            offending cell.
    """
    u = np.asarray(u, dtype=np.float64)
    rho, momentum, energy = u[..., 0], u[..., 1], u[..., 2]
    if check and np.any(rho <= 0.0):
        cell = np.argwhere(rho <= 0.0)[0].tolist()
        logger.error("Non-positive density in cell %s", cell)
        raise PhysicalStateError(f"Non-positive density {rho[tuple(cell)]:.6g} in cell {cell}")
    v = momentum / rho
    p = (gas.gamma - 1.0) * (energy - 0.5 * rho * v**2)
    if check and np.any(p <= 0.0):
        cell = np.argwhere(p <= 0.0)[0].tolist()
        logger.error("Non-positive pressure in cell %s", cell)
        raise PhysicalStateError(f"Non-positive pressure {p[tuple(cell)]:.6g} in cell {cell}")
    return rho, v, p


def to_conserved(rho, v, p, gas: EulerGasParams) -> np.ndarray:
    """Conserved (ρ, ρv, e) stacked on a new last axis."""
    rho, v, p = (np.asarray(a, dtype=np.float64) for a in (rho, v, p))
    energy = p / (gas.gamma - 1.0) + 0.5 * rho * v**2
    return np.stack(np.broadcast_arrays(rho, rho * v, energy), axis=-1)


def euler_flux(u: np.ndarray, gas: EulerGasParams) -> np.ndarray:
    """F(u) = (ρv, ρv² + p, v(e + p))."""
    rho, v, p = to_primitive(u, gas)
    energy = np.asarray(u)[..., 2]
    return np.stack([rho * v, rho * v**2 + p, v * (energy + p)], axis=-1)
