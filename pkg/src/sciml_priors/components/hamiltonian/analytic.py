"""Analytic Hamiltonian test systems with exact gradients."""
import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sciml_priors.utilities.exceptions import ShapeMismatchError, SingularityError

logger = logging.getLogger(__name__)


class SystemKind(str, enum.Enum):
    """Known analytic systems."""

    PENDULUM = "pendulum"
    SPRING = "spring"
    NONSEPARABLE = "nonseparable"
    POINT_VORTEX = "point-vortex"


SEPARABLE_KINDS = (SystemKind.PENDULUM, SystemKind.SPRING)


@dataclass(frozen=True)
class AnalyticSystem:
    """
    An analytic Hamiltonian.

    For the point-vortex system q holds the x coordinates and p the y coordinates of the
    particles, and strengths holds their circulations Γ.
    """

    kind: SystemKind
    strengths: Optional[tuple] = None

    @property
    def separable(self) -> bool:
        """True when H = T(p) + V(q)."""
        return self.kind in SEPARABLE_KINDS

    def gamma(self) -> np.ndarray:
        """Circulations as an array."""
        if self.strengths is None:
            raise ShapeMismatchError(f"{self.kind.value} system has no particle strengths")
        return np.asarray(self.strengths, dtype=np.float64)

    def energy(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """H(q, p) over the last axis, batched over leading axes."""
        q = np.asarray(q, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if self.kind is SystemKind.PENDULUM:
            return np.sum(0.5 * p**2 - np.cos(q), axis=-1)
        if self.kind is SystemKind.SPRING:
            return np.sum(0.5 * (q**2 + p**2), axis=-1)
        if self.kind is SystemKind.NONSEPARABLE:
            return np.sum(0.5 * (q**2 + 1.0) * (p**2 + 1.0), axis=-1)
        return point_vortex_hamiltonian(self.gamma(), np.stack([q, p], axis=-1))

    def grads(self, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(dH/dq, dH/dp)."""
        q = np.asarray(q, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if self.kind is SystemKind.PENDULUM:
            return np.sin(q), p.copy()
        if self.kind is SystemKind.SPRING:
            return q.copy(), p.copy()
        if self.kind is SystemKind.NONSEPARABLE:
            return q * (p**2 + 1.0), p * (q**2 + 1.0)
        grad = point_vortex_gradient(self.gamma(), np.stack([q, p], axis=-1))
        return grad[..., 0], grad[..., 1]

    def canonical_grads(self, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Gradients that drive dq/dt = g_p, dp/dt = -g_q in the integrators.

        Identical to grads() except for point vortices, whose generalised Hamiltonian form
        Γ dx/dt = -dH/dy, Γ dy/dt = dH/dx is rescaled by -1/Γ.
        """
        dh_dq, dh_dp = self.grads(q, p)
        if self.kind is not SystemKind.POINT_VORTEX:
            return dh_dq, dh_dp
        gamma = self.gamma()
        return -dh_dq / gamma, -dh_dp / gamma

    def vector_field(self, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(dq/dt, dp/dt)."""
        g_q, g_p = self.canonical_grads(q, p)
        return g_p, -g_q

    def kinetic_gradient(self, p: np.ndarray) -> np.ndarray:
        """dT/dp of a separable system."""
        self._require_separable()
        return np.asarray(p, dtype=np.float64).copy()

    def potential_gradient(self, q: np.ndarray) -> np.ndarray:
        """dV/dq of a separable system."""
        self._require_separable()
        q = np.asarray(q, dtype=np.float64)
        return np.sin(q) if self.kind is SystemKind.PENDULUM else q.copy()

    def _require_separable(self) -> None:
        if not self.separable:
            raise ShapeMismatchError(f"{self.kind.value} system is not separable")


def analytic_grads(system: AnalyticSystem, q: np.ndarray, p: np.ndarray) -> tuple:
    """Exact (dH/dq, dH/dp) of an analytic system."""
    return system.grads(q, p)


def _pair_geometry(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Differences X_j - X_k and squared distances with the diagonal set to one."""
    diff = positions[..., :, None, :] - positions[..., None, :, :]
    dist2 = np.sum(diff**2, axis=-1)
    count = positions.shape[-2]
    off_diagonal = ~np.eye(count, dtype=bool)
    if np.any(dist2[..., off_diagonal] == 0.0):
        logger.error("Coincident point vortices in a configuration of %s particles", count)
        raise SingularityError("Point vortex Hamiltonian is undefined for coincident particles")
    dist2 = np.where(off_diagonal, dist2, 1.0)
    return diff, dist2


def point_vortex_hamiltonian(gamma: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """
    H = (1/4π) Σ_{j≠k} Γ_j Γ_k log|X_j − X_k| over ordered pairs.

    Args:
        gamma: Circulations of shape (..., N).
        positions: Positions of shape (..., N, 2).

    Returns:
        Energy of shape (...).

    Raises:
        SingularityError: Two particles coincide.
    """
    positions = np.asarray(positions, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if positions.shape[-1] != 2 or gamma.shape[-1] != positions.shape[-2]:
        raise ShapeMismatchError(
            f"point_vortex_hamiltonian: strengths {gamma.shape} vs positions {positions.shape}"
        )
    _, dist2 = _pair_geometry(positions)
    weights = gamma[..., :, None] * gamma[..., None, :]
    # log|r| = ½ log r²; the diagonal contributes log 1 = 0.
    return np.sum(weights * 0.5 * np.log(dist2), axis=(-2, -1)) / (4.0 * np.pi)


def point_vortex_gradient(gamma: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """dH/dX of the point-vortex Hamiltonian, shape (..., N, 2)."""
    positions = np.asarray(positions, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    diff, dist2 = _pair_geometry(positions)
    weights = gamma[..., :, None] * gamma[..., None, :] / dist2
    count = positions.shape[-2]
    weights = np.where(np.eye(count, dtype=bool), 0.0, weights)
    return np.sum(weights[..., None] * diff, axis=-2) / (2.0 * np.pi)
