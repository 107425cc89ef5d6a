"""Single-step time integrators: Euler, RK4, the separable fourth-order symplectic scheme and
the explicit symplectic scheme for nonseparable Hamiltonians in extended phase space.

States may hold numpy arrays or TapeNode values; every update is written with overloaded
arithmetic so the same step runs as a plain computation or inside a differentiable graph.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, Field

from sciml_priors.components.numkit.tape import TapeNode
from sciml_priors.utilities.exceptions import NonFiniteError

logger = logging.getLogger(__name__)

DerivativeField = Callable[[float, Any], Any]
GradientField = Callable[[Any], Any]
HamiltonianGradients = Callable[[Any, Any], tuple]


@dataclass(frozen=True)
class PhaseState:
    """Canonical coordinates; q and p have shape (..., N)."""

    q: Any
    p: Any


@dataclass(frozen=True)
class ExtendedPhaseState:
    """Coordinates (q, p) with their auxiliary copies (x, y)."""

    q: Any
    p: Any
    x: Any
    y: Any

    @classmethod
    def from_phase(cls, state: PhaseState) -> "ExtendedPhaseState":
        """Starts the auxiliary copies on the original coordinates."""
        return cls(q=state.q, p=state.p, x=state.q, y=state.p)

    def phase(self) -> PhaseState:
        """Drops the auxiliary copies."""
        return PhaseState(q=self.q, p=self.p)


@dataclass(frozen=True)
class SplitCoefficients:
    """Position fractions c and momentum fractions d of a four-stage splitting step."""

    c: tuple
    d: tuple

    @classmethod
    def forest_ruth(cls) -> "SplitCoefficients":
        """Closed-form coefficients of the fourth-order Forest-Ruth composition."""
        cube_root = 2.0 ** (1.0 / 3.0)
        denominator = 2.0 - cube_root
        c_outer = 1.0 / (2.0 * denominator)
        c_inner = (1.0 - cube_root) / (2.0 * denominator)
        d_outer = 1.0 / denominator
        d_inner = -cube_root / denominator
        return cls(c=(c_outer, c_inner, c_inner, c_outer), d=(d_outer, d_inner, d_outer, 0.0))


FOREST_RUTH = SplitCoefficients.forest_ruth()


class TaoConfig(BaseModel):
    """Binding coefficient and step of the extended phase space integrator."""

    omega: float = Field(default=10.0, gt=0.0)
    dt: float = Field(ge=0.0)


def _check_finite(value: Any, where: str) -> None:
    array = value.value if isinstance(value, TapeNode) else value
    if array is None:
        return
    if not np.all(np.isfinite(array)):
        logger.error("Non-finite value in %s", where)
        raise NonFiniteError(f"{where}: non-finite value")


def _require_positive(dt: float, where: str) -> None:
    if dt <= 0:
        raise ValueError(f"{where}: step must be positive, got {dt}")


def euler_step(field: DerivativeField, y: Any, dt: float, t: float = 0.0) -> Any:
    """y + f(t, y)·dt."""
    _require_positive(dt, "euler_step")
    derivative = field(t, y)
    _check_finite(derivative, "euler_step derivative")
    return y + derivative * dt


def rk4_step(field: DerivativeField, y: Any, dt: float, t: float = 0.0) -> Any:
    """Classic four-stage Runge-Kutta step."""
    _require_positive(dt, "rk4_step")
    half = 0.5 * dt
    k1 = field(t, y)
    _check_finite(k1, "rk4_step stage 1")
    k2 = field(t + half, y + k1 * half)
    _check_finite(k2, "rk4_step stage 2")
    k3 = field(t + half, y + k2 * half)
    _check_finite(k3, "rk4_step stage 3")
    k4 = field(t + dt, y + k3 * dt)
    _check_finite(k4, "rk4_step stage 4")
    return y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)


def forest_ruth_step(
    kinetic_field: GradientField,
    potential_field: GradientField,
    state: PhaseState,
    dt: float,
    coefficients: SplitCoefficients = FOREST_RUTH,
) -> PhaseState:
    """
    Fourth-order splitting step for dq/dt = T_p(p), dp/dt = -V_q(q).

    Each of the four stages moves q by c_j·T_p(p)·dt and then p by -d_j·V_q(q)·dt. The
    composition is palindromic, so a step with -dt undoes a step with dt. Negative dt is allowed.

    Args:
        kinetic_field: T_p, the stand-in for dT/dp.
        potential_field: V_q, the stand-in for dV/dq.
        state: Current state.
        dt: Step.
        coefficients: Splitting fractions.

    Returns:
        The advanced state.
    """
    q, p = state.q, state.p
    for c_j, d_j in zip(coefficients.c, coefficients.d):
        if c_j != 0.0:
            q = q + kinetic_field(p) * (c_j * dt)
            _check_finite(q, "forest_ruth_step position update")
        if d_j != 0.0:
            p = p - potential_field(q) * (d_j * dt)
            _check_finite(p, "forest_ruth_step momentum update")
    return PhaseState(q=q, p=p)


def tao_flow_a(grads: HamiltonianGradients, state: ExtendedPhaseState, delta: float):
    """Time-delta flow of H(q, y): moves p and x."""
    dh_dq, dh_dp = grads(state.q, state.y)
    return ExtendedPhaseState(
        q=state.q, p=state.p - dh_dq * delta, x=state.x + dh_dp * delta, y=state.y
    )


def tao_flow_b(grads: HamiltonianGradients, state: ExtendedPhaseState, delta: float):
    """Time-delta flow of H(x, p): moves q and y."""
    dh_dq, dh_dp = grads(state.x, state.p)
    return ExtendedPhaseState(
        q=state.q + dh_dp * delta, p=state.p, x=state.x, y=state.y - dh_dq * delta
    )


def tao_flow_c(state: ExtendedPhaseState, delta: float, omega: float):
    """Time-delta flow of the binding term omega·½(|q − x|² + |p − y|²), an exact rotation."""
    angle = 2.0 * omega * delta
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    sum_q, sum_p = state.q + state.x, state.p + state.y
    diff_q, diff_p = state.q - state.x, state.p - state.y
    rot_q = diff_q * cos_a + diff_p * sin_a
    rot_p = diff_p * cos_a - diff_q * sin_a
    return ExtendedPhaseState(
        q=(sum_q + rot_q) * 0.5,
        p=(sum_p + rot_p) * 0.5,
        x=(sum_q - rot_q) * 0.5,
        y=(sum_p - rot_p) * 0.5,
    )


def tao_strang_step(
    grads: HamiltonianGradients, state: ExtendedPhaseState, config: TaoConfig
) -> ExtendedPhaseState:
    """
    Second-order symmetric composition A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2) for an arbitrary,
    possibly nonseparable, Hamiltonian.

    Args:
        grads: Callable (q, p) -> (dH/dq, dH/dp).
        state: Current extended state.
        config: Binding coefficient and step.

    Returns:
        The advanced extended state.
    """
    half = 0.5 * config.dt
    state = tao_flow_a(grads, state, half)
    state = tao_flow_b(grads, state, half)
    state = tao_flow_c(state, config.dt, config.omega)
    state = tao_flow_b(grads, state, half)
    state = tao_flow_a(grads, state, half)
    for component in (state.q, state.p, state.x, state.y):
        _check_finite(component, "tao_strang_step")
    return state
