"""Exact oracles: the Riemann problem of the Euler equations and periodic linear advection."""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from sciml_priors.components.hyperbolic.gas import EulerGasParams, PrimitiveState, to_conserved
from sciml_priors.utilities.exceptions import ConvergenceError, PhysicalStateError

logger = logging.getLogger(__name__)

SOD_LEFT = PrimitiveState(rho=1.0, v=0.0, p=1.0)
SOD_RIGHT = PrimitiveState(rho=0.125, v=0.0, p=0.1)
SOD_INTERFACE = 0.5

NEWTON_MAX_ITERATIONS = 100
NEWTON_TOLERANCE = 1e-14
PRESSURE_FLOOR = 1e-14


def _pressure_function(p: float, state: PrimitiveState, gas: EulerGasParams) -> tuple:
    """Velocity jump across one wave for star pressure p, and its derivative."""
    gamma = gas.gamma
    sound = state.sound_speed(gas)
    if p > state.p:
        a_coef = 2.0 / ((gamma + 1.0) * state.rho)
        b_coef = (gamma - 1.0) / (gamma + 1.0) * state.p
        root = np.sqrt(a_coef / (b_coef + p))
        return (p - state.p) * root, root * (1.0 - 0.5 * (p - state.p) / (b_coef + p))
    ratio = p / state.p
    value = 2.0 * sound / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
    derivative = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (state.rho * sound)
    return value, derivative


def star_state(
    left: PrimitiveState,
    right: PrimitiveState,
    gas: EulerGasParams,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
) -> tuple[float, float]:
    """
    Pressure and velocity of the star region by Newton iteration on the pressure function.

    Raises:
        PhysicalStateError: The data generate vacuum.
        ConvergenceError: Newton did not converge within max_iterations.
    """
    gamma = gas.gamma
    c_left, c_right = left.sound_speed(gas), right.sound_speed(gas)
    if 2.0 * (c_left + c_right) / (gamma - 1.0) <= right.v - left.v:
        raise PhysicalStateError("Riemann data generate vacuum")

    pressure = max(PRESSURE_FLOOR, 0.5 * (left.p + right.p))
    for iteration in range(max_iterations):
        f_left, df_left = _pressure_function(pressure, left, gas)
        f_right, df_right = _pressure_function(pressure, right, gas)
        updated = pressure - (f_left + f_right + right.v - left.v) / (df_left + df_right)
        updated = max(PRESSURE_FLOOR, updated)
        change = abs(updated - pressure) / (0.5 * (updated + pressure))
        pressure = updated
        if change < NEWTON_TOLERANCE:
            f_left, _ = _pressure_function(pressure, left, gas)
            f_right, _ = _pressure_function(pressure, right, gas)
            velocity = 0.5 * (left.v + right.v) + 0.5 * (f_right - f_left)
            logger.debug("Star pressure %s after %s Newton iterations", pressure, iteration + 1)
            return pressure, velocity

    logger.error("Newton iteration for the star pressure did not converge: %s %s", left, right)
    raise ConvergenceError(
        f"Star pressure did not converge in {max_iterations} Newton iterations"
    )


def star_pressure_bisection(
    left: PrimitiveState, right: PrimitiveState, gas: EulerGasParams
) -> float:
    """Star pressure by a bracketing root finder, as an independent cross-check."""

    def residual(p: float) -> float:
        return (
            _pressure_function(p, left, gas)[0]
            + _pressure_function(p, right, gas)[0]
            + right.v
            - left.v
        )

    upper = 10.0 * max(left.p, right.p)
    while residual(upper) < 0.0:
        upper *= 10.0
    return float(brentq(residual, PRESSURE_FLOOR, upper, xtol=1e-15, rtol=1e-15))


def sample_riemann(
    xi: np.ndarray,
    left: PrimitiveState,
    right: PrimitiveState,
    gas: EulerGasParams,
) -> np.ndarray:
    """
    Self-similar solution of the Riemann problem at xi = x/t.

    Returns:
        Conserved (ρ, ρv, e) of shape xi.shape + (3,).
    """
    xi = np.asarray(xi, dtype=np.float64)
    gamma = gas.gamma
    g_ratio = (gamma - 1.0) / (gamma + 1.0)
    g_exp = (gamma - 1.0) / (2.0 * gamma)
    p_star, v_star = star_state(left, right, gas)

    rho = np.empty_like(xi)
    v = np.empty_like(xi)
    p = np.empty_like(xi)

    def fill(mask, rho_value, v_value, p_value):
        rho[mask] = rho_value[mask] if np.ndim(rho_value) else rho_value
        v[mask] = v_value[mask] if np.ndim(v_value) else v_value
        p[mask] = p_value[mask] if np.ndim(p_value) else p_value

    left_side = xi <= v_star
    c_left = left.sound_speed(gas)
    ratio_left = p_star / left.p
    if p_star > left.p:
        shock = left.v - c_left * np.sqrt((gamma + 1.0) / (2.0 * gamma) * ratio_left + g_exp)
        rho_star = left.rho * (ratio_left + g_ratio) / (g_ratio * ratio_left + 1.0)
        fill(left_side & (xi < shock), left.rho, left.v, left.p)
        fill(left_side & (xi >= shock), rho_star, v_star, p_star)
    else:
        head = left.v - c_left
        tail = v_star - c_left * ratio_left**g_exp
        rho_star = left.rho * ratio_left ** (1.0 / gamma)
        bracket = np.maximum(2.0 / (gamma + 1.0) + g_ratio / c_left * (left.v - xi), 0.0)
        fill(left_side & (xi < head), left.rho, left.v, left.p)
        fill(left_side & (xi > tail), rho_star, v_star, p_star)
        fan = left_side & (xi >= head) & (xi <= tail)
        fill(
            fan,
            left.rho * bracket ** (2.0 / (gamma - 1.0)),
            2.0 / (gamma + 1.0) * (c_left + 0.5 * (gamma - 1.0) * left.v + xi),
            left.p * bracket ** (2.0 * gamma / (gamma - 1.0)),
        )

    right_side = ~left_side
    c_right = right.sound_speed(gas)
    ratio_right = p_star / right.p
    if p_star > right.p:
        shock = right.v + c_right * np.sqrt((gamma + 1.0) / (2.0 * gamma) * ratio_right + g_exp)
        rho_star = right.rho * (ratio_right + g_ratio) / (g_ratio * ratio_right + 1.0)
        fill(right_side & (xi > shock), right.rho, right.v, right.p)
        fill(right_side & (xi <= shock), rho_star, v_star, p_star)
    else:
        head = right.v + c_right
        tail = v_star + c_right * ratio_right**g_exp
        rho_star = right.rho * ratio_right ** (1.0 / gamma)
        bracket = np.maximum(2.0 / (gamma + 1.0) - g_ratio / c_right * (right.v - xi), 0.0)
        fill(right_side & (xi > head), right.rho, right.v, right.p)
        fill(right_side & (xi < tail), rho_star, v_star, p_star)
        fan = right_side & (xi >= tail) & (xi <= head)
        fill(
            fan,
            right.rho * bracket ** (2.0 / (gamma - 1.0)),
            2.0 / (gamma + 1.0) * (-c_right + 0.5 * (gamma - 1.0) * right.v + xi),
            right.p * bracket ** (2.0 * gamma / (gamma - 1.0)),
        )

    return to_conserved(rho, v, p, gas)


def exact_riemann_sod(xi: np.ndarray, gas: EulerGasParams = EulerGasParams()) -> np.ndarray:
    """Exact Sod shock-tube solution (ρ, ρv, e) at xi = (x − 0.5)/t."""
    return sample_riemann(xi, SOD_LEFT, SOD_RIGHT, gas)


def riemann_field(
    x: np.ndarray,
    t: float,
    left: PrimitiveState,
    right: PrimitiveState,
    gas: EulerGasParams,
    interface: float = SOD_INTERFACE,
) -> np.ndarray:
    """Conserved field of a Riemann problem at time t on nodes x, shape (len(x), 3)."""
    x = np.asarray(x, dtype=np.float64)
    if t <= 0.0:
        on_left = (x < interface)[:, None]
        return np.where(
            on_left,
            to_conserved(left.rho, left.v, left.p, gas),
            to_conserved(right.rho, right.v, right.p, gas),
        )
    return sample_riemann((x - interface) / t, left, right, gas)


@dataclass(frozen=True)
class GaussianPulse:
    """amplitude · exp(−sharpness · d²), d the periodic distance to center on the domain."""

    amplitude: float = 1.0
    center: float = 0.0
    sharpness: float = 300.0
    domain: tuple = (-0.5, 0.5)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        length = self.domain[1] - self.domain[0]
        distance = np.asarray(x, dtype=np.float64) - self.center
        distance = distance - length * np.round(distance / length)
        return self.amplitude * np.exp(-self.sharpness * distance**2)


def wrap_periodic(x: np.ndarray, domain: tuple) -> np.ndarray:
    """Maps x into [lower, upper)."""
    lower, upper = domain
    return lower + np.mod(np.asarray(x, dtype=np.float64) - lower, upper - lower)


def advection_exact(
    x: np.ndarray,
    t: float,
    a: float,
    initial_profile: Callable[[np.ndarray], np.ndarray],
    domain: tuple = (-0.5, 0.5),
) -> np.ndarray:
    """u0(x − a·t) with periodic wrapping on the domain."""
    return initial_profile(wrap_periodic(np.asarray(x, dtype=np.float64) - a * t, domain))


def random_gaussian_pulse(rng: np.random.Generator, domain: tuple = (-0.5, 0.5)) -> GaussianPulse:
    """A pulse with uniformly drawn centre, sharpness in [100, 500] and amplitude in [0.5, 1.5]."""
    return GaussianPulse(
        amplitude=float(rng.uniform(0.5, 1.5)),
        center=float(rng.uniform(*domain)),
        sharpness=float(rng.uniform(100.0, 500.0)),
        domain=tuple(domain),
    )


def random_riemann_states(rng: np.random.Generator) -> tuple[PrimitiveState, PrimitiveState]:
    """Sod-like states at rest: dense high-pressure gas on the left, light gas on the right."""
    left = PrimitiveState(
        rho=float(rng.uniform(0.5, 1.5)), v=0.0, p=float(rng.uniform(0.5, 1.5))
    )
    right = PrimitiveState(
        rho=float(rng.uniform(0.1, 0.5)), v=0.0, p=float(rng.uniform(0.05, 0.3))
    )
    return left, right
