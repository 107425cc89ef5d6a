"""Classical Roe solvers for linear advection and the ideal-gas Euler equations."""
import logging

import numpy as np

from sciml_priors.components.hyperbolic.gas import EulerGasParams, euler_flux, to_primitive
from sciml_priors.components.hyperbolic.grid import (
    GridField1D,
    interface_indices,
    neighbor_indices,
)
from sciml_priors.components.numkit.tape import shape_of, take
from sciml_priors.utilities.exceptions import CflViolationError

logger = logging.getLogger(__name__)


def _check_cfl(courant: float, where: str) -> None:
    if courant > 1.0 + 1e-12:
        logger.error("%s: Courant number %.6g exceeds 1", where, courant)
        raise CflViolationError(f"{where}: Courant number {courant:.6g} exceeds 1")


def conservative_update(field: GridField1D, interface_flux, dt: float) -> GridField1D:
    """
    u_j − (dt/dx)(G_{j+1/2} − G_{j−1/2}) from fluxes on the N_g + 1 interfaces.

    Works on arrays and on TapeNode fluxes alike.
    """
    nodes = field.nodes
    ratio = dt / field.dx
    right = take(interface_flux, np.arange(1, nodes + 1), axis=-2)
    left = take(interface_flux, np.arange(nodes), axis=-2)
    return field.advanced(field.u - (right - left) * ratio, dt)


def roe_step_linear(field: GridField1D, a: float, dt: float) -> GridField1D:
    """
    One Roe step for u_t + a u_x = 0, applied to every component:

        u_j − λ [a⁻ (u_{j+1} − u_j) + a⁺ (u_j − u_{j−1})],  a± = (a ± |a|)/2,  λ = dt/dx.

    Raises:
        CflViolationError: |a| dt/dx > 1.
    """
    ratio = dt / field.dx
    _check_cfl(abs(a) * ratio, "roe_step_linear")
    u = field.values()
    left, right = neighbor_indices(field.nodes, field.bc)
    a_plus, a_minus = 0.5 * (a + abs(a)), 0.5 * (a - abs(a))
    u_left, u_right = np.take(u, left, axis=-2), np.take(u, right, axis=-2)
    updated = u - ratio * (a_minus * (u_right - u) + a_plus * (u - u_left))
    return field.advanced(updated, dt)


def roe_average(u_left: np.ndarray, u_right: np.ndarray, gas: EulerGasParams) -> tuple:
    """Square-root-of-density averages (v̂, Ĥ, ĉ) across an interface."""
    rho_l, v_l, p_l = to_primitive(u_left, gas)
    rho_r, v_r, p_r = to_primitive(u_right, gas)
    weight_l, weight_r = np.sqrt(rho_l), np.sqrt(rho_r)
    enthalpy_l = (u_left[..., 2] + p_l) / rho_l
    enthalpy_r = (u_right[..., 2] + p_r) / rho_r
    total = weight_l + weight_r
    velocity = (weight_l * v_l + weight_r * v_r) / total
    enthalpy = (weight_l * enthalpy_l + weight_r * enthalpy_r) / total
    sound = np.sqrt((gas.gamma - 1.0) * (enthalpy - 0.5 * velocity**2))
    return velocity, enthalpy, sound


def roe_flux_euler(u_left: np.ndarray, u_right: np.ndarray, gas: EulerGasParams) -> np.ndarray:
    """
    Roe interface flux ½(F_L + F_R) − ½ Σ_k |λ_k| α_k r_k over the eigen-triple (v̂−ĉ, v̂, v̂+ĉ).
    """
    velocity, enthalpy, sound = roe_average(u_left, u_right, gas)
    jump = u_right - u_left
    alpha_2 = (gas.gamma - 1.0) / sound**2 * (
        jump[..., 0] * (enthalpy - velocity**2) + velocity * jump[..., 1] - jump[..., 2]
    )
    alpha_1 = (jump[..., 0] * (velocity + sound) - jump[..., 1] - sound * alpha_2) / (2.0 * sound)
    alpha_3 = jump[..., 0] - alpha_1 - alpha_2

    ones = np.ones_like(velocity)
    waves = (
        (velocity - sound, alpha_1, (ones, velocity - sound, enthalpy - velocity * sound)),
        (velocity, alpha_2, (ones, velocity, 0.5 * velocity**2)),
        (velocity + sound, alpha_3, (ones, velocity + sound, enthalpy + velocity * sound)),
    )
    dissipation = np.zeros_like(u_left)
    for speed, strength, eigenvector in waves:
        dissipation += (np.abs(speed) * strength)[..., None] * np.stack(eigenvector, axis=-1)
    return 0.5 * (euler_flux(u_left, gas) + euler_flux(u_right, gas)) - 0.5 * dissipation


def max_wave_speed(u: np.ndarray, gas: EulerGasParams) -> float:
    """max(|v| + c) over the field."""
    rho, v, p = to_primitive(u, gas)
    return float(np.max(np.abs(v) + np.sqrt(gas.gamma * p / rho)))


def roe_step_euler(field: GridField1D, gas: EulerGasParams, dt: float) -> GridField1D:
    """
    One conservative Roe step of the Euler equations, field components (ρ, ρv, e).

    Raises:
        PhysicalStateError: Density or pressure is not positive in some cell.
        CflViolationError: max(|v| + c) dt/dx > 1.
    """
    u = field.values()
    if shape_of(u)[-1] != 3:
        raise ValueError(f"roe_step_euler: expected 3 components, got {shape_of(u)[-1]}")
    _check_cfl(max_wave_speed(u, gas) * dt / field.dx, "roe_step_euler")
    left, right = interface_indices(field.nodes, field.bc)
    flux = roe_flux_euler(np.take(u, left, axis=-2), np.take(u, right, axis=-2), gas)
    return conservative_update(field, flux, dt)
