"""Trajectory rollout, convergence-order estimation, symplecticity checks and trajectory export."""
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from sciml_priors.components.integrate.steppers import ExtendedPhaseState, PhaseState
from sciml_priors.components.numkit.gradcheck import finite_difference_jacobian
from sciml_priors.components.numkit.tape import value_of
from sciml_priors.utilities.helperfunctions import write_csv

logger = logging.getLogger(__name__)

Stepper = Callable[[Any, float], Any]

# Absorbs round-off in (t - t0)/dt, e.g. 0.06/0.001.
_STEP_COUNT_SLACK = 1e-9


@dataclass
class Trajectory:
    """Every state of a rollout with its time."""

    times: list[float] = field(default_factory=list)
    states: list[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> Any:
        """The last state."""
        return self.states[-1]


def step_count(t0: float, t: float, dt: float) -> int:
    """floor((t - t0)/dt)."""
    if dt <= 0:
        raise ValueError(f"Step must be positive, got {dt}")
    if t < t0:
        raise ValueError(f"End time {t} precedes start time {t0}")
    return int(math.floor((t - t0) / dt + _STEP_COUNT_SLACK))


def rollout(stepper: Stepper, initial: Any, t0: float, t: float, dt: float) -> Trajectory:
    """
    Applies stepper floor((t - t0)/dt) times.

    Args:
        stepper: Callable (state, dt) -> state.
        initial: State at t0.
        t0: Start time.
        t: End time.
        dt: Step.

    Returns:
        Trajectory with n + 1 states including the initial one.
    """
    count = step_count(t0, t, dt)
    trajectory = Trajectory(times=[t0], states=[initial])
    state = initial
    for index in range(1, count + 1):
        state = stepper(state, dt)
        trajectory.times.append(t0 + index * dt)
        trajectory.states.append(state)
    logger.debug("Rolled out %s steps of size %s from t=%s", count, dt, t0)
    return trajectory


def flatten_state(state: Any) -> np.ndarray:
    """Concatenates the canonical coordinates of a state (auxiliary copies excluded)."""
    if isinstance(state, (PhaseState, ExtendedPhaseState)):
        return np.concatenate(
            [np.ravel(value_of(state.q)), np.ravel(value_of(state.p))]
        )
    return np.ravel(value_of(state))


def stack_phase(trajectory: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Stacks q and p over time into arrays of shape (n + 1, ...)."""
    q = np.stack([value_of(state.q) for state in trajectory.states])
    p = np.stack([value_of(state.p) for state in trajectory.states])
    return q, p


@dataclass
class OrderEstimate:
    """Least-squares slope of log error against log step."""

    slope: Optional[float]
    steps: list[float]
    errors: list[float]

    @property
    def exact(self) -> bool:
        """True when the scheme reproduced the solution to round-off on every step size."""
        return self.slope is None


def estimate_order(
    stepper: Stepper,
    initial: Any,
    exact_solution: Callable[[float], Any],
    t_end: float,
    dt_ladder: Sequence[float],
    exact_tolerance: float = 1e-14,
) -> OrderEstimate:
    """
    Measures the global convergence order of a stepper against an analytic solution.

    Args:
        stepper: Callable (state, dt) -> state.
        initial: State at t = 0.
        exact_solution: Analytic state at a given time.
        t_end: Integration horizon; each dt should divide it.
        dt_ladder: At least four step sizes forming a geometric sequence.
        exact_tolerance: Errors below this are treated as zero.

    Returns:
        OrderEstimate; slope is None when every error vanishes.

    Raises:
        ValueError: Fewer than four steps or a ladder that is not geometric.
    """
    steps = [float(dt) for dt in dt_ladder]
    if len(steps) < 4:
        raise ValueError(f"Need at least 4 step sizes, got {len(steps)}")
    ratios = np.array(steps[1:]) / np.array(steps[:-1])
    if not np.allclose(ratios, ratios[0], rtol=1e-6, atol=0.0):
        raise ValueError(f"Step sizes {steps} do not form a geometric ladder")

    reference = flatten_state(exact_solution(t_end))
    errors = []
    for dt in steps:
        final = rollout(stepper, initial, 0.0, t_end, dt).final
        errors.append(float(np.linalg.norm(flatten_state(final) - reference)))

    if all(error <= exact_tolerance for error in errors):
        logger.info("Scheme is exact on this problem; no order reported")
        return OrderEstimate(slope=None, steps=steps, errors=errors)

    slope = float(np.polyfit(np.log(steps), np.log(np.maximum(errors, 1e-300)), 1)[0])
    logger.info("Estimated convergence order %.3f from errors %s", slope, errors)
    return OrderEstimate(slope=slope, steps=steps, errors=errors)


def canonical_form(dimension: int, blocks: int = 1) -> np.ndarray:
    """
    Matrix of the symplectic form for coordinates laid out as blocks of (q, p) pairs,
    each q and p of length `dimension`: [[0, I], [-I, 0]] repeated along the diagonal.
    """
    identity = np.eye(dimension)
    zero = np.zeros((dimension, dimension))
    block = np.block([[zero, identity], [-identity, zero]])
    return np.kron(np.eye(blocks), block)


def symplectic_defect(
    step_map: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    blocks: int = 1,
    h: float = 1e-6,
) -> float:
    """
    max |JᵀΩJ − Ω| for the finite-difference Jacobian J of a map of flat coordinates.

    Args:
        step_map: Map of a flat vector laid out as blocks of (q, p).
        z: Point of evaluation.
        blocks: Number of (q, p) blocks, 2 for extended phase space (q, p, x, y).
        h: Finite-difference step.
    """
    point = np.asarray(z, dtype=np.float64).ravel()
    jacobian = finite_difference_jacobian(step_map, point, h)
    omega = canonical_form(point.size // (2 * blocks), blocks)
    return float(np.max(np.abs(jacobian.T @ omega @ jacobian - omega)))


def two_form(u: np.ndarray, v: np.ndarray) -> float:
    """dq∧dp of two flat tangent vectors laid out as (q, p)."""
    half = u.size // 2
    return float(np.dot(u[:half], v[half:]) - np.dot(u[half:], v[:half]))


def parallelogram_areas(
    step_map: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    scale: float = 1e-4,
) -> tuple[float, float]:
    """
    Oriented area of the parallelogram spanned by scale·u and scale·v at z, before and after
    the map.
    """
    z = np.asarray(z, dtype=np.float64)
    base = step_map(z)
    mapped_u = step_map(z + scale * u) - base
    mapped_v = step_map(z + scale * v) - base
    return two_form(scale * u, scale * v), two_form(mapped_u, mapped_v)


def write_trajectory_csv(
    path: pathlib.Path,
    times: Sequence[float],
    q: np.ndarray,
    p: np.ndarray,
    energy: Optional[np.ndarray] = None,
) -> None:
    """
    Writes `t,q_1..q_N,p_1..p_N[,H]`, one row per time.

    Args:
        path: Destination.
        times: Times of the rows.
        q: Positions of shape (len(times), N).
        p: Momenta of shape (len(times), N).
        energy: Optional energies of shape (len(times),).
    """
    q = np.asarray(q).reshape(len(times), -1)
    p = np.asarray(p).reshape(len(times), -1)
    dimension = q.shape[1]
    header = (
        ["t"]
        + [f"q_{i + 1}" for i in range(dimension)]
        + [f"p_{i + 1}" for i in range(dimension)]
    )
    if energy is not None:
        header.append("H")
    rows = []
    for index, time in enumerate(times):
        row = [float(time)] + [float(v) for v in q[index]] + [float(v) for v in p[index]]
        if energy is not None:
            row.append(float(energy[index]))
        rows.append(row)
    write_csv(path, header, rows)
