"""
Rollout evaluation of trained models and classical baselines against the analytic references.

Each sample layout has its own evaluation:

  phase   test trajectories vs a fine-step reference; ε_p per step, energy drift
  field   snapshots vs the analytic solution; L1, L2 and max errors
  vortex  particle tracks vs the point-vortex reference; position error and ε_u on a sampling grid

An evaluation writes its CSV files into a directory and returns a flat metric dictionary that
the acceptance check reads.
"""
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sciml_priors.components.hamiltonian.analytic import AnalyticSystem, SystemKind
from sciml_priors.components.hyperbolic.exact import (
    SOD_LEFT,
    SOD_RIGHT,
    advection_exact,
    random_gaussian_pulse,
    riemann_field,
)
from sciml_priors.components.hyperbolic.gas import EulerGasParams
from sciml_priors.components.hyperbolic.grid import (
    BoundaryCondition,
    GridField1D,
    field_errors,
    write_field_csv,
)
from sciml_priors.components.hyperbolic.roe import (
    max_wave_speed,
    roe_step_euler,
    roe_step_linear,
)
from sciml_priors.components.hyperbolic.roenet import roenet_rollout
from sciml_priors.components.integrate.rollout import step_count, write_trajectory_csv
from sciml_priors.components.train.datasets import (
    TEST_COUNTER_OFFSET,
    draw_phase_point,
    external_drift,
    field_grid,
    phase_system,
    random_vortex_system,
    reference_flow,
)
from sciml_priors.components.train.metrics import metric_eps_p, metric_eps_u_series
from sciml_priors.components.train.models import (
    PhaseSurrogate,
    RoeNetSurrogate,
    Surrogate,
    VortexDynamics,
)
from sciml_priors.components.vortex.detection import local_vorticity
from sciml_priors.components.vortex.dynamics import nvm_step, periodic_difference
from sciml_priors.components.vortex.system import (
    BOX_SIZE,
    VortexSystem,
    VortexTrajectory,
    lvm_step,
    reference_trajectory,
    velocity_at_points,
    write_particle_csv,
)
from sciml_priors.configuration.presets import Baseline, DataKind, ExperimentPreset
from sciml_priors.utilities.exceptions import UsageError, ValidationError
from sciml_priors.utilities.helperfunctions import sample_rng, write_csv

logger = logging.getLogger(__name__)

# Courant number the classical Roe baseline keeps by sub-stepping
BASELINE_COURANT = 0.5

EVAL_FILE = "eval.csv"

# Advances a grid field by a time span
FieldAdvance = Callable[[GridField1D, float], GridField1D]
# One step of a particle system
VortexStep = Callable[[VortexSystem, float], VortexSystem]


@dataclass
class Evaluation:
    """
    Metrics of one evaluation and the per-time series written to eval.csv.

    Attributes:
        metrics: Named scalar metrics.
        header: Column names of eval.csv.
        rows: Rows of eval.csv.
    """

    metrics: dict[str, float] = field(default_factory=dict)
    header: tuple = ()
    rows: list = field(default_factory=list)

    def write(self, directory: pathlib.Path) -> None:
        """Writes eval.csv into directory."""
        write_csv(directory / EVAL_FILE, self.header, self.rows)


def _check_horizon(horizon: float) -> None:
    if not horizon > 0.0:
        logger.error("Evaluation horizon %s is not positive", horizon)
        raise UsageError(f"Evaluation horizon must be positive, got {horizon}")


# ---- phase space


def phase_evaluation_system(preset: ExperimentPreset) -> AnalyticSystem:
    """
    The reference system of a phase evaluation. Point vortices take their circulations from
    evaluation.initial_strengths when given, which may name more particles than the training
    data.
    """
    system = phase_system(preset.data)
    strengths = preset.evaluation.initial_strengths
    if system.kind is SystemKind.POINT_VORTEX and strengths:
        return AnalyticSystem(SystemKind.POINT_VORTEX, strengths=tuple(strengths))
    return system


def phase_test_points(
    preset: ExperimentPreset, system: AnalyticSystem, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Test initial conditions, shape (samples, N) each: the preset's fixed state or vortex
    configuration, or evaluation.test_samples draws from generators disjoint from the training
    draws.
    """
    positions = preset.evaluation.initial_positions
    if system.kind is SystemKind.POINT_VORTEX and positions:
        if len(positions) != len(system.gamma()):
            logger.error(
                "%s initial positions for %s strengths", len(positions), len(system.gamma())
            )
            raise ValidationError("initial_positions and initial_strengths differ in length")
        xy = np.asarray(positions, dtype=np.float64)
        return xy[None, :, 0].copy(), xy[None, :, 1].copy()
    dimension = preset.data.particles
    fixed = preset.evaluation.initial_state
    if fixed:
        if len(fixed) != 2 * dimension:
            raise ValidationError(
                f"initial_state needs {2 * dimension} values for {dimension} degrees of freedom"
            )
        state = np.asarray(fixed, dtype=np.float64)
        return state[None, :dimension], state[None, dimension:]
    points = [
        draw_phase_point(sample_rng(seed, TEST_COUNTER_OFFSET + index), preset.data, system)
        for index in range(preset.evaluation.test_samples)
    ]
    return np.stack([q for q, _ in points]), np.stack([p for _, p in points])


def phase_reference(
    system: AnalyticSystem, q0: np.ndarray, p0: np.ndarray, steps: int, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Reference states at every multiple of dt, shape (steps + 1, samples, N)."""
    q_path, p_path = [q0], [p0]
    q, p = q0, p0
    for _ in range(steps):
        q, p = reference_flow(system, q, p, dt)
        q_path.append(q)
        p_path.append(p)
    return np.stack(q_path), np.stack(p_path)


def evaluate_phase(
    surrogate: PhaseSurrogate,
    params: dict[str, np.ndarray],
    preset: ExperimentPreset,
    seed: int,
    directory: pathlib.Path,
) -> Evaluation:
    """
    Rolls the model out from the test points over the evaluation horizon.

    Writes eval.csv (`t,eps_p`) and trajectory.csv (first test sample, with the true energy
    of the predicted states).

    Metrics:
        eps_p_mean, eps_p_final: ε_p over the horizon and at its end.
        energy_drift_max: max |H(t) − H(0)| of the predicted states.
        max_deviation: max |‖z(t)‖ − ‖z(0)‖|, the departure from the circular orbits of the
            spring; only for the spring.
    """
    horizon = preset.evaluation.horizon
    _check_horizon(horizon)
    system = phase_evaluation_system(preset)
    q0, p0 = phase_test_points(preset, system, seed)
    extra = {}
    if system.kind is SystemKind.POINT_VORTEX:
        extra["gamma"] = np.tile(system.gamma(), (q0.shape[0], 1))

    times, q, p = surrogate.predict(params, q0, p0, horizon, extra)
    q_ref, p_ref = phase_reference(system, q0, p0, len(times) - 1, surrogate.dt)
    predicted = np.concatenate([q, p], axis=-1).transpose(1, 0, 2)
    reference = np.concatenate([q_ref, p_ref], axis=-1).transpose(1, 0, 2)
    eps = metric_eps_p(predicted, reference)

    energy = system.energy(q, p)
    metrics = {
        "eps_p_mean": eps.mean,
        "eps_p_final": float(eps.per_step[-1]),
        "energy_drift_max": float(np.max(np.abs(energy - energy[0]))),
    }
    if system.kind is SystemKind.SPRING:
        radius = np.linalg.norm(predicted, axis=-1)
        metrics["max_deviation"] = float(np.max(np.abs(radius - radius[:, :1])))

    write_trajectory_csv(directory / "trajectory.csv", times, q[:, 0], p[:, 0], energy[:, 0])
    logger.info("Phase evaluation over %s steps: %s", len(times) - 1, metrics)
    return Evaluation(
        metrics=metrics,
        header=("t", "eps_p"),
        rows=[(float(t), float(e)) for t, e in zip(times, eps.per_step)],
    )


# ---- grid fields


@dataclass(frozen=True)
class FieldCase:
    """Batched initial fields with their analytic solution u(t), both (samples, N_g, N_c)."""

    initial: np.ndarray
    exact: Callable[[float], np.ndarray]


def field_test_case(preset: ExperimentPreset, seed: int) -> FieldCase:
    """
    The canonical Sod shock tube for Euler presets; evaluation.test_samples random Gaussian
    pulses for linear advection.
    """
    data = preset.data
    x = field_grid(data)
    if data.system == "sod":
        gas = EulerGasParams(gamma=data.gas_gamma)
        interface = 0.5 * (data.domain[0] + data.domain[1])
        return FieldCase(
            initial=riemann_field(x, 0.0, SOD_LEFT, SOD_RIGHT, gas, interface)[None],
            exact=lambda t: riemann_field(x, t, SOD_LEFT, SOD_RIGHT, gas, interface)[None],
        )
    domain = tuple(data.domain)
    pulses = [
        random_gaussian_pulse(sample_rng(seed, TEST_COUNTER_OFFSET + index), domain)
        for index in range(preset.evaluation.test_samples)
    ]

    def exact(t: float) -> np.ndarray:
        return np.stack(
            [advection_exact(x, t, data.advection_speed, pulse, domain) for pulse in pulses]
        )[..., None]

    return FieldCase(initial=exact(0.0), exact=exact)


def roenet_advance(surrogate: RoeNetSurrogate, params: dict[str, np.ndarray]) -> FieldAdvance:
    """Advances a field with the trained RoeNet at its training step."""
    model = surrogate.model
    return lambda state, span: roenet_rollout(model, params, state, span, surrogate.dt)


def roe_advance(preset: ExperimentPreset) -> FieldAdvance:
    """
    Advances a field with the classical Roe solver. Every step of size evaluation_dt is split
    into sub-steps with a Courant number of at most BASELINE_COURANT.
    """
    data = preset.data
    dt = preset.evaluation_dt
    gas = EulerGasParams(gamma=data.gas_gamma)

    def step(state: GridField1D) -> GridField1D:
        if data.system == "1c-linear":
            speed = abs(data.advection_speed)
        else:
            speed = max_wave_speed(state.values(), gas)
        substeps = max(1, math.ceil(speed * dt / state.dx / BASELINE_COURANT - 1e-12))
        for _ in range(substeps):
            if data.system == "1c-linear":
                state = roe_step_linear(state, data.advection_speed, dt / substeps)
            else:
                state = roe_step_euler(state, gas, dt / substeps)
        return state

    def advance(state: GridField1D, span: float) -> GridField1D:
        for _ in range(step_count(0.0, span, dt)):
            state = step(state)
        return state

    return advance


def evaluate_field(
    advance: FieldAdvance, preset: ExperimentPreset, seed: int, directory: pathlib.Path
) -> Evaluation:
    """
    Advances the test fields from snapshot to snapshot and compares them with the analytic
    solution.

    Writes eval.csv (`t,l1,l2,max`, sample means) and field.csv / exact.csv holding the first
    test field at every snapshot.

    Metrics:
        l1_error_final, l2_error_final, max_error_final: errors at the last snapshot.
        density_l1_final: L1 error of the first component (density for Euler presets).
    """
    data, evaluation = preset.data, preset.evaluation
    _check_horizon(evaluation.horizon)
    snapshots = sorted(set(evaluation.snapshot_times) | {0.0, evaluation.horizon})
    if snapshots[-1] > evaluation.horizon:
        raise ValidationError(f"Snapshot {snapshots[-1]} lies beyond the horizon")
    bc = BoundaryCondition.PERIODIC if data.system == "1c-linear" else BoundaryCondition.REPLICATE
    case = field_test_case(preset, seed)
    state = GridField1D(u=case.initial, dx=data.dx, bc=bc, x0=data.domain[0])

    rows, predicted_frames, exact_frames = [], [], []
    errors = {}
    density = math.nan
    for time in snapshots:
        if time > state.t:
            state = advance(state, time - state.t)
            state = GridField1D(u=state.values(), dx=state.dx, bc=bc, t=time, x0=state.x0)
        values, exact = state.values(), case.exact(time)
        per_sample = [field_errors(values[i], exact[i], data.dx) for i in range(len(values))]
        errors = {key: float(np.mean([e[key] for e in per_sample])) for key in per_sample[0]}
        density = float(
            np.mean(
                [
                    field_errors(values[i, :, 0], exact[i, :, 0], data.dx)["l1"]
                    for i in range(len(values))
                ]
            )
        )
        rows.append((float(time), errors["l1"], errors["l2"], errors["max"]))
        predicted_frames.append(GridField1D(u=values[0], dx=data.dx, bc=bc, t=time, x0=state.x0))
        exact_frames.append(GridField1D(u=exact[0], dx=data.dx, bc=bc, t=time, x0=state.x0))

    write_field_csv(directory / "field.csv", predicted_frames)
    write_field_csv(directory / "exact.csv", exact_frames)
    metrics = {
        "l1_error_final": errors["l1"],
        "l2_error_final": errors["l2"],
        "max_error_final": errors["max"],
        "density_l1_final": density,
    }
    logger.info("Field evaluation at t=%s: %s", snapshots[-1], metrics)
    return Evaluation(metrics=metrics, header=("t", "l1", "l2", "max"), rows=rows)


# ---- vortex particles


def vortex_test_systems(preset: ExperimentPreset, seed: int, reg: float) -> list[VortexSystem]:
    """The preset's fixed configuration, or evaluation.test_samples random ones."""
    evaluation = preset.evaluation
    if evaluation.initial_positions:
        if len(evaluation.initial_strengths) != len(evaluation.initial_positions):
            raise ValidationError("initial_positions and initial_strengths differ in length")
        return [
            VortexSystem(
                np.asarray(evaluation.initial_positions, dtype=np.float64),
                np.asarray(evaluation.initial_strengths, dtype=np.float64),
                reg=reg,
            )
        ]
    return [
        random_vortex_system(sample_rng(seed, TEST_COUNTER_OFFSET + index), preset.data, reg)
        for index in range(evaluation.test_samples)
    ]


def dynamics_step(surrogate: VortexDynamics, params: dict[str, np.ndarray]) -> VortexStep:
    """One step of the trained dynamics network, re-sampling the local vorticity first."""
    network = surrogate.network
    return lambda system, dt: nvm_step(network, params, system, local_vorticity(system), dt)


def lvm_baseline_step(system: VortexSystem, dt: float) -> VortexSystem:
    """One Biot-Savart step without any learned correction."""
    return lvm_step(system, dt)


def sampling_grid(resolution: int, size: float = BOX_SIZE) -> np.ndarray:
    """Cell centres of a resolution² sampling grid over the box, shape (resolution², 2)."""
    axis = (np.arange(resolution) + 0.5) * size / resolution
    x_grid, y_grid = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([x_grid.ravel(), y_grid.ravel()], axis=-1)


def evaluate_vortex(
    step: VortexStep,
    preset: ExperimentPreset,
    seed: int,
    directory: pathlib.Path,
    reg: float,
) -> Evaluation:
    """
    Steps every test system over the horizon and compares it with the fine-step reference
    including the preset's background drift.

    Writes eval.csv (`t,eps_u`, ε_u of the induced velocity on the sampling grid, averaged over
    test systems), positions.csv (`t,position_error`) and particles.csv (first test system).

    Metrics:
        position_error_max, position_error_final: mean periodic particle distance to the
            reference, maximum over time and at the end.
        eps_u_mean, eps_u_final: ε_u over time and at the end.
    """
    evaluation = preset.evaluation
    _check_horizon(evaluation.horizon)
    dt = preset.evaluation_dt
    steps = step_count(0.0, evaluation.horizon, dt)
    times = dt * np.arange(steps + 1)
    sample_points = sampling_grid(evaluation.grid_resolution)
    drift = external_drift(preset.data)

    position_errors, eps_u = [], []
    first_track: Optional[VortexTrajectory] = None
    for system in vortex_test_systems(preset, seed, reg):
        reference = reference_trajectory(
            system, evaluation.horizon, fine_dt=preset.data.fine_dt, record_dt=dt, external=drift
        )
        states = [system]
        for _ in range(steps):
            states.append(step(states[-1], dt))
        predicted = [np.asarray(state.positions, dtype=np.float64) for state in states]
        distance = [
            float(np.mean(np.linalg.norm(periodic_difference(a, b, BOX_SIZE), axis=-1)))
            for a, b in zip(predicted, reference.positions)
        ]
        position_errors.append(distance)
        eps_u.append(
            metric_eps_u_series(
                [velocity_at_points(system.moved(x), sample_points) for x in predicted],
                [velocity_at_points(system.moved(x), sample_points) for x in reference.positions],
            )
        )
        if first_track is None:
            first_track = VortexTrajectory(
                gamma=np.asarray(system.gamma), times=list(times), positions=predicted
            )

    position_error = np.mean(np.asarray(position_errors), axis=0)
    eps_u_mean = np.mean(np.asarray(eps_u), axis=0)
    write_particle_csv(directory / "particles.csv", first_track)
    write_csv(
        directory / "positions.csv",
        ("t", "position_error"),
        [(float(t), float(e)) for t, e in zip(times, position_error)],
    )
    metrics = {
        "position_error_max": float(np.max(position_error)),
        "position_error_final": float(position_error[-1]),
        "eps_u_mean": float(np.mean(eps_u_mean)),
        "eps_u_final": float(eps_u_mean[-1]),
    }
    logger.info("Vortex evaluation over %s steps: %s", steps, metrics)
    return Evaluation(
        metrics=metrics,
        header=("t", "eps_u"),
        rows=[(float(t), float(e)) for t, e in zip(times, eps_u_mean)],
    )


# ---- dispatch


def evaluate_model(
    surrogate: Surrogate,
    params: dict[str, np.ndarray],
    preset: ExperimentPreset,
    seed: int,
    directory: pathlib.Path,
) -> Evaluation:
    """Evaluates a trained model of any family and writes eval.csv."""
    if surrogate.data_kind is DataKind.PHASE:
        result = evaluate_phase(surrogate, params, preset, seed, directory)
    elif surrogate.data_kind is DataKind.FIELD:
        result = evaluate_field(roenet_advance(surrogate, params), preset, seed, directory)
    else:
        result = evaluate_vortex(
            dynamics_step(surrogate, params), preset, seed, directory, surrogate.reg
        )
    result.write(directory)
    return result


def evaluate_classical(
    baseline: Baseline, preset: ExperimentPreset, seed: int, directory: pathlib.Path
) -> Evaluation:
    """
    Evaluates a classical solver baseline on the preset's test cases and writes eval.csv.

    Raises:
        ValidationError: The baseline is a trained family or does not fit the preset.
    """
    if baseline is Baseline.ROE and preset.data_kind is DataKind.FIELD:
        result = evaluate_field(roe_advance(preset), preset, seed, directory)
    elif baseline is Baseline.LVM and preset.data_kind is DataKind.VORTEX:
        result = evaluate_vortex(lvm_baseline_step, preset, seed, directory, preset.model.reg)
    else:
        logger.error("Baseline %s does not apply to preset %s", baseline.value, preset.name)
        raise ValidationError(
            f"Baseline '{baseline.value}' does not apply to preset '{preset.name}'"
        )
    result.write(directory)
    return result
